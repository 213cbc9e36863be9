//! Seeded simulation sweeps and their CSV output.

use std::io::Write;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{par_map, Execution};
use crate::generators::{gen_instance, PredictionModel, WagerModel};
use crate::mechanism::{Configured, Mechanism, MechanismId};
use crate::metrics::{
    accuracy, expected_exchange_rate_auto, individual_risk_auto, AccuracyBins, AccuracyReference, BinStats, Evaluation,
};
use crate::numeric::compensated_sum;
use crate::randomized::{substream, SimRng};
use crate::types::{GameInstance, OutcomeModel};

const STREAM_INSTANCE: u64 = 1;
const STREAM_MECHANISM: u64 = 2;

pub const CSV_NOTE: &str = "# DCA and PCM are not implemented; their columns are omitted";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mechanisms: Vec<MechanismId>,
    pub n_min: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub instances: usize,
    pub pred_model: PredictionModel,
    pub wager_model: WagerModel,
    pub m: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Draws per outcome when a mechanism's support is too large to enumerate.
    pub sample_cap: usize,
    pub accuracy: AccuracyReference,
    pub bins: usize,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn efficiency_default() -> Self {
        Self {
            mechanisms: vec![MechanismId::Wswm, MechanismId::Lws, MechanismId::RpSwme],
            n_min: 2,
            n_max: 50,
            n_step: 2,
            instances: 1000,
            pred_model: PredictionModel::Uniform,
            wager_model: WagerModel::Uniform,
            m: 2,
            seed: None,
            out: None,
            sample_cap: 1000,
            accuracy: AccuracyReference::Realized,
            bins: 10,
            threads: None,
        }
    }

    pub fn variance_default() -> Self {
        Self {
            mechanisms: vec![MechanismId::Lws, MechanismId::RpSwme],
            instances: 10_000,
            ..Self::efficiency_default()
        }
    }

    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidParameter(format!("bad value '{value}' for {what}"));
        let int = |what: &str| value.trim().parse::<usize>().map_err(|_| bad(what));
        match key.trim() {
            "mechanisms" => {
                self.mechanisms = value
                    .split(';')
                    .flat_map(|s| s.split_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
            }
            "n_min" => self.n_min = int("n_min")?,
            "n_max" => self.n_max = int("n_max")?,
            "n_step" => self.n_step = int("n_step")?,
            "instances" => self.instances = int("instances")?,
            "m" => self.m = int("m")?,
            "bins" => self.bins = int("bins")?,
            "sample_cap" => self.sample_cap = int("sample_cap")?,
            "threads" => self.threads = Some(int("threads")?),
            "pred_model" => self.pred_model = value.parse()?,
            "wager_model" => self.wager_model = value.parse()?,
            "seed" => self.seed = Some(value.trim().parse().map_err(|_| bad("seed"))?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "accuracy" => {
                self.accuracy = match value.trim() {
                    "realized" => AccuracyReference::Realized,
                    "happening" => AccuracyReference::Happening,
                    _ => return Err(bad("accuracy")),
                }
            }
            other => return Err(Error::InvalidParameter(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Apply a flat `key=value` file; `#` starts a comment. Mechanism lists
    /// are separated by `;` or whitespace since ids may contain commas.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParameter(m));
        if self.seed.is_none() {
            return fail("a seed is required".into());
        }
        if self.mechanisms.is_empty() {
            return fail("no mechanisms selected".into());
        }
        if self.n_min < 2 {
            return fail(format!("n_min must be at least 2, got {}", self.n_min));
        }
        if self.n_max < self.n_min || self.n_step == 0 {
            return fail(format!(
                "empty range {}..={} step {}",
                self.n_min, self.n_max, self.n_step
            ));
        }
        if self.instances == 0 || self.sample_cap == 0 || self.bins == 0 {
            return fail("instances, sample_cap and bins must be positive".into());
        }
        if self.m < 2 {
            return fail(format!("m must be at least 2, got {}", self.m));
        }
        if self.m > 2 && !matches!(self.pred_model, PredictionModel::Uniform) {
            return fail(format!("{} predictions are binary only", self.pred_model.tag()));
        }
        self.pred_model.validate()?;
        self.wager_model.validate()?;
        self.mechanisms.iter().try_for_each(MechanismId::validate)
    }

    pub fn n_values(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).step_by(self.n_step.max(1)).collect()
    }

    fn seed_value(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidParameter("a seed is required".into()))
    }
}

/// Instance `i` at population `n`, drawn from its own substream.
pub fn sweep_instance(cfg: &ExperimentConfig, n: usize, i: usize) -> Result<(GameInstance, SimRng)> {
    let mut rng = substream(cfg.seed_value()?, &[STREAM_INSTANCE, n as u64, i as u64]);
    let inst = gen_instance(&cfg.pred_model, &cfg.wager_model, n, cfg.m, &mut rng)?;
    Ok((inst, rng))
}

fn mechanism_stream(seed: u64, n: usize, i: usize, k: usize) -> SimRng {
    substream(seed, &[STREAM_MECHANISM, n as u64, i as u64, k as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub mechanism: String,
    pub n: usize,
    pub pred_model: String,
    pub wager_model: String,
    pub avg_risk: f64,
    pub avg_exchange_rate: f64,
    pub evaluation: Evaluation,
}

pub fn run_efficiency_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<EfficiencyRow>> {
    cfg.validate()?;
    let seed = cfg.seed_value()?;
    let mechs: Vec<Configured> = cfg.mechanisms.iter().map(|&id| Configured::brier(id)).collect();
    let mut rows = Vec::new();
    for n in cfg.n_values() {
        let per_instance = par_map(cfg.instances, exec, |i| -> Result<Vec<(f64, f64, Evaluation)>> {
            let (inst, _) = sweep_instance(cfg, n, i)?;
            let q = match &inst.outcome {
                OutcomeModel::Happening(q) => q.clone(),
                OutcomeModel::Realized(_) => inst.outcome_weights(),
            };
            mechs
                .iter()
                .enumerate()
                .map(|(k, mech)| {
                    let mut rng = mechanism_stream(seed, n, i, k);
                    let (risks, e1) = individual_risk_auto(mech, &inst.game, cfg.sample_cap, &mut rng)?;
                    let (rate, e2) = expected_exchange_rate_auto(mech, &inst.game, &q, cfg.sample_cap, &mut rng)?;
                    let risk = compensated_sum(risks.iter().copied()) / risks.len() as f64;
                    let eval = if e1 == Evaluation::Exact { e2 } else { e1 };
                    Ok((risk, rate, eval))
                })
                .collect()
        });
        let per_instance = per_instance.into_iter().collect::<Result<Vec<_>>>()?;
        for (k, mech) in mechs.iter().enumerate() {
            let risk = compensated_sum(per_instance.iter().map(|v| v[k].0)) / cfg.instances as f64;
            let rate = compensated_sum(per_instance.iter().map(|v| v[k].1)) / cfg.instances as f64;
            let evaluation = per_instance
                .iter()
                .map(|v| v[k].2)
                .find(|e| *e != Evaluation::Exact)
                .unwrap_or(Evaluation::Exact);
            rows.push(EfficiencyRow {
                mechanism: mech.name(),
                n,
                pred_model: cfg.pred_model.to_string(),
                wager_model: cfg.wager_model.to_string(),
                avg_risk: risk,
                avg_exchange_rate: rate,
                evaluation,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceRow {
    pub mechanism: String,
    pub n: usize,
    pub bin: usize,
    pub stats: BinStats,
}

/// Realized payoffs binned by accuracy: one sampled outcome and one sampled
/// mechanism draw per instance.
pub fn run_variance_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<VarianceRow>> {
    cfg.validate()?;
    if cfg.m != 2 {
        return Err(Error::InvalidParameter("the variance sweep is binary only".into()));
    }
    let seed = cfg.seed_value()?;
    let mechs: Vec<Configured> = cfg.mechanisms.iter().map(|&id| Configured::brier(id)).collect();
    let mut rows = Vec::new();
    for n in cfg.n_values() {
        let per_instance = par_map(cfg.instances, exec, |i| -> Result<Vec<Vec<(f64, f64)>>> {
            let (inst, mut rng) = sweep_instance(cfg, n, i)?;
            let q1 = inst.outcome_weights()[1];
            let x = usize::from(rng.random::<f64>() < q1);
            let reference = match cfg.accuracy {
                AccuracyReference::Realized => x as f64,
                AccuracyReference::Happening => q1,
            };
            let g = &inst.game;
            mechs
                .iter()
                .enumerate()
                .map(|(k, mech)| {
                    let mut mrng = mechanism_stream(seed, n, i, k);
                    let pay = mech.sample(g, x, &mut mrng)?;
                    Ok(pay
                        .iter()
                        .zip(g.wagers())
                        .zip(g.predictions())
                        .filter(|((_, &w), _)| w > 0.0)
                        .map(|((&v, &w), p)| (accuracy(p.p1(), reference), v / w))
                        .collect())
                })
                .collect()
        });
        let per_instance = per_instance.into_iter().collect::<Result<Vec<_>>>()?;
        for (k, mech) in mechs.iter().enumerate() {
            let mut bins = AccuracyBins::new(cfg.bins);
            per_instance.iter().for_each(|obs| bins.absorb(&obs[k]));
            rows.extend(bins.finish().into_iter().enumerate().map(|(bin, stats)| VarianceRow {
                mechanism: mech.name(),
                n,
                bin,
                stats,
            }));
        }
    }
    Ok(rows)
}

/// Plain decimal with 12 significant digits, trailing zeros trimmed.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return "NA".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_else(|| "NA".into())
}

pub fn write_efficiency_csv<W: Write>(rows: &[EfficiencyRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_NOTE}")?;
    writeln!(w, "mechanism,n,pred_model,wager_model,avg_risk,avg_exchange_rate,mode")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.mechanism.replace(',', ";"),
            r.n,
            r.pred_model.replace(',', ";"),
            r.wager_model.replace(',', ";"),
            fmt_num(r.avg_risk),
            fmt_num(r.avg_exchange_rate),
            r.evaluation.tag()
        )?;
    }
    Ok(())
}

pub fn write_variance_csv<W: Write>(rows: &[VarianceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_NOTE}")?;
    writeln!(w, "mechanism,n,bin,acc_lo,acc_hi,count,std_norm_payoff,frac_not_losing")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.mechanism.replace(',', ";"),
            r.n,
            r.bin,
            fmt_num(r.stats.lo),
            fmt_num(r.stats.hi),
            r.stats.count,
            fmt_opt(r.stats.std_norm_payoff),
            fmt_opt(r.stats.frac_not_losing)
        )?;
    }
    Ok(())
}
