//! Efficiency and randomness metrics: individual risk, money exchange rate
//! and per-accuracy payoff dispersion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::Mechanism;
use crate::numeric::{compensated_sum, RunningStats};
use crate::randomized::SimRng;
use crate::types::Game;

/// Whether a metric came from an exact support or from draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evaluation {
    Exact,
    Sampled { draws: usize },
}

impl Evaluation {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Sampled { .. } => "sampled",
        }
    }
}

fn risks_from_worst(worst: &[f64], wagers: &[f64]) -> Vec<f64> {
    worst
        .iter()
        .zip(wagers)
        .map(|(&lo, &w)| if w > 0.0 { (-lo / w).clamp(0.0, 1.0) } else { 0.0 })
        .collect()
}

/// Worst-case fraction of its wager each agent can lose, over outcomes and randomness.
pub fn individual_risk(mech: &dyn Mechanism, game: &Game) -> Result<Vec<f64>> {
    Ok(risks_from_worst(&mech.worst_case(game)?, game.wagers()))
}

/// Risk estimated from `draws` samples per outcome.
pub fn individual_risk_sampled(mech: &dyn Mechanism, game: &Game, draws: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    let mut worst = vec![f64::INFINITY; game.agents()];
    for x in 0..game.outcomes() {
        for _ in 0..draws.max(1) {
            let pay = mech.sample(game, x, rng)?;
            worst.iter_mut().zip(pay).for_each(|(a, b)| *a = a.min(b));
        }
    }
    Ok(risks_from_worst(&worst, game.wagers()))
}

/// Exact risk when the mechanism can enumerate, sampled otherwise.
pub fn individual_risk_auto(
    mech: &dyn Mechanism,
    game: &Game,
    draws: usize,
    rng: &mut SimRng,
) -> Result<(Vec<f64>, Evaluation)> {
    match individual_risk(mech, game) {
        Ok(r) => Ok((r, Evaluation::Exact)),
        Err(Error::EnumerationCap(_)) => Ok((
            individual_risk_sampled(mech, game, draws, rng)?,
            Evaluation::Sampled { draws },
        )),
        Err(e) => Err(e),
    }
}

fn total_wager(wagers: &[f64]) -> Result<f64> {
    let total = compensated_sum(wagers.iter().copied());
    if total <= 0.0 {
        return Err(Error::InvalidGame(
            "money exchange rate needs a positive total wager".into(),
        ));
    }
    Ok(total)
}

/// Money changing hands in one realization divided by the total wager.
pub fn exchange_rate(payoffs: &[f64], wagers: &[f64]) -> Result<f64> {
    let total = total_wager(wagers)?;
    Ok(compensated_sum(payoffs.iter().map(|v| v.max(0.0))) / total)
}

/// `sum max(pi, 0) - sum max(-pi, 0)`; zero for a budget-balanced realization.
pub fn exchange_identity_gap(payoffs: &[f64]) -> f64 {
    compensated_sum(payoffs.iter().map(|v| v.max(0.0))) - compensated_sum(payoffs.iter().map(|v| (-v).max(0.0)))
}

/// Expected exchange rate over outcomes drawn from `q` and the mechanism's randomness.
pub fn expected_exchange_rate(mech: &dyn Mechanism, game: &Game, q: &[f64]) -> Result<f64> {
    let total = total_wager(game.wagers())?;
    let mut terms = Vec::with_capacity(q.len());
    for (x, &qx) in q.iter().enumerate() {
        if qx > 0.0 {
            terms.push(qx * mech.expected_exchange(game, x)?);
        }
    }
    Ok(compensated_sum(terms) / total)
}

pub fn expected_exchange_rate_sampled(
    mech: &dyn Mechanism,
    game: &Game,
    q: &[f64],
    draws: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    let total = total_wager(game.wagers())?;
    let mut terms = Vec::new();
    for (x, &qx) in q.iter().enumerate() {
        if qx <= 0.0 {
            continue;
        }
        let mut acc = Vec::with_capacity(draws);
        for _ in 0..draws.max(1) {
            let pay = mech.sample(game, x, rng)?;
            acc.push(compensated_sum(pay.iter().map(|v| v.max(0.0))));
        }
        terms.push(qx * compensated_sum(acc) / draws.max(1) as f64);
    }
    Ok(compensated_sum(terms) / total)
}

pub fn expected_exchange_rate_auto(
    mech: &dyn Mechanism,
    game: &Game,
    q: &[f64],
    draws: usize,
    rng: &mut SimRng,
) -> Result<(f64, Evaluation)> {
    match expected_exchange_rate(mech, game, q) {
        Ok(r) => Ok((r, Evaluation::Exact)),
        Err(Error::EnumerationCap(_)) => Ok((
            expected_exchange_rate_sampled(mech, game, q, draws, rng)?,
            Evaluation::Sampled { draws },
        )),
        Err(e) => Err(e),
    }
}

/// Reference against which an agent's accuracy is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AccuracyReference {
    /// `1 - |x - p|` against the realized outcome.
    #[default]
    Realized,
    /// `1 - |q - p|` against the happening probability.
    Happening,
}

pub fn accuracy(p1: f64, reference: f64) -> f64 {
    1.0 - (reference - p1).abs()
}

/// Summary of normalized payoffs inside one accuracy interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    /// Sample standard deviation of `payoff / wager`; `None` below two observations.
    pub std_norm_payoff: Option<f64>,
    /// Share of observations with `payoff >= 0`; `None` for an empty bin.
    pub frac_not_losing: Option<f64>,
}

/// Streaming accumulator over `(accuracy, payoff / wager)` observations.
#[derive(Debug, Clone)]
pub struct AccuracyBins {
    stats: Vec<RunningStats>,
    not_losing: Vec<u64>,
}

impl AccuracyBins {
    pub fn new(bins: usize) -> Self {
        Self {
            stats: vec![RunningStats::default(); bins.max(1)],
            not_losing: vec![0; bins.max(1)],
        }
    }

    pub fn bins(&self) -> usize {
        self.stats.len()
    }

    pub fn bin_of(&self, acc: f64) -> usize {
        let k = self.bins();
        ((acc.clamp(0.0, 1.0) * k as f64).floor() as usize).min(k - 1)
    }

    pub fn push(&mut self, acc: f64, normalized_payoff: f64) {
        let b = self.bin_of(acc);
        self.stats[b].push(normalized_payoff);
        if normalized_payoff >= 0.0 {
            self.not_losing[b] += 1;
        }
    }

    /// Push observations in order.
    pub fn absorb(&mut self, obs: &[(f64, f64)]) {
        obs.iter().for_each(|&(a, v)| self.push(a, v));
    }

    pub fn finish(&self) -> Vec<BinStats> {
        let k = self.bins() as f64;
        self.stats
            .iter()
            .zip(&self.not_losing)
            .enumerate()
            .map(|(b, (s, &nl))| BinStats {
                lo: b as f64 / k,
                hi: (b + 1) as f64 / k,
                count: s.count(),
                std_norm_payoff: s.sample_std(),
                frac_not_losing: (s.count() > 0).then(|| nl as f64 / s.count() as f64),
            })
            .collect()
    }
}

/// Bin observations `(accuracy, payoff / wager)` into `bins` equal intervals on `[0, 1]`.
pub fn accuracy_bins(observations: &[(f64, f64)], bins: usize) -> Vec<BinStats> {
    let mut acc = AccuracyBins::new(bins);
    acc.absorb(observations);
    acc.finish()
}

/// Aggregate efficiency metrics for one mechanism at one population size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mechanism: String,
    pub n: usize,
    pub pred_model: String,
    pub wager_model: String,
    pub avg_risk: f64,
    pub avg_exchange_rate: f64,
    pub evaluation: Evaluation,
}
