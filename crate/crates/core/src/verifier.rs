//! Executable checks of the axiomatic properties against exact payoff
//! distributions, plus deliberately broken mechanisms that must fail them.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{par_map, Execution};
use crate::generators::{gen_instance, PredictionModel, WagerModel};
use crate::mechanism::{Mechanism, MechanismId};
use crate::numeric::TOL;
use crate::randomized::{substream, SimRng};
use crate::types::{Game, PayoffDistribution, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Ir,
    Wic,
    Sic,
    Webb,
    Ebb,
    Sybilproof,
    Anonymity,
    Neutrality,
    NoArbitrage,
    Po,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Ir => "IR",
            Self::Wic => "WIC",
            Self::Sic => "SIC",
            Self::Webb => "WEBB",
            Self::Ebb => "EBB",
            Self::Sybilproof => "sybilproof",
            Self::Anonymity => "anonymity",
            Self::Neutrality => "neutrality",
            Self::NoArbitrage => "no_arbitrage",
            Self::Po => "PO",
        };
        f.write_str(s)
    }
}

/// Everything needed to replay a failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub game: Game,
    pub outcome: Option<usize>,
    pub agent: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: Property,
    pub mechanism: String,
    pub passed: bool,
    pub tolerance: f64,
    /// Instances (or configurations) examined.
    pub checked: usize,
    /// Instances on which the property failed.
    pub failed: usize,
    /// First failure in instance order.
    pub witness: Option<Witness>,
    /// Whether the mechanism claims the property; unclaimed results are only recorded.
    pub asserted: bool,
    pub note: Option<String>,
}

impl PropertyReport {
    fn from_outcomes(
        property: Property,
        mechanism: String,
        tolerance: f64,
        outcomes: Vec<Result<Option<Witness>>>,
    ) -> Result<Self> {
        let checked = outcomes.len();
        let mut failed = 0;
        let mut witness = None;
        for o in outcomes {
            if let Some(w) = o? {
                failed += 1;
                if witness.is_none() {
                    witness = Some(w);
                }
            }
        }
        Ok(Self {
            property,
            mechanism,
            passed: failed == 0,
            tolerance,
            checked,
            failed,
            witness,
            asserted: true,
            note: None,
        })
    }

    pub fn failed_fraction(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.failed as f64 / self.checked as f64
        }
    }

    pub fn with_asserted(mut self, asserted: bool) -> Self {
        self.asserted = asserted;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Budget-balance strength being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    Strict,
    Weak,
}

/// Every support point sums to zero (strict) or to at most zero (weak).
pub fn check_budget_balance(
    mech: &dyn Mechanism,
    instances: &[Game],
    balance: Balance,
    exec: Execution,
) -> Result<PropertyReport> {
    let outcomes = par_map(instances.len(), exec, |k| {
        let g = &instances[k];
        for x in 0..g.outcomes() {
            let d = mech.distribution(g, x)?;
            for pt in d.support() {
                let sum: f64 = pt.payoffs.iter().sum();
                let bad = match balance {
                    Balance::Strict => sum.abs() > TOL,
                    Balance::Weak => sum > TOL,
                };
                if bad {
                    return Ok(Some(Witness {
                        game: g.clone(),
                        outcome: Some(x),
                        agent: None,
                        detail: format!("payoffs {:?} sum to {sum:e}", pt.payoffs),
                    }));
                }
            }
        }
        Ok(None)
    });
    let prop = match balance {
        Balance::Strict => Property::Ebb,
        Balance::Weak => Property::Webb,
    };
    PropertyReport::from_outcomes(prop, mech.name(), TOL, outcomes)
}

/// Exact expected payoff of `agent` when outcomes follow `belief`.
pub fn expected_under_belief(mech: &dyn Mechanism, game: &Game, agent: usize, belief: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (x, &bx) in belief.iter().enumerate() {
        if bx > 0.0 {
            total += bx * mech.distribution(game, x)?.expected()[agent];
        }
    }
    Ok(total)
}

/// One binary configuration for the incentive checks: agent 0 holds `belief`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncentiveConfig {
    pub game: Game,
    pub belief: f64,
}

/// Random configurations with agent 0's belief on the report grid.
pub fn incentive_configs(n: usize, count: usize, step: f64, seed: u64) -> Result<Vec<IncentiveConfig>> {
    let cells = (1.0 / step).round() as u64;
    (0..count)
        .map(|k| {
            let mut rng = substream(seed, &[n as u64, k as u64]);
            let belief = rng.random_range(0..=cells) as f64 / cells as f64;
            let mut reports = vec![belief];
            reports.extend((1..n).map(|_| rng.random::<f64>()));
            let wagers: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            Ok(IncentiveConfig {
                game: Game::binary(&reports, &wagers)?,
                belief,
            })
        })
        .collect()
}

/// Individual rationality and strict incentive compatibility on a report grid.
///
/// Returns `(IR, SIC)`. SIC requires the truthful report to beat every other
/// grid report by more than the tolerance.
pub fn check_ir_sic(
    mech: &dyn Mechanism,
    configs: &[IncentiveConfig],
    step: f64,
    exec: Execution,
) -> Result<(PropertyReport, PropertyReport)> {
    let cells = (1.0 / step).round() as usize;
    let results = par_map(configs.len(), exec, |k| -> Result<(Option<Witness>, Option<Witness>)> {
        let cfg = &configs[k];
        let belief = [1.0 - cfg.belief, cfg.belief];
        let truthful = (cfg.belief * cells as f64).round() as usize;
        let mut values = Vec::with_capacity(cells + 1);
        for r in 0..=cells {
            let report = Prediction::binary(r as f64 / cells as f64)?;
            values.push(expected_under_belief(
                mech,
                &cfg.game.with_report(0, report),
                0,
                &belief,
            )?);
        }
        let honest = values[truthful];
        let ir = (honest < -TOL).then(|| Witness {
            game: cfg.game.clone(),
            outcome: None,
            agent: Some(0),
            detail: format!("truthful expected payoff {honest:e} under belief {}", cfg.belief),
        });
        let (best_other, best_value) = values.iter().enumerate().filter(|(r, _)| *r != truthful).fold(
            (truthful, f64::NEG_INFINITY),
            |acc, (r, &v)| if v > acc.1 { (r, v) } else { acc },
        );
        let sic = (honest - best_value <= TOL).then(|| Witness {
            game: cfg.game.clone(),
            outcome: None,
            agent: Some(0),
            detail: format!(
                "report {} earns {best_value:e} against truthful {} earning {honest:e}",
                best_other as f64 / cells as f64,
                cfg.belief
            ),
        });
        Ok((ir, sic))
    });
    let mut ir = Vec::with_capacity(results.len());
    let mut sic = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok((a, b)) => {
                ir.push(Ok(a));
                sic.push(Ok(b));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((
        PropertyReport::from_outcomes(Property::Ir, mech.name(), TOL, ir)?,
        PropertyReport::from_outcomes(Property::Sic, mech.name(), TOL, sic)?
            .with_note(format!("report grid step {step}")),
    ))
}

/// Every staked agent faces a strictly losing realization under some outcome.
/// Instances where every report coincides are skipped.
pub fn check_no_arbitrage(mech: &dyn Mechanism, instances: &[Game], exec: Execution) -> Result<PropertyReport> {
    let usable: Vec<&Game> = instances.iter().filter(|g| !g.all_reports_identical()).collect();
    let outcomes = par_map(usable.len(), exec, |k| {
        let g = usable[k];
        let mut worst = vec![f64::INFINITY; g.agents()];
        for x in 0..g.outcomes() {
            let lo = mech.distribution(g, x)?.min_payoffs();
            worst.iter_mut().zip(lo).for_each(|(a, b)| *a = a.min(b));
        }
        Ok(worst
            .iter()
            .zip(g.wagers())
            .position(|(&lo, &w)| w > 0.0 && lo >= -TOL)
            .map(|agent| Witness {
                game: g.clone(),
                outcome: None,
                agent: Some(agent),
                detail: format!("agent {agent} never loses; worst payoff {:e}", worst[agent]),
            }))
    });
    PropertyReport::from_outcomes(Property::NoArbitrage, mech.name(), TOL, outcomes)
}

/// For every pair with differing reports, one of the two can lose exactly its whole wager.
pub fn check_po(mech: &dyn Mechanism, instances: &[Game], exec: Execution) -> Result<PropertyReport> {
    let outcomes = par_map(instances.len(), exec, |k| {
        let g = &instances[k];
        let mut full_loss = vec![false; g.agents()];
        for x in 0..g.outcomes() {
            let d = mech.distribution(g, x)?;
            for pt in d.support() {
                for (i, (&pay, &w)) in pt.payoffs.iter().zip(g.wagers()).enumerate() {
                    if (pay + w).abs() <= TOL {
                        full_loss[i] = true;
                    }
                }
            }
        }
        for i in 0..g.agents() {
            for j in i + 1..g.agents() {
                if !g.prediction(i).approx_eq(g.prediction(j)) && !full_loss[i] && !full_loss[j] {
                    return Ok(Some(Witness {
                        game: g.clone(),
                        outcome: None,
                        agent: Some(i),
                        detail: format!("neither agent {i} nor agent {j} can lose its whole wager"),
                    }));
                }
            }
        }
        Ok(None)
    });
    PropertyReport::from_outcomes(Property::Po, mech.name(), TOL, outcomes)
}

/// Replace agent 0 by two identities with the same report and wagers `f w`, `(1 - f) w`.
pub fn split_agent(game: &Game, f: f64) -> Result<Game> {
    let p0 = game.prediction(0).clone();
    let w0 = game.wagers()[0];
    let mut preds = vec![p0.clone(), p0];
    preds.extend(game.predictions()[1..].iter().cloned());
    let mut wagers = vec![f * w0, (1.0 - f) * w0];
    wagers.extend_from_slice(&game.wagers()[1..]);
    Game::new(preds, wagers)
}

/// Splitting agent 0's wager across two truthful identities never raises its
/// expected total payoff.
pub fn check_sybilproof(
    mech: &dyn Mechanism,
    instances: &[Game],
    splits: &[f64],
    exec: Execution,
) -> Result<PropertyReport> {
    let outcomes = par_map(instances.len(), exec, |k| {
        let g = &instances[k];
        let belief = g.prediction(0).probs().to_vec();
        let whole = expected_under_belief(mech, g, 0, &belief)?;
        for &f in splits {
            let sg = split_agent(g, f)?;
            let parts = expected_under_belief(mech, &sg, 0, &belief)? + expected_under_belief(mech, &sg, 1, &belief)?;
            if parts > whole + TOL {
                return Ok(Some(Witness {
                    game: g.clone(),
                    outcome: None,
                    agent: Some(0),
                    detail: format!("split {f} earns {parts:e} against {whole:e} unsplit"),
                }));
            }
        }
        Ok(None)
    });
    PropertyReport::from_outcomes(Property::Sybilproof, mech.name(), TOL, outcomes)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Largest population and outcome count used for the symmetry checks.
pub const SYMMETRY_MAX_AGENTS: usize = 4;
pub const SYMMETRY_MAX_OUTCOMES: usize = 3;

/// Anonymity (agent permutations) and neutrality (outcome relabelling).
pub fn check_symmetries(
    mech: &dyn Mechanism,
    instances: &[Game],
    exec: Execution,
) -> Result<(PropertyReport, PropertyReport)> {
    let usable: Vec<&Game> = instances
        .iter()
        .filter(|g| g.agents() <= SYMMETRY_MAX_AGENTS && g.outcomes() <= SYMMETRY_MAX_OUTCOMES)
        .collect();
    let results = par_map(usable.len(), exec, |k| -> Result<(Option<Witness>, Option<Witness>)> {
        let g = usable[k];
        let base: Vec<PayoffDistribution> = (0..g.outcomes())
            .map(|x| mech.distribution(g, x))
            .collect::<Result<_>>()?;
        let mut anon = None;
        'agents: for order in permutations(g.agents()) {
            let pg = g.permuted(&order);
            for (x, d) in base.iter().enumerate() {
                if !mech.distribution(&pg, x)?.approx_eq(&d.permute_agents(&order), TOL) {
                    anon = Some(Witness {
                        game: g.clone(),
                        outcome: Some(x),
                        agent: None,
                        detail: format!("agent order {order:?} changes the distribution"),
                    });
                    break 'agents;
                }
            }
        }
        let mut neutral = None;
        'labels: for perm in permutations(g.outcomes()) {
            let rg = g.relabelled(&perm);
            for (x, d) in base.iter().enumerate() {
                if !mech.distribution(&rg, perm[x])?.approx_eq(d, TOL) {
                    neutral = Some(Witness {
                        game: g.clone(),
                        outcome: Some(x),
                        agent: None,
                        detail: format!("outcome relabelling {perm:?} changes the distribution"),
                    });
                    break 'labels;
                }
            }
        }
        Ok((anon, neutral))
    });
    let mut anon = Vec::new();
    let mut neutral = Vec::new();
    for r in results {
        let (a, n) = r?;
        anon.push(Ok(a));
        neutral.push(Ok(n));
    }
    Ok((
        PropertyReport::from_outcomes(Property::Anonymity, mech.name(), TOL, anon)?,
        PropertyReport::from_outcomes(Property::Neutrality, mech.name(), TOL, neutral)?,
    ))
}

/// Properties a mechanism claims; the rest are run and recorded only.
pub fn claimed_properties(id: &MechanismId) -> Vec<Property> {
    use Property::*;
    match *id {
        MechanismId::Wswm => vec![Ebb, Ir, Sic, Sybilproof, Anonymity, Neutrality],
        MechanismId::Nawm { .. } => vec![Webb, Ir, Sic, NoArbitrage, Anonymity, Neutrality],
        MechanismId::Lws => vec![Ebb, Ir, Sic, NoArbitrage, Po, Sybilproof, Anonymity, Neutrality],
        MechanismId::LwsMixed { .. } => vec![Ebb, Ir, Sic, Sybilproof, Anonymity, Neutrality],
        MechanismId::Swm { e0, e1 } => {
            let mut v = vec![Ebb, Ir, Sic, Sybilproof, Anonymity];
            if e0 == e1 {
                v.push(Neutrality);
            }
            v
        }
        MechanismId::Swme => vec![Ebb, Ir, Sic, NoArbitrage, Sybilproof, Anonymity, Neutrality],
        MechanismId::RpSwme => {
            vec![Ebb, Ir, Sic, NoArbitrage, Po, Sybilproof, Anonymity, Neutrality]
        }
        MechanismId::SNawm { e0, e1 } => {
            let mut v = vec![Webb, Ir, Sic, NoArbitrage, Anonymity];
            if e0 == e1 {
                v.push(Neutrality);
            }
            v
        }
        MechanismId::NoisySwme { e0, e1 } => {
            let mut v = vec![Ebb, Anonymity];
            if e0 == e1 {
                v.push(Neutrality);
            }
            v
        }
    }
}

/// Settings of a full verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub n_values: Vec<usize>,
    pub instances: usize,
    pub seed: u64,
    pub grid_step: f64,
    pub incentive_configs: usize,
    pub splits: Vec<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n_values: vec![2, 4, 6],
            instances: 50,
            seed: 1,
            grid_step: 0.01,
            incentive_configs: 10,
            splits: (1..10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

/// Random binary games for the instance-based checks.
pub fn suite_instances(n_values: &[usize], per_n: usize, seed: u64) -> Result<Vec<Game>> {
    let mut out = Vec::with_capacity(n_values.len() * per_n);
    for &n in n_values {
        for i in 0..per_n {
            let mut rng: SimRng = substream(seed, &[0x5EED, n as u64, i as u64]);
            let inst = gen_instance(&PredictionModel::Uniform, &WagerModel::pareto_default(), n, 2, &mut rng)?;
            out.push(inst.game);
        }
    }
    Ok(out)
}

/// Run every check on `mech`, marking the `claims` as asserted.
pub fn run_suite(
    mech: &dyn Mechanism,
    claims: &[Property],
    cfg: &SuiteConfig,
    exec: Execution,
) -> Result<Vec<PropertyReport>> {
    let games = suite_instances(&cfg.n_values, cfg.instances, cfg.seed)?;
    let small: Vec<Game> = games
        .iter()
        .filter(|g| g.agents() <= SYMMETRY_MAX_AGENTS)
        .cloned()
        .collect();
    let trios = suite_instances(&[3], cfg.instances.min(20), cfg.seed ^ 0x5B)?;
    let claimed = |p: Property| claims.contains(&p);
    let mut out = Vec::new();
    let balance = if claimed(Property::Webb) && !claimed(Property::Ebb) {
        Balance::Weak
    } else {
        Balance::Strict
    };
    let bb = check_budget_balance(mech, &games, balance, exec)?;
    out.push(bb.clone().with_asserted(claimed(bb.property)));
    for n in [2usize, 3] {
        let configs = incentive_configs(n, cfg.incentive_configs, cfg.grid_step, cfg.seed)?;
        let (ir, sic) = check_ir_sic(mech, &configs, cfg.grid_step, exec)?;
        out.push(ir.with_asserted(claimed(Property::Ir)).with_note(format!("N = {n}")));
        out.push(
            sic.with_asserted(claimed(Property::Sic))
                .with_note(format!("N = {n}, grid step {}", cfg.grid_step)),
        );
    }
    out.push(check_no_arbitrage(mech, &games, exec)?.with_asserted(claimed(Property::NoArbitrage)));
    out.push(check_po(mech, &games, exec)?.with_asserted(claimed(Property::Po)));
    out.push(check_sybilproof(mech, &trios, &cfg.splits, exec)?.with_asserted(claimed(Property::Sybilproof)));
    let (anon, neutral) = check_symmetries(mech, &small, exec)?;
    out.push(anon.with_asserted(claimed(Property::Anonymity)));
    out.push(neutral.with_asserted(claimed(Property::Neutrality)));
    Ok(out)
}

pub mod stubs {
    //! Deliberately broken mechanisms used as negative controls.

    use super::*;
    use crate::deterministic::wswm;
    use crate::scoring::ScoringRule;

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    pub enum Stub {
        /// Weighted score plus 0.01 to agent 0: not budget balanced.
        CorruptedBudget,
        /// Pays `w_i |p_i - 0.5|`: rewards extreme reports.
        ReportDistance,
        /// Weighted score plus a fixed bonus per identity.
        SybilBonus,
        /// Moves 0.01 from the last agent to agent 0.
        Favoritism,
    }

    impl Stub {
        pub const ALL: [Stub; 4] = [
            Self::CorruptedBudget,
            Self::ReportDistance,
            Self::SybilBonus,
            Self::Favoritism,
        ];

        pub fn tag(&self) -> &'static str {
            match self {
                Self::CorruptedBudget => "stub-budget",
                Self::ReportDistance => "stub-report",
                Self::SybilBonus => "stub-sybil",
                Self::Favoritism => "stub-favor",
            }
        }

        pub fn parse(s: &str) -> Option<Self> {
            Self::ALL.into_iter().find(|t| t.tag() == s.trim())
        }

        /// The property each stub is built to break.
        pub fn target(&self) -> Property {
            match self {
                Self::CorruptedBudget => Property::Ebb,
                Self::ReportDistance => Property::Sic,
                Self::SybilBonus => Property::Sybilproof,
                Self::Favoritism => Property::Anonymity,
            }
        }

        /// Stubs pose as honest mechanisms and so claim what they break.
        pub fn claims(&self) -> Vec<Property> {
            vec![Property::Ebb, Property::Sic, Property::Sybilproof, Property::Anonymity]
        }
    }

    impl Mechanism for Stub {
        fn name(&self) -> String {
            self.tag().to_string()
        }

        fn distribution(&self, game: &Game, x: usize) -> Result<PayoffDistribution> {
            let mut pay = wswm(game, x, &ScoringRule::Brier)?;
            let staked = |i: usize| game.wagers()[i] > 0.0;
            match self {
                Self::CorruptedBudget => {
                    if staked(0) {
                        pay[0] += 0.01;
                    }
                }
                Self::ReportDistance => {
                    pay = game
                        .predictions()
                        .iter()
                        .zip(game.wagers())
                        .map(|(p, w)| w * (p.p1() - 0.5).abs())
                        .collect();
                }
                Self::SybilBonus => {
                    for (i, v) in pay.iter_mut().enumerate() {
                        if staked(i) {
                            *v += 0.01;
                        }
                    }
                }
                Self::Favoritism => {
                    let last = game.agents() - 1;
                    if last > 0 && staked(0) && staked(last) {
                        pay[0] += 0.01;
                        pay[last] -= 0.01;
                    }
                }
            }
            PayoffDistribution::point(pay, game.wagers().to_vec())
        }
    }
}
