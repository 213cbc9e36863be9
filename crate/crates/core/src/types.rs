//! Domain vocabulary: predictions, games and exact payoff distributions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, TOL};

/// A probability vector over `M >= 2` outcomes reported by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    probs: Vec<f64>,
}

impl Prediction {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidPrediction(format!(
                "need at least two outcomes, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidPrediction(format!("entry {bad} outside [0, 1]")));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > TOL {
            return Err(Error::InvalidPrediction(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Binary prediction from the reported probability of outcome 1.
    pub fn binary(p1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p1) {
            return Err(Error::InvalidPrediction(format!("P(X=1) = {p1} outside [0, 1]")));
        }
        Ok(Self {
            probs: vec![1.0 - p1, p1],
        })
    }

    pub fn outcomes(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, outcome: usize) -> f64 {
        self.probs[outcome]
    }

    /// Reported probability of outcome 1 (binary convention).
    pub fn p1(&self) -> f64 {
        self.probs[1]
    }

    /// The same belief with outcome `k` relabelled as `perm[k]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let mut probs = vec![0.0; self.probs.len()];
        for (k, &p) in self.probs.iter().enumerate() {
            probs[perm[k]] = p;
        }
        Self { probs }
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.probs.len() == other.probs.len() && self.probs.iter().zip(&other.probs).all(|(a, b)| (a - b).abs() <= TOL)
    }
}

/// Reports and wagers of the participating agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    predictions: Vec<Prediction>,
    wagers: Vec<f64>,
}

impl Game {
    pub fn new(predictions: Vec<Prediction>, wagers: Vec<f64>) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::InvalidGame("no agents".into()));
        }
        if predictions.len() != wagers.len() {
            return Err(Error::InvalidGame(format!(
                "{} predictions but {} wagers",
                predictions.len(),
                wagers.len()
            )));
        }
        let m = predictions[0].outcomes();
        if predictions.iter().any(|p| p.outcomes() != m) {
            return Err(Error::InvalidGame("predictions disagree on outcome count".into()));
        }
        if let Some(w) = wagers.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidGame(format!("wager {w} is not a non-negative amount")));
        }
        Ok(Self { predictions, wagers })
    }

    /// Binary game from reported probabilities of outcome 1.
    pub fn binary(p1s: &[f64], wagers: &[f64]) -> Result<Self> {
        let predictions = p1s.iter().map(|&p| Prediction::binary(p)).collect::<Result<_>>()?;
        Self::new(predictions, wagers.to_vec())
    }

    pub fn agents(&self) -> usize {
        self.wagers.len()
    }

    pub fn outcomes(&self) -> usize {
        self.predictions[0].outcomes()
    }

    pub fn predictions(&self) -> &[Prediction] {
        &self.predictions
    }

    pub fn prediction(&self, agent: usize) -> &Prediction {
        &self.predictions[agent]
    }

    pub fn wagers(&self) -> &[f64] {
        &self.wagers
    }

    pub fn total_wager(&self) -> f64 {
        compensated_sum(self.wagers.iter().copied())
    }

    pub fn check_outcome(&self, outcome: usize) -> Result<()> {
        if outcome >= self.outcomes() {
            return Err(Error::InvalidOutcome {
                index: outcome,
                outcomes: self.outcomes(),
            });
        }
        Ok(())
    }

    /// Restriction of the game to the listed agents, in the given order.
    pub fn subgame(&self, members: &[usize]) -> Game {
        Game {
            predictions: members.iter().map(|&i| self.predictions[i].clone()).collect(),
            wagers: members.iter().map(|&i| self.wagers[i]).collect(),
        }
    }

    /// Copy of the game with one agent's report replaced.
    pub fn with_report(&self, agent: usize, report: Prediction) -> Game {
        let mut g = self.clone();
        g.predictions[agent] = report;
        g
    }

    /// Agents reordered so that new agent `k` is old agent `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Game {
        self.subgame(order)
    }

    pub fn relabelled(&self, perm: &[usize]) -> Game {
        Game {
            predictions: self.predictions.iter().map(|p| p.relabel(perm)).collect(),
            wagers: self.wagers.clone(),
        }
    }

    pub fn all_reports_identical(&self) -> bool {
        self.predictions.windows(2).all(|w| w[0].approx_eq(&w[1]))
    }
}

/// How the event outcome enters an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutcomeModel {
    Realized(usize),
    /// Known happening probabilities of each outcome.
    Happening(Vec<f64>),
}

/// One wagering game together with its outcome model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance {
    pub game: Game,
    pub outcome: OutcomeModel,
}

impl GameInstance {
    pub fn new(game: Game, outcome: OutcomeModel) -> Result<Self> {
        match &outcome {
            OutcomeModel::Realized(x) => game.check_outcome(*x)?,
            OutcomeModel::Happening(q) => {
                if q.len() != game.outcomes() {
                    return Err(Error::Dimension(format!(
                        "{} happening probabilities for {} outcomes",
                        q.len(),
                        game.outcomes()
                    )));
                }
                Prediction::new(q.clone())?;
            }
        }
        Ok(Self { game, outcome })
    }

    /// Probability of each outcome under the instance's outcome model.
    pub fn outcome_weights(&self) -> Vec<f64> {
        match &self.outcome {
            OutcomeModel::Realized(x) => {
                let mut w = vec![0.0; self.game.outcomes()];
                w[*x] = 1.0;
                w
            }
            OutcomeModel::Happening(q) => q.clone(),
        }
    }
}

/// One realization of the joint net-payoff vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub prob: f64,
    pub payoffs: Vec<f64>,
}

/// Per-agent summary of a payoff distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub expected: f64,
    pub min: f64,
    pub max: f64,
}

/// Exact finite-support distribution over joint net-payoff vectors.
///
/// Construction checks that probabilities are positive and sum to one and that
/// agents without a wager are never paid. The wager constraint is checked
/// separately by [`PayoffDistribution::wager_violation`], since some
/// intermediate constructions (generic surrogate error rates, unscaled noisy
/// debiasing) are allowed to break it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffDistribution {
    support: Vec<SupportPoint>,
    wagers: Vec<f64>,
}

impl PayoffDistribution {
    pub fn new(support: Vec<SupportPoint>, wagers: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Dimension("empty support".into()));
        }
        let n = wagers.len();
        for pt in &support {
            if pt.payoffs.len() != n {
                return Err(Error::Dimension(format!(
                    "support point has {} payoffs for {} agents",
                    pt.payoffs.len(),
                    n
                )));
            }
            if !(pt.prob > 0.0 && pt.prob <= 1.0 + TOL) {
                return Err(Error::Dimension(format!("support probability {}", pt.prob)));
            }
            for (i, (&pay, &w)) in pt.payoffs.iter().zip(&wagers).enumerate() {
                if w == 0.0 && pay != 0.0 {
                    return Err(Error::InvalidGame(format!("agent {i} has no wager but is paid {pay}")));
                }
            }
        }
        let total = compensated_sum(support.iter().map(|p| p.prob));
        if (total - 1.0).abs() > TOL {
            return Err(Error::Dimension(format!("support probabilities sum to {total}")));
        }
        Ok(Self { support, wagers })
    }

    /// Point mass at a single payoff vector.
    pub fn point(payoffs: Vec<f64>, wagers: Vec<f64>) -> Result<Self> {
        Self::new(vec![SupportPoint { prob: 1.0, payoffs }], wagers)
    }

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }

    pub fn wagers(&self) -> &[f64] {
        &self.wagers
    }

    pub fn agents(&self) -> usize {
        self.wagers.len()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn expected(&self) -> Vec<f64> {
        (0..self.agents())
            .map(|i| compensated_sum(self.support.iter().map(|p| p.prob * p.payoffs[i])))
            .collect()
    }

    pub fn min_payoffs(&self) -> Vec<f64> {
        (0..self.agents())
            .map(|i| self.support.iter().map(|p| p.payoffs[i]).fold(f64::INFINITY, f64::min))
            .collect()
    }

    pub fn max_payoffs(&self) -> Vec<f64> {
        (0..self.agents())
            .map(|i| {
                self.support
                    .iter()
                    .map(|p| p.payoffs[i])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    pub fn stats(&self) -> Vec<AgentStats> {
        let e = self.expected();
        let lo = self.min_payoffs();
        let hi = self.max_payoffs();
        (0..self.agents())
            .map(|i| AgentStats {
                expected: e[i],
                min: lo[i],
                max: hi[i],
            })
            .collect()
    }

    /// First support point at which some agent loses more than its wager.
    pub fn wager_violation(&self) -> Option<Error> {
        self.support.iter().find_map(|pt| {
            pt.payoffs
                .iter()
                .zip(&self.wagers)
                .enumerate()
                .find(|(_, (&pay, &w))| pay < -w - TOL)
                .map(|(agent, (&pay, &w))| Error::WagerViolation {
                    agent,
                    loss: -pay,
                    wager: w,
                })
        })
    }

    pub fn check_wager_constraint(&self) -> Result<()> {
        match self.wager_violation() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Expected value of an arbitrary function of the payoff vector.
    pub fn expectation_of<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.support.iter().map(|p| p.prob * f(&p.payoffs)))
    }

    /// Same distribution with agents reordered: new agent `k` is old agent `order[k]`.
    pub fn permute_agents(&self, order: &[usize]) -> Self {
        Self {
            support: self
                .support
                .iter()
                .map(|p| SupportPoint {
                    prob: p.prob,
                    payoffs: order.iter().map(|&i| p.payoffs[i]).collect(),
                })
                .collect(),
            wagers: order.iter().map(|&i| self.wagers[i]).collect(),
        }
    }

    /// Merge support points with bit-identical payoff vectors.
    pub fn coalesce(self) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut out: Vec<SupportPoint> = Vec::with_capacity(self.support.len());
        for pt in self.support {
            let key: Vec<u64> = pt.payoffs.iter().map(|x| (x + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&k) => out[k].prob += pt.prob,
                None => {
                    index.insert(key, out.len());
                    out.push(pt);
                }
            }
        }
        Self {
            support: out,
            wagers: self.wagers,
        }
    }

    /// Divide every payoff by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            support: self
                .support
                .iter()
                .map(|p| SupportPoint {
                    prob: p.prob,
                    payoffs: p.payoffs.iter().map(|x| x / factor).collect(),
                })
                .collect(),
            wagers: self.wagers.clone(),
        }
    }

    /// Multiset equality of (probability, payoff vector) pairs within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.agents() != other.agents() {
            return false;
        }
        let a = cluster(&self.support, tol);
        let b = cluster(&other.support, tol);
        if a.len() != b.len() {
            return false;
        }
        let mut used = vec![false; b.len()];
        a.iter().all(|pa| {
            let hit = b.iter().enumerate().position(|(k, pb)| {
                !used[k]
                    && (pa.prob - pb.prob).abs() <= tol
                    && pa.payoffs.iter().zip(&pb.payoffs).all(|(x, y)| (x - y).abs() <= tol)
            });
            match hit {
                Some(k) => {
                    used[k] = true;
                    true
                }
                None => false,
            }
        })
    }
}

fn cluster(points: &[SupportPoint], tol: f64) -> Vec<SupportPoint> {
    let mut out: Vec<SupportPoint> = Vec::new();
    for pt in points {
        let near = out
            .iter_mut()
            .find(|c| c.payoffs.iter().zip(&pt.payoffs).all(|(x, y)| (x - y).abs() <= tol));
        match near {
            Some(c) => c.prob += pt.prob,
            None => out.push(pt.clone()),
        }
    }
    out
}

/// Run `a` with probability `lambda` and `b` otherwise.
pub fn mix_distributions(a: &PayoffDistribution, b: &PayoffDistribution, lambda: f64) -> Result<PayoffDistribution> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "mixture weight {lambda} outside [0, 1]"
        )));
    }
    if a.agents() != b.agents() {
        return Err(Error::Dimension(format!(
            "mixing distributions over {} and {} agents",
            a.agents(),
            b.agents()
        )));
    }
    if a.wagers.iter().zip(&b.wagers).any(|(x, y)| (x - y).abs() > TOL) {
        return Err(Error::Dimension("mixing distributions with different wagers".into()));
    }
    let mut support = Vec::with_capacity(a.len() + b.len());
    for (d, w) in [(a, lambda), (b, 1.0 - lambda)] {
        if w > 0.0 {
            support.extend(d.support.iter().map(|p| SupportPoint {
                prob: p.prob * w,
                payoffs: p.payoffs.clone(),
            }));
        }
    }
    Ok(PayoffDistribution::new(support, a.wagers.clone())?.coalesce())
}

/// Serializable description of a distribution's per-agent statistics.
pub fn payoff_distribution_stats(d: &PayoffDistribution) -> Vec<AgentStats> {
    d.stats()
}
