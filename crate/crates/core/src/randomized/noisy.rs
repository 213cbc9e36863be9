//! SWME when only a noisy estimate of the outcome is observed.
//!
//! Each group targets the error rates chosen by the selection algorithm with
//! respect to the true outcome. When per-agent flips applied to the noisy
//! estimate can reach that target they are used directly; otherwise the noisy
//! estimate is debiased with its own rates and the group's payoffs are scaled
//! back within the wager constraint.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deterministic::weighted_score_payoffs;
use crate::error::{Error, Result};
use crate::numeric::TOL;
use crate::scoring::{ErrorRates, ScoringRule, SurrogateNoise};
use crate::types::{mix_distributions, Game, PayoffDistribution, SupportPoint};

use super::partition::{partition_mixture, sample_partition};
use super::surrogate::select_error_rates;
use super::SimRng;

/// Observed noisy outcome together with its known noise rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyOutcomeModel {
    pub observed: usize,
    pub rates: ErrorRates,
}

/// Error rates of a flip applied on top of a noisy outcome, relative to the true outcome.
pub fn compose_noise(agent_flip: &ErrorRates, outcome_noise: &ErrorRates) -> Result<ErrorRates> {
    let (a0, a1) = (agent_flip.e0(), agent_flip.e1());
    let (n0, n1) = (outcome_noise.e0(), outcome_noise.e1());
    ErrorRates::new(a0 * (1.0 - n0) + (1.0 - a1) * n0, a1 * (1.0 - n1) + (1.0 - a0) * n1)
}

/// Flip rates whose composition with `outcome_noise` equals `target`.
pub fn solve_agent_flip(target: &ErrorRates, outcome_noise: &ErrorRates) -> Result<ErrorRates> {
    let (n0, n1) = (outcome_noise.e0(), outcome_noise.e1());
    let det = 1.0 - n0 - n1;
    let (r0, r1) = (target.e0() - n0, target.e1() - n1);
    let a0 = ((1.0 - n1) * r0 + n0 * r1) / det;
    let a1 = (n1 * r0 + (1.0 - n0) * r1) / det;
    let inside = |v: f64| (-TOL..=1.0 + TOL).contains(&v);
    if !inside(a0) || !inside(a1) {
        return Err(Error::InfeasibleFlip { a0, a1 });
    }
    ErrorRates::new(a0.clamp(0.0, 1.0), a1.clamp(0.0, 1.0))
}

/// Divide every payoff by `max(1, max_i -pi_i / w_i)`.
pub fn scale_payoffs(d: &PayoffDistribution) -> Result<(PayoffDistribution, f64)> {
    let mut scale: f64 = 1.0;
    for pt in d.support() {
        for (&pay, &w) in pt.payoffs.iter().zip(d.wagers()) {
            if w > 0.0 {
                scale = scale.max(-pay / w);
            } else if pay != 0.0 {
                return Err(Error::InvalidGame("payoff to an agent without a wager".into()));
            }
        }
    }
    if scale == 1.0 {
        return Ok((d.clone(), 1.0));
    }
    Ok((d.scaled(scale), scale))
}

/// How one group is run under a noisy outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupPlan {
    /// Common error rate relative to the true outcome.
    pub target: f64,
    /// Per-agent flips on the noisy outcome, when attainable.
    pub flip: Option<ErrorRates>,
    /// Payoff divisor of the fallback path (1 when flipping is used).
    pub scale: f64,
}

fn debiased_point(sub: &Game, rule: &ScoringRule, rates: &ErrorRates, observed: usize) -> Result<Vec<f64>> {
    let noise = SurrogateNoise::Binary(*rates);
    let scores = sub
        .predictions()
        .iter()
        .map(|p| noise.phi_vector(rule, p).map(|phi| phi[observed]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(weighted_score_payoffs(sub.wagers(), &scores))
}

/// Decide flipping versus debias-and-scale for one group.
pub fn group_plan(sub: &Game, rule: &ScoringRule, rates: &ErrorRates) -> Result<GroupPlan> {
    let target = select_error_rates(sub, rule)?;
    let target_rates = ErrorRates::symmetric(target)?;
    match solve_agent_flip(&target_rates, rates) {
        Ok(flip) => Ok(GroupPlan {
            target,
            flip: Some(flip),
            scale: 1.0,
        }),
        Err(Error::InfeasibleFlip { .. }) => {
            let support = (0..2)
                .map(|xh| {
                    Ok(SupportPoint {
                        prob: 0.5,
                        payoffs: debiased_point(sub, rule, rates, xh)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let both = PayoffDistribution::new(support, sub.wagers().to_vec())?;
            let (_, scale) = scale_payoffs(&both)?;
            Ok(GroupPlan {
                target,
                flip: None,
                scale,
            })
        }
        Err(e) => Err(e),
    }
}

/// Distribution of one group's payoffs given the observed noisy outcome.
pub fn group_conditional(
    sub: &Game,
    rule: &ScoringRule,
    rates: &ErrorRates,
    plan: &GroupPlan,
    observed: usize,
) -> Result<PayoffDistribution> {
    match plan.flip {
        None => {
            let pay = debiased_point(sub, rule, rates, observed)?;
            PayoffDistribution::point(pay.iter().map(|v| v / plan.scale).collect(), sub.wagers().to_vec())
        }
        Some(flip) => {
            let target = SurrogateNoise::Binary(ErrorRates::symmetric(plan.target)?);
            let phi = sub
                .predictions()
                .iter()
                .map(|p| target.phi_vector(rule, p))
                .collect::<Result<Vec<_>>>()?;
            let n = sub.agents();
            let mut support = Vec::with_capacity(1 << n);
            for bits in 0..(1usize << n) {
                let mut prob = 1.0;
                let mut scores = Vec::with_capacity(n);
                for (i, row) in phi.iter().enumerate() {
                    let xt = (bits >> i) & 1;
                    prob *= flip.prob(observed, xt);
                    scores.push(row[xt]);
                }
                if prob > 0.0 {
                    support.push(SupportPoint {
                        prob,
                        payoffs: weighted_score_payoffs(sub.wagers(), &scores),
                    });
                }
            }
            PayoffDistribution::new(support, sub.wagers().to_vec())
        }
    }
}

fn check_binary(game: &Game) -> Result<()> {
    if game.outcomes() != 2 {
        return Err(Error::Dimension(format!(
            "noisy ground truth is binary; game has {} outcomes",
            game.outcomes()
        )));
    }
    Ok(())
}

/// Exact distribution given the observed noisy outcome.
pub fn noisy_swme_conditional(
    game: &Game,
    model: &NoisyOutcomeModel,
    rule: &ScoringRule,
) -> Result<PayoffDistribution> {
    check_binary(game)?;
    game.check_outcome(model.observed)?;
    partition_mixture(game, |g| {
        let sub = game.subgame(g);
        let plan = group_plan(&sub, rule, &model.rates)?;
        group_conditional(&sub, rule, &model.rates, &plan, model.observed)
    })
}

/// Exact end-to-end distribution given the true outcome `x`, mixing over the
/// noisy observation.
pub fn noisy_swme_distribution(
    game: &Game,
    x: usize,
    rates: &ErrorRates,
    rule: &ScoringRule,
) -> Result<PayoffDistribution> {
    check_binary(game)?;
    game.check_outcome(x)?;
    let cond = |observed| {
        noisy_swme_conditional(
            game,
            &NoisyOutcomeModel {
                observed,
                rates: *rates,
            },
            rule,
        )
    };
    let p_same = rates.prob(x, x);
    if p_same >= 1.0 {
        return cond(x);
    }
    if p_same <= 0.0 {
        return cond(1 - x);
    }
    mix_distributions(&cond(x)?, &cond(1 - x)?, p_same)
}

/// One draw: the noisy observation, per-agent uniforms (agents ascending), then the partition.
pub fn sample_noisy_swme(
    game: &Game,
    x: usize,
    rates: &ErrorRates,
    rule: &ScoringRule,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    check_binary(game)?;
    game.check_outcome(x)?;
    let observed = if rng.random::<f64>() < rates.prob(x, x) {
        x
    } else {
        1 - x
    };
    let uniforms: Vec<f64> = (0..game.agents()).map(|_| rng.random()).collect();
    let part = sample_partition(game.agents(), rng)?;
    let mut payoffs = vec![0.0; game.agents()];
    for g in part.groups() {
        let sub = game.subgame(g);
        let plan = group_plan(&sub, rule, rates)?;
        let pay = match plan.flip {
            None => debiased_point(&sub, rule, rates, observed)?
                .into_iter()
                .map(|v| v / plan.scale)
                .collect(),
            Some(flip) => {
                let target = SurrogateNoise::Binary(ErrorRates::symmetric(plan.target)?);
                let flip_noise = SurrogateNoise::Binary(flip);
                let scores = g
                    .iter()
                    .zip(sub.predictions())
                    .map(|(&i, p)| {
                        let xt = flip_noise.draw(observed, uniforms[i]);
                        target.phi_vector(rule, p).map(|phi| phi[xt])
                    })
                    .collect::<Result<Vec<f64>>>()?;
                weighted_score_payoffs(sub.wagers(), &scores)
            }
        };
        for (k, &agent) in g.iter().enumerate() {
            payoffs[agent] = pay[k];
        }
    }
    Ok(payoffs)
}
