//! Winner-take-all lottery over a deterministic mechanism's payoffs.

use rand::Rng;

use crate::deterministic::wswm;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, TOL};
use crate::scoring::ScoringRule;
use crate::types::{mix_distributions, Game, PayoffDistribution, SupportPoint};

use super::SimRng;

/// Winning tickets `w_i + Pi_i`, checked non-negative.
fn tickets(det: &[f64], wagers: &[f64]) -> Result<Vec<f64>> {
    if det.len() != wagers.len() {
        return Err(Error::Dimension(format!(
            "{} payoffs for {} wagers",
            det.len(),
            wagers.len()
        )));
    }
    det.iter()
        .zip(wagers)
        .enumerate()
        .map(|(agent, (&pay, &w))| {
            let t = w + pay;
            if t < -TOL {
                Err(Error::InvalidBaseMechanism { agent, payoff: pay })
            } else {
                Ok(t.max(0.0))
            }
        })
        .collect()
}

fn winner_payoffs(wagers: &[f64], total: f64, winner: usize) -> Vec<f64> {
    wagers
        .iter()
        .enumerate()
        .map(|(i, &w)| if i == winner { total - w } else { -w })
        .collect()
}

/// Lottery distribution built from deterministic payoffs.
pub fn lottery_wrap(det: &[f64], wagers: &[f64]) -> Result<PayoffDistribution> {
    let t = tickets(det, wagers)?;
    let mass = compensated_sum(t.iter().copied());
    if mass <= 0.0 {
        return PayoffDistribution::point(vec![0.0; wagers.len()], wagers.to_vec());
    }
    let total = compensated_sum(wagers.iter().copied());
    let support = t
        .iter()
        .enumerate()
        .filter(|(_, &tj)| tj > 0.0)
        .map(|(j, &tj)| SupportPoint {
            prob: tj / mass,
            payoffs: winner_payoffs(wagers, total, j),
        })
        .collect();
    PayoffDistribution::new(support, wagers.to_vec())
}

/// Lottery Weighted Score mechanism at outcome `x`.
pub fn lws(game: &Game, x: usize, rule: &ScoringRule) -> Result<PayoffDistribution> {
    lottery_wrap(&wswm(game, x, rule)?, game.wagers())
}

/// LWS with probability `lambda`, deterministic WSWM otherwise.
pub fn lws_mixed(game: &Game, x: usize, rule: &ScoringRule, lambda: f64) -> Result<PayoffDistribution> {
    let det = wswm(game, x, rule)?;
    let lottery = lottery_wrap(&det, game.wagers())?;
    let point = PayoffDistribution::point(det, game.wagers().to_vec())?;
    mix_distributions(&lottery, &point, lambda)
}

/// One lottery draw.
pub fn sample_lottery(det: &[f64], wagers: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
    let t = tickets(det, wagers)?;
    let mass = compensated_sum(t.iter().copied());
    let u: f64 = rng.random();
    if mass <= 0.0 {
        return Ok(vec![0.0; wagers.len()]);
    }
    let target = u * mass;
    let mut acc = 0.0;
    let mut winner = t.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    for (j, &tj) in t.iter().enumerate() {
        acc += tj;
        if tj > 0.0 && target < acc {
            winner = j;
            break;
        }
    }
    let total = compensated_sum(wagers.iter().copied());
    Ok(winner_payoffs(wagers, total, winner))
}
