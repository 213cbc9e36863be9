//! Deterministic baselines: weighted-score and no-arbitrage wagering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::scoring::ScoringRule;
use crate::types::{Game, Prediction};

/// How the "average of the others" is formed in the no-arbitrage mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AverageMode {
    #[default]
    WagerWeighted,
    Unweighted,
}

/// Weighted-score payoffs from arbitrary per-agent scores.
///
/// `Pi_i = w_i (s_i - sum_j w_j s_j / W)`, which equals the usual
/// `w_i W_{-i}/W (s_i - sum_{j != i} w_j s_j / W_{-i})`.
pub fn weighted_score_payoffs(wagers: &[f64], scores: &[f64]) -> Vec<f64> {
    let total = compensated_sum(wagers.iter().copied());
    if total <= 0.0 {
        return vec![0.0; wagers.len()];
    }
    let mean = compensated_sum(wagers.iter().zip(scores).map(|(w, s)| w * s)) / total;
    wagers
        .iter()
        .zip(scores)
        .map(|(&w, &s)| if w == 0.0 { 0.0 } else { w * (s - mean) })
        .collect()
}

/// Weighted Score Wagering Mechanism at realized outcome `x`.
pub fn wswm(game: &Game, x: usize, rule: &ScoringRule) -> Result<Vec<f64>> {
    game.check_outcome(x)?;
    let scores: Vec<f64> = game.predictions().iter().map(|p| rule.score_unchecked(x, p)).collect();
    Ok(weighted_score_payoffs(game.wagers(), &scores))
}

/// Average of the other agents' reports, or `None` when it is undefined.
pub fn others_average(game: &Game, agent: usize, mode: AverageMode) -> Option<Prediction> {
    let m = game.outcomes();
    let weights: Vec<f64> = (0..game.agents())
        .map(|j| match (j == agent, mode) {
            (true, _) => 0.0,
            (false, AverageMode::WagerWeighted) => game.wagers()[j],
            (false, AverageMode::Unweighted) => 1.0,
        })
        .collect();
    let total = compensated_sum(weights.iter().copied());
    if total <= 0.0 {
        return None;
    }
    let mut probs: Vec<f64> = (0..m)
        .map(|k| compensated_sum(game.predictions().iter().zip(&weights).map(|(p, w)| w * p.prob(k))) / total)
        .collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|v| *v = (*v / sum).clamp(0.0, 1.0));
    Prediction::new(probs).ok()
}

/// The deterministic term subtracted by the no-arbitrage mechanism:
/// agent `i`'s weighted-score payoff had it reported the others' average.
pub fn anchor_payoffs(game: &Game, x: usize, rule: &ScoringRule, mode: AverageMode) -> Result<Vec<f64>> {
    if game.agents() < 2 {
        return Err(Error::InvalidGame(
            "the others' average needs at least two agents".into(),
        ));
    }
    game.check_outcome(x)?;
    (0..game.agents())
        .map(|i| match others_average(game, i, mode) {
            Some(avg) => Ok(wswm(&game.with_report(i, avg), x, rule)?[i]),
            None => Ok(0.0),
        })
        .collect()
}

/// No-Arbitrage Wagering Mechanism at realized outcome `x`.
pub fn nawm(game: &Game, x: usize, rule: &ScoringRule, mode: AverageMode) -> Result<Vec<f64>> {
    let anchor = anchor_payoffs(game, x, rule, mode)?;
    let base = wswm(game, x, rule)?;
    Ok(base.iter().zip(&anchor).map(|(b, a)| b - a).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_agent_hand_values() {
        let g = Game::binary(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let r = ScoringRule::Brier;
        assert_eq!(wswm(&g, 1, &r).unwrap(), vec![0.5, -0.5]);
        let na = nawm(&g, 1, &r, AverageMode::WagerWeighted).unwrap();
        assert!((na[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_reports_pay_nothing() {
        let g = Game::binary(&[0.3, 0.3, 0.3], &[1.0, 2.0, 0.5]).unwrap();
        let r = ScoringRule::Brier;
        for x in 0..2 {
            assert!(wswm(&g, x, &r).unwrap().iter().all(|v| v.abs() < 1e-12));
            let na = nawm(&g, x, &r, AverageMode::WagerWeighted).unwrap();
            assert!(na.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn zero_wagers() {
        let r = ScoringRule::Brier;
        let g = Game::binary(&[0.9, 0.1], &[0.0, 0.0]).unwrap();
        assert_eq!(wswm(&g, 1, &r).unwrap(), vec![0.0, 0.0]);
        let g = Game::binary(&[0.9, 0.1, 0.4], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(wswm(&g, 1, &r).unwrap()[0], 0.0);
    }

    #[test]
    fn nawm_needs_two_agents() {
        let g = Game::binary(&[0.4], &[1.0]).unwrap();
        assert!(nawm(&g, 0, &ScoringRule::Brier, AverageMode::WagerWeighted).is_err());
    }

    #[test]
    fn reporting_the_average_earns_nothing() {
        let r = ScoringRule::Brier;
        let g = Game::binary(&[0.0, 0.2, 0.9], &[1.0, 3.0, 1.0]).unwrap();
        let avg = others_average(&g, 0, AverageMode::WagerWeighted).unwrap();
        assert!((avg.p1() - (0.6 + 0.9) / 4.0).abs() < 1e-12);
        let g = g.with_report(0, avg);
        for x in 0..2 {
            assert!(nawm(&g, x, &r, AverageMode::WagerWeighted).unwrap()[0].abs() < 1e-12);
        }
    }
}
