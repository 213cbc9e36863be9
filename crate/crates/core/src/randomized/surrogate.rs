//! Surrogate wagering: weighted-score payoffs computed against independently
//! flipped copies of the outcome and debiased through the unbiased operator.

use crate::deterministic::{anchor_payoffs, weighted_score_payoffs, AverageMode};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, TOL};
use crate::scoring::{ConfusionMatrix, ErrorRates, ScoringRule, SurrogateNoise};
use crate::types::{Game, PayoffDistribution, SupportPoint};

/// Largest number of joint surrogate realizations enumerated exactly.
pub const SURROGATE_CAP: usize = 1 << 16;

fn check_noise(game: &Game, noise: &[SurrogateNoise]) -> Result<()> {
    if noise.len() != game.agents() {
        return Err(Error::Dimension(format!(
            "{} noise models for {} agents",
            noise.len(),
            game.agents()
        )));
    }
    if let Some(n) = noise.iter().find(|n| n.outcomes() != game.outcomes()) {
        return Err(Error::Dimension(format!(
            "noise over {} outcomes in a game over {}",
            n.outcomes(),
            game.outcomes()
        )));
    }
    Ok(())
}

/// `phi[i][k]`: agent `i`'s debiased score against surrogate outcome `k`.
pub fn phi_table(game: &Game, rule: &ScoringRule, noise: &[SurrogateNoise]) -> Result<Vec<Vec<f64>>> {
    check_noise(game, noise)?;
    game.predictions()
        .iter()
        .zip(noise)
        .map(|(p, n)| n.phi_vector(rule, p))
        .collect()
}

/// Number of joint surrogate realizations with positive probability at `x`.
pub fn realization_count(noise: &[SurrogateNoise], x: usize) -> usize {
    noise.iter().fold(1usize, |acc, n| {
        let reach = (0..n.outcomes()).filter(|&k| n.prob(x, k) > 0.0).count();
        acc.saturating_mul(reach)
    })
}

/// Enumerate every joint surrogate realization at `x`, calling `visit(prob, xt)`.
fn for_each_realization<F: FnMut(f64, &[usize])>(noise: &[SurrogateNoise], x: usize, mut visit: F) {
    let reach: Vec<Vec<(usize, f64)>> = noise
        .iter()
        .map(|n| {
            (0..n.outcomes())
                .map(|k| (k, n.prob(x, k)))
                .filter(|(_, p)| *p > 0.0)
                .collect()
        })
        .collect();
    let n = noise.len();
    let mut idx = vec![0usize; n];
    let mut xt = vec![0usize; n];
    loop {
        let mut prob = 1.0;
        for i in 0..n {
            let (k, p) = reach[i][idx[i]];
            xt[i] = k;
            prob *= p;
        }
        visit(prob, &xt);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < reach[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

fn swm_support(
    game: &Game,
    x: usize,
    phi: &[Vec<f64>],
    noise: &[SurrogateNoise],
    offset: Option<&[f64]>,
) -> Result<PayoffDistribution> {
    game.check_outcome(x)?;
    let count = realization_count(noise, x);
    if count > SURROGATE_CAP {
        return Err(Error::EnumerationCap(format!(
            "{count} surrogate realizations exceed {SURROGATE_CAP}"
        )));
    }
    let mut support = Vec::with_capacity(count);
    let mut scores = vec![0.0; game.agents()];
    for_each_realization(noise, x, |prob, xt| {
        for (i, &k) in xt.iter().enumerate() {
            scores[i] = phi[i][k];
        }
        let mut payoffs = weighted_score_payoffs(game.wagers(), &scores);
        if let Some(off) = offset {
            payoffs.iter_mut().zip(off).for_each(|(p, o)| *p -= o);
        }
        support.push(SupportPoint { prob, payoffs });
    });
    PayoffDistribution::new(support, game.wagers().to_vec())
}

/// Surrogate Wagering Mechanism without the wager-constraint check.
pub fn swm_distribution_unchecked(
    game: &Game,
    x: usize,
    rule: &ScoringRule,
    noise: &[SurrogateNoise],
) -> Result<PayoffDistribution> {
    let phi = phi_table(game, rule, noise)?;
    swm_support(game, x, &phi, noise, None)
}

/// Surrogate Wagering Mechanism; reports a wager violation instead of clamping.
pub fn swm_distribution(
    game: &Game,
    x: usize,
    rule: &ScoringRule,
    noise: &[SurrogateNoise],
) -> Result<PayoffDistribution> {
    let d = swm_distribution_unchecked(game, x, rule, noise)?;
    d.check_wager_constraint()?;
    Ok(d)
}

/// Exact per-agent minimum payoff at outcome `x` without enumerating the support.
///
/// Surrogates are independent given `x`, so agent `i`'s payoff
/// `w_i((1 - w_i/W) phi_i - sum_{j != i} (w_j/W) phi_j)` is minimized by
/// each agent's extreme reachable value separately.
pub fn swm_worst_case_at(game: &Game, x: usize, rule: &ScoringRule, noise: &[SurrogateNoise]) -> Result<Vec<f64>> {
    game.check_outcome(x)?;
    let phi = phi_table(game, rule, noise)?;
    Ok(worst_from_phi(game, x, &phi, noise))
}

fn worst_from_phi(game: &Game, x: usize, phi: &[Vec<f64>], noise: &[SurrogateNoise]) -> Vec<f64> {
    let w = game.wagers();
    let total = game.total_wager();
    if total <= 0.0 {
        return vec![0.0; w.len()];
    }
    let extremes: Vec<(f64, f64)> = phi
        .iter()
        .zip(noise)
        .map(|(row, n)| {
            row.iter()
                .enumerate()
                .filter(|(k, _)| n.prob(x, *k) > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| {
                    (lo.min(v), hi.max(v))
                })
        })
        .collect();
    let max_term = compensated_sum(w.iter().zip(&extremes).map(|(wj, e)| wj * e.1));
    (0..w.len())
        .map(|i| {
            if w[i] == 0.0 {
                return 0.0;
            }
            let others = max_term - w[i] * extremes[i].1;
            w[i] * ((1.0 - w[i] / total) * extremes[i].0 - others / total)
        })
        .collect()
}

/// Per-agent minimum over outcomes and surrogate realizations.
pub fn swm_worst_case(game: &Game, rule: &ScoringRule, noise: &[SurrogateNoise]) -> Result<Vec<f64>> {
    let phi = phi_table(game, rule, noise)?;
    let mut worst = vec![f64::INFINITY; game.agents()];
    for x in 0..game.outcomes() {
        for (acc, v) in worst.iter_mut().zip(worst_from_phi(game, x, &phi, noise)) {
            *acc = acc.min(v);
        }
    }
    Ok(worst)
}

/// Candidate common error rates `r_i` of the error-rate selection algorithm.
pub fn error_rate_candidates(game: &Game, rule: &ScoringRule) -> Result<Vec<f64>> {
    if game.outcomes() != 2 {
        return Err(Error::Dimension(format!(
            "error-rate selection is binary; game has {} outcomes",
            game.outcomes()
        )));
    }
    let total = game.total_wager();
    if total <= 0.0 {
        return Ok(vec![0.5; game.agents()]);
    }
    let (sw, sb): (Vec<f64>, Vec<f64>) = game
        .predictions()
        .iter()
        .map(|p| {
            let (a, b) = (rule.score_unchecked(0, p), rule.score_unchecked(1, p));
            (a.min(b), a.max(b))
        })
        .unzip();
    let omega: Vec<f64> = game.wagers().iter().map(|w| w / total).collect();
    let diff_all = compensated_sum((0..sw.len()).map(|j| omega[j] * (sw[j] - sb[j])));
    let sum_all = compensated_sum((0..sw.len()).map(|j| omega[j] * (sw[j] + sb[j])));
    Ok((0..sw.len())
        .map(|i| {
            let diff_i = sw[i] - sb[i];
            let num = (1.0 - omega[i]) * diff_i + (diff_all - omega[i] * diff_i);
            let den = 2.0 * (2.0 + sw[i] + sb[i] - sum_all);
            0.5 + num / den
        })
        .collect())
}

/// Common error rate `e` chosen so that the most exposed agent can lose
/// exactly its whole wager and nobody more.
pub fn select_error_rates(game: &Game, rule: &ScoringRule) -> Result<f64> {
    if game.agents() < 2 {
        return Err(Error::InvalidGame(
            "error-rate selection needs at least two agents".into(),
        ));
    }
    let r = error_rate_candidates(game, rule)?;
    let min = r
        .iter()
        .zip(game.wagers())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() || (min - 0.5).abs() <= TOL {
        return Ok(0.0);
    }
    if !(-TOL..=0.5 + TOL).contains(&min) {
        return Err(Error::AlgorithmInconsistency(min));
    }
    Ok(min.clamp(0.0, 0.5))
}

/// Agent whose candidate rate is smallest (ties broken by index).
pub fn most_exposed_agent(game: &Game, rule: &ScoringRule) -> Result<usize> {
    let r = error_rate_candidates(game, rule)?;
    Ok(r.iter()
        .zip(game.wagers())
        .enumerate()
        .filter(|(_, (_, &w))| w > 0.0)
        .min_by(|a, b| a.1 .0.total_cmp(b.1 .0))
        .map(|(i, _)| i)
        .unwrap_or(0))
}

/// Largest uniform-family mass `eps` (diagonal `1 - eps`) with no wager
/// violation, found by bisection. Extrapolates the binary selection rule to
/// more than two outcomes.
pub fn select_confusion_epsilon(game: &Game, rule: &ScoringRule) -> Result<f64> {
    let m = game.outcomes();
    let violates = |eps: f64| -> Result<bool> {
        let c = ConfusionMatrix::uniform_family(m, eps)?;
        let noise = vec![SurrogateNoise::Confusion(c); game.agents()];
        let worst = swm_worst_case(game, rule, &noise)?;
        Ok(worst.iter().zip(game.wagers()).any(|(v, w)| *v < -w))
    };
    let hi_limit = (m - 1) as f64 / m as f64;
    let mut hi = hi_limit * (1.0 - 1e-4);
    if !violates(hi)? {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if violates(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Common noise model used by SWME for this game.
pub fn swme_noise(game: &Game, rule: &ScoringRule) -> Result<SurrogateNoise> {
    if game.outcomes() == 2 {
        Ok(SurrogateNoise::Binary(ErrorRates::symmetric(select_error_rates(
            game, rule,
        )?)?))
    } else {
        Ok(SurrogateNoise::Confusion(ConfusionMatrix::uniform_family(
            game.outcomes(),
            select_confusion_epsilon(game, rule)?,
        )?))
    }
}

/// SWM with automatically selected error rates.
pub fn swme_distribution(game: &Game, x: usize, rule: &ScoringRule) -> Result<PayoffDistribution> {
    let noise = vec![swme_noise(game, rule)?; game.agents()];
    swm_distribution(game, x, rule, &noise)
}

/// Per-agent worst case of SWME over outcomes and realizations.
pub fn swme_worst_case(game: &Game, rule: &ScoringRule) -> Result<Vec<f64>> {
    let noise = vec![swme_noise(game, rule)?; game.agents()];
    swm_worst_case(game, rule, &noise)
}

/// Surrogate-scored weighted-score term minus the deterministic anchor
/// evaluated at the true outcome.
pub fn surrogate_nawm_distribution(
    game: &Game,
    x: usize,
    rule: &ScoringRule,
    noise: &[SurrogateNoise],
    mode: AverageMode,
) -> Result<PayoffDistribution> {
    let anchor = anchor_payoffs(game, x, rule, mode)?;
    let phi = phi_table(game, rule, noise)?;
    swm_support(game, x, &phi, noise, Some(&anchor))
}

/// Surrogate outcomes from per-agent uniforms (agents ascending).
pub fn draw_surrogates(noise: &[SurrogateNoise], x: usize, uniforms: &[f64]) -> Vec<usize> {
    noise.iter().zip(uniforms).map(|(n, &u)| n.draw(x, u)).collect()
}

/// Payoffs for one realized surrogate vector.
pub fn swm_realization(
    game: &Game,
    rule: &ScoringRule,
    noise: &[SurrogateNoise],
    surrogates: &[usize],
) -> Result<Vec<f64>> {
    let phi = phi_table(game, rule, noise)?;
    let scores: Vec<f64> = surrogates.iter().enumerate().map(|(i, &k)| phi[i][k]).collect();
    Ok(weighted_score_payoffs(game.wagers(), &scores))
}
