//! Random pairing of agents and the random-pairing SWME mechanism.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::scoring::{ScoringRule, SurrogateNoise};
use crate::types::{Game, PayoffDistribution, SupportPoint};

use super::surrogate::{draw_surrogates, swm_distribution, swm_realization, swm_worst_case, swme_noise};
use super::SimRng;

/// Largest population whose partitions are enumerated exactly.
pub const PARTITION_CAP: usize = 10;

/// Largest RP-SWME support enumerated before the caller must sample.
pub const SUPPORT_CAP: usize = 1 << 20;

/// Agents split into pairs, plus one triple when the population is odd.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut triples = 0;
        for g in &groups {
            match g.len() {
                2 => {}
                3 => triples += 1,
                k => return Err(Error::InvalidParameter(format!("group of size {k}"))),
            }
            for &i in g {
                if i >= n || seen[i] {
                    return Err(Error::InvalidParameter(format!("agent {i} repeated or out of range")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("partition does not cover every agent".into()));
        }
        if triples != n % 2 {
            return Err(Error::InvalidParameter(format!("{triples} triples for {n} agents")));
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

fn check_population(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidGame(format!(
            "random pairing needs at least two agents, got {n}"
        )));
    }
    Ok(())
}

fn double_factorial(k: u128) -> u128 {
    (1..=k).rev().step_by(2).product()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, j| acc * (n - j) / (j + 1))
}

/// Number of partitions of `n` agents into pairs with at most one triple.
pub fn partition_count(n: usize) -> u128 {
    let n = n as u128;
    if n < 2 {
        return 0;
    }
    if n.is_multiple_of(2) {
        double_factorial(n - 1)
    } else {
        binomial(n, 3) * double_factorial((n - 3).saturating_sub(1))
    }
}

fn extend(
    remaining: &mut Vec<usize>,
    triple_left: bool,
    current: &mut Vec<Vec<usize>>,
    out: &mut Vec<Vec<Vec<usize>>>,
) {
    if remaining.is_empty() {
        if !triple_left {
            out.push(current.clone());
        }
        return;
    }
    let first = remaining.remove(0);
    let rest = remaining.clone();
    for a in 0..rest.len() {
        let mut left: Vec<usize> = rest
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != a)
            .map(|(_, &v)| v)
            .collect();
        current.push(vec![first, rest[a]]);
        extend(&mut left, triple_left, current, out);
        current.pop();
        if triple_left {
            for b in a + 1..rest.len() {
                let mut left: Vec<usize> = rest
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != a && *k != b)
                    .map(|(_, &v)| v)
                    .collect();
                current.push(vec![first, rest[a], rest[b]]);
                extend(&mut left, false, current, out);
                current.pop();
            }
        }
    }
    remaining.insert(0, first);
}

/// Every admissible partition with its (uniform) probability.
pub fn enumerate_partitions(n: usize) -> Result<Vec<(Partition, f64)>> {
    check_population(n)?;
    if n > PARTITION_CAP {
        return Err(Error::EnumerationCap(format!(
            "partitions of {n} agents exceed the cap of {PARTITION_CAP}"
        )));
    }
    let mut raw = Vec::new();
    extend(&mut (0..n).collect(), n % 2 == 1, &mut Vec::new(), &mut raw);
    let p = 1.0 / raw.len() as f64;
    Ok(raw.into_iter().map(|groups| (Partition { groups }, p)).collect())
}

/// Probability that a given group of `size` agents appears in a uniformly drawn partition.
pub fn group_probability(n: usize, size: usize) -> f64 {
    let nf = n as f64;
    match (n % 2, size) {
        (0, 2) if n >= 2 => 1.0 / (nf - 1.0),
        (1, 3) if n >= 3 => 1.0 / binomial(n as u128, 3) as f64,
        (1, 2) if n >= 5 => binomial(n as u128 - 2, 3) as f64 / binomial(n as u128, 3) as f64 / (nf - 4.0),
        _ => 0.0,
    }
}

/// Every group that occurs with positive probability, with its marginal probability.
pub fn group_marginals(n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let pair = group_probability(n, 2);
    let triple = group_probability(n, 3);
    for a in 0..n {
        for b in a + 1..n {
            if pair > 0.0 {
                out.push((vec![a, b], pair));
            }
            if triple > 0.0 {
                for c in b + 1..n {
                    out.push((vec![a, b, c], triple));
                }
            }
        }
    }
    out
}

/// Shuffle, then cut into consecutive pairs with the last three together when `n` is odd.
pub fn sample_partition(n: usize, rng: &mut SimRng) -> Result<Partition> {
    check_population(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let pairs = if n.is_multiple_of(2) { n / 2 } else { (n - 3) / 2 };
    let mut groups: Vec<Vec<usize>> = order[..2 * pairs].chunks(2).map(|c| c.to_vec()).collect();
    if n % 2 == 1 {
        groups.push(order[2 * pairs..].to_vec());
    }
    Ok(Partition { groups })
}

fn group_distribution(game: &Game, group: &[usize], x: usize, rule: &ScoringRule) -> Result<PayoffDistribution> {
    let sub = game.subgame(group);
    let noise = vec![swme_noise(&sub, rule)?; sub.agents()];
    swm_distribution(&sub, x, rule, &noise)
}

/// Uniform mixture over partitions of the product of independent per-group
/// distributions. `group` returns the distribution of one group's payoffs,
/// indexed like the group's members.
pub fn partition_mixture<F>(game: &Game, mut group: F) -> Result<PayoffDistribution>
where
    F: FnMut(&[usize]) -> Result<PayoffDistribution>,
{
    let n = game.agents();
    let partitions = enumerate_partitions(n)?;
    let mut cache: HashMap<Vec<usize>, PayoffDistribution> = HashMap::new();
    let mut total = 0usize;
    for (part, _) in &partitions {
        let mut size = 1usize;
        for g in part.groups() {
            if !cache.contains_key(g) {
                cache.insert(g.clone(), group(g)?);
            }
            size = size.saturating_mul(cache[g].len());
        }
        total = total.saturating_add(size);
        if total > SUPPORT_CAP {
            return Err(Error::EnumerationCap(format!(
                "random-pairing support exceeds {SUPPORT_CAP} points"
            )));
        }
    }
    let mut support = Vec::with_capacity(total);
    for (part, p) in &partitions {
        let mut partial = vec![SupportPoint {
            prob: *p,
            payoffs: vec![0.0; n],
        }];
        for g in part.groups() {
            let d = &cache[g];
            partial = partial
                .iter()
                .flat_map(|base| {
                    d.support().iter().map(move |pt| {
                        let mut payoffs = base.payoffs.clone();
                        for (k, &agent) in g.iter().enumerate() {
                            payoffs[agent] = pt.payoffs[k];
                        }
                        SupportPoint {
                            prob: base.prob * pt.prob,
                            payoffs,
                        }
                    })
                })
                .collect();
        }
        support.extend(partial);
    }
    Ok(PayoffDistribution::new(support, game.wagers().to_vec())?.coalesce())
}

/// Exact RP-SWME distribution at outcome `x`.
pub fn rp_swme_distribution(game: &Game, x: usize, rule: &ScoringRule) -> Result<PayoffDistribution> {
    game.check_outcome(x)?;
    partition_mixture(game, |g| group_distribution(game, g, x, rule))
}

/// Exact expected RP-SWME payoffs from group marginals.
pub fn rp_swme_expected(game: &Game, x: usize, rule: &ScoringRule) -> Result<Vec<f64>> {
    game.check_outcome(x)?;
    check_population(game.agents())?;
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); game.agents()];
    for (g, p) in group_marginals(game.agents()) {
        let pay = crate::deterministic::wswm(&game.subgame(&g), x, rule)?;
        for (k, &agent) in g.iter().enumerate() {
            terms[agent].push(p * pay[k]);
        }
    }
    Ok(terms.into_iter().map(compensated_sum).collect())
}

/// Exact per-agent worst case over outcomes, partitions and surrogates.
pub fn rp_swme_worst_case(game: &Game, rule: &ScoringRule) -> Result<Vec<f64>> {
    check_population(game.agents())?;
    let mut worst = vec![f64::INFINITY; game.agents()];
    for (g, _) in group_marginals(game.agents()) {
        let sub = game.subgame(&g);
        let noise = vec![swme_noise(&sub, rule)?; sub.agents()];
        let w = swm_worst_case(&sub, rule, &noise)?;
        for (k, &agent) in g.iter().enumerate() {
            worst[agent] = worst[agent].min(w[k]);
        }
    }
    Ok(worst)
}

/// Exact expectation of the money changing hands, `E[sum_i max(pi_i, 0)]`.
pub fn rp_swme_expected_exchange(game: &Game, x: usize, rule: &ScoringRule) -> Result<f64> {
    game.check_outcome(x)?;
    check_population(game.agents())?;
    let mut acc = Vec::new();
    for (g, p) in group_marginals(game.agents()) {
        let d = group_distribution(game, &g, x, rule)?;
        acc.push(p * d.expectation_of(|v| v.iter().map(|a| a.max(0.0)).sum()));
    }
    Ok(compensated_sum(acc))
}

/// One RP-SWME draw: per-agent uniforms (agents ascending), then the partition.
pub fn sample_rp_swme(game: &Game, x: usize, rule: &ScoringRule, rng: &mut SimRng) -> Result<Vec<f64>> {
    game.check_outcome(x)?;
    let uniforms: Vec<f64> = (0..game.agents()).map(|_| rng.random()).collect();
    let part = sample_partition(game.agents(), rng)?;
    let mut payoffs = vec![0.0; game.agents()];
    for g in part.groups() {
        let sub = game.subgame(g);
        let noise: Vec<SurrogateNoise> = vec![swme_noise(&sub, rule)?; sub.agents()];
        let u: Vec<f64> = g.iter().map(|&i| uniforms[i]).collect();
        let xt = draw_surrogates(&noise, x, &u);
        let pay = swm_realization(&sub, rule, &noise, &xt)?;
        for (k, &agent) in g.iter().enumerate() {
            payoffs[agent] = pay[k];
        }
    }
    Ok(payoffs)
}
