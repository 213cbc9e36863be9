//! Bounded proper scoring rules and the unbiased surrogate operator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::TOL;
use crate::types::Prediction;

type ScoreFn = dyn Fn(usize, &Prediction) -> f64 + Send + Sync;

/// A strictly proper scoring rule with values in `[0, 1]`.
#[derive(Clone, Default)]
pub enum ScoringRule {
    /// Quadratic score rescaled into `[0, 1]`; `1 - (p1 - x)^2` for binary events.
    #[default]
    Brier,
    /// `p_x / |p|`.
    Spherical,
    /// User supplied rule; propriety and range are the caller's responsibility.
    Custom { name: String, eval: Arc<ScoreFn> },
}

impl fmt::Debug for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for ScoringRule {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Brier, Self::Brier) | (Self::Spherical, Self::Spherical) => true,
            (Self::Custom { eval: a, .. }, Self::Custom { eval: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl ScoringRule {
    pub fn custom<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(usize, &Prediction) -> f64 + Send + Sync + 'static,
    {
        Self::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Brier => "brier",
            Self::Spherical => "spherical",
            Self::Custom { name, .. } => name,
        }
    }

    /// Score of report `p` when outcome `x` occurs.
    pub fn score(&self, x: usize, p: &Prediction) -> Result<f64> {
        if x >= p.outcomes() {
            return Err(Error::InvalidOutcome {
                index: x,
                outcomes: p.outcomes(),
            });
        }
        Ok(self.score_unchecked(x, p))
    }

    pub(crate) fn score_unchecked(&self, x: usize, p: &Prediction) -> f64 {
        match self {
            Self::Brier => {
                let sq: f64 = p.probs().iter().map(|v| v * v).sum();
                1.0 - 0.5 * (sq - 2.0 * p.prob(x) + 1.0)
            }
            Self::Spherical => {
                let norm = p.probs().iter().map(|v| v * v).sum::<f64>().sqrt();
                p.prob(x) / norm
            }
            Self::Custom { eval, .. } => eval(x, p),
        }
    }

    /// Scores of `p` under every outcome.
    pub fn score_vector(&self, p: &Prediction) -> Vec<f64> {
        (0..p.outcomes()).map(|x| self.score_unchecked(x, p)).collect()
    }

    /// Expected score of `report` when outcomes follow `belief`.
    pub fn expected_score(&self, belief: &[f64], report: &Prediction) -> f64 {
        belief
            .iter()
            .enumerate()
            .map(|(x, q)| q * self.score_unchecked(x, report))
            .sum()
    }
}

pub fn brier(x: usize, p: &Prediction) -> Result<f64> {
    ScoringRule::Brier.score(x, p)
}

/// Binary flip rates `e0 = P(X~=1 | X=0)` and `e1 = P(X~=0 | X=1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    e0: f64,
    e1: f64,
}

impl ErrorRates {
    pub fn new(e0: f64, e1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&e0) || !(0.0..=1.0).contains(&e1) {
            return Err(Error::InvalidRates(format!("({e0}, {e1}) outside [0, 1]")));
        }
        if (e0 + e1 - 1.0).abs() <= TOL {
            return Err(Error::DegenerateNoise { e0, e1 });
        }
        Ok(Self { e0, e1 })
    }

    pub fn symmetric(e: f64) -> Result<Self> {
        Self::new(e, e)
    }

    pub fn noiseless() -> Self {
        Self { e0: 0.0, e1: 0.0 }
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn e1(&self) -> f64 {
        self.e1
    }

    /// Flip probability away from outcome `x`.
    pub fn rate(&self, x: usize) -> f64 {
        if x == 0 {
            self.e0
        } else {
            self.e1
        }
    }

    /// `P(X~ = xt | X = x)`.
    pub fn prob(&self, x: usize, xt: usize) -> f64 {
        if x == xt {
            1.0 - self.rate(x)
        } else {
            self.rate(x)
        }
    }

    pub fn to_confusion(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::new(vec![vec![1.0 - self.e0, self.e0], vec![self.e1, 1.0 - self.e1]])
    }
}

/// Row-stochastic flip matrix `c[j][k] = P(X~=k | X=j)` with its inverse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    rows: Vec<Vec<f64>>,
    #[serde(skip)]
    inverse: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m < 2 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension(format!(
                "confusion matrix must be square with M >= 2, got {m} rows"
            )));
        }
        for (j, row) in rows.iter().enumerate() {
            if row.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidRates(format!("row {j} has an entry outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > TOL {
                return Err(Error::InvalidRates(format!("row {j} sums to {total}")));
            }
        }
        let c = DMatrix::from_fn(m, m, |j, k| rows[j][k]);
        let inv = c
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularConfusion("matrix is not invertible".into()))?;
        let residual = (&c * &inv - DMatrix::<f64>::identity(m, m)).amax();
        if !residual.is_finite() || residual > 1e-6 {
            return Err(Error::SingularConfusion(format!("inverse residual {residual:e}")));
        }
        let inverse = (0..m).map(|j| (0..m).map(|k| inv[(j, k)]).collect()).collect();
        Ok(Self { rows, inverse })
    }

    /// Diagonal `1/2`, off-diagonal `1/(2(M-1))`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m <= 2 {
            return Err(Error::InvalidParameter(format!(
                "uniform confusion needs M > 2, got {m}; use ErrorRates"
            )));
        }
        Self::uniform_family(m, 0.5)
    }

    /// Diagonal `1 - eps`, off-diagonal `eps/(M-1)`.
    pub fn uniform_family(m: usize, eps: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Dimension(format!("M = {m}")));
        }
        let off = eps / (m - 1) as f64;
        let rows = (0..m)
            .map(|j| (0..m).map(|k| if j == k { 1.0 - eps } else { off }).collect())
            .collect();
        Self::new(rows)
    }

    pub fn outcomes(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn inverse(&self) -> &[Vec<f64>] {
        &self.inverse
    }

    pub fn prob(&self, x: usize, xt: usize) -> f64 {
        self.rows[x][xt]
    }

    /// Largest entry of `|C C^-1 - I|`.
    pub fn inverse_residual(&self) -> f64 {
        let m = self.outcomes();
        let c = DMatrix::from_fn(m, m, |j, k| self.rows[j][k]);
        let inv = DMatrix::from_fn(m, m, |j, k| self.inverse[j][k]);
        (c * inv - DMatrix::<f64>::identity(m, m)).amax()
    }
}

/// How surrogate outcomes are drawn for one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SurrogateNoise {
    Binary(ErrorRates),
    Confusion(ConfusionMatrix),
}

impl SurrogateNoise {
    pub fn noiseless(m: usize) -> Result<Self> {
        if m == 2 {
            Ok(Self::Binary(ErrorRates::noiseless()))
        } else {
            ConfusionMatrix::uniform_family(m, 0.0).map(Self::Confusion)
        }
    }

    pub fn outcomes(&self) -> usize {
        match self {
            Self::Binary(_) => 2,
            Self::Confusion(c) => c.outcomes(),
        }
    }

    pub fn prob(&self, x: usize, xt: usize) -> f64 {
        match self {
            Self::Binary(e) => e.prob(x, xt),
            Self::Confusion(c) => c.prob(x, xt),
        }
    }

    /// Surrogate-scored values `phi_k` for every surrogate outcome `k`.
    pub fn phi_vector(&self, rule: &ScoringRule, p: &Prediction) -> Result<Vec<f64>> {
        if p.outcomes() != self.outcomes() {
            return Err(Error::Dimension(format!(
                "prediction over {} outcomes, noise over {}",
                p.outcomes(),
                self.outcomes()
            )));
        }
        match self {
            Self::Binary(e) => Ok(vec![phi_binary(rule, p, 0, e), phi_binary(rule, p, 1, e)]),
            Self::Confusion(c) => Ok(phi_multi(rule, p, c)),
        }
    }

    /// Sample a surrogate outcome from row `x` using one uniform draw.
    pub fn draw(&self, x: usize, u: f64) -> usize {
        let m = self.outcomes();
        let mut acc = 0.0;
        for k in 0..m {
            acc += self.prob(x, k);
            if u < acc {
                return k;
            }
        }
        // rounding left a sliver above the last cumulative sum
        (0..m).rev().find(|&k| self.prob(x, k) > 0.0).unwrap_or(x)
    }
}

fn phi_binary(rule: &ScoringRule, p: &Prediction, xt: usize, e: &ErrorRates) -> f64 {
    let s_xt = rule.score_unchecked(xt, p);
    let s_other = rule.score_unchecked(1 - xt, p);
    ((1.0 - e.rate(1 - xt)) * s_xt - e.rate(xt) * s_other) / (1.0 - e.e0() - e.e1())
}

fn phi_multi(rule: &ScoringRule, p: &Prediction, c: &ConfusionMatrix) -> Vec<f64> {
    let m = c.outcomes();
    let s = DVector::from_vec(rule.score_vector(p));
    let inv = DMatrix::from_fn(m, m, |j, k| c.inverse()[j][k]);
    (inv * s).iter().copied().collect()
}

/// Unbiased surrogate score of a binary report against surrogate outcome `xt`.
pub fn surrogate_score_binary(rule: &ScoringRule, p: &Prediction, xt: usize, e: &ErrorRates) -> Result<f64> {
    if p.outcomes() != 2 {
        return Err(Error::Dimension(format!(
            "binary operator on {} outcomes",
            p.outcomes()
        )));
    }
    if xt > 1 {
        return Err(Error::InvalidOutcome { index: xt, outcomes: 2 });
    }
    if (e.e0() + e.e1() - 1.0).abs() <= TOL {
        return Err(Error::DegenerateNoise { e0: e.e0(), e1: e.e1() });
    }
    Ok(phi_binary(rule, p, xt, e))
}

/// Component `xt` of `C^-1 s(p)`.
pub fn surrogate_score_multi(rule: &ScoringRule, p: &Prediction, xt: usize, c: &ConfusionMatrix) -> Result<f64> {
    if p.outcomes() != c.outcomes() {
        return Err(Error::Dimension(format!(
            "prediction over {} outcomes, confusion over {}",
            p.outcomes(),
            c.outcomes()
        )));
    }
    if xt >= c.outcomes() {
        return Err(Error::InvalidOutcome {
            index: xt,
            outcomes: c.outcomes(),
        });
    }
    Ok(phi_multi(rule, p, c)[xt])
}

pub fn uniform_confusion(m: usize) -> Result<ConfusionMatrix> {
    ConfusionMatrix::uniform(m)
}

/// Exact expectation of the surrogate score over surrogate outcomes given true `x`.
pub fn unbiasedness_oracle(rule: &ScoringRule, p: &Prediction, x: usize, noise: &SurrogateNoise) -> Result<f64> {
    if x >= noise.outcomes() {
        return Err(Error::InvalidOutcome {
            index: x,
            outcomes: noise.outcomes(),
        });
    }
    let phi = noise.phi_vector(rule, p)?;
    Ok(phi.iter().enumerate().map(|(k, v)| noise.prob(x, k) * v).sum())
}
