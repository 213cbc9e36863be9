//! Synthetic prediction and wager models used by the simulations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{Error, Result};
use crate::types::{Game, GameInstance, OutcomeModel, Prediction};

const Q_CLIP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PredictionModel {
    Uniform,
    LogitNormal { alpha: f64, sigma2: f64 },
    Synthetic,
}

impl PredictionModel {
    pub fn logit_normal_default() -> Self {
        Self::LogitNormal {
            alpha: 2.0,
            sigma2: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::LogitNormal { alpha, sigma2 } if !(alpha > 0.0 && sigma2 >= 0.0) => Err(Error::InvalidParameter(
                format!("logit-normal needs alpha > 0 and sigma2 >= 0, got {alpha}, {sigma2}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::LogitNormal { .. } => "logit-normal",
            Self::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for PredictionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LogitNormal { alpha, sigma2 } => write!(f, "logit-normal:{alpha},{sigma2}"),
            _ => f.write_str(self.tag()),
        }
    }
}

fn two_params(s: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(Error::InvalidParameter(format!("bad {what} parameters '{s}'"))),
        },
        _ => Err(Error::InvalidParameter(format!(
            "{what} takes two parameters, got '{s}'"
        ))),
    }
}

impl FromStr for PredictionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let model = match s.split_once(':') {
            None => match s.as_str() {
                "uniform" => Self::Uniform,
                "logit-normal" | "logit_normal" => Self::logit_normal_default(),
                "synthetic" => Self::Synthetic,
                _ => return Err(Error::InvalidParameter(format!("unknown prediction model '{s}'"))),
            },
            Some(("logit-normal" | "logit_normal", args)) => {
                let (alpha, sigma2) = two_params(args, "logit-normal")?;
                Self::LogitNormal { alpha, sigma2 }
            }
            Some(_) => return Err(Error::InvalidParameter(format!("unknown prediction model '{s}'"))),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WagerModel {
    Uniform,
    Pareto { shape: f64, scale: f64 },
}

impl WagerModel {
    pub fn pareto_default() -> Self {
        Self::Pareto {
            shape: 1.16,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Pareto { shape, scale } if !(shape > 0.0 && scale > 0.0) => Err(Error::InvalidParameter(format!(
                "Pareto needs positive shape and scale, got {shape}, {scale}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Pareto { .. } => "pareto",
        }
    }
}

impl fmt::Display for WagerModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => f.write_str("uniform"),
            Self::Pareto { shape, scale } => write!(f, "pareto:{shape},{scale}"),
        }
    }
}

impl FromStr for WagerModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let model = match s.split_once(':') {
            None => match s.as_str() {
                "uniform" => Self::Uniform,
                "pareto" => Self::pareto_default(),
                _ => return Err(Error::InvalidParameter(format!("unknown wager model '{s}'"))),
            },
            Some(("pareto", args)) => {
                let (shape, scale) = two_params(args, "pareto")?;
                Self::Pareto { shape, scale }
            }
            Some(_) => return Err(Error::InvalidParameter(format!("unknown wager model '{s}'"))),
        };
        model.validate()?;
        Ok(model)
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    StdNormal::standard().cdf(z)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Uniform draw from the probability simplex via normalized exponential spacings.
pub fn uniform_simplex<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

fn binary(p1: f64) -> Prediction {
    Prediction::binary(p1.clamp(0.0, 1.0)).expect("clamped probability")
}

/// Synthetic model from explicit latent signals: `q = Phi(sum u)`, `p_i = Phi(u_i / sqrt(2N - 1))`.
pub fn synthetic_from_latents(u: &[f64]) -> (Vec<f64>, Vec<Prediction>) {
    let n = u.len() as f64;
    let q = std_normal_cdf(u.iter().sum());
    let preds = u
        .iter()
        .map(|ui| binary(std_normal_cdf(ui / (2.0 * n - 1.0).sqrt())))
        .collect();
    (vec![1.0 - q, q], preds)
}

/// Happening probabilities and `n` reports; draws `q` first, then reports in agent order.
pub fn gen_predictions<R: Rng + ?Sized>(
    model: &PredictionModel,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<Prediction>)> {
    model.validate()?;
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least two outcomes, got {m}")));
    }
    if m > 2 && !matches!(model, PredictionModel::Uniform) {
        return Err(Error::InvalidParameter(format!(
            "the {} model is binary only",
            model.tag()
        )));
    }
    match *model {
        PredictionModel::Uniform if m == 2 => {
            let q: f64 = rng.random();
            let preds = (0..n).map(|_| binary(rng.random())).collect();
            Ok((vec![1.0 - q, q], preds))
        }
        PredictionModel::Uniform => {
            let q = uniform_simplex(m, rng);
            let preds = (0..n)
                .map(|_| Prediction::new(uniform_simplex(m, rng)))
                .collect::<Result<_>>()?;
            Ok((q, preds))
        }
        PredictionModel::LogitNormal { alpha, sigma2 } => {
            let q = rng.random::<f64>().clamp(Q_CLIP, 1.0 - Q_CLIP);
            let mean = (q / (1.0 - q)).ln() / alpha;
            let normal = Normal::new(mean, sigma2.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let preds = (0..n).map(|_| binary(logistic(normal.sample(rng)))).collect();
            Ok((vec![1.0 - q, q], preds))
        }
        PredictionModel::Synthetic => {
            let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            Ok(synthetic_from_latents(&u))
        }
    }
}

pub fn gen_wagers<R: Rng + ?Sized>(model: &WagerModel, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    model.validate()?;
    Ok(match *model {
        WagerModel::Uniform => vec![1.0; n],
        WagerModel::Pareto { shape, scale } => (0..n)
            .map(|_| {
                let u = 1.0 - rng.random::<f64>();
                scale * u.powf(-1.0 / shape)
            })
            .collect(),
    })
}

/// One simulated game with known happening probabilities.
pub fn gen_instance<R: Rng + ?Sized>(
    pred: &PredictionModel,
    wager: &WagerModel,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<GameInstance> {
    let (q, preds) = gen_predictions(pred, n, m, rng)?;
    let wagers = gen_wagers(wager, n, rng)?;
    GameInstance::new(Game::new(preds, wagers)?, OutcomeModel::Happening(q))
}
