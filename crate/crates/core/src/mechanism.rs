//! A uniform interface over every mechanism in the crate.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deterministic::{nawm, wswm, AverageMode};
use crate::error::{Error, Result};
use crate::randomized::{self, SimRng};
use crate::scoring::{ConfusionMatrix, ErrorRates, ScoringRule, SurrogateNoise};
use crate::types::{Game, PayoffDistribution};

/// Which mechanism to run, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MechanismId {
    Wswm,
    Nawm {
        average: AverageMode,
    },
    Lws,
    LwsMixed {
        lambda: f64,
    },
    /// Fixed surrogate rates; for more than two outcomes `e0` is the uniform-family mass.
    Swm {
        e0: f64,
        e1: f64,
    },
    Swme,
    RpSwme,
    SNawm {
        e0: f64,
        e1: f64,
    },
    /// Rates of the noisy ground-truth estimate.
    NoisySwme {
        e0: f64,
        e1: f64,
    },
}

impl MechanismId {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::LwsMixed { lambda } if !(0.0..=1.0).contains(&lambda) => Err(Error::InvalidParameter(format!(
                "mixture weight {lambda} outside [0, 1]"
            ))),
            Self::Swm { e0, e1 } | Self::SNawm { e0, e1 } | Self::NoisySwme { e0, e1 } => {
                ErrorRates::new(e0, e1).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn is_randomized(&self) -> bool {
        !matches!(self, Self::Wswm | Self::Nawm { .. })
    }
}

fn rates_suffix(e0: f64, e1: f64) -> String {
    if e0 == e1 {
        format!("{e0}")
    } else {
        format!("{e0},{e1}")
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Wswm => write!(f, "wswm"),
            Self::Nawm {
                average: AverageMode::WagerWeighted,
            } => write!(f, "nawm"),
            Self::Nawm {
                average: AverageMode::Unweighted,
            } => write!(f, "nawm-unweighted"),
            Self::Lws => write!(f, "lws"),
            Self::LwsMixed { lambda } => write!(f, "lws-mixed:{lambda}"),
            Self::Swm { e0, e1 } => write!(f, "swm:{}", rates_suffix(e0, e1)),
            Self::Swme => write!(f, "swme"),
            Self::RpSwme => write!(f, "rp-swme"),
            Self::SNawm { e0, e1 } => write!(f, "s-nawm:{}", rates_suffix(e0, e1)),
            Self::NoisySwme { e0, e1 } => write!(f, "noisy-swme:{}", rates_suffix(e0, e1)),
        }
    }
}

fn parse_rates(name: &str, arg: Option<&str>) -> Result<(f64, f64)> {
    let arg = arg.ok_or_else(|| Error::InvalidParameter(format!("{name} needs error rates, e.g. {name}:0.25")))?;
    let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("bad rate '{s}' in {name}")))
    };
    match parts.as_slice() {
        [e] => {
            let e = num(e)?;
            Ok((e, e))
        }
        [a, b] => Ok((num(a)?, num(b)?)),
        _ => Err(Error::InvalidParameter(format!("bad rates '{arg}' in {name}"))),
    }
}

impl FromStr for MechanismId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let id = match (name, arg) {
            ("wswm", None) => Self::Wswm,
            ("nawm", None) => Self::Nawm {
                average: AverageMode::WagerWeighted,
            },
            ("nawm-unweighted", None) => Self::Nawm {
                average: AverageMode::Unweighted,
            },
            ("lws", None) => Self::Lws,
            ("lws-mixed", Some(a)) => Self::LwsMixed {
                lambda: a
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad mixture weight '{a}'")))?,
            },
            ("swm", _) => {
                let (e0, e1) = parse_rates(name, arg)?;
                Self::Swm { e0, e1 }
            }
            ("swme", None) => Self::Swme,
            ("rp-swme", None) => Self::RpSwme,
            ("s-nawm", _) => {
                let (e0, e1) = parse_rates(name, arg)?;
                Self::SNawm { e0, e1 }
            }
            ("noisy-swme", _) => {
                let (e0, e1) = parse_rates(name, arg)?;
                Self::NoisySwme { e0, e1 }
            }
            _ => return Err(Error::InvalidParameter(format!("unknown mechanism '{s}'"))),
        };
        id.validate()?;
        Ok(id)
    }
}

/// Anything that maps a game and a true outcome to a payoff distribution.
pub trait Mechanism: Send + Sync {
    fn name(&self) -> String;

    /// Exact distribution of joint net payoffs at true outcome `x`.
    fn distribution(&self, game: &Game, x: usize) -> Result<PayoffDistribution>;

    /// One realization of the joint net payoffs.
    fn sample(&self, game: &Game, x: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        let d = self.distribution(game, x)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for pt in d.support() {
            acc += pt.prob;
            if u < acc {
                return Ok(pt.payoffs.clone());
            }
        }
        Ok(d.support()[d.len() - 1].payoffs.clone())
    }

    fn expected_payoffs(&self, game: &Game, x: usize) -> Result<Vec<f64>> {
        Ok(self.distribution(game, x)?.expected())
    }

    /// Per-agent minimum payoff over every outcome and every support point.
    fn worst_case(&self, game: &Game) -> Result<Vec<f64>> {
        let mut worst = vec![f64::INFINITY; game.agents()];
        for x in 0..game.outcomes() {
            let lo = self.distribution(game, x)?.min_payoffs();
            worst.iter_mut().zip(lo).for_each(|(a, b)| *a = a.min(b));
        }
        Ok(worst)
    }

    /// `E[sum_i max(pi_i, 0)]` at outcome `x`.
    fn expected_exchange(&self, game: &Game, x: usize) -> Result<f64> {
        Ok(self
            .distribution(game, x)?
            .expectation_of(|v| v.iter().map(|a| a.max(0.0)).sum()))
    }
}

/// A mechanism id bound to a scoring rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Configured {
    pub id: MechanismId,
    pub rule: ScoringRule,
}

impl Configured {
    pub fn new(id: MechanismId, rule: ScoringRule) -> Result<Self> {
        id.validate()?;
        Ok(Self { id, rule })
    }

    pub fn brier(id: MechanismId) -> Self {
        Self {
            id,
            rule: ScoringRule::Brier,
        }
    }

    fn fixed_noise(&self, game: &Game, e0: f64, e1: f64) -> Result<Vec<SurrogateNoise>> {
        let noise = if game.outcomes() == 2 {
            SurrogateNoise::Binary(ErrorRates::new(e0, e1)?)
        } else {
            if e0 != e1 {
                return Err(Error::InvalidParameter(
                    "asymmetric rates are binary only; use a single mass for more outcomes".into(),
                ));
            }
            SurrogateNoise::Confusion(ConfusionMatrix::uniform_family(game.outcomes(), e0)?)
        };
        Ok(vec![noise; game.agents()])
    }

    fn surrogate_sample(&self, game: &Game, x: usize, noise: &[SurrogateNoise], rng: &mut SimRng) -> Result<Vec<f64>> {
        let u: Vec<f64> = (0..game.agents()).map(|_| rng.random()).collect();
        let xt = randomized::surrogate::draw_surrogates(noise, x, &u);
        randomized::surrogate::swm_realization(game, &self.rule, noise, &xt)
    }
}

impl Mechanism for Configured {
    fn name(&self) -> String {
        self.id.to_string()
    }

    fn distribution(&self, game: &Game, x: usize) -> Result<PayoffDistribution> {
        let rule = &self.rule;
        let wagers = game.wagers().to_vec();
        match self.id {
            MechanismId::Wswm => PayoffDistribution::point(wswm(game, x, rule)?, wagers),
            MechanismId::Nawm { average } => PayoffDistribution::point(nawm(game, x, rule, average)?, wagers),
            MechanismId::Lws => randomized::lws(game, x, rule),
            MechanismId::LwsMixed { lambda } => randomized::lws_mixed(game, x, rule, lambda),
            MechanismId::Swm { e0, e1 } => {
                randomized::swm_distribution_unchecked(game, x, rule, &self.fixed_noise(game, e0, e1)?)
            }
            MechanismId::Swme => randomized::swme_distribution(game, x, rule),
            MechanismId::RpSwme => randomized::rp_swme_distribution(game, x, rule),
            MechanismId::SNawm { e0, e1 } => randomized::surrogate_nawm_distribution(
                game,
                x,
                rule,
                &self.fixed_noise(game, e0, e1)?,
                AverageMode::WagerWeighted,
            ),
            MechanismId::NoisySwme { e0, e1 } => {
                randomized::noisy_swme_distribution(game, x, &ErrorRates::new(e0, e1)?, rule)
            }
        }
    }

    fn sample(&self, game: &Game, x: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        let rule = &self.rule;
        match self.id {
            MechanismId::Wswm => wswm(game, x, rule),
            MechanismId::Nawm { average } => nawm(game, x, rule, average),
            MechanismId::Lws => randomized::sample_lottery(&wswm(game, x, rule)?, game.wagers(), rng),
            MechanismId::LwsMixed { lambda } => {
                let det = wswm(game, x, rule)?;
                if rng.random::<f64>() < lambda {
                    randomized::sample_lottery(&det, game.wagers(), rng)
                } else {
                    Ok(det)
                }
            }
            MechanismId::Swm { e0, e1 } => {
                let noise = self.fixed_noise(game, e0, e1)?;
                self.surrogate_sample(game, x, &noise, rng)
            }
            MechanismId::Swme => {
                let noise = vec![randomized::swme_noise(game, rule)?; game.agents()];
                self.surrogate_sample(game, x, &noise, rng)
            }
            MechanismId::RpSwme => randomized::sample_rp_swme(game, x, rule, rng),
            MechanismId::SNawm { e0, e1 } => {
                let noise = self.fixed_noise(game, e0, e1)?;
                let anchor = crate::deterministic::anchor_payoffs(game, x, rule, AverageMode::WagerWeighted)?;
                let pay = self.surrogate_sample(game, x, &noise, rng)?;
                Ok(pay.iter().zip(&anchor).map(|(p, a)| p - a).collect())
            }
            MechanismId::NoisySwme { e0, e1 } => {
                randomized::sample_noisy_swme(game, x, &ErrorRates::new(e0, e1)?, rule, rng)
            }
        }
    }

    fn expected_payoffs(&self, game: &Game, x: usize) -> Result<Vec<f64>> {
        match self.id {
            MechanismId::RpSwme => randomized::rp_swme_expected(game, x, &self.rule),
            _ => Ok(self.distribution(game, x)?.expected()),
        }
    }

    fn worst_case(&self, game: &Game) -> Result<Vec<f64>> {
        let rule = &self.rule;
        match self.id {
            MechanismId::Wswm | MechanismId::Nawm { .. } => {
                let mut worst = vec![f64::INFINITY; game.agents()];
                for x in 0..game.outcomes() {
                    let pay = match self.id {
                        MechanismId::Nawm { average } => nawm(game, x, rule, average)?,
                        _ => wswm(game, x, rule)?,
                    };
                    worst.iter_mut().zip(pay).for_each(|(a, b)| *a = a.min(b));
                }
                Ok(worst)
            }
            MechanismId::Swm { e0, e1 } => randomized::swm_worst_case(game, rule, &self.fixed_noise(game, e0, e1)?),
            MechanismId::Swme => randomized::swme_worst_case(game, rule),
            MechanismId::RpSwme => randomized::rp_swme_worst_case(game, rule),
            MechanismId::SNawm { e0, e1 } => {
                let noise = self.fixed_noise(game, e0, e1)?;
                let mut worst = vec![f64::INFINITY; game.agents()];
                for x in 0..game.outcomes() {
                    let anchor = crate::deterministic::anchor_payoffs(game, x, rule, AverageMode::WagerWeighted)?;
                    let lo = randomized::surrogate::swm_worst_case_at(game, x, rule, &noise)?;
                    for ((acc, l), a) in worst.iter_mut().zip(lo).zip(anchor) {
                        *acc = acc.min(l - a);
                    }
                }
                Ok(worst)
            }
            _ => {
                let mut worst = vec![f64::INFINITY; game.agents()];
                for x in 0..game.outcomes() {
                    let lo = self.distribution(game, x)?.min_payoffs();
                    worst.iter_mut().zip(lo).for_each(|(a, b)| *a = a.min(b));
                }
                Ok(worst)
            }
        }
    }

    fn expected_exchange(&self, game: &Game, x: usize) -> Result<f64> {
        match self.id {
            MechanismId::RpSwme => randomized::rp_swme_expected_exchange(game, x, &self.rule),
            _ => Ok(self
                .distribution(game, x)?
                .expectation_of(|v| v.iter().map(|a| a.max(0.0)).sum())),
        }
    }
}
