//! One-shot wagering mechanisms with exact payoff distributions.
//!
//! Deterministic baselines (weighted-score and no-arbitrage wagering) sit next
//! to randomized mechanisms: the lottery wrapper, surrogate wagering with
//! automatic error-rate selection, its random-pairing form, the surrogate
//! no-arbitrage variant and the noisy-ground-truth variant. Every mechanism
//! produces an exact finite-support [`PayoffDistribution`], which the
//! [`verifier`] uses to check the axiomatic properties and the [`metrics`]
//! and [`experiment`] modules use for the simulation sweeps.
//!
//! ```
//! use wager_core::{Configured, Game, Mechanism, MechanismId};
//!
//! let game = Game::binary(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
//! let swme = Configured::brier(MechanismId::Swme);
//! let d = swme.distribution(&game, 1).unwrap();
//! assert_eq!(d.len(), 4);
//! assert!((d.min_payoffs()[0] + 1.0).abs() < 1e-12);
//! ```

pub mod deterministic;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod generators;
pub mod mechanism;
pub mod metrics;
pub mod numeric;
pub mod randomized;
pub mod scoring;
pub mod types;
pub mod verifier;

pub use deterministic::{nawm, wswm, AverageMode};
pub use error::{Error, Result};
pub use exec::Execution;
pub use mechanism::{Configured, Mechanism, MechanismId};
pub use randomized::SimRng;
pub use scoring::{ConfusionMatrix, ErrorRates, ScoringRule, SurrogateNoise};
pub use types::{
    mix_distributions, payoff_distribution_stats, AgentStats, Game, GameInstance, OutcomeModel, PayoffDistribution,
    Prediction, SupportPoint,
};
