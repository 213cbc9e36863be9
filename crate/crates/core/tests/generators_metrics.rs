use proptest::prelude::*;
use rand::SeedableRng;
use statrs::distribution::{ContinuousCDF, Normal};
use wager_core::generators::{
    gen_instance, gen_predictions, gen_wagers, synthetic_from_latents, uniform_simplex, PredictionModel, WagerModel,
};
use wager_core::metrics::{
    accuracy, accuracy_bins, exchange_identity_gap, exchange_rate, expected_exchange_rate,
    expected_exchange_rate_sampled, individual_risk, individual_risk_sampled, AccuracyBins,
};
use wager_core::randomized::{lws, substream, swme_distribution};
use wager_core::{
    mix_distributions, wswm, Configured, Game, Mechanism, MechanismId, OutcomeModel, ScoringRule, SimRng,
};

fn pair() -> Game {
    Game::binary(&[1.0, 0.0], &[1.0, 1.0]).unwrap()
}

fn mech(id: MechanismId) -> Configured {
    Configured::brier(id)
}

#[test]
fn simplex_draws_are_distributions() {
    let mut rng = SimRng::seed_from_u64(1);
    let mut mean = [0.0; 3];
    let draws = 20_000;
    for _ in 0..draws {
        let p = uniform_simplex(3, &mut rng);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| *v >= 0.0));
        mean.iter_mut().zip(&p).for_each(|(a, b)| *a += b / draws as f64);
    }
    // each coordinate is Beta(1, 2): mean 1/3, sd sqrt(2/36)
    let se = (2.0f64 / 36.0 / draws as f64).sqrt();
    assert!(mean.iter().all(|m| (m - 1.0 / 3.0).abs() < 4.0 * se), "{mean:?}");
}

#[test]
fn synthetic_latents() {
    let (q, preds) = synthetic_from_latents(&[0.0, 0.0, 0.0]);
    assert_eq!(q, vec![0.5, 0.5]);
    assert!(preds.iter().all(|p| p.p1() == 0.5));
    let phi = Normal::new(0.0, 1.0).unwrap();
    let (q, preds) = synthetic_from_latents(&[1.0, -0.25]);
    assert!((q[1] - phi.cdf(0.75)).abs() < 1e-12);
    assert!((preds[0].p1() - phi.cdf(1.0 / 3f64.sqrt())).abs() < 1e-12);
    assert!((preds[1].p1() - phi.cdf(-0.25 / 3f64.sqrt())).abs() < 1e-12);
}

#[test]
fn noiseless_logit_normal_is_deterministic_in_q() {
    let mut rng = SimRng::seed_from_u64(2);
    let model = PredictionModel::LogitNormal {
        alpha: 2.0,
        sigma2: 0.0,
    };
    for _ in 0..50 {
        let (q, preds) = gen_predictions(&model, 4, 2, &mut rng).unwrap();
        let logit = (q[1] / q[0]).ln();
        let want = 1.0 / (1.0 + (-logit / 2.0).exp());
        assert!(preds.iter().all(|p| (p.p1() - want).abs() < 1e-12));
    }
}

#[test]
fn pareto_wagers() {
    let mut rng = SimRng::seed_from_u64(3);
    let mut w = gen_wagers(&WagerModel::pareto_default(), 40_001, &mut rng).unwrap();
    assert!(w.iter().all(|v| *v >= 1.0));
    w.sort_by(f64::total_cmp);
    let median = w[w.len() / 2];
    let want = 2f64.powf(1.0 / 1.16);
    assert!((median - want).abs() < 0.03, "{median} vs {want}");
    let below_two = w.iter().filter(|v| **v < 2.0).count() as f64 / w.len() as f64;
    assert!((below_two - (1.0 - 2f64.powf(-1.16))).abs() < 0.01);
}

#[test]
fn uniform_wagers_are_one() {
    let mut rng = SimRng::seed_from_u64(0);
    assert_eq!(gen_wagers(&WagerModel::Uniform, 5, &mut rng).unwrap(), vec![1.0; 5]);
}

#[test]
fn model_validation_and_parsing() {
    let mut rng = SimRng::seed_from_u64(0);
    let logit = PredictionModel::logit_normal_default();
    assert!(gen_predictions(&logit, 3, 3, &mut rng).is_err());
    assert!(gen_predictions(&PredictionModel::Synthetic, 3, 3, &mut rng).is_err());
    assert!(gen_predictions(&PredictionModel::Uniform, 3, 1, &mut rng).is_err());
    assert!(gen_predictions(
        &PredictionModel::LogitNormal {
            alpha: 0.0,
            sigma2: 1.0
        },
        2,
        2,
        &mut rng
    )
    .is_err());
    assert!(gen_wagers(
        &WagerModel::Pareto {
            shape: -1.0,
            scale: 1.0
        },
        2,
        &mut rng
    )
    .is_err());
    assert_eq!("pareto".parse::<WagerModel>().unwrap(), WagerModel::pareto_default());
    assert_eq!(
        "pareto:2,3".parse::<WagerModel>().unwrap(),
        WagerModel::Pareto { shape: 2.0, scale: 3.0 }
    );
    assert!("zipf".parse::<WagerModel>().is_err());
    for m in [PredictionModel::Uniform, logit, PredictionModel::Synthetic] {
        assert_eq!(m.to_string().parse::<PredictionModel>().unwrap(), m);
    }
}

#[test]
fn instances_are_reproducible_per_stream() {
    let draw = |path: &[u64]| {
        let mut rng = substream(42, path);
        gen_instance(&PredictionModel::Uniform, &WagerModel::pareto_default(), 6, 2, &mut rng).unwrap()
    };
    assert_eq!(draw(&[1, 2]), draw(&[1, 2]));
    assert_ne!(draw(&[1, 2]), draw(&[1, 3]));
    let inst = draw(&[0]);
    assert_eq!(inst.game.agents(), 6);
    match inst.outcome {
        OutcomeModel::Happening(q) => assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12),
        OutcomeModel::Realized(_) => panic!("expected happening probabilities"),
    }
}

#[test]
fn multi_outcome_instances() {
    let mut rng = SimRng::seed_from_u64(5);
    let inst = gen_instance(&PredictionModel::Uniform, &WagerModel::Uniform, 4, 3, &mut rng).unwrap();
    assert_eq!(inst.game.outcomes(), 3);
}

#[test]
fn risk_examples() {
    let flat = Game::binary(&[0.8; 3], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(individual_risk(&mech(MechanismId::Wswm), &flat).unwrap(), vec![0.0; 3]);
    assert_eq!(
        individual_risk(&mech(MechanismId::Wswm), &pair()).unwrap(),
        vec![0.5, 0.5]
    );
    assert_eq!(
        individual_risk(&mech(MechanismId::Swme), &pair()).unwrap(),
        vec![1.0, 1.0]
    );
    assert_eq!(individual_risk(&mech(MechanismId::Lws), &flat).unwrap(), vec![1.0; 3]);
}

#[test]
fn sampled_risk_never_exceeds_exact() {
    let g = Game::binary(&[0.9, 0.2, 0.6, 0.4], &[1.0, 2.0, 0.5, 1.0]).unwrap();
    let mut rng = SimRng::seed_from_u64(6);
    for id in [MechanismId::Lws, MechanismId::Swme, MechanismId::RpSwme] {
        let m = mech(id);
        let exact = individual_risk(&m, &g).unwrap();
        let sampled = individual_risk_sampled(&m, &g, 2000, &mut rng).unwrap();
        for (s, e) in sampled.iter().zip(&exact) {
            assert!(*s <= e + 1e-12);
        }
    }
}

#[test]
fn exchange_rate_examples() {
    assert_eq!(exchange_rate(&[0.5, -0.5], &[1.0, 1.0]).unwrap(), 0.25);
    assert_eq!(exchange_identity_gap(&[0.5, -0.25, -0.25]), 0.0);
    assert!(exchange_rate(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    let q = [0.0, 1.0];
    let wswm_rate = expected_exchange_rate(&mech(MechanismId::Wswm), &pair(), &q).unwrap();
    assert!((wswm_rate - 0.25).abs() < 1e-12);
    let lws_rate = expected_exchange_rate(&mech(MechanismId::Lws), &pair(), &q).unwrap();
    assert!((lws_rate - 0.5).abs() < 1e-12);
}

#[test]
fn sampled_exchange_rate_is_close() {
    let g = Game::binary(&[0.9, 0.2, 0.6], &[1.0, 2.0, 0.5]).unwrap();
    let q = [0.3, 0.7];
    let m = mech(MechanismId::RpSwme);
    let exact = expected_exchange_rate(&m, &g, &q).unwrap();
    let mut rng = SimRng::seed_from_u64(7);
    let sampled = expected_exchange_rate_sampled(&m, &g, &q, 50_000, &mut rng).unwrap();
    assert!((exact - sampled).abs() < 0.01, "{exact} vs {sampled}");
}

#[test]
fn accuracy_binning() {
    assert_eq!(accuracy(0.8, 1.0), 0.8);
    assert!((accuracy(0.8, 0.0) - 0.2).abs() < 1e-15);
    let bins = AccuracyBins::new(10);
    assert_eq!(bins.bin_of(0.0), 0);
    assert_eq!(bins.bin_of(0.95), 9);
    assert_eq!(bins.bin_of(1.0), 9);
    let stats = accuracy_bins(&[(0.05, 1.0), (0.07, -1.0), (0.95, 0.5)], 10);
    assert_eq!(stats.len(), 10);
    assert_eq!(stats[0].count, 2);
    assert!((stats[0].std_norm_payoff.unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(stats[0].frac_not_losing, Some(0.5));
    assert_eq!(stats[9].std_norm_payoff, None);
    assert_eq!(stats[9].frac_not_losing, Some(1.0));
    assert_eq!(stats[4].count, 0);
    assert_eq!(stats[4].frac_not_losing, None);
}

fn game_strategy() -> impl Strategy<Value = Game> {
    (2usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(0.05f64..5.0, n),
        )
            .prop_map(|(p, w)| Game::binary(&p, &w).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exchange_identity_holds(g in game_strategy(), x in 0usize..2) {
        let pay = wswm(&g, x, &ScoringRule::Brier).unwrap();
        prop_assert!(exchange_identity_gap(&pay).abs() < 1e-9);
        let d = lws(&g, x, &ScoringRule::Brier).unwrap();
        for pt in d.support() {
            prop_assert!(exchange_identity_gap(&pt.payoffs).abs() < 1e-9);
        }
    }

    #[test]
    fn risk_is_a_fraction(g in game_strategy()) {
        for id in [MechanismId::Wswm, MechanismId::Lws, MechanismId::Swme, MechanismId::RpSwme] {
            let r = individual_risk(&mech(id), &g).unwrap();
            prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn mixing_takes_the_larger_risk(g in game_strategy(), lambda in 0.01f64..0.99) {
        let risk = |lo: &[f64]| -> Vec<f64> {
            lo.iter().zip(g.wagers()).map(|(l, w)| (-l / w).clamp(0.0, 1.0)).collect()
        };
        for x in 0..2 {
            let a = lws(&g, x, &ScoringRule::Brier).unwrap();
            let b = swme_distribution(&g, x, &ScoringRule::Brier).unwrap();
            let m = mix_distributions(&a, &b, lambda).unwrap();
            let (ra, rb, rm) = (risk(&a.min_payoffs()), risk(&b.min_payoffs()), risk(&m.min_payoffs()));
            for i in 0..g.agents() {
                prop_assert!((rm[i] - ra[i].max(rb[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exchange_rate_is_a_fraction(g in game_strategy(), x in 0usize..2) {
        let m = mech(MechanismId::RpSwme);
        for pt in m.distribution(&g, x).unwrap().support() {
            let r = exchange_rate(&pt.payoffs, g.wagers()).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        }
    }
}
