use wager_core::randomized::enumerate_partitions;
use wager_core::verifier::stubs::Stub;
use wager_core::verifier::{
    check_budget_balance, check_ir_sic, check_no_arbitrage, check_po, check_sybilproof, check_symmetries,
    claimed_properties, incentive_configs, run_suite, split_agent, suite_instances, Balance, Property, SuiteConfig,
};
use wager_core::{AverageMode, Configured, Execution, Game, MechanismId};

const SEQ: Execution = Execution::Sequential;

fn mech(id: MechanismId) -> Configured {
    Configured::brier(id)
}

fn small_suite() -> SuiteConfig {
    SuiteConfig {
        n_values: vec![2, 3, 4],
        instances: 12,
        incentive_configs: 4,
        ..SuiteConfig::default()
    }
}

fn brier(x: usize, p1: f64) -> f64 {
    if x == 1 {
        1.0 - (1.0 - p1).powi(2)
    } else {
        1.0 - p1 * p1
    }
}

/// Expected payoff of the agents in `who` under `belief`, by averaging the
/// weighted score over every pairing.
fn rp_oracle(p1: &[f64], w: &[f64], who: &[usize], belief: f64) -> f64 {
    let mut total = 0.0;
    for (part, prob) in enumerate_partitions(p1.len()).unwrap() {
        for grp in part.groups() {
            let wt: f64 = grp.iter().map(|&j| w[j]).sum();
            for &i in grp.iter().filter(|i| who.contains(i)) {
                for (x, bx) in [(0, 1.0 - belief), (1, belief)] {
                    let others: f64 = grp.iter().filter(|&&j| j != i).map(|&j| w[j] * brier(x, p1[j])).sum();
                    let rest = wt - w[i];
                    total += prob * bx * w[i] * (brier(x, p1[i]) * rest - others) / wt;
                }
            }
        }
    }
    total
}

#[test]
fn negative_controls_fail_their_target() {
    for stub in Stub::ALL {
        let reports = run_suite(&stub, &stub.claims(), &small_suite(), SEQ).unwrap();
        let target = reports.iter().find(|r| r.property == stub.target()).unwrap();
        assert!(
            !target.passed && target.asserted,
            "{} should fail {}",
            stub.tag(),
            stub.target()
        );
        let w = target.witness.as_ref().expect("witness");
        assert!(!w.detail.is_empty());
    }
}

#[test]
fn weighted_score_passes_its_claims() {
    let m = mech(MechanismId::Wswm);
    let reports = run_suite(&m, &claimed_properties(&m.id), &small_suite(), SEQ).unwrap();
    for r in reports.iter().filter(|r| r.asserted) {
        assert!(
            r.passed,
            "{} {}",
            r.property,
            r.witness.as_ref().map(|w| w.detail.as_str()).unwrap_or("")
        );
    }
}

#[test]
fn weighted_score_is_not_optimal_and_allows_arbitrage() {
    let games = suite_instances(&[2, 4], 10, 3).unwrap();
    let m = mech(MechanismId::Wswm);
    let po = check_po(&m, &games, SEQ).unwrap();
    assert!(!po.passed);
    assert_eq!(po.failed, po.checked);
    let arb = Game::binary(&[0.5, 0.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
    assert!(!check_no_arbitrage(&m, std::slice::from_ref(&arb), SEQ).unwrap().passed);
    let nawm = mech(MechanismId::Nawm {
        average: AverageMode::WagerWeighted,
    });
    let off_anchor = Game::binary(&[0.4, 0.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
    assert!(check_no_arbitrage(&nawm, &[off_anchor], SEQ).unwrap().passed);
    // reporting the others' average pays exactly zero, which has no strictly losing outcome
    let at_anchor = check_no_arbitrage(&nawm, &[arb], SEQ).unwrap();
    assert_eq!(at_anchor.witness.unwrap().agent, Some(0));
}

#[test]
fn lottery_is_optimal() {
    let games = suite_instances(&[2, 3, 5], 10, 4).unwrap();
    assert!(check_po(&mech(MechanismId::Lws), &games, SEQ).unwrap().passed);
}

#[test]
fn no_arbitrage_mechanism_is_weakly_balanced_only() {
    let games = suite_instances(&[3, 5], 20, 5).unwrap();
    let m = mech(MechanismId::Nawm {
        average: AverageMode::WagerWeighted,
    });
    assert!(check_budget_balance(&m, &games, Balance::Weak, SEQ).unwrap().passed);
    let strict = check_budget_balance(&m, &games, Balance::Strict, SEQ).unwrap();
    assert!(!strict.passed);
    assert!(strict.failed_fraction() > 0.0 && strict.failed_fraction() <= 1.0);
}

#[test]
fn incentive_checks() {
    let configs = incentive_configs(3, 5, 0.01, 6).unwrap();
    assert_eq!(configs.len(), 5);
    for c in &configs {
        assert_eq!(c.game.prediction(0).p1(), c.belief);
    }
    let (ir, sic) = check_ir_sic(&mech(MechanismId::RpSwme), &configs, 0.01, SEQ).unwrap();
    assert!(ir.passed && sic.passed);
    let (_, sic) = check_ir_sic(&Stub::ReportDistance, &configs, 0.01, SEQ).unwrap();
    assert!(!sic.passed);
}

#[test]
fn splitting_preserves_reports_and_total_wager() {
    let g = Game::binary(&[0.3, 0.8, 0.1], &[2.0, 1.0, 1.0]).unwrap();
    let s = split_agent(&g, 0.25).unwrap();
    assert_eq!(s.agents(), 4);
    assert_eq!(s.wagers(), &[0.5, 1.5, 1.0, 1.0]);
    assert_eq!(s.prediction(0), s.prediction(1));
    assert_eq!(s.prediction(2).p1(), 0.8);
}

#[test]
fn weighted_score_resists_splitting() {
    let games = suite_instances(&[3], 20, 7).unwrap();
    let splits: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    assert!(
        check_sybilproof(&mech(MechanismId::Wswm), &games, &splits, SEQ)
            .unwrap()
            .passed
    );
    assert!(
        !check_sybilproof(&Stub::SybilBonus, &games, &splits, SEQ)
            .unwrap()
            .passed
    );
}

#[test]
fn random_pairing_split_gain_matches_oracle() {
    let games = suite_instances(&[3], 20, 1 ^ 0x5B).unwrap();
    let splits: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let report = check_sybilproof(&mech(MechanismId::RpSwme), &games, &splits, SEQ).unwrap();
    assert!(!report.passed);
    let g = &report.witness.as_ref().unwrap().game;
    let p1: Vec<f64> = g.predictions().iter().map(|p| p.p1()).collect();
    let belief = p1[0];
    let whole = rp_oracle(&p1, g.wagers(), &[0], belief);
    let gained = splits.iter().any(|&f| {
        let s = split_agent(g, f).unwrap();
        let sp: Vec<f64> = s.predictions().iter().map(|p| p.p1()).collect();
        rp_oracle(&sp, s.wagers(), &[0, 1], belief) > whole + 1e-9
    });
    assert!(gained);
}

#[test]
fn symmetric_mechanisms_pass_symmetry_checks() {
    let games = suite_instances(&[2, 3, 4], 5, 8).unwrap();
    for id in [
        MechanismId::Wswm,
        MechanismId::Lws,
        MechanismId::Swme,
        MechanismId::RpSwme,
    ] {
        let (anon, neutral) = check_symmetries(&mech(id), &games, SEQ).unwrap();
        assert!(anon.passed && neutral.passed, "{id}");
    }
    let (anon, _) = check_symmetries(&Stub::Favoritism, &games, SEQ).unwrap();
    assert!(!anon.passed);
    let (_, neutral) = check_symmetries(&mech(MechanismId::Swm { e0: 0.1, e1: 0.3 }), &games, SEQ).unwrap();
    assert!(!neutral.passed);
}

#[test]
fn claims_follow_the_mechanism() {
    assert!(claimed_properties(&MechanismId::Lws).contains(&Property::Po));
    assert!(!claimed_properties(&MechanismId::Wswm).contains(&Property::Po));
    assert!(claimed_properties(&MechanismId::Swm { e0: 0.2, e1: 0.2 }).contains(&Property::Neutrality));
    assert!(!claimed_properties(&MechanismId::Swm { e0: 0.2, e1: 0.3 }).contains(&Property::Neutrality));
    assert!(claimed_properties(&MechanismId::Nawm {
        average: AverageMode::WagerWeighted
    })
    .contains(&Property::Webb));
}

#[test]
fn sequential_and_parallel_reports_agree() {
    let m = mech(MechanismId::RpSwme);
    let claims = claimed_properties(&m.id);
    let a = run_suite(&m, &claims, &small_suite(), Execution::Sequential).unwrap();
    let b = run_suite(&m, &claims, &small_suite(), Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn suite_config_round_trips() {
    let cfg = small_suite();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<SuiteConfig>(&text).unwrap(), cfg);
}

#[test]
fn instances_are_seeded() {
    assert_eq!(
        suite_instances(&[3, 5], 4, 9).unwrap(),
        suite_instances(&[3, 5], 4, 9).unwrap()
    );
    assert_ne!(
        suite_instances(&[3], 4, 9).unwrap(),
        suite_instances(&[3], 4, 10).unwrap()
    );
    assert!(suite_instances(&[3], 4, 9).unwrap().iter().all(|g| g.agents() == 3));
}
