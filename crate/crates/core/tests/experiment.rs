use wager_core::experiment::{
    fmt_num, run_efficiency_sweep, run_variance_sweep, sweep_instance, write_efficiency_csv, write_variance_csv,
    ExperimentConfig, CSV_NOTE,
};
use wager_core::generators::PredictionModel;
use wager_core::metrics::{expected_exchange_rate, individual_risk, Evaluation};
use wager_core::{Configured, Execution, MechanismId, OutcomeModel};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::efficiency_default();
    cfg.apply_text("seed = 3\nn_min = 2\nn_max = 6\ninstances = 15\n")
        .unwrap();
    cfg
}

#[test]
fn seed_is_required() {
    let cfg = ExperimentConfig::efficiency_default();
    assert!(cfg.validate().is_err());
    assert!(run_efficiency_sweep(&cfg, Execution::Sequential).is_err());
}

#[test]
fn invalid_settings_are_rejected() {
    let bad = |text: &str| {
        let mut cfg = small();
        cfg.apply_text(text).and_then(|_| cfg.validate()).is_err()
    };
    assert!(bad("n_min = 1"));
    assert!(bad("n_min = 8\nn_max = 4"));
    assert!(bad("n_step = 0"));
    assert!(bad("instances = 0"));
    assert!(bad("m = 3\npred_model = synthetic"));
    assert!(bad("colour = blue"));
    assert!(bad("instances = many"));
    assert!(bad("mechanisms = wswm;bogus"));
    assert!(bad("just a line"));
    assert!(!bad("# comment only\n\nbins = 5 # trailing"));
}

#[test]
fn config_text_and_ranges() {
    let mut cfg = small();
    cfg.apply_text("mechanisms = lws; swm:0.1,0.2 rp-swme\nn_step = 2\npred_model = logit-normal\n")
        .unwrap();
    assert_eq!(
        cfg.mechanisms,
        vec![
            MechanismId::Lws,
            MechanismId::Swm { e0: 0.1, e1: 0.2 },
            MechanismId::RpSwme
        ]
    );
    assert_eq!(cfg.n_values(), vec![2, 4, 6]);
    assert_eq!(cfg.pred_model, PredictionModel::logit_normal_default());
    cfg.validate().unwrap();
}

#[test]
fn efficiency_rows_match_direct_evaluation() {
    let cfg = small();
    let rows = run_efficiency_sweep(&cfg, Execution::Sequential).unwrap();
    assert_eq!(rows.len(), cfg.mechanisms.len() * cfg.n_values().len());
    for row in rows.iter().filter(|r| r.n == 4) {
        let id: MechanismId = cfg
            .mechanisms
            .iter()
            .copied()
            .find(|m| m.to_string() == row.mechanism)
            .unwrap();
        let mech = Configured::brier(id);
        let (mut risk, mut rate) = (0.0, 0.0);
        for i in 0..cfg.instances {
            let (inst, _) = sweep_instance(&cfg, 4, i).unwrap();
            let q = match &inst.outcome {
                OutcomeModel::Happening(q) => q.clone(),
                OutcomeModel::Realized(_) => unreachable!(),
            };
            let r = individual_risk(&mech, &inst.game).unwrap();
            risk += r.iter().sum::<f64>() / 4.0;
            rate += expected_exchange_rate(&mech, &inst.game, &q).unwrap();
        }
        let k = cfg.instances as f64;
        assert!((row.avg_risk - risk / k).abs() < 1e-12, "{}", row.mechanism);
        assert!((row.avg_exchange_rate - rate / k).abs() < 1e-12, "{}", row.mechanism);
        assert_eq!(row.evaluation, Evaluation::Exact);
    }
}

#[test]
fn randomization_raises_risk_and_exchange() {
    let rows = run_efficiency_sweep(&small(), Execution::Sequential).unwrap();
    for n in [2, 4, 6] {
        let get = |name: &str| rows.iter().find(|r| r.n == n && r.mechanism == name).unwrap();
        assert!(get("lws").avg_risk > get("wswm").avg_risk);
        assert!(get("lws").avg_exchange_rate > get("wswm").avg_exchange_rate);
        assert!(get("rp-swme").avg_risk > get("wswm").avg_risk);
    }
}

#[test]
fn sweeps_are_deterministic_across_execution_modes() {
    let cfg = small();
    let a = run_efficiency_sweep(&cfg, Execution::Sequential).unwrap();
    let b = run_efficiency_sweep(&cfg, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed = Some(4);
    assert_ne!(a, run_efficiency_sweep(&other, Execution::Sequential).unwrap());
    let mut vcfg = ExperimentConfig::variance_default();
    vcfg.apply_text("seed = 3\nn_min = 4\nn_max = 4\ninstances = 200\n")
        .unwrap();
    assert_eq!(
        run_variance_sweep(&vcfg, Execution::Sequential).unwrap(),
        run_variance_sweep(&vcfg, Execution::Parallel).unwrap()
    );
}

#[test]
fn large_populations_fall_back_to_sampling() {
    let mut cfg = small();
    cfg.apply_text("n_min = 18\nn_max = 18\ninstances = 2\nsample_cap = 50\nmechanisms = rp-swme;swme")
        .unwrap();
    let rows = run_efficiency_sweep(&cfg, Execution::Sequential).unwrap();
    assert_eq!(rows[0].evaluation, Evaluation::Exact);
    assert_eq!(rows[1].evaluation, Evaluation::Sampled { draws: 50 });
    let mut buf = Vec::new();
    write_efficiency_csv(&rows, &mut buf).unwrap();
    assert!(String::from_utf8(buf)
        .unwrap()
        .lines()
        .nth(3)
        .unwrap()
        .ends_with(",sampled"));
}

#[test]
fn variance_rows_cover_every_observation() {
    let mut cfg = ExperimentConfig::variance_default();
    cfg.apply_text("seed = 5\nn_min = 3\nn_max = 3\ninstances = 100\nbins = 5\n")
        .unwrap();
    let rows = run_variance_sweep(&cfg, Execution::Sequential).unwrap();
    assert_eq!(rows.len(), cfg.mechanisms.len() * 5);
    for mech in ["lws", "rp-swme"] {
        let total: u64 = rows.iter().filter(|r| r.mechanism == mech).map(|r| r.stats.count).sum();
        assert_eq!(total, 300);
    }
    cfg.m = 3;
    assert!(run_variance_sweep(&cfg, Execution::Sequential).is_err());
}

#[test]
fn csv_layout() {
    let rows = run_efficiency_sweep(&small(), Execution::Sequential).unwrap();
    let mut buf = Vec::new();
    write_efficiency_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_NOTE);
    assert_eq!(
        lines[1],
        "mechanism,n,pred_model,wager_model,avg_risk,avg_exchange_rate,mode"
    );
    assert_eq!(lines.len(), rows.len() + 2);
    assert!(lines[2..].iter().all(|l| l.split(',').count() == 7));

    let mut cfg = ExperimentConfig::variance_default();
    cfg.apply_text("seed = 5\nn_min = 2\nn_max = 2\ninstances = 3\nbins = 10\n")
        .unwrap();
    let vrows = run_variance_sweep(&cfg, Execution::Sequential).unwrap();
    let mut buf = Vec::new();
    write_variance_csv(&vrows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().skip(2).any(|l| l.ends_with(",0,NA,NA")));
    assert!(text.lines().skip(2).all(|l| l.split(',').count() == 8));
}

#[test]
fn number_formatting() {
    assert_eq!(fmt_num(0.25), "0.25");
    assert_eq!(fmt_num(1.0), "1");
    assert_eq!(fmt_num(-0.0), "0");
    assert_eq!(fmt_num(f64::NAN), "NA");
    assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
}
