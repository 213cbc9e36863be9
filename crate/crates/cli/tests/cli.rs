use std::fs;
use std::process::{Command, Output};

fn wager(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wager"))
        .args(args)
        .output()
        .expect("run wager")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn game_prints_the_lottery() {
    let o = wager(&[
        "game",
        "--reports",
        "1,0",
        "--wagers",
        "1,1",
        "--outcome",
        "1",
        "--mechanism",
        "lws",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("0.750000\t1.000000, -1.000000"), "{text}");
    assert!(text.contains("0.250000\t-1.000000, 1.000000"));
    assert!(text.contains("expected\t0.500000, -0.500000"));
}

#[test]
fn game_prints_surrogate_support() {
    let o = wager(&[
        "game",
        "--reports",
        "1,0",
        "--wagers",
        "1,1",
        "--outcome",
        "1",
        "--mechanism",
        "swme",
        "--seed",
        "3",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let support = text.lines().skip(3).take_while(|l| !l.starts_with("expected")).count();
    assert_eq!(support, 4);
    assert!(text.contains("worst\t-1.000000, -1.000000"));
    assert!(text.lines().any(|l| l.starts_with("draw\t")));
}

#[test]
fn game_accepts_multi_outcome_reports() {
    let o = wager(&[
        "game",
        "--reports",
        "0.2:0.5:0.3,0.6:0.2:0.2",
        "--wagers",
        "1,2",
        "--outcome",
        "2",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("mechanism wswm\noutcome 2\n"));
}

#[test]
fn bad_game_input_is_a_config_error() {
    for args in [
        &["game", "--reports", "1,0", "--wagers", "1", "--outcome", "1"][..],
        &["game", "--reports", "1.5,0", "--wagers", "1,1", "--outcome", "1"],
        &["game", "--reports", "1,0", "--wagers", "1,1", "--outcome", "2"],
        &[
            "game",
            "--reports",
            "1,0",
            "--wagers",
            "1,1",
            "--outcome",
            "1",
            "--mechanism",
            "nope",
        ],
    ] {
        assert_eq!(wager(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn sweeps_need_a_seed() {
    let o = wager(&["efficiency", "--set", "n_max=4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn bad_settings_are_config_errors() {
    assert_eq!(
        wager(&["efficiency", "--seed", "1", "--set", "n_min=1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        wager(&["variance", "--seed", "1", "--set", "nonsense"]).status.code(),
        Some(2)
    );
    assert_eq!(
        wager(&["efficiency", "--seed", "1", "--config", "/nonexistent/cfg"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_file_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out.csv");
    fs::write(
        &cfg,
        "# small run\nseed = 2\nn_min = 2\nn_max = 4\ninstances = 5\nmechanisms = wswm;lws\n",
    )
    .unwrap();
    let o = wager(&[
        "efficiency",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with('#'));
    assert_eq!(
        lines[1],
        "mechanism,n,pred_model,wager_model,avg_risk,avg_exchange_rate,mode"
    );
    assert_eq!(lines.len(), 2 + 2 * 2);

    let flag = wager(&["efficiency", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    assert!(flag.status.success());
    assert_ne!(stdout(&flag), text);
}

#[test]
fn variance_writes_bins() {
    let o = wager(&[
        "variance",
        "--seed",
        "4",
        "--set",
        "n_min=3",
        "--set",
        "n_max=3",
        "--set",
        "instances=50",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "mechanism,n,bin,acc_lo,acc_hi,count,std_norm_payoff,frac_not_losing"
    );
    assert_eq!(text.lines().count(), 2 + 2 * 10);
}

#[test]
fn verify_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = wager(&[
        "verify",
        "--mechanisms",
        "lws",
        "--n",
        "2,3",
        "--instances",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["asserted_failures"], 0);
    assert_eq!(doc["suite"]["n_values"], serde_json::json!([2, 3]));
    let reports = doc["reports"].as_array().unwrap();
    assert!(reports.iter().any(|r| r["property"] == "po" && r["passed"] == true));
}

#[test]
fn verify_fails_on_a_negative_control() {
    let o = wager(&["verify", "--mechanisms", "stub-budget", "--n", "2", "--instances", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let ebb = doc["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["property"] == "ebb")
        .unwrap();
    assert_eq!(ebb["passed"], false);
    assert!(ebb["witness"]["detail"].is_string());
}

#[test]
fn verify_rejects_bad_arguments() {
    assert_eq!(wager(&["verify", "--n", "1"]).status.code(), Some(2));
    assert_eq!(wager(&["verify", "--mechanisms", "bogus"]).status.code(), Some(2));
    assert_eq!(wager(&["verify", "--sample-cap", "5"]).status.code(), Some(2));
}
