//! `wager`: efficiency and variance sweeps, property verification and single games.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use wager_core::exec::with_threads;
use wager_core::experiment::{
    run_efficiency_sweep, run_variance_sweep, write_efficiency_csv, write_variance_csv, ExperimentConfig,
};
use wager_core::verifier::stubs::Stub;
use wager_core::verifier::{claimed_properties, run_suite, Property, SuiteConfig};
use wager_core::{Configured, Execution, Game, Mechanism, MechanismId, Prediction};

#[derive(Parser)]
#[command(name = "wager", version, about = "Wagering mechanism simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
    /// Draws per outcome when exact enumeration is too large.
    #[arg(long)]
    sample_cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Average individual risk and money exchange rate per N.
    Efficiency {
        #[command(flatten)]
        common: Common,
        /// Extra key=value settings applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Payoff dispersion and probability of not losing per accuracy bin.
    Variance {
        #[command(flatten)]
        common: Common,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the property suite and write a JSON report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Mechanisms separated by ';' (stub-budget, stub-report, stub-sybil and stub-favor are negative controls).
        #[arg(long, default_value = "lws;swme;rp-swme")]
        mechanisms: String,
        /// Population sizes for the instance-based checks, comma separated.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Instances per population size.
        #[arg(long)]
        instances: Option<usize>,
        /// Assert every property, claimed or not.
        #[arg(long)]
        strict: bool,
    },
    /// Print the payoff distribution of one game.
    Game {
        /// Reports separated by ','; a report is P(outcome 1) or a ':'-separated probability vector.
        #[arg(long)]
        reports: String,
        #[arg(long, value_delimiter = ',', required = true)]
        wagers: Vec<f64>,
        #[arg(long)]
        outcome: usize,
        #[arg(long, default_value = "wswm")]
        mechanism: String,
        /// Also draw one realization from this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Bad input; exits with status 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

fn load_config(mut cfg: ExperimentConfig, common: &Common, set: &[String]) -> anyhow::Result<ExperimentConfig> {
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text).map_err(config_err)?;
    }
    for kv in set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| config_err(format!("expected KEY=VALUE, got '{kv}'")))?;
        cfg.set(k, v).map_err(config_err)?;
    }
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    if let Some(c) = common.sample_cap {
        cfg.sample_cap = c;
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(bytes).context("writing to stdout"),
    }
}

fn efficiency(common: &Common, set: &[String]) -> anyhow::Result<ExitCode> {
    let cfg = load_config(ExperimentConfig::efficiency_default(), common, set)?;
    let rows = with_threads(cfg.threads, || run_efficiency_sweep(&cfg, Execution::default()))?;
    let mut buf = Vec::new();
    write_efficiency_csv(&rows, &mut buf)?;
    write_output(cfg.out.as_deref(), &buf)?;
    Ok(ExitCode::SUCCESS)
}

fn variance(common: &Common, set: &[String]) -> anyhow::Result<ExitCode> {
    let cfg = load_config(ExperimentConfig::variance_default(), common, set)?;
    let rows = with_threads(cfg.threads, || run_variance_sweep(&cfg, Execution::default()))?;
    let mut buf = Vec::new();
    write_variance_csv(&rows, &mut buf)?;
    write_output(cfg.out.as_deref(), &buf)?;
    Ok(ExitCode::SUCCESS)
}

enum Target {
    Real(Configured),
    Stub(Stub),
}

impl Target {
    fn parse(s: &str) -> anyhow::Result<Self> {
        if let Some(stub) = Stub::parse(s) {
            return Ok(Self::Stub(stub));
        }
        let id: MechanismId = s.parse().map_err(config_err)?;
        Ok(Self::Real(Configured::brier(id)))
    }

    fn mechanism(&self) -> &dyn Mechanism {
        match self {
            Self::Real(m) => m,
            Self::Stub(s) => s,
        }
    }

    fn claims(&self) -> Vec<Property> {
        match self {
            Self::Real(m) => claimed_properties(&m.id),
            Self::Stub(s) => s.claims(),
        }
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(';')
        .flat_map(str::split_whitespace)
        .filter(|t| !t.is_empty())
        .collect()
}

const ALL_PROPERTIES: [Property; 10] = [
    Property::Ir,
    Property::Wic,
    Property::Sic,
    Property::Webb,
    Property::Ebb,
    Property::Sybilproof,
    Property::Anonymity,
    Property::Neutrality,
    Property::NoArbitrage,
    Property::Po,
];

fn verify(
    common: &Common,
    mechanisms: &str,
    n: Option<Vec<usize>>,
    instances: Option<usize>,
    strict: bool,
) -> anyhow::Result<ExitCode> {
    if common.config.is_some() || common.sample_cap.is_some() {
        return Err(config_err("verify takes no --config or --sample-cap"));
    }
    let targets = split_list(mechanisms)
        .into_iter()
        .map(Target::parse)
        .collect::<anyhow::Result<Vec<_>>>()?;
    if targets.is_empty() {
        return Err(config_err("no mechanisms selected"));
    }
    let mut suite = SuiteConfig::default();
    if let Some(n) = n {
        if n.is_empty() || n.iter().any(|&v| v < 2) {
            return Err(config_err("population sizes must be at least 2"));
        }
        suite.n_values = n;
    }
    if let Some(k) = instances {
        if k == 0 {
            return Err(config_err("instances must be positive"));
        }
        suite.instances = k;
    }
    if let Some(s) = common.seed {
        suite.seed = s;
    }
    let mut reports = Vec::new();
    let mut failures = 0;
    for t in &targets {
        let claims = if strict { ALL_PROPERTIES.to_vec() } else { t.claims() };
        let rs = with_threads(common.threads, || {
            run_suite(t.mechanism(), &claims, &suite, Execution::default())
        })?;
        for r in &rs {
            let status = match (r.passed, r.asserted) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "fail (not claimed)",
            };
            eprintln!(
                "{:<14} {:<13} {status} ({}/{} failed){}",
                r.mechanism,
                r.property.to_string(),
                r.failed,
                r.checked,
                r.note.as_deref().map(|n| format!(" [{n}]")).unwrap_or_default()
            );
            if !r.passed && r.asserted {
                failures += 1;
            }
        }
        reports.extend(rs);
    }
    let doc = json!({
        "seed": suite.seed,
        "suite": suite,
        "strict": strict,
        "asserted_failures": failures,
        "reports": reports,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_output(common.out.as_deref(), text.as_bytes())?;
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn parse_reports(s: &str) -> anyhow::Result<Vec<Prediction>> {
    s.split(',')
        .map(|r| {
            let parts = r
                .split(':')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| config_err(format!("bad report '{r}'")))
                })
                .collect::<anyhow::Result<Vec<f64>>>()?;
            let p = match parts.as_slice() {
                [p1] => Prediction::binary(*p1),
                _ => Prediction::new(parts),
            };
            p.map_err(config_err)
        })
        .collect()
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

fn game(reports: &str, wagers: &[f64], outcome: usize, mechanism: &str, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let preds = parse_reports(reports)?;
    let g = Game::new(preds, wagers.to_vec()).map_err(config_err)?;
    g.check_outcome(outcome).map_err(config_err)?;
    let target = Target::parse(mechanism)?;
    let mech = target.mechanism();
    let d = mech.distribution(&g, outcome)?;
    let mut out = String::new();
    out.push_str(&format!("mechanism {}\noutcome {outcome}\n", mech.name()));
    out.push_str("prob\tpayoffs\n");
    for pt in d.support() {
        out.push_str(&format!("{:.6}\t{}\n", pt.prob, fmt_vec(&pt.payoffs)));
    }
    out.push_str(&format!("expected\t{}\n", fmt_vec(&d.expected())));
    out.push_str(&format!("worst\t{}\n", fmt_vec(&mech.worst_case(&g)?)));
    if let Some(s) = seed {
        let mut rng = wager_core::randomized::substream(s, &[]);
        out.push_str(&format!("draw\t{}\n", fmt_vec(&mech.sample(&g, outcome, &mut rng)?)));
    }
    io::stdout().write_all(out.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Efficiency { common, set } => efficiency(&common, &set),
        Command::Variance { common, set } => variance(&common, &set),
        Command::Verify {
            common,
            mechanisms,
            n,
            instances,
            strict,
        } => verify(&common, &mechanisms, n, instances, strict),
        Command::Game {
            reports,
            wagers,
            outcome,
            mechanism,
            seed,
        } => game(&reports, &wagers, outcome, &mechanism, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = if e.downcast_ref::<ConfigError>().is_some() {
                2
            } else {
                1
            };
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
