use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use smsc::governance::{detect_conflicts, ConflictDomains};
use smsc::policy::{evaluate_request, expand_delegations, DecisionRequest, PolicyFile, PrincipalId};
use smsc::sim::{load_scenario, run_scenario};

#[derive(Parser)]
#[command(name = "smsc", version, about = "Self-managed security cell simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; exits 0 iff every assertion passes.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON-lines event log here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate one request against a policy file and print the decision.
    CheckPolicy {
        #[arg(long)]
        policies: PathBuf,
        #[arg(long)]
        request: PathBuf,
    },
    /// List pairs of rules with opposite effects that can match together.
    /// Exits 0 iff there are none.
    Conflicts {
        #[arg(long)]
        policies: PathBuf,
        #[arg(long)]
        domains: PathBuf,
    },
}

/// A decision request, optionally naming the principal whose delegations apply.
#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RequestFile {
    #[serde(flatten)]
    request: DecisionRequest,
    #[serde(default)]
    principal: Option<PrincipalId>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| format!("{}: `{}`: {}", path.display(), e.path(), e.inner()))
}

fn run(scenario: &Path, seed: Option<u64>, log: Option<&Path>, report_path: Option<&Path>) -> Result<bool, String> {
    let mut spec = load_scenario(scenario).map_err(|e| e.to_string())?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let report = run_scenario(&spec, log).map_err(|e| e.to_string())?;
    for a in &report.assertions {
        println!("[{}] {}: {}", if a.ok { "PASS" } else { "FAIL" }, a.id, a.detail);
    }
    println!(
        "{} after {} ticks (seed {})",
        if report.passed { "passed" } else { "FAILED" },
        report.final_tick,
        spec.seed
    );
    if let Some(path) = report_path {
        std::fs::write(path, report.to_json() + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(report.passed)
}

fn check_policy(policies: &Path, request: &Path) -> Result<bool, String> {
    let policy = PolicyFile::load(policies).map_err(|e| e.to_string())?;
    let RequestFile { mut request, principal } = read_json(request)?;
    if let Some(principal) = principal {
        request.subject_attrs = expand_delegations(
            &request.subject_attrs,
            &principal,
            &policy.delegations,
            &policy.roots,
            &request.context,
        );
    }
    let decision = evaluate_request(&policy.rules, &request).map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&decision).expect("decision serializes"));
    Ok(true)
}

fn conflicts(policies: &Path, domains: &Path) -> Result<bool, String> {
    let policy = PolicyFile::load(policies).map_err(|e| e.to_string())?;
    let domains: ConflictDomains = read_json(domains)?;
    let reports = detect_conflicts(&policy.rules, &domains).map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
    Ok(reports.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { scenario, seed, log, report } => run(scenario, *seed, log.as_deref(), report.as_deref()),
        Command::CheckPolicy { policies, request } => check_policy(policies, request),
        Command::Conflicts { policies, domains } => conflicts(policies, domains),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
