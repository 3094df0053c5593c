//! Scenario-driven front end for the `hstdr_core` simulator.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hstdr", version, about = "HS-OFDM reflectometry on power-line networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reconstruction oversampling factor.
    #[arg(long, global = true)]
    pub eta: Option<usize>,
    /// Coherence threshold for the parameter checks.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// List the regulatory band plans.
    Presets,
    /// Range resolution, maximum range and lattice constraints per PLM.
    ParamReport,
    /// Run a measurement campaign and write reflectograms and a summary.
    Simulate,
    /// Sidelobe statistics of PC and CE equivalent pulses over N.
    Sweep,
}

/// Why a run stopped; selects the exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Invariant(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Invariant(_) => 2,
        }
    }

    pub fn report(&self) -> serde_json::Value {
        let (kind, err) = match self {
            Failure::Config(e) => ("config", e),
            Failure::Invariant(e) => ("invariant", e),
        };
        serde_json::json!({
            "error": kind,
            "message": err.to_string(),
            "chain": err.chain().skip(1).map(ToString::to_string).collect::<Vec<_>>(),
        })
    }
}

/// Core errors about parameters or networks are configuration mistakes;
/// everything else the core rejects is a broken invariant.
pub fn classify(err: anyhow::Error) -> Failure {
    use hstdr_core::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(E::InvalidParameter { .. } | E::Network(_)) | None => Failure::Config(err),
        Some(_) => Failure::Invariant(err),
    }
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => config::ScenarioConfig::load(path).map_err(Failure::Config)?,
        None => config::ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(eta) = cli.eta {
        cfg.eta = eta;
    }
    if let Some(alpha) = cli.alpha {
        cfg.alpha = alpha;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate().map_err(Failure::Config)?;
    match cli.command {
        Command::Presets => commands::presets(&cfg),
        Command::ParamReport => commands::param_report(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Sweep => commands::sweep(&cfg),
    }
    .map_err(classify)
}
