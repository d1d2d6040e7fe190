//! Command-line front end: argument parsing, the effective run
//! configuration, and exit codes.

mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fribble::harness::DEFAULT_SHARPNESS;
use fribble::inference::{AcceptanceMode, Modality};

/// Bayesian concept learning of fribbles from simulated vision and haptics.
#[derive(Debug, Parser)]
#[command(name = "fribble", version)]
struct Cli {
    #[command(subcommand)]
    command: CommandArg,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Subcommand)]
enum CommandArg {
    /// Synthesize the 40-object dataset into <out>/dataset/<seed>.
    GenDataset,
    /// Train one pooled posterior per category.
    Train,
    /// Draw fribbles from the trained posteriors.
    Sample,
    /// Categorize held-out fribbles by grasp and by perturbed view.
    Categorize,
    /// Compare a chain against exact enumeration on a small grammar.
    OracleCheck,
    /// Write confusion matrices, accuracy, prototype images and traces.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GenDataset,
    Train,
    Sample,
    Categorize,
    OracleCheck,
    Report,
}

impl From<&CommandArg> for Command {
    fn from(c: &CommandArg) -> Self {
        match c {
            CommandArg::GenDataset => Command::GenDataset,
            CommandArg::Train => Command::Train,
            CommandArg::Sample => Command::Sample,
            CommandArg::Categorize => Command::Categorize,
            CommandArg::OracleCheck => Command::OracleCheck,
            CommandArg::Report => Command::Report,
        }
    }
}

#[derive(Debug, Args)]
struct Opts {
    /// Grammar file (default: the shipped fribble grammar).
    #[arg(long, global = true)]
    grammar: Option<PathBuf>,
    /// Part library JSON (default: the shipped 47-part library).
    #[arg(long, global = true)]
    parts: Option<PathBuf>,
    /// Hand model JSON (default: the shipped hand).
    #[arg(long, global = true)]
    hand: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    burn_in: Option<usize>,
    #[arg(long, global = true, value_enum)]
    modality: Option<Modality>,
    #[arg(long, global = true, value_enum)]
    mode: Option<AcceptanceMode>,
    /// Output root directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for chains and rotations.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    /// Likelihood sharpness exponent.
    #[arg(long, global = true)]
    sharpness: Option<f64>,
    /// Fribbles drawn per category by `sample`.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Start from a saved run.json; explicit flags still override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

/// The full effective configuration of one run, saved as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub grammar: Option<PathBuf>,
    pub parts: Option<PathBuf>,
    pub hand: Option<PathBuf>,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub modality: Modality,
    pub mode: AcceptanceMode,
    pub out: PathBuf,
    pub jobs: usize,
    /// `None` picks the default: 12, or for `oracle-check` the deepest
    /// cap whose language has at most 200 derivations.
    pub max_depth: Option<usize>,
    pub sharpness: f64,
    pub samples: usize,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        RunConfig {
            command,
            grammar: None,
            parts: None,
            hand: None,
            seed: 1,
            iterations: if command == Command::OracleCheck { 50_000 } else { 10_000 },
            burn_in: 1_000,
            modality: Modality::Both,
            mode: AcceptanceMode::Full,
            out: PathBuf::from("out"),
            jobs: 1,
            max_depth: None,
            sharpness: DEFAULT_SHARPNESS,
            samples: 5,
        }
    }

    fn apply(&mut self, o: &Opts) {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &o.$f { self.$f = v.clone(); })*};
        }
        set!(seed, iterations, burn_in, modality, mode, out, jobs, sharpness, samples);
        if o.grammar.is_some() {
            self.grammar = o.grammar.clone();
        }
        if o.parts.is_some() {
            self.parts = o.parts.clone();
        }
        if o.hand.is_some() {
            self.hand = o.hand.clone();
        }
        if o.max_depth.is_some() {
            self.max_depth = o.max_depth;
        }
    }

    /// Usage-level checks: chain lengths, counts and input paths.
    pub fn validate(&self) -> Result<(), String> {
        if self.burn_in == 0 || self.iterations <= self.burn_in {
            return Err(format!(
                "need iterations > burn-in > 0 (got {} and {})",
                self.iterations, self.burn_in
            ));
        }
        if self.jobs == 0 {
            return Err("--jobs must be at least 1".into());
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err("--sharpness must be positive".into());
        }
        if self.max_depth == Some(0) {
            return Err("--max-depth must be positive".into());
        }
        if self.command == Command::OracleCheck && self.grammar.is_none() {
            return Err("oracle-check needs --grammar".into());
        }
        for p in [&self.grammar, &self.parts, &self.hand].into_iter().flatten() {
            if !p.is_file() {
                return Err(format!("no such file: {}", p.display()));
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir)?;
        let path = dir.join("run.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let command = Command::from(&cli.command);
    let mut cfg = match &cli.opts.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            let saved: RunConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
            if saved.command != command {
                return Err(format!("{} is a {:?} run", p.display(), saved.command));
            }
            saved
        }
        None => RunConfig::defaults(command),
    };
    cfg.apply(&cli.opts);
    cfg.validate()?;
    Ok(cfg)
}

/// Exit codes: 0 success, 1 usage error, 2 runtime error.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
