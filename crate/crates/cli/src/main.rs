//! `vines`: simulate, sweep, optimize, compare and validate from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use vines_core::scenarios::{
    cmd_compare, cmd_optimize, cmd_simulate, cmd_sweep, cmd_validate, Bundle, OptimizeMode, RunConfig,
    ScenarioError,
};

#[derive(Parser, Debug)]
#[command(name = "vines", version, about = "Vibro-impact energy sink simulation and design optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "VINES_THREADS")]
    threads: Option<usize>,

    /// optimize: stochastic | deterministic | nsga2. validate: quick | full.
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Integrate one trajectory and write its time series and diagnostics.
    Simulate,
    /// Efficiency over a two-variable design grid.
    Sweep,
    /// Genetic-algorithm design search.
    Optimize,
    /// Evaluate several designs on common random draws.
    Compare,
    /// Run the acceptance checks.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
            Command::Compare => "compare",
            Command::Validate => "validate",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, ScenarioError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = &cli.mode {
        match cli.command {
            Command::Optimize => cfg.optimize.mode = m.parse::<OptimizeMode>()?,
            Command::Validate => {
                cfg.validate.full = match m.as_str() {
                    "quick" => false,
                    "full" => true,
                    _ => return Err(ScenarioError::Config(format!("unknown validate mode {m:?}; expected quick or full"))),
                }
            }
            c => return Err(ScenarioError::Config(format!("--mode is not used by {}", c.name()))),
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Bundle, ScenarioError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ScenarioError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ScenarioError::Config(e.to_string()))?;
    }
    let cfg = load_config(cli)?;
    let start = Instant::now();
    let bundle = match cli.command {
        Command::Simulate => cmd_simulate(&cfg, &cli.out)?,
        Command::Sweep => cmd_sweep(&cfg, &cli.out)?,
        Command::Optimize => cmd_optimize(&cfg, &cli.out)?,
        Command::Compare => cmd_compare(&cfg, &cli.out)?,
        Command::Validate => {
            let (b, results) = cmd_validate(&cfg, &cli.out)?;
            for r in &results {
                let tag = if r.skipped { "SKIP" } else if r.passed { "PASS" } else { "FAIL" };
                println!("[{tag}] {:02} {}: {}", r.id, r.name, r.detail);
            }
            return Ok(b);
        }
    };
    bundle.timing(start.elapsed().as_secs_f64(), &[])?;
    Ok(bundle)
}

fn write_error(out: &Path, command: &str, e: &ScenarioError) {
    let report = serde_json::json!({
        "command": command,
        "kind": e.kind(),
        "exit_code": e.exit_code(),
        "message": e.to_string(),
    });
    if std::fs::create_dir_all(out).is_ok() {
        let _ = std::fs::write(out.join("error.json"), format!("{report:#}\n"));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(b) => {
            for w in &b.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} files to {}", b.files.len(), b.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            write_error(&cli.out, cli.command.name(), &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
