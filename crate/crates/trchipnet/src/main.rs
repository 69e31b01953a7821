//! `trchipnet` — config-driven experiment runner.
//!
//! Exit codes: 0 success, 2 configuration problems (parse or validation),
//! 1 runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trchipnet::chan::{ChannelMatrix, ReverbChannelParams};
use trchipnet::config::{ChannelSource, ExperimentConfig, ExperimentKind};
use trchipnet::runner::{self, RunnerError};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser)]
#[command(name = "trchipnet", version = trchipnet::VERSION, about = "Link-level simulator for time-reversal precoded wireless links inside multi-chip packages")]
struct Cli {
    /// Worker threads (0 = auto). Falls back to the TRCHIPNET_THREADS
    /// environment variable, then to one thread per CPU.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a config file; list every violation without running anything.
    Validate {
        /// Path to the experiment config (JSON).
        config: PathBuf,
    },
    /// Run the experiment described by a config file.
    Run {
        /// Path to the experiment config (JSON).
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Master seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a preset channel matrix and save it with a manifest.
    GenChannel {
        /// Preset name: inter-chip or intra-chip.
        preset: String,
        /// Channel-draw seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory to write the CIR files + channels.json manifest into.
        #[arg(long, short)]
        output: PathBuf,
        /// Number of nodes in the package.
        #[arg(long, default_value_t = 4)]
        nodes: usize,
        /// Model A→B and B→A as the same medium.
        #[arg(long, default_value_t = true)]
        reciprocal: bool,
    },
    /// Summarize a saved channel matrix: per-pair stats + correlation table.
    Characterize {
        /// Path to a channels.json manifest.
        manifest: PathBuf,
        /// Output directory for the CSVs.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads(cli.threads) {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match cli.command {
        Cmd::Validate { config } => validate(&config),
        Cmd::Run { config, output, seed } => run(&config, output, seed),
        Cmd::GenChannel {
            preset,
            seed,
            output,
            nodes,
            reciprocal,
        } => gen_channel(&preset, seed, &output, nodes, reciprocal),
        Cmd::Characterize { manifest, output } => characterize(&manifest, output),
    }
}

/// Thread count precedence: `--threads` > `TRCHIPNET_THREADS` > auto.
fn init_threads(flag: usize) -> Result<(), String> {
    let n = if flag != 0 {
        flag
    } else {
        match std::env::var("TRCHIPNET_THREADS") {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map_err(|_| format!("TRCHIPNET_THREADS must be a number, got `{v}`"))?,
            Err(_) => 0,
        }
    };
    if n == 0 {
        return Ok(()); // rayon's default pool sizes itself
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot size the thread pool: {e}"))
}

/// Load + parse a config, mapping parse failures to exit code 2.
fn load_config(path: &Path) -> Result<(ExperimentConfig, PathBuf), ExitCode> {
    match ExperimentConfig::load(path) {
        Ok(cfg) => {
            let base = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            Ok((cfg, base))
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_CONFIG))
        }
    }
}

fn validate(path: &Path) -> ExitCode {
    let (cfg, base) = match load_config(path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let violations = cfg.validate(&base);
    if violations.is_empty() {
        println!("ok: {}", path.display());
        ExitCode::SUCCESS
    } else {
        for v in &violations {
            println!("{v}");
        }
        ExitCode::from(EXIT_CONFIG)
    }
}

fn run(path: &Path, output: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let (mut cfg, base) = match load_config(path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let out_dir = output
        .or_else(|| {
            cfg.output
                .clone()
                .map(|p| trchipnet::config::resolve_path(&base, &p))
        })
        .unwrap_or_else(|| PathBuf::from("trchipnet-out"));

    match runner::run(&cfg, &base, &out_dir) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", outcome.out_dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(RunnerError::Config(violations)) => {
            for v in &violations {
                eprintln!("{v}");
            }
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn gen_channel(preset: &str, seed: u64, output: &Path, nodes: usize, reciprocal: bool) -> ExitCode {
    let Some(params) = ReverbChannelParams::preset(preset) else {
        eprintln!("error: unknown preset `{preset}`; valid: inter-chip, intra-chip");
        return ExitCode::from(EXIT_CONFIG);
    };
    if nodes < 2 {
        eprintln!("error: a package needs at least 2 nodes, got {nodes}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let matrix = match ChannelMatrix::generate(nodes, &params, seed, reciprocal) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    match matrix.save(output) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn characterize(manifest: &Path, output: Option<PathBuf>) -> ExitCode {
    // Characterization is the `characterize` experiment on a manifest
    // channel; reuse the runner so CLI and config paths cannot diverge.
    let cfg = ExperimentConfig {
        schema: trchipnet::config::SCHEMA_VERSION,
        experiment: ExperimentKind::Characterize,
        channel: ChannelSource::Manifest {
            path: manifest.to_path_buf(),
        },
        seed: 0,
        noise: Default::default(),
        link: None,
        links: None,
        mode: None,
        rates: None,
        powers_dbm: None,
        orders: None,
        ber_target: 1e-3,
        min_bits: 100_000,
        max_errors: 100,
        degradation_variants: None,
        scheduler: None,
        output: None,
    };
    let out_dir = output.unwrap_or_else(|| {
        manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    match runner::run(&cfg, Path::new("."), &out_dir) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", outcome.out_dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(RunnerError::Config(violations)) => {
            for v in &violations {
                eprintln!("{v}");
            }
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
