mod config;
mod experiments;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::ExperimentConfig;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "exchange-lattice", version, about = "Energy-exchange lattice experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory in the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the supported kernels and rates.
    ListModels,
}

fn fail(code: u8, kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "exit_code": code, "message": message }));
    ExitCode::from(code)
}

fn run(config: PathBuf, threads: Option<usize>, seed: Option<u64>, output_dir: Option<PathBuf>) -> ExitCode {
    let started = Instant::now();
    let text = match fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, "config", format!("cannot read {}: {e}", config.display())),
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, "config", e),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    if threads == Some(0) {
        return fail(EXIT_CONFIG, "config", "--threads must be >= 1".into());
    }
    let validated = match cfg.validate() {
        Ok(v) => v,
        Err(e) => return fail(EXIT_CONFIG, "config", e),
    };
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            return fail(EXIT_RUNTIME, "runtime", format!("thread pool: {e}"));
        }
    }

    let artifacts = match experiments::run(&validated) {
        Ok(a) => a,
        Err(e) => return fail(EXIT_RUNTIME, "runtime", e.to_string()),
    };
    let dir = &validated.config.output_dir;
    let write_all = || -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for a in &artifacts {
            fs::write(dir.join(&a.name), &a.bytes)?;
        }
        let manifest = json!({
            "config_sha256": validated.hash,
            "seed": validated.config.seed,
            "experiment": validated.config.experiment.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_s": started.elapsed().as_secs_f64(),
            "files": artifacts.iter().map(|a| a.name.as_str()).collect::<Vec<_>>(),
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable manifest");
        bytes.push(b'\n');
        fs::write(dir.join("manifest.json"), bytes)
    };
    match write_all() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_RUNTIME, "runtime", format!("writing {}: {e}", dir.display())),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, threads, seed, output_dir } => run(config, threads, seed, output_dir),
        Command::ListModels => {
            print!("{}", exchange_lattice_core::kernels::list_models());
            ExitCode::SUCCESS
        }
    }
}
