use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use slbgk::config::{ConfigFile, RunConfig};
use slbgk::experiment::{error_norms, run_and_write, Field, Profile};

#[derive(Parser)]
#[command(name = "slbgk", version, about = "Semi-Lagrangian BGK shock-tube runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration or one of the presets 1 to 7.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<u8>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print L1 and Linf norms of the difference between two profiles.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

fn run(config: Option<PathBuf>, preset: Option<u8>, output: Option<PathBuf>, seed: Option<u64>) -> slbgk::Result<()> {
    let mut explicit = match &config {
        Some(path) => ConfigFile::parse(&std::fs::read_to_string(path)?)?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        preset,
        output_dir: output,
        seed,
        ..Default::default()
    };
    explicit = flags.overlay(&explicit);
    let cfg = RunConfig::resolve(explicit)?;
    for run in cfg.runs()? {
        let out = run_and_write(&run)?;
        println!(
            "{} ({:.2} s)",
            out.profile.display(),
            out.wall_clock.as_secs_f64()
        );
        if let Some(r) = out.reference {
            println!("{}", r.display());
        }
    }
    Ok(())
}

fn compare(a: PathBuf, b: PathBuf) -> slbgk::Result<()> {
    let pa = Profile::read(&a)?;
    let pb = Profile::read(&b)?;
    let norms = error_norms(&pa, &pb)?;
    println!("field,l1,linf,l1_rel,linf_rel");
    for f in Field::ALL {
        let n = norms.get(f);
        println!("{},{},{},{},{}", f.name(), n.l1, n.linf, n.l1_relative(), n.linf_relative());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Ok(threads) = std::env::var("KBGK_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: could not size the thread pool: {e}");
                    return ExitCode::FAILURE;
                }
            }
            _ => {
                eprintln!("error: KBGK_THREADS must be a positive integer, got `{threads}`");
                return ExitCode::FAILURE;
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            preset,
            output,
            seed,
        } => run(config, preset, output, seed),
        Command::Compare { a, b } => compare(a, b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
