use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use misofade::bounds::UpperMode;
use misofade::cli::{parse_snr_grid, run, Command, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Dstar,
    ChiGauss,
    ChiIidMemory,
    BoundUpper,
    BoundLower,
    Isotropic,
    Sweep,
    Selftest,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Dstar => Command::Dstar,
            Cmd::ChiGauss => Command::ChiGauss,
            Cmd::ChiIidMemory => Command::ChiIidMemory,
            Cmd::BoundUpper => Command::BoundUpper,
            Cmd::BoundLower => Command::BoundLower,
            Cmd::Isotropic => Command::Isotropic,
            Cmd::Sweep => Command::Sweep,
            Cmd::Selftest => Command::Selftest,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Constant,
    Ascent,
}

/// Fading numbers of MISO fading channels with memory (values in nats).
#[derive(Debug, Parser)]
#[command(name = "misofade", version)]
struct Args {
    command: Cmd,
    /// Model file (TOML).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Past depth; defaults depend on the command and model.
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    /// Comma-separated SNR values in dB, e.g. `40,60,80,100`.
    #[arg(long)]
    snr_grid: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "misofade-out")]
    out: PathBuf,
    /// Also write `sweep.svg` (sweep only).
    #[arg(long)]
    plot: bool,
    /// Display information values in bits.
    #[arg(long)]
    bits: bool,
    /// Upper-bound direction search (bound-upper only).
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Additive noise variance (sweep only).
    #[arg(long, default_value_t = 1.0)]
    noise_var: f64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn config(args: Args) -> misofade::Result<RunConfig> {
    let mut cfg = RunConfig::new(args.command.into(), args.out);
    cfg.model_path = args.model;
    cfg.seed = args.seed;
    cfg.kappa = args.kappa;
    cfg.mc_samples = args.mc_samples;
    cfg.snr_grid_db = args.snr_grid.as_deref().map(parse_snr_grid).transpose()?.unwrap_or_default();
    cfg.emit_plot = args.plot;
    cfg.bits = args.bits;
    cfg.upper_mode = args.mode.map(|m| match m {
        Mode::Constant => UpperMode::ConstantDirection,
        Mode::Ascent => UpperMode::CoordinateAscent,
    });
    cfg.noise_var = args.noise_var;
    cfg.threads = args.threads;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = config(args).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
