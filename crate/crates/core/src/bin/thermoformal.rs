use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use thermoformal::cli::{is_config_error, run_command, Command, Overrides};
use thermoformal::config::{parse_t_range, ExperimentConfig};
use thermoformal::thermo::{Collection, PotentialKind};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    Verify,
    Classify,
    Pressure,
    Entropy,
    Spec,
    Curve,
    Srb,
}

#[derive(Parser, Debug)]
#[command(name = "thermoformal", version, about = "Pressure, decomposition and SRB experiments on solenoid attractors")]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// INI experiment file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to THERMOFORMAL_THREADS.
    #[arg(long, env = "THERMOFORMAL_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// all, G or S.
    #[arg(long, value_parser = parse_collection)]
    collection: Option<Collection>,
    /// zero, holder or geo.
    #[arg(long, value_parser = parse_potential)]
    potential: Option<PotentialKind>,
    /// a:b:n
    #[arg(long, value_parser = parse_t_range, allow_hyphen_values = true)]
    t_range: Option<(f64, f64, usize)>,
    /// Number of random segments for `classify`.
    #[arg(long)]
    segments: Option<usize>,
}

fn parse_collection(s: &str) -> Result<Collection, String> {
    Collection::parse(s).ok_or_else(|| format!("unknown collection '{s}' (expected all, G or S)"))
}

fn parse_potential(s: &str) -> Result<PotentialKind, String> {
    PotentialKind::parse(s).ok_or_else(|| format!("unknown potential '{s}' (expected zero, holder or geo)"))
}

fn command(s: Sub) -> Command {
    match s {
        Sub::Verify => Command::Verify,
        Sub::Classify => Command::Classify,
        Sub::Pressure => Command::Pressure,
        Sub::Entropy => Command::Entropy,
        Sub::Spec => Command::Spec,
        Sub::Curve => Command::Curve,
        Sub::Srb => Command::Srb,
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = args.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: invalid thread count {n}");
            return ExitCode::from(2);
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let config = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        collection: args.collection,
        potential: args.potential,
        t_range: args.t_range,
        segments: args.segments,
    };
    let cmd = command(args.command);
    match run_command(cmd, config, &overrides) {
        Ok(o) => {
            let pass = o.exit_code == 0;
            println!("{} {} -> {}", if pass { "PASS" } else { "FAIL" }, cmd.name(), o.out_dir.display());
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
