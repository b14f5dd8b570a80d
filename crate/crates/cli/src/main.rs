use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eqreg::commands;
use eqreg::config::{Preset, ReproduceConfig, RunConfig, UsageError};
use eqreg_core::cases::CaseKind;
use eqreg_core::eval::EvalReport;
use eqreg_core::pipeline::Arm;
use eqreg_core::predictors::ModelKind;

#[derive(Parser)]
#[command(name = "eqreg", version, about = "Rotation-equivariant tensor regression experiments")]
struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override the config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, value_parser = parse_case)]
    case: Option<CaseKind>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long, value_parser = parse_arm)]
    arm: Option<Arm>,
    /// Number of generated samples.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    rotation_count: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, env = "EQREG_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a case-study dataset.
    Generate {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
        /// Also export one CSV row per sample.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit one arm on a dataset, save the kernel, append a report row.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Evaluate a saved kernel on a dataset.
    Eval {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model_file: PathBuf,
    },
    /// Rotation errors E_D and E_M of a saved kernel.
    Equivariance {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        model_file: PathBuf,
    },
    /// Sweep cases, kernels, N and seeds; resumable.
    Reproduce {
        #[command(flatten)]
        overrides: Overrides,
        /// Replace the grid with a named preset.
        #[arg(long, value_parser = parse_preset)]
        preset: Option<Preset>,
    },
    /// Print the fully defaulted configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn parse_case(s: &str) -> Result<CaseKind, String> {
    s.parse().map_err(|e: eqreg_core::Error| e.to_string())
}

fn parse_arm(s: &str) -> Result<Arm, String> {
    s.parse().map_err(|e: eqreg_core::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    match s {
        "mlp" => Ok(ModelKind::Mlp),
        "forest" => Ok(ModelKind::Forest),
        _ => Err(format!("unknown model {s:?} (expected mlp or forest)")),
    }
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    match s {
        "desk" => Ok(Preset::Desk),
        "full" => Ok(Preset::Full),
        _ => Err(format!("unknown preset {s:?} (expected desk or full)")),
    }
}

fn resolve(path: Option<&PathBuf>, o: &Overrides) -> anyhow::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = o.case {
        cfg.case = v;
    }
    if let Some(v) = o.model {
        cfg.model = v;
    }
    if let Some(v) = o.arm {
        cfg.arm = v;
    }
    if let Some(v) = o.n {
        cfg.n = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.mu {
        cfg.mu = v;
    }
    if let Some(v) = o.rotation_count {
        cfg.rotation_count = v;
    }
    if let Some(v) = o.epochs {
        cfg.mlp.epochs = v;
    }
    if let Some(v) = &o.output_dir {
        cfg.output_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(r: &EvalReport) -> anyhow::Result<()> {
    let bytes = eqreg::output::render(&[r], true)?;
    print!("{}", String::from_utf8(bytes)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg_path = cli.config.as_ref();
    match cli.command {
        Command::Generate { overrides, out, csv } => {
            let cfg = resolve(cfg_path, &overrides)?;
            println!("{}", commands::generate(&cfg, &out, csv.as_deref())?);
        }
        Command::Train {
            overrides,
            dataset,
            model_out,
        } => {
            let cfg = resolve(cfg_path, &overrides)?;
            print_report(&commands::train(&cfg, &dataset, &model_out)?)?;
        }
        Command::Eval {
            overrides,
            dataset,
            model_file,
        } => {
            let cfg = resolve(cfg_path, &overrides)?;
            print_report(&commands::eval(&cfg, &dataset, &model_file)?)?;
        }
        Command::Equivariance { overrides, model_file } => {
            let cfg = resolve(cfg_path, &overrides)?;
            let e = commands::equivariance(&cfg, &model_file)?;
            println!("E_D,E_M\n{:?},{:?}", e.e_d, e.e_m);
        }
        Command::Reproduce { overrides, preset } => {
            let mut cfg = resolve(cfg_path, &overrides)?;
            if let Some(p) = preset {
                cfg.reproduce = ReproduceConfig::preset(p);
            }
            let s = commands::reproduce(&cfg, |line| eprintln!("{line}"))?;
            println!(
                "{}: {} groups run, {} skipped, {} failed",
                s.run_dir.display(),
                s.completed,
                s.skipped,
                s.failed
            );
            if s.failed > 0 {
                anyhow::bail!("{} groups failed; see failures.csv", s.failed);
            }
        }
        Command::ShowConfig { overrides } => {
            print!("{}", resolve(cfg_path, &overrides)?.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<UsageError>().is_some() { 2 } else { 1 };
            ExitCode::from(code)
        }
    }
}
