use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tmv::decompose::{bootstrap, decompose};
use tmv::error::{Result, TmvError};
use tmv::workbench::io::{load_curves, save_curves};
use tmv::workbench::pipeline::{run_fit, run_study, StudyConfig};
use tmv::workbench::report::{bootstrap_json, decomposition_json, emit_report, fit_json, theta_map};
use tmv::workbench::simulate::simulate;

#[derive(Parser)]
#[command(name = "tmv", version, about = "Decompose variation in sampled curves along template modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic study and write curves.csv and truth.json
    Simulate(Common),
    /// Fit template and per-curve parameters; writes fit.json
    Fit(Common),
    /// Fit and decompose; writes decomposition.json
    Decompose(Common),
    /// Bootstrap the decomposition over curves; writes bootstrap.json
    Bootstrap(Common),
    /// Full pipeline with JSON report and SVG/CSV diagnostics
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Study configuration (JSON)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Curves CSV with columns curve_id,t,z[,weight]
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Template polynomial degree
    #[arg(long)]
    degree: Option<usize>,
    /// Weight of the origin-chart metric in the blended path metric
    #[arg(long)]
    gamma: Option<f64>,
    /// Bootstrap replicates
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated gamma values for a sensitivity sweep
    #[arg(long, value_delimiter = ',')]
    sweep_gamma: Option<Vec<f64>>,
}

impl Common {
    fn config(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::load(path)?,
            None => StudyConfig::default(),
        };
        if let Some(d) = self.degree {
            cfg.fit.degree = d;
        }
        if let Some(g) = self.gamma {
            cfg.decompose.gamma = g;
        }
        if let Some(b) = self.boot {
            cfg.bootstrap = b;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.simulation.seed = s;
        }
        if let Some(g) = &self.sweep_gamma {
            cfg.sweep_gamma = g.clone();
        }
        Ok(cfg)
    }

    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| TmvError::InvalidConfig("--input <csv> is required".into()))
    }
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(path)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.config()?;
            let study = simulate(&cfg.simulation, &cfg.decompose)?;
            fs::create_dir_all(&args.out)?;
            let csv = args.out.join("curves.csv");
            save_curves(&csv, &study.grid, &study.curves)?;
            let names = study.truth.mode_names();
            let truth = json!({
                "spec": cfg.simulation,
                "template": study.truth.template().coefficients(),
                "thetas": study.curves.iter().zip(&study.thetas)
                    .map(|(c, t)| json!({"id": c.id, "theta": theta_map(&names, t)}))
                    .collect::<Vec<_>>(),
                "noise_energy": study.noise_energy,
                "oracle": decomposition_json(&names, &study.oracle),
            });
            Ok(vec![csv, write_json(&args.out, "truth.json", &truth)?])
        }
        Command::Fit(args) => {
            let cfg = args.config()?;
            let (grid, curves) = load_curves(args.input()?)?;
            let fit = run_fit(&curves, &grid, &cfg)?;
            Ok(vec![write_json(&args.out, "fit.json", &fit_json(&fit))?])
        }
        Command::Decompose(args) => {
            let cfg = args.config()?;
            let (grid, curves) = load_curves(args.input()?)?;
            let fit = run_fit(&curves, &grid, &cfg)?;
            let d = decompose(&fit, &cfg.decompose)?;
            let doc = json!({
                "fit": fit_json(&fit),
                "decomposition": decomposition_json(&fit.model.mode_names(), &d),
            });
            Ok(vec![write_json(&args.out, "decomposition.json", &doc)?])
        }
        Command::Bootstrap(args) => {
            let cfg = args.config()?;
            let (grid, curves) = load_curves(args.input()?)?;
            let b = cfg.bootstrap.max(1);
            let summary = bootstrap(&curves, &grid, &cfg.mode_specs()?, &cfg.fit, &cfg.decompose, b, cfg.seed)?;
            Ok(vec![write_json(&args.out, "bootstrap.json", &bootstrap_json(&summary))?])
        }
        Command::Report(args) => {
            let cfg = args.config()?;
            let (grid, curves) = load_curves(args.input()?)?;
            let outcome = run_study(&curves, &grid, &cfg)?;
            emit_report(&args.out, &cfg, &curves, &outcome)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
