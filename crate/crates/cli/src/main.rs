use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use freebound::harness::{self, Scenario};

#[derive(Parser)]
#[command(name = "freebound", version, about = "Porous medium and Hele-Shaw free-boundary experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Cells per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Final time T.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Output root directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent solver runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing assumptions for every exponent of a scenario.
    Audit { scenario: String },
    /// Run a scenario (file path or preset name) and its diagnostics.
    Run { scenario: String },
    /// List or print presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Summarize a finished run directory and verify its file digests.
    Report { dir: PathBuf },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn resolve(arg: &str, o: &Overrides) -> Result<Scenario> {
    let path = Path::new(arg);
    let mut s = if path.is_file() {
        harness::load_scenario(path)?
    } else if harness::preset_names().contains(&arg) {
        harness::preset(arg)?
    } else {
        bail!("{arg} is neither a scenario file nor a preset ({})", harness::preset_names().join(", "));
    };
    if let Some(n) = o.grid {
        s.cells = Some(n);
    }
    if let Some(t) = o.horizon {
        s.model.horizon = t;
        s.save_times.retain(|&x| x <= t);
    }
    if let Some(out) = &o.out {
        s.output = out.clone();
    }
    if let Some(seed) = o.seed {
        s.seed = seed;
    }
    Ok(s.normalize()?)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    let o = &cli.overrides;
    match &cli.command {
        Command::Audit { scenario } => {
            let s = resolve(scenario, o)?;
            let mut ok = true;
            for (label, audit) in harness::audit_scenario(&s) {
                match audit {
                    Ok(r) => {
                        ok &= r.regime != freebound::model::Regime::Unsupported && r.satisfied.bounded;
                        println!("{label}: {}", serde_json::to_string_pretty(&r)?);
                    }
                    Err(e) => {
                        ok = false;
                        println!("{label}: error: {e}");
                    }
                }
            }
            Ok(ok)
        }
        Command::Run { scenario } => {
            let s = resolve(scenario, o)?;
            let manifest = harness::run_scenario(&s, &harness::RunOptions { jobs: o.jobs })
                .with_context(|| format!("running {}", s.name))?;
            for r in &manifest.runs {
                println!("run {:<8} {:>8.2}s {:>8} steps  {}", r.label, r.seconds, r.steps, r.status);
            }
            for d in &manifest.diagnostics {
                println!("{} {:<14} {:<8} {}", if d.pass { "PASS" } else { "FAIL" }, d.name, d.run, d.detail);
            }
            println!("output: {}", s.run_dir().display());
            Ok(manifest.all_pass)
        }
        Command::Preset { action: PresetAction::List } => {
            for (name, about) in harness::PRESETS {
                println!("{name:<20} {about}");
            }
            Ok(true)
        }
        Command::Preset { action: PresetAction::Show { name } } => {
            print!("{}", harness::preset(name)?.to_toml()?);
            Ok(true)
        }
        Command::Report { dir } => {
            let manifest = harness::read_manifest(dir)?;
            let problems = harness::verify_manifest(dir, &manifest)?;
            println!("scenario {} ({}), version {}", manifest.scenario, manifest.scenario_hash, manifest.version);
            for d in &manifest.diagnostics {
                println!("{} {:<14} {:<8} {}", if d.pass { "PASS" } else { "FAIL" }, d.name, d.run, d.detail);
            }
            for p in &problems {
                println!("integrity: {p}");
            }
            Ok(manifest.all_pass && problems.is_empty())
        }
    }
}
