use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use earforge_core::campaign::{
    campaign_path, decompose_file, load_state, save_state, write_reports, CampaignConfig,
    CampaignLock, CampaignState, DEFAULT_TARGET_HEIGHT,
};
use earforge_core::csvio::{modal_to_csv, write_text};
use earforge_core::geometry::DEFAULT_POINTS;
use earforge_core::modal::DEFAULT_MODES;
use earforge_core::{Error, ErrorClass};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Blank-contour optimization campaigns for earing compensation.
#[derive(Debug, Parser)]
#[command(name = "earforge", version)]
struct Cli {
    /// Campaign directory.
    #[arg(long, global = true, env = "EARFORGE_CAMPAIGN")]
    campaign: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a default campaign configuration.
    Init {
        /// Rim height target, mm.
        #[arg(long, default_value_t = DEFAULT_TARGET_HEIGHT)]
        target_height: f64,
        /// Replace an existing campaign.
        #[arg(long)]
        force: bool,
    },
    /// Generate the central composite design.
    Design,
    /// Run every design point (and the circular baseline) through the plant.
    Simulate {
        /// Read `run_NN.csv` (and optional `baseline.csv`) from this directory
        /// instead of running the surrogate.
        #[arg(long)]
        ingest_dir: Option<PathBuf>,
    },
    /// Fit one quadratic response surface per modal coordinate.
    Fit,
    /// Minimize the sum of squared modal coordinates.
    Optimize,
    /// Re-simulate the optimal blank and compare it with the baseline.
    Verify {
        /// Use an external profile of the optimal blank.
        #[arg(long)]
        ingest: Option<PathBuf>,
    },
    /// Write SVG plots and a summary under `reports/`.
    Report,
    /// Decompose a single profile file into modal coordinates.
    Decompose {
        profile: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TARGET_HEIGHT)]
        target: f64,
        #[arg(long, default_value_t = DEFAULT_MODES)]
        modes: usize,
        /// Resampling points per full contour.
        #[arg(long, default_value_t = DEFAULT_POINTS)]
        points: usize,
    },
}

fn campaign_dir(cli: &Cli) -> Result<&Path, Error> {
    cli.campaign.as_deref().ok_or_else(|| {
        Error::InvalidInput(
            "no campaign directory; pass --campaign or set EARFORGE_CAMPAIGN".into(),
        )
    })
}

/// Loads the campaign under lock, applies `step`, and saves on success only.
fn mutate(
    dir: &Path,
    step: impl FnOnce(&mut CampaignState) -> Result<String, Error>,
) -> Result<String, Error> {
    let _lock = CampaignLock::acquire(dir)?;
    let mut state = load_state(dir)?;
    let message = step(&mut state)?;
    save_state(dir, &state)?;
    Ok(message)
}

fn run(cli: &Cli) -> Result<String, Error> {
    match &cli.command {
        Command::Decompose {
            profile,
            target,
            modes,
            points,
        } => {
            let coords = decompose_file(profile, *target, *modes, *points)?;
            let csv = modal_to_csv(&coords);
            if let Some(dir) = &cli.campaign {
                let stem = profile.file_stem().unwrap_or_default().to_string_lossy();
                write_text(
                    &dir.join("decompositions").join(format!("{stem}.csv")),
                    &csv,
                )?;
            }
            Ok(csv.trim_end().to_owned())
        }
        Command::Init {
            target_height,
            force,
        } => {
            let dir = campaign_dir(cli)?;
            let _lock = CampaignLock::acquire(dir)?;
            if campaign_path(dir).exists() && !force {
                return Err(Error::InvalidInput(format!(
                    "{} already exists; use --force to replace it",
                    campaign_path(dir).display()
                )));
            }
            let config = CampaignConfig {
                target_height: *target_height,
                ..CampaignConfig::default()
            };
            save_state(dir, &CampaignState::new(config)?)?;
            Ok(format!("initialized campaign in {}", dir.display()))
        }
        Command::Design => mutate(campaign_dir(cli)?, |s| {
            let n = s.run_design()?.len();
            Ok(format!("design: {n} runs written to design.csv"))
        }),
        Command::Simulate { ingest_dir } => mutate(campaign_dir(cli)?, |s| {
            let sim = match ingest_dir {
                Some(d) => s.ingest_simulation(d)?,
                None => {
                    let plant = s.config.surrogate_plant();
                    s.run_simulation(&plant)?
                }
            };
            Ok(format!("simulate: {} runs recorded", sim.runs.len()))
        }),
        Command::Fit => mutate(campaign_dir(cli)?, |s| {
            let lines: Vec<String> = s
                .run_fit()?
                .iter()
                .map(|m| {
                    format!(
                        "{}: rms residual {:.3e} mm",
                        m.response, m.diagnostics.rms_residual
                    )
                })
                .collect();
            Ok(lines.join("\n"))
        }),
        Command::Optimize => mutate(campaign_dir(cli)?, |s| {
            let o = s.run_optimize()?;
            Ok(format!(
                "optimum: D = {:.4} mm, A1 = {:.4e} mm, A2 = {:.4e} mm, F = {:.4e}",
                o.blank.diameter, o.blank.a1, o.blank.a2, o.f_value
            ))
        }),
        Command::Verify { ingest } => mutate(campaign_dir(cli)?, |s| {
            let v = match ingest {
                Some(p) => s.ingest_verification(p)?,
                None => {
                    let plant = s.config.surrogate_plant();
                    s.run_verify(&plant)?
                }
            };
            Ok(format!(
                "verify: ear amplitude {:.4} mm -> {:.4} mm, reduction factor {}",
                v.baseline_ear_amplitude, v.optimum.ear_amplitude, v.reduction_factor
            ))
        }),
        Command::Report => {
            let dir = campaign_dir(cli)?;
            let _lock = CampaignLock::acquire(dir)?;
            let state = load_state(dir)?;
            let bundle = write_reports(dir, &state)?;
            let names: Vec<String> = bundle
                .written
                .iter()
                .map(|p| p.display().to_string())
                .collect();
            Ok(names.join("\n"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(message) => {
            if !message.is_empty() {
                println!("{message}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Validation => EXIT_VALIDATION,
                ErrorClass::Numeric => EXIT_NUMERIC,
            })
        }
    }
}
