//! Campaign orchestration: design -> simulate -> fit -> optimize -> verify.
//!
//! A campaign lives in one directory:
//!
//! ```text
//! campaign.json        configuration and lifecycle state
//! design.csv           design in physical units
//! models.json          fitted response surfaces
//! optimum.json         optimal blank
//! runs/run_NN.csv      rim profile of design run NN
//! runs/baseline.csv    rim profile of the circular reference blank
//! runs/optimum.csv     rim profile of the optimal blank
//! reports/*.svg        plots
//! ```
//!
//! Every profile CSV is hashed into `campaign.json`; loading a campaign
//! re-reads the profiles and rejects missing or modified files.

mod report;
mod state;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use report::{write_reports, ReportBundle, ReportItem};
pub use state::{load_state, save_state, CampaignLock, CAMPAIGN_FILE, LOCK_FILE, SCHEMA_VERSION};

use crate::csvio::profile_to_csv;
use crate::doe::{ccd_design, DesignMatrix, FactorSpace, PointRole};
use crate::error::{Error, Result};
use crate::geometry::{ear_amplitude, BlankSpec, ContourProfile, DEFAULT_POINTS, QUARTER_NODES};
use crate::modal::{build_modal_basis, decompose, ModalBasis, ModalCoordinates, DEFAULT_MODES};
use crate::optimizer::{minimize_with, ConvergenceReport, MinimizeOptions, ObjectiveSpec};
use crate::plant::{
    design_blanks, ingest_profile, response_names, MaterialAnisotropy, Plant, PlantRun, Provenance,
    SurrogateParams, SurrogatePlant,
};
use crate::rsm::{fit_quadratic, QuadraticModel, ResponseTable};

pub const DEFAULT_TARGET_HEIGHT: f64 = 35.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub factor_space: FactorSpace,
    /// Rim height target, mm.
    pub target_height: f64,
    pub material: MaterialAnisotropy,
    pub surrogate: SurrogateParams,
    pub n_modes: usize,
    /// Samples per full contour.
    pub n_points: usize,
    /// Diameter of the circular reference blank, mm.
    pub baseline_diameter: f64,
    /// Normalized search box of the optimizer, one interval per factor.
    pub search_bounds: Vec<(f64, f64)>,
    pub optimizer: MinimizeOptions,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let surrogate = SurrogateParams::default();
        Self {
            factor_space: FactorSpace::default(),
            target_height: DEFAULT_TARGET_HEIGHT,
            material: MaterialAnisotropy::dc05(),
            baseline_diameter: surrogate.ref_diameter,
            surrogate,
            n_modes: DEFAULT_MODES,
            n_points: DEFAULT_POINTS,
            search_bounds: vec![(-1.0, 1.0); 3],
            optimizer: MinimizeOptions::default(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        self.factor_space.validate()?;
        self.material.validate()?;
        self.surrogate.validate()?;
        if self.factor_space.len() != 3 {
            return Err(Error::InvalidInput(
                "blank campaigns use exactly three factors (D, A1, A2)".into(),
            ));
        }
        if !(self.target_height.is_finite() && self.target_height > 0.0) {
            return Err(Error::InvalidInput("target height must be positive".into()));
        }
        if !(self.baseline_diameter.is_finite() && self.baseline_diameter > 0.0) {
            return Err(Error::InvalidInput(
                "baseline diameter must be positive".into(),
            ));
        }
        if self.search_bounds.len() != self.factor_space.len() {
            return Err(Error::InvalidInput("one search interval per factor".into()));
        }
        if self.n_points < 8 || !self.n_points.is_multiple_of(4) {
            return Err(Error::InvalidInput(
                "n_points must be >= 8 and a multiple of 4".into(),
            ));
        }
        if self.n_modes == 0 || self.n_modes > QUARTER_NODES {
            return Err(Error::InvalidInput(format!(
                "n_modes must be between 1 and {QUARTER_NODES}, got {}",
                self.n_modes
            )));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<ModalBasis> {
        build_modal_basis(QUARTER_NODES, self.n_modes.max(2))
    }

    pub fn surrogate_plant(&self) -> SurrogatePlant {
        SurrogatePlant::new(self.material, self.surrogate, self.n_points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Configured,
    Designed,
    Simulated,
    Fitted,
    Optimized,
    Verified,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Configured => "configured",
            Stage::Designed => "designed",
            Stage::Simulated => "simulated",
            Stage::Fitted => "fitted",
            Stage::Optimized => "optimized",
            Stage::Verified => "verified",
        }
    }
}

/// A rim profile stored next to the campaign file, with its decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    /// Path relative to the campaign directory.
    pub file: String,
    pub sha256: String,
    pub blank: BlankSpec,
    pub provenance: Provenance,
    pub coordinates: ModalCoordinates,
    pub ear_amplitude: f64,
    #[serde(skip)]
    pub profile: Option<ContourProfile>,
}

impl ProfileRecord {
    fn new(
        file: String,
        run: PlantRun,
        target_height: f64,
        basis: &ModalBasis,
        n_modes: usize,
    ) -> Result<Self> {
        let coordinates = decompose(&run.profile, target_height, basis, n_modes)?;
        Ok(Self {
            sha256: state::sha256_hex(profile_to_csv(&run.profile).as_bytes()),
            file,
            blank: run.blank,
            provenance: run.provenance,
            coordinates,
            ear_amplitude: ear_amplitude(&run.profile),
            profile: Some(run.profile),
        })
    }

    pub fn profile(&self) -> &ContourProfile {
        self.profile
            .as_ref()
            .expect("profile loaded with the campaign")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// 1-based run number, in design order.
    pub run: usize,
    pub role: PointRole,
    pub normalized: Vec<f64>,
    pub result: ProfileRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    /// Circular reference blank; absent when ingested data has none.
    pub baseline: Option<ProfileRecord>,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumRecord {
    pub normalized: Vec<f64>,
    pub blank: BlankSpec,
    pub f_value: f64,
    /// Predicted modal coordinates at the optimum, L1 first.
    pub predicted: Vec<f64>,
    pub report: ConvergenceReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ReductionFactor {
    Finite(f64),
    /// Optimum rim is perfectly flat while the baseline is not.
    Infinite,
    /// Baseline rim is already flat.
    NotApplicable,
}

impl ReductionFactor {
    pub fn from_amplitudes(baseline: f64, optimum: f64) -> Self {
        if baseline == 0.0 {
            ReductionFactor::NotApplicable
        } else if optimum == 0.0 {
            ReductionFactor::Infinite
        } else {
            ReductionFactor::Finite(baseline / optimum)
        }
    }

    pub fn at_least(&self, factor: f64) -> bool {
        match *self {
            ReductionFactor::Finite(v) => v >= factor,
            ReductionFactor::Infinite => true,
            ReductionFactor::NotApplicable => false,
        }
    }
}

impl std::fmt::Display for ReductionFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReductionFactor::Finite(v) => write!(f, "{v:.3}"),
            ReductionFactor::Infinite => f.write_str("inf"),
            ReductionFactor::NotApplicable => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub optimum: ProfileRecord,
    pub baseline_ear_amplitude: f64,
    pub reduction_factor: ReductionFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub schema_version: u32,
    pub config: CampaignConfig,
    pub design: Option<DesignMatrix>,
    pub simulation: Option<Simulation>,
    pub models: Option<Vec<QuadraticModel>>,
    pub optimum: Option<OptimumRecord>,
    pub verification: Option<Verification>,
    /// Unix seconds at which each stage last completed. Excluded from
    /// reproducibility comparisons.
    pub timestamps: std::collections::BTreeMap<String, u64>,
}

impl CampaignState {
    pub fn new(config: CampaignConfig) -> Result<Self> {
        config.validate()?;
        let mut s = Self {
            schema_version: SCHEMA_VERSION,
            config,
            design: None,
            simulation: None,
            models: None,
            optimum: None,
            verification: None,
            timestamps: Default::default(),
        };
        s.stamp(Stage::Configured);
        Ok(s)
    }

    pub fn stage(&self) -> Stage {
        if self.verification.is_some() {
            Stage::Verified
        } else if self.optimum.is_some() {
            Stage::Optimized
        } else if self.models.is_some() {
            Stage::Fitted
        } else if self.simulation.is_some() {
            Stage::Simulated
        } else if self.design.is_some() {
            Stage::Designed
        } else {
            Stage::Configured
        }
    }

    fn stamp(&mut self, stage: Stage) {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        self.timestamps.insert(stage.name().to_owned(), now);
    }

    /// Later stages are never present without the earlier ones.
    pub fn check_lifecycle(&self) -> Result<()> {
        let present = [
            self.design.is_some(),
            self.simulation.is_some(),
            self.models.is_some(),
            self.optimum.is_some(),
            self.verification.is_some(),
        ];
        if let Some(gap) = present.windows(2).position(|w| !w[0] && w[1]) {
            let names = ["design", "simulation", "models", "optimum", "verification"];
            return Err(Error::Lifecycle(format!(
                "{} present without {}",
                names[gap + 1],
                names[gap]
            )));
        }
        if let (Some(d), Some(s)) = (&self.design, &self.simulation) {
            if d.len() != s.runs.len() {
                return Err(Error::Lifecycle(format!(
                    "{} runs recorded for a {}-point design",
                    s.runs.len(),
                    d.len()
                )));
            }
        }
        if let Some(m) = &self.models {
            if m.len() != self.config.n_modes {
                return Err(Error::Lifecycle(format!(
                    "{} models for {} modes",
                    m.len(),
                    self.config.n_modes
                )));
            }
        }
        Ok(())
    }

    fn require(&self, stage: Stage, command: &str) -> Result<()> {
        if self.stage() < stage {
            return Err(Error::Lifecycle(format!(
                "`{command}` needs a {} campaign, current stage is {}",
                stage.name(),
                self.stage().name()
            )));
        }
        Ok(())
    }

    /// Generates the central composite design; clears later stages.
    pub fn run_design(&mut self) -> Result<&DesignMatrix> {
        let design = ccd_design(&self.config.factor_space)?;
        design_blanks(&design, &self.config.factor_space)?;
        self.design = Some(design);
        self.simulation = None;
        self.models = None;
        self.optimum = None;
        self.verification = None;
        self.stamp(Stage::Designed);
        Ok(self.design.as_ref().unwrap())
    }

    /// Runs every design point and the circular baseline on `plant`.
    pub fn run_simulation(&mut self, plant: &dyn Plant) -> Result<&Simulation> {
        self.require(Stage::Designed, "simulate")?;
        let design = self.design.as_ref().unwrap();
        let space = &self.config.factor_space;
        let runs = crate::plant::simulate_design(design, space, plant)?;
        let baseline = plant.run(&BlankSpec::circular(self.config.baseline_diameter))?;
        self.record_simulation(runs, Some(baseline))
    }

    /// Ingests `run_NN.csv` for every design run (and `baseline.csv` when
    /// present) from `dir`.
    pub fn ingest_simulation(&mut self, dir: &Path) -> Result<&Simulation> {
        self.require(Stage::Designed, "simulate")?;
        let blanks = design_blanks(self.design.as_ref().unwrap(), &self.config.factor_space)?;
        let n = self.config.n_points;
        let runs = blanks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let path = dir.join(run_file_name(i + 1));
                Ok(PlantRun {
                    blank: *b,
                    material: self.config.material,
                    profile: ingest_profile(&path, n)?,
                    provenance: Provenance::Ingested(path),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let baseline_path = dir.join("baseline.csv");
        let baseline = if baseline_path.exists() {
            Some(PlantRun {
                blank: BlankSpec::circular(self.config.baseline_diameter),
                material: self.config.material,
                profile: ingest_profile(&baseline_path, n)?,
                provenance: Provenance::Ingested(baseline_path),
            })
        } else {
            None
        };
        self.record_simulation(runs, baseline)
    }

    fn record_simulation(
        &mut self,
        runs: Vec<PlantRun>,
        baseline: Option<PlantRun>,
    ) -> Result<&Simulation> {
        let basis = self.config.basis()?;
        let (target, n_modes) = (self.config.target_height, self.config.n_modes);
        let design = self.design.as_ref().unwrap();
        let runs = runs
            .into_iter()
            .zip(&design.points)
            .enumerate()
            .map(|(i, (run, point))| {
                Ok(RunRecord {
                    run: i + 1,
                    role: point.role,
                    normalized: point.coords.clone(),
                    result: ProfileRecord::new(
                        format!("runs/{}", run_file_name(i + 1)),
                        run,
                        target,
                        &basis,
                        n_modes,
                    )?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let baseline = baseline
            .map(|b| ProfileRecord::new("runs/baseline.csv".into(), b, target, &basis, n_modes))
            .transpose()?;
        self.simulation = Some(Simulation { baseline, runs });
        self.models = None;
        self.optimum = None;
        self.verification = None;
        self.stamp(Stage::Simulated);
        Ok(self.simulation.as_ref().unwrap())
    }

    pub fn response_table(&self) -> Result<ResponseTable> {
        self.require(Stage::Simulated, "fit")?;
        let sim = self.simulation.as_ref().unwrap();
        ResponseTable::new(
            response_names(self.config.n_modes),
            sim.runs
                .iter()
                .map(|r| r.result.coordinates.lambda.clone())
                .collect(),
        )
    }

    pub fn run_fit(&mut self) -> Result<&[QuadraticModel]> {
        let table = self.response_table()?;
        let models = fit_quadratic(
            self.design.as_ref().unwrap(),
            &table,
            &self.config.factor_space.names(),
        )?;
        self.models = Some(models);
        self.optimum = None;
        self.verification = None;
        self.stamp(Stage::Fitted);
        Ok(self.models.as_deref().unwrap())
    }

    pub fn run_optimize(&mut self) -> Result<&OptimumRecord> {
        self.require(Stage::Fitted, "optimize")?;
        let spec = ObjectiveSpec::with_bounds(
            self.models.clone().unwrap(),
            self.config.search_bounds.clone(),
        )?;
        let opt = minimize_with(&spec, &self.config.optimizer)?;
        let blank = opt.blank(&self.config.factor_space)?;
        self.optimum = Some(OptimumRecord {
            normalized: opt.normalized,
            blank,
            f_value: opt.f_value,
            predicted: opt.predicted,
            report: opt.report,
        });
        self.verification = None;
        self.stamp(Stage::Optimized);
        Ok(self.optimum.as_ref().unwrap())
    }

    /// Re-simulates the optimal blank on `plant` and compares its ears with
    /// the circular baseline.
    pub fn run_verify(&mut self, plant: &dyn Plant) -> Result<&Verification> {
        self.require(Stage::Optimized, "verify")?;
        let run = plant.run(&self.optimum.as_ref().unwrap().blank)?;
        let baseline = match &self.simulation.as_ref().unwrap().baseline {
            Some(b) => b.ear_amplitude,
            None => {
                let b = plant.run(&BlankSpec::circular(self.config.baseline_diameter))?;
                ear_amplitude(&b.profile)
            }
        };
        self.record_verification(run, baseline)
    }

    /// Verification from an externally produced profile of the optimal blank.
    pub fn ingest_verification(&mut self, path: &Path) -> Result<&Verification> {
        self.require(Stage::Optimized, "verify")?;
        let baseline = self
            .simulation
            .as_ref()
            .unwrap()
            .baseline
            .as_ref()
            .map(|b| b.ear_amplitude)
            .ok_or_else(|| {
                Error::InvalidInput(
                    "ingested verification needs a baseline profile (baseline.csv at simulate time)"
                        .into(),
                )
            })?;
        let run = PlantRun {
            blank: self.optimum.as_ref().unwrap().blank,
            material: self.config.material,
            profile: ingest_profile(path, self.config.n_points)?,
            provenance: Provenance::Ingested(path.to_path_buf()),
        };
        self.record_verification(run, baseline)
    }

    fn record_verification(&mut self, run: PlantRun, baseline: f64) -> Result<&Verification> {
        let basis = self.config.basis()?;
        let record = ProfileRecord::new(
            "runs/optimum.csv".into(),
            run,
            self.config.target_height,
            &basis,
            self.config.n_modes,
        )?;
        self.verification = Some(Verification {
            reduction_factor: ReductionFactor::from_amplitudes(baseline, record.ear_amplitude),
            baseline_ear_amplitude: baseline,
            optimum: record,
        });
        self.stamp(Stage::Verified);
        Ok(self.verification.as_ref().unwrap())
    }

    /// Campaign JSON without timestamps, for reproducibility comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timestamps");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Verification record for an optimum, on the campaign's configured plant.
pub fn verify_optimum(state: &CampaignState) -> Result<Verification> {
    let mut s = state.clone();
    s.run_verify(&state.config.surrogate_plant())?;
    Ok(s.verification.unwrap())
}

pub fn run_file_name(run: usize) -> String {
    format!("run_{run:02}.csv")
}

/// Runs the whole surrogate pipeline in memory.
pub fn run_pipeline(config: CampaignConfig) -> Result<CampaignState> {
    let mut s = CampaignState::new(config)?;
    let plant = s.config.surrogate_plant();
    s.run_design()?;
    s.run_simulation(&plant)?;
    s.run_fit()?;
    s.run_optimize()?;
    s.run_verify(&plant)?;
    Ok(s)
}

/// Standalone decomposition of a profile file.
pub fn decompose_file(
    path: &Path,
    target_height: f64,
    n_modes: usize,
    n_points: usize,
) -> Result<ModalCoordinates> {
    let profile = ingest_profile(path, n_points)?;
    let basis = build_modal_basis(QUARTER_NODES, n_modes.max(2))?;
    decompose(&profile, target_height, &basis, n_modes)
}

pub fn campaign_path(dir: &Path) -> PathBuf {
    dir.join(CAMPAIGN_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_state_is_configured() {
        let s = CampaignState::new(CampaignConfig::default()).unwrap();
        assert_eq!(s.stage(), Stage::Configured);
        s.check_lifecycle().unwrap();
    }

    #[test]
    fn stages_must_run_in_order() {
        let mut s = CampaignState::new(CampaignConfig::default()).unwrap();
        assert!(matches!(s.run_fit(), Err(Error::Lifecycle(_))));
        let plant = s.config.surrogate_plant();
        assert!(matches!(s.run_simulation(&plant), Err(Error::Lifecycle(_))));
        s.run_design().unwrap();
        assert!(matches!(s.run_optimize(), Err(Error::Lifecycle(_))));
        assert_eq!(s.stage(), Stage::Designed);
    }

    #[test]
    fn rerunning_design_clears_later_stages() {
        let mut s = run_pipeline(CampaignConfig::default()).unwrap();
        assert_eq!(s.stage(), Stage::Verified);
        s.run_design().unwrap();
        assert_eq!(s.stage(), Stage::Designed);
        assert!(s.verification.is_none() && s.models.is_none());
    }

    #[test]
    fn gaps_are_rejected() {
        let mut s = run_pipeline(CampaignConfig::default()).unwrap();
        s.models = None;
        assert!(matches!(s.check_lifecycle(), Err(Error::Lifecycle(_))));
    }

    #[test]
    fn flat_plant_has_no_reduction_factor() {
        let mut config = CampaignConfig {
            material: MaterialAnisotropy::isotropic(2.0),
            ..Default::default()
        };
        config.surrogate.c8 = 0.0;
        let s = run_pipeline(config).unwrap();
        let v = s.verification.unwrap();
        assert_eq!(v.reduction_factor, ReductionFactor::NotApplicable);
    }

    #[test]
    fn reduction_factor_cases() {
        assert_eq!(
            ReductionFactor::from_amplitudes(0.0, 0.0),
            ReductionFactor::NotApplicable
        );
        assert_eq!(
            ReductionFactor::from_amplitudes(1.0, 0.0),
            ReductionFactor::Infinite
        );
        assert_eq!(
            ReductionFactor::from_amplitudes(1.0, 0.1),
            ReductionFactor::Finite(10.0)
        );
        let j = serde_json::to_string(&ReductionFactor::Infinite).unwrap();
        assert_eq!(j, r#"{"kind":"infinite"}"#);
    }

    #[test]
    fn invalid_config() {
        let config = CampaignConfig {
            target_height: -1.0,
            ..Default::default()
        };
        assert!(CampaignState::new(config).is_err());
    }
}
