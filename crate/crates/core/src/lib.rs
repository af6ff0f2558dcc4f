//! Earing compensation for deep-drawn cups by blank-contour optimization.
//!
//! The pipeline: describe the blank with DCT parameters (`D`, `A1`, `A2`),
//! run a central composite design of blanks through a process plant,
//! decompose each rim profile into modal coordinates, fit one quadratic
//! response surface per coordinate, and minimize the sum of squared
//! coordinates to find the blank that yields the flattest rim.
//!
//! ```
//! use earforge_core::campaign::{run_pipeline, CampaignConfig};
//!
//! let state = run_pipeline(CampaignConfig::default()).unwrap();
//! let v = state.verification.unwrap();
//! assert!(v.optimum.ear_amplitude < v.baseline_ear_amplitude / 10.0);
//! ```

pub mod campaign;
pub mod csvio;
pub mod doe;
pub mod error;
pub mod geometry;
pub mod modal;
pub mod optimizer;
pub mod plant;
pub mod rsm;

pub use doe::{ccd_design, DesignMatrix, DesignPoint, Factor, FactorSpace, PointRole};
pub use error::{Error, ErrorClass, Result};
pub use geometry::{
    blank_contour, deviation_vector, ear_amplitude, initial_blank_diameter, BlankSpec,
    ClosedContour, ContourProfile, CupSpec, DeviationVector,
};
pub use modal::{
    analytic_mode, build_modal_basis, decompose, project, reconstruct, ModalBasis, ModalCoordinates,
};
pub use optimizer::{grid_oracle, minimize, objective_f, ObjectiveSpec, Optimum};
pub use plant::{
    ingest_profile, run_design, simulate, MaterialAnisotropy, Plant, PlantRun, SurrogateParams,
    SurrogatePlant,
};
pub use rsm::{fit_quadratic, rank_influence, QuadraticModel, ResponseTable};
