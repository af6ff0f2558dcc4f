//! Process plants: anything that turns a blank into a rim profile.
//!
//! [`SurrogatePlant`] is a low-order analytic stand-in for a forming
//! simulation. Rim height is a superposition of the mean height (mildly
//! quadratic in blank diameter) and cosine lobes:
//!
//! ```text
//! h(theta) = h0 + k_d dD + k_q dD^2
//!          + g2 A1 cos 2theta
//!          + (g4 A2 + c_ear dr) cos 4theta
//!          + kappa A2 cos 6theta
//!          + c8 cos 8theta
//! ```
//!
//! with `dD = D - ref_diameter` and `dr` the planar anisotropy of the sheet.
//! External results enter through [`ingest_profile`].

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csvio::{parse_numeric, read_text, CONTOUR_HEADER, POINT_CLOUD_HEADER};
use crate::doe::{DesignMatrix, FactorSpace};
use crate::error::{Error, Result};
use crate::geometry::{blank_contour, BlankSpec, ContourProfile};
use crate::modal::{decompose, ModalBasis};
use crate::rsm::ResponseTable;

/// Lankford coefficients at 0, 45 and 90 degrees to the rolling direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialAnisotropy {
    pub r0: f64,
    pub r45: f64,
    pub r90: f64,
}

impl MaterialAnisotropy {
    pub fn new(r0: f64, r45: f64, r90: f64) -> Result<Self> {
        let m = Self { r0, r45, r90 };
        m.validate()?;
        Ok(m)
    }

    /// DC05 deep-drawing steel, 0.8 mm.
    pub fn dc05() -> Self {
        Self {
            r0: 2.09,
            r45: 1.56,
            r90: 2.72,
        }
    }

    pub fn isotropic(r: f64) -> Self {
        Self {
            r0: r,
            r45: r,
            r90: r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.r0, self.r45, self.r90]
            .iter()
            .any(|r| !(r.is_finite() && *r > 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "Lankford coefficients must be positive, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Planar anisotropy `(r0 - 2 r45 + r90) / 2`.
    pub fn delta_r(&self) -> f64 {
        0.5 * (self.r0 - 2.0 * self.r45 + self.r90)
    }
}

/// Peak-to-peak ear height of a circular DC05 blank, mm.
pub const REFERENCE_EAR_AMPLITUDE: f64 = 1.72;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    /// Diameter of the reference circular blank, mm.
    pub ref_diameter: f64,
    /// Mean rim height of the reference blank, mm.
    pub base_height: f64,
    /// Height gain per mm of diameter.
    pub k_d: f64,
    /// Quadratic diameter term, 1/mm.
    pub k_q: f64,
    /// Transmission of blank A1 into the rim cos 2theta term.
    pub g2: f64,
    /// Transmission of blank A2 into the rim cos 4theta term.
    pub g4: f64,
    /// Four-lobe earing per unit planar anisotropy, mm.
    pub c_ear: f64,
    /// Coupling of blank A2 into the rim cos 6theta term.
    pub kappa4_6: f64,
    /// Fixed cos 8theta residual, mm.
    pub c8: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            ref_diameter: 116.63,
            base_height: 34.69,
            k_d: 0.886,
            k_q: 0.03,
            g2: 1.0,
            g4: 1.066,
            // Circular DC05 blank -> 1.72 mm peak to peak.
            c_ear: REFERENCE_EAR_AMPLITUDE / (2.0 * MaterialAnisotropy::dc05().delta_r()),
            // L4 = 7.92e-4 mm at the four-lobe-cancelling blank A2 = -0.807 mm.
            kappa4_6: 7.92e-4 / -0.807,
            c8: -0.05,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.ref_diameter,
            self.base_height,
            self.k_d,
            self.k_q,
            self.g2,
            self.g4,
            self.c_ear,
            self.kappa4_6,
            self.c8,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "surrogate parameters must be finite".into(),
            ));
        }
        if self.ref_diameter <= 0.0 || self.base_height <= 0.0 {
            return Err(Error::InvalidInput(
                "surrogate reference diameter and base height must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Cosine amplitudes `(c0, c2, c4, c6, c8)` of the rim for `blank`.
    pub fn harmonics(&self, blank: &BlankSpec, material: &MaterialAnisotropy) -> [f64; 5] {
        let dd = blank.diameter - self.ref_diameter;
        [
            self.base_height + self.k_d * dd + self.k_q * dd * dd,
            self.g2 * blank.a1,
            self.g4 * blank.a2 + self.c_ear * material.delta_r(),
            self.kappa4_6 * blank.a2,
            self.c8,
        ]
    }
}

/// Rim profile of the analytic surrogate.
pub fn simulate(
    blank: &BlankSpec,
    material: &MaterialAnisotropy,
    params: &SurrogateParams,
    n_points: usize,
) -> Result<ContourProfile> {
    material.validate()?;
    params.validate()?;
    blank_contour(blank, n_points)?;
    let [c0, c2, c4, c6, c8] = params.harmonics(blank, material);
    ContourProfile::from_fn(n_points, |t| {
        c0 + c2 * (2.0 * t).cos()
            + c4 * (4.0 * t).cos()
            + c6 * (6.0 * t).cos()
            + c8 * (8.0 * t).cos()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "lowercase")]
pub enum Provenance {
    Surrogate,
    Ingested(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantRun {
    pub blank: BlankSpec,
    pub material: MaterialAnisotropy,
    pub profile: ContourProfile,
    pub provenance: Provenance,
}

/// A process that forms a blank into a cup.
pub trait Plant: Sync {
    fn run(&self, blank: &BlankSpec) -> Result<PlantRun>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePlant {
    pub material: MaterialAnisotropy,
    pub params: SurrogateParams,
    pub n_points: usize,
}

impl SurrogatePlant {
    pub fn new(material: MaterialAnisotropy, params: SurrogateParams, n_points: usize) -> Self {
        Self {
            material,
            params,
            n_points,
        }
    }
}

impl Plant for SurrogatePlant {
    fn run(&self, blank: &BlankSpec) -> Result<PlantRun> {
        Ok(PlantRun {
            blank: *blank,
            material: self.material,
            profile: simulate(blank, &self.material, &self.params, self.n_points)?,
            provenance: Provenance::Surrogate,
        })
    }
}

/// Sorts `(theta, height)` samples, rejects duplicate angles and resamples
/// to an `n_points` uniform grid by periodic linear interpolation.
fn resample_polar(mut samples: Vec<(f64, f64)>, n_points: usize) -> Result<ContourProfile> {
    const MIN_POINTS: usize = 8;
    if samples.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            found: samples.len(),
            required: MIN_POINTS,
        });
    }
    if n_points < MIN_POINTS || !n_points.is_multiple_of(4) {
        return Err(Error::InvalidInput(format!(
            "resampling count must be >= 8 and a multiple of 4, got {n_points}"
        )));
    }
    if let Some((t, h)) = samples
        .iter()
        .find(|(t, h)| !(t.is_finite() && h.is_finite()))
    {
        return Err(Error::InvalidInput(format!("non-finite sample ({t}, {h})")));
    }
    for s in &mut samples {
        s.0 = s.0.rem_euclid(TAU);
        if s.0 >= TAU {
            s.0 = 0.0;
        }
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let duplicates: Vec<f64> = samples
        .windows(2)
        .filter(|w| (w[1].0 - w[0].0).abs() <= 1e-12)
        .map(|w| w[0].0)
        .collect();
    if !duplicates.is_empty() {
        return Err(Error::AmbiguousAngles { duplicates });
    }

    let n = samples.len();
    let heights = (0..n_points)
        .map(|k| {
            let theta = TAU * k as f64 / n_points as f64;
            // First sample at or beyond theta.
            let i = samples.partition_point(|s| s.0 < theta);
            if i < n && samples[i].0 == theta {
                return samples[i].1;
            }
            let (lo, hi) = match i {
                0 => ((samples[n - 1].0 - TAU, samples[n - 1].1), samples[0]),
                i if i == n => (samples[n - 1], (samples[0].0 + TAU, samples[0].1)),
                i => (samples[i - 1], samples[i]),
            };
            let w = (theta - lo.0) / (hi.0 - lo.0);
            lo.1 + w * (hi.1 - lo.1)
        })
        .collect();
    ContourProfile::from_heights(heights)
}

/// Loads a rim profile from a contour CSV (`theta_rad,value_mm`) or a rim
/// point cloud (`x_mm,y_mm,z_mm`).
///
/// Point clouds are converted to polar form about the vertical axis through
/// their centroid; height is `z`.
pub fn ingest_profile(path: &Path, n_points: usize) -> Result<ContourProfile> {
    let text = read_text(path)?;
    let origin = path.display().to_string();
    let table = parse_numeric(&text, &origin)?;
    let samples: Vec<(f64, f64)> = if table.header == CONTOUR_HEADER {
        table.rows.iter().map(|r| (r[0], r[1])).collect()
    } else if table.header == POINT_CLOUD_HEADER {
        if table.rows.is_empty() {
            return Err(Error::InsufficientData {
                found: 0,
                required: 8,
            });
        }
        let n = table.rows.len() as f64;
        let cx = table.rows.iter().map(|r| r[0]).sum::<f64>() / n;
        let cy = table.rows.iter().map(|r| r[1]).sum::<f64>() / n;
        table
            .rows
            .iter()
            .map(|r| ((r[1] - cy).atan2(r[0] - cx), r[2]))
            .collect()
    } else {
        return Err(Error::InvalidInput(format!(
            "{origin}: unrecognised header {:?}; expected {:?} or {:?}",
            table.header.join(","),
            CONTOUR_HEADER.join(","),
            POINT_CLOUD_HEADER.join(",")
        )));
    };
    resample_polar(samples, n_points)
}

/// Blanks of every design point, in design order.
pub fn design_blanks(design: &DesignMatrix, space: &FactorSpace) -> Result<Vec<BlankSpec>> {
    if space.len() != 3 || design.n_factors() != 3 {
        return Err(Error::InvalidInput(
            "blank designs need exactly three factors (D, A1, A2)".into(),
        ));
    }
    Ok(design
        .coords()
        .map(|c| {
            let p = space.to_physical(c);
            BlankSpec::new(p[0], p[1], p[2])
        })
        .collect())
}

/// Runs every design point through the plant. Points may run concurrently;
/// results come back in design order.
pub fn simulate_design(
    design: &DesignMatrix,
    space: &FactorSpace,
    plant: &dyn Plant,
) -> Result<Vec<PlantRun>> {
    design_blanks(design, space)?
        .par_iter()
        .map(|b| plant.run(b))
        .collect()
}

/// Modal responses `L1..Ln` of every design point.
pub fn run_design(
    design: &DesignMatrix,
    space: &FactorSpace,
    plant: &dyn Plant,
    target_height: f64,
    basis: &ModalBasis,
    n_modes: usize,
) -> Result<ResponseTable> {
    let rows = simulate_design(design, space, plant)?
        .iter()
        .map(|run| decompose(&run.profile, target_height, basis, n_modes).map(|c| c.lambda))
        .collect::<Result<Vec<_>>>()?;
    ResponseTable::new(response_names(n_modes), rows)
}

pub fn response_names(n_modes: usize) -> Vec<String> {
    (1..=n_modes).map(|i| format!("L{i}")).collect()
}
