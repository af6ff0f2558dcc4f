//! Blank contours, rim profiles and scalar metrics on them.
//!
//! Angles are in radians and lengths in millimetres throughout. Contours and
//! profiles are sampled on the uniform grid `theta_k = 2*pi*k/n`, which keeps
//! the two symmetry planes (`theta = 0` and `theta = pi/2`) on sample points
//! whenever `n` is a multiple of 4.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of nodes of the quarter-period deviation vector (35 equal elements).
pub const QUARTER_NODES: usize = 36;

/// Default sample count of a full contour.
///
/// 280 is the smallest count that lands all 36 quarter nodes on samples and
/// also samples every extremum of the four-lobe term.
pub const DEFAULT_POINTS: usize = 280;

const GRID_TOL: f64 = 1e-9;

/// DCT blank parameters: nominal diameter plus two- and four-lobe amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlankSpec {
    /// Nominal diameter, mm.
    pub diameter: f64,
    /// Two-lobe (ovalization) amplitude on the radius, mm.
    pub a1: f64,
    /// Four-lobe amplitude on the radius, mm.
    pub a2: f64,
}

impl BlankSpec {
    pub fn new(diameter: f64, a1: f64, a2: f64) -> Self {
        Self { diameter, a1, a2 }
    }

    pub fn circular(diameter: f64) -> Self {
        Self::new(diameter, 0.0, 0.0)
    }

    pub fn radius_at(&self, theta: f64) -> f64 {
        0.5 * self.diameter + self.a1 * (2.0 * theta).cos() + self.a2 * (4.0 * theta).cos()
    }

    /// Conservative positivity check: `D/2 - |A1| - |A2| > 0`.
    pub fn is_strictly_positive(&self) -> bool {
        self.diameter > 0.0 && 0.5 * self.diameter - self.a1.abs() - self.a2.abs() > 0.0
    }

    fn check_finite(&self) -> Result<()> {
        if !(self.diameter.is_finite() && self.a1.is_finite() && self.a2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "blank parameters must be finite, got {self:?}"
            )));
        }
        if self.diameter <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "blank diameter must be positive, got {}",
                self.diameter
            )));
        }
        Ok(())
    }
}

/// Cup dimensions used for blank sizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CupSpec {
    pub cup_diameter: f64,
    pub cup_height: f64,
}

fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

fn check_sample_count(n: usize) -> Result<()> {
    if n < 8 || !n.is_multiple_of(4) {
        return Err(Error::InvalidInput(format!(
            "sample count must be >= 8 and a multiple of 4, got {n}"
        )));
    }
    Ok(())
}

fn check_uniform(theta: &[f64]) -> Result<()> {
    let n = theta.len();
    for (k, &t) in theta.iter().enumerate() {
        let expected = TAU * k as f64 / n as f64;
        if !t.is_finite() || (t - expected).abs() > GRID_TOL {
            return Err(Error::InvalidInput(format!(
                "sample {k} at theta = {t} is off the uniform grid (expected {expected})"
            )));
        }
    }
    Ok(())
}

/// Periodic linear interpolation on a uniform grid starting at zero.
///
/// Returns the stored sample exactly when `theta` falls on a grid point.
fn interpolate_periodic(values: &[f64], theta: f64) -> f64 {
    let n = values.len();
    let pos = theta.rem_euclid(TAU) * n as f64 / TAU;
    let i = pos.floor();
    let frac = pos - i;
    let i = (i as usize) % n;
    if frac == 0.0 {
        return values[i];
    }
    let j = (i + 1) % n;
    values[i] * (1.0 - frac) + values[j] * frac
}

/// Sampled blank outline: radius against angular position.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedContour {
    theta: Vec<f64>,
    radius: Vec<f64>,
}

impl ClosedContour {
    pub fn new(theta: Vec<f64>, radius: Vec<f64>) -> Result<Self> {
        if theta.len() != radius.len() {
            return Err(Error::InvalidInput("theta/radius length mismatch".into()));
        }
        check_sample_count(theta.len())?;
        check_uniform(&theta)?;
        if let Some((&t, &r)) = theta
            .iter()
            .zip(&radius)
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::InvalidBlank {
                theta: t,
                radius: r,
            });
        }
        Ok(Self { theta, radius })
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.theta.iter().copied().zip(self.radius.iter().copied())
    }
}

/// Rim height against angular position; the raw output of any plant.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourProfile {
    theta: Vec<f64>,
    height: Vec<f64>,
}

impl ContourProfile {
    /// Builds a profile from explicit samples, which must lie on the uniform
    /// grid `2*pi*k/n`.
    pub fn new(theta: Vec<f64>, height: Vec<f64>) -> Result<Self> {
        if theta.len() != height.len() {
            return Err(Error::InvalidInput("theta/height length mismatch".into()));
        }
        if theta.len() < 4 {
            return Err(Error::InsufficientData {
                found: theta.len(),
                required: 4,
            });
        }
        check_uniform(&theta)?;
        if let Some(k) = height.iter().position(|h| !h.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite height at sample {k}"
            )));
        }
        Ok(Self { theta, height })
    }

    /// Builds a profile on the uniform grid from heights alone.
    pub fn from_heights(height: Vec<f64>) -> Result<Self> {
        let theta = uniform_grid(height.len());
        Self::new(theta, height)
    }

    /// Samples `f(theta)` on an `n`-point uniform grid.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_heights(uniform_grid(n).into_iter().map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn heights(&self) -> &[f64] {
        &self.height
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.theta.iter().copied().zip(self.height.iter().copied())
    }

    pub fn mean_height(&self) -> f64 {
        self.height.iter().sum::<f64>() / self.height.len() as f64
    }

    /// Height at an arbitrary angle by periodic linear interpolation.
    pub fn height_at(&self, theta: f64) -> f64 {
        interpolate_periodic(&self.height, theta)
    }
}

/// Samples the DCT blank `r(theta) = D/2 + A1 cos 2theta + A2 cos 4theta`.
pub fn blank_contour(spec: &BlankSpec, n_points: usize) -> Result<ClosedContour> {
    check_sample_count(n_points)?;
    spec.check_finite()?;
    let theta = uniform_grid(n_points);
    let radius: Vec<f64> = theta.iter().map(|&t| spec.radius_at(t)).collect();
    ClosedContour::new(theta, radius)
}

/// Blank diameter that conserves sheet area for a flat-bottomed cylindrical cup
/// at constant thickness: `D0 = sqrt(d^2 + 4 d h)`.
pub fn initial_blank_diameter(cup: &CupSpec) -> Result<f64> {
    let CupSpec {
        cup_diameter: d,
        cup_height: h,
    } = *cup;
    if !(d.is_finite() && d > 0.0) || !(h.is_finite() && h >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "cup dimensions must be positive, got d = {d}, h = {h}"
        )));
    }
    Ok((d * d + 4.0 * d * h).sqrt())
}

/// Peak-to-peak rim height, `max - min` over all samples.
pub fn ear_amplitude(profile: &ContourProfile) -> f64 {
    let (lo, hi) = profile
        .heights()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| {
            (lo.min(h), hi.max(h))
        });
    hi - lo
}

/// Per-node clearance between a rim profile and the target height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationVector(Vec<f64>);

impl DeviationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite deviation at node {k}"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Angles of the quarter-period nodes, `theta_j = (pi/2) * j / 35`.
pub fn quarter_node_angles() -> Vec<f64> {
    let elements = (QUARTER_NODES - 1) as f64;
    (0..QUARTER_NODES)
        .map(|j| FRAC_PI_2 * j as f64 / elements)
        .collect()
}

/// Restricts a profile to the quarter period `[0, pi/2]` and returns
/// `height - target_height` at the 36 quarter nodes.
///
/// Nodes that coincide with samples (profile length a multiple of 140) are
/// read exactly; otherwise the profile is linearly interpolated.
pub fn deviation_vector(profile: &ContourProfile, target_height: f64) -> Result<DeviationVector> {
    if !(target_height.is_finite() && target_height > 0.0) {
        return Err(Error::InvalidInput(format!(
            "target height must be positive, got {target_height}"
        )));
    }
    let n = profile.len();
    let elements = QUARTER_NODES - 1;
    let values = (0..QUARTER_NODES)
        .map(|j| {
            // Grid position of node j is n*j/(4*35); exact when divisible.
            let num = n * j;
            let den = 4 * elements;
            let h = if num.is_multiple_of(den) {
                profile.heights()[(num / den) % n]
            } else {
                profile.height_at(PI * 0.5 * j as f64 / elements as f64)
            };
            h - target_height
        })
        .collect();
    DeviationVector::new(values)
}
