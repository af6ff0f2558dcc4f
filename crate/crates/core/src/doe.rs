//! Central composite designs over the blank factor space.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Star distance of the reference campaign.
pub const DEFAULT_ALPHA: f64 = 1.287;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub center: f64,
    pub half_range: f64,
}

impl Factor {
    pub fn new(name: impl Into<String>, center: f64, half_range: f64) -> Self {
        Self {
            name: name.into(),
            center,
            half_range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpace {
    pub factors: Vec<Factor>,
    /// Star distance in normalized units.
    pub alpha: f64,
}

impl Default for FactorSpace {
    /// Diameter 117 +/- 1.5 mm and both lobe amplitudes 0 +/- 1.5 mm.
    fn default() -> Self {
        Self {
            factors: vec![
                Factor::new("D", 117.0, 1.5),
                Factor::new("A1", 0.0, 1.5),
                Factor::new("A2", 0.0, 1.5),
            ],
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl FactorSpace {
    pub fn new(factors: Vec<Factor>, alpha: f64) -> Result<Self> {
        let space = Self { factors, alpha };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self
            .factors
            .iter()
            .find(|f| !(f.half_range.is_finite() && f.half_range > 0.0 && f.center.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "factor {:?} needs a finite center and positive half range",
                f.name
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "star distance alpha must be >= 1, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.factors.iter().map(|f| f.name.clone()).collect()
    }

    /// `physical_i = center_i + normalized_i * half_range_i`
    pub fn to_physical(&self, normalized: &[f64]) -> Vec<f64> {
        assert_eq!(normalized.len(), self.len(), "coordinate length mismatch");
        self.factors
            .iter()
            .zip(normalized)
            .map(|(f, x)| f.center + x * f.half_range)
            .collect()
    }

    pub fn to_normalized(&self, physical: &[f64]) -> Vec<f64> {
        assert_eq!(physical.len(), self.len(), "coordinate length mismatch");
        self.factors
            .iter()
            .zip(physical)
            .map(|(f, p)| (p - f.center) / f.half_range)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointRole {
    Factorial,
    Center,
    Star,
}

impl fmt::Display for PointRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointRole::Factorial => "factorial",
            PointRole::Center => "center",
            PointRole::Star => "star",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub role: PointRole,
    /// Normalized coordinates.
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub points: Vec<DesignPoint>,
}

impl DesignMatrix {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_factors(&self) -> usize {
        self.points.first().map_or(0, |p| p.coords.len())
    }

    pub fn coords(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.coords.as_slice())
    }
}

/// Box-Wilson central composite design.
///
/// Rows come out as the full `2^f` factorial in binary order (first factor
/// varies slowest, low before high), then the center point, then one
/// `(-alpha, +alpha)` star pair per factor.
pub fn ccd_design(space: &FactorSpace) -> Result<DesignMatrix> {
    space.validate()?;
    let f = space.len();
    if !(2..=6).contains(&f) {
        return Err(Error::InvalidInput(format!(
            "central composite design supports 2 to 6 factors, got {f}"
        )));
    }
    let mut points = Vec::with_capacity((1 << f) + 1 + 2 * f);
    for code in 0..(1usize << f) {
        let coords = (0..f)
            .map(|i| {
                if code >> (f - 1 - i) & 1 == 1 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        points.push(DesignPoint {
            role: PointRole::Factorial,
            coords,
        });
    }
    points.push(DesignPoint {
        role: PointRole::Center,
        coords: vec![0.0; f],
    });
    for i in 0..f {
        for sign in [-1.0, 1.0] {
            let mut coords = vec![0.0; f];
            coords[i] = sign * space.alpha;
            points.push(DesignPoint {
                role: PointRole::Star,
                coords,
            });
        }
    }
    Ok(DesignMatrix { points })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn three_factor_layout() {
        let d = ccd_design(&FactorSpace::default()).unwrap();
        assert_eq!(d.len(), 15);
        assert_eq!(d.points[0].coords, vec![-1.0, -1.0, -1.0]);
        assert_eq!(d.points[1].coords, vec![-1.0, -1.0, 1.0]);
        assert_eq!(d.points[7].coords, vec![1.0, 1.0, 1.0]);
        assert_eq!(d.points[8].coords, vec![0.0, 0.0, 0.0]);
        assert_eq!(d.points[8].role, PointRole::Center);
        assert_eq!(d.points[9].coords, vec![-1.287, 0.0, 0.0]);
        assert_eq!(d.points[14].coords, vec![0.0, 0.0, 1.287]);
        let count = |r| d.points.iter().filter(|p| p.role == r).count();
        assert_eq!(count(PointRole::Factorial), 8);
        assert_eq!(count(PointRole::Center), 1);
        assert_eq!(count(PointRole::Star), 6);
    }

    #[test]
    fn face_centered_two_factor_design() {
        let space = FactorSpace::new(
            vec![Factor::new("a", 0.0, 1.0), Factor::new("b", 0.0, 1.0)],
            1.0,
        )
        .unwrap();
        let d = ccd_design(&space).unwrap();
        assert_eq!(d.len(), 9);
        for p in d.points.iter().filter(|p| p.role == PointRole::Star) {
            assert_eq!(p.coords.iter().filter(|x| x.abs() == 1.0).count(), 1);
        }
    }

    #[test]
    fn columns_are_balanced() {
        for f in 2..=6 {
            let space = FactorSpace::new(
                (0..f)
                    .map(|i| Factor::new(format!("x{i}"), 0.0, 1.0))
                    .collect(),
                1.5,
            )
            .unwrap();
            let d = ccd_design(&space).unwrap();
            assert_eq!(d.len(), (1 << f) + 1 + 2 * f);
            for i in 0..f {
                assert_eq!(d.coords().map(|c| c[i]).sum::<f64>(), 0.0);
            }
        }
    }

    #[test]
    fn factor_count_limits() {
        let one = FactorSpace::new(vec![Factor::new("a", 0.0, 1.0)], 1.2).unwrap();
        assert!(ccd_design(&one).is_err());
        let seven = FactorSpace::new(
            (0..7)
                .map(|i| Factor::new(format!("x{i}"), 0.0, 1.0))
                .collect(),
            1.2,
        )
        .unwrap();
        assert!(ccd_design(&seven).is_err());
        assert!(FactorSpace::new(vec![Factor::new("a", 0.0, 0.0)], 1.2).is_err());
        assert!(FactorSpace::new(vec![Factor::new("a", 0.0, 1.0)], 0.5).is_err());
    }

    #[test]
    fn coding_of_diameter_levels() {
        let s = FactorSpace::default();
        assert_abs_diff_eq!(
            s.to_physical(&[-1.287, 0.0, 0.0])[0],
            115.07,
            epsilon = 0.005
        );
        assert_eq!(s.to_physical(&[0.0, 0.0, 0.0])[0], 117.0);
        assert_abs_diff_eq!(s.to_physical(&[0.0, 1.287, 0.0])[1], 1.93, epsilon = 0.005);
        assert_eq!(s.to_normalized(&[118.5, 0.0, 0.0])[0], 1.0);
        assert_eq!(s.to_normalized(&[117.0, 0.0, 0.0])[0], 0.0);
        assert_eq!(s.to_normalized(&[115.5, 0.0, 0.0])[0], -1.0);
    }

    proptest! {
        #[test]
        fn coding_round_trip(x in prop::collection::vec(-3.0f64..3.0, 3)) {
            let s = FactorSpace::default();
            let back = s.to_normalized(&s.to_physical(&x));
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
