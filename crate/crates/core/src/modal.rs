//! Modal description of rim defects.
//!
//! The quarter-period rim is modelled as a free-free chain of equal elements
//! with one degree of freedom per node. Its vibration modes, solutions of
//! `(K - w^2 M) Q = 0`, form the defect basis: mode 1 is the rigid (size)
//! mode, mode k is the cosine `cos((k-1) pi x / l)`. A deviation vector is
//! described by its coordinates on the first few modes.
//!
//! With a lumped mass matrix (half masses on the two end nodes) the discrete
//! eigenvectors are exactly the sampled cosines, and they are orthogonal
//! under the mass-weighted inner product `<u, v>_M = u^T M v`. Projections use
//! that inner product so that each mode coordinate is independent of the
//! others.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::geometry::DeviationVector;
use crate::geometry::{deviation_vector, ContourProfile, QUARTER_NODES};

/// Default number of modes used to describe a defect.
pub const DEFAULT_MODES: usize = 5;

const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    n_nodes: usize,
    /// Mode shapes, unit infinity-norm, first node positive.
    modes: Vec<Vec<f64>>,
    /// Pulsations in rad/s for a unit-length chain with unit stiffness and
    /// mass per length; informational only.
    pulsations: Vec<f64>,
    /// Diagonal of the lumped mass matrix.
    mass: Vec<f64>,
}

impl ModalBasis {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    /// Mode `k`, counted from 1.
    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k - 1]
    }

    pub fn pulsations(&self) -> &[f64] {
        &self.pulsations
    }

    pub fn mass_diagonal(&self) -> &[f64] {
        &self.mass
    }

    /// Mass-weighted inner product `u^T M v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass
            .iter()
            .zip(u.iter().zip(v))
            .map(|(m, (a, b))| m * a * b)
            .sum()
    }

    /// The default 36-node, 5-mode basis.
    pub fn standard() -> Self {
        build_modal_basis(QUARTER_NODES, DEFAULT_MODES).expect("standard basis is well-posed")
    }
}

/// Coordinates of a deviation vector in a modal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalCoordinates {
    /// `lambda[i]` is the coordinate on mode `i + 1`, mm.
    pub lambda: Vec<f64>,
    /// `||V - sum lambda_i Q_i||_inf / ||V||_inf`, zero for a zero vector.
    pub residue: f64,
}

fn lumped_mass(n: usize, h: f64) -> Vec<f64> {
    let mut m = vec![h; n];
    m[0] = 0.5 * h;
    m[n - 1] = 0.5 * h;
    m
}

/// `K v` for the free-free second-difference stiffness matrix.
fn apply_stiffness(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            if i > 0 {
                acc += v[i] - v[i - 1];
            }
            if i + 1 < n {
                acc += v[i] - v[i + 1];
            }
            acc / h
        })
        .collect()
}

fn stiffness_matrix(n: usize, h: f64) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(n, n);
    for e in 0..n - 1 {
        k[(e, e)] += 1.0 / h;
        k[(e + 1, e + 1)] += 1.0 / h;
        k[(e, e + 1)] -= 1.0 / h;
        k[(e + 1, e)] -= 1.0 / h;
    }
    k
}

/// Solves the free-free chain eigenproblem and returns its `n_modes` lowest modes.
pub fn build_modal_basis(n_nodes: usize, n_modes: usize) -> Result<ModalBasis> {
    if n_modes < 2 || n_modes > n_nodes {
        return Err(Error::InvalidInput(format!(
            "need 2 <= n_modes <= n_nodes, got n_modes = {n_modes}, n_nodes = {n_nodes}"
        )));
    }
    let h = 1.0 / (n_nodes - 1) as f64;
    let mass = lumped_mass(n_nodes, h);
    let inv_sqrt_m: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();

    // M^{-1/2} K M^{-1/2} is symmetric; its eigenvectors y map back to Q = M^{-1/2} y.
    let k = stiffness_matrix(n_nodes, h);
    let a = DMatrix::from_fn(n_nodes, n_nodes, |i, j| {
        inv_sqrt_m[i] * k[(i, j)] * inv_sqrt_m[j]
    });
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::Numeric(format!(
            "symmetric eigen-solver did not converge within {EIGEN_MAX_ITER} iterations \
             (n_nodes = {n_nodes}, eps = {:e})",
            f64::EPSILON
        ))
    })?;

    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut modes = Vec::with_capacity(n_modes);
    let mut pulsations = Vec::with_capacity(n_modes);
    for &idx in order.iter().take(n_modes) {
        let mut q: Vec<f64> = eig
            .eigenvectors
            .column(idx)
            .iter()
            .zip(&inv_sqrt_m)
            .map(|(y, s)| y * s)
            .collect();
        let peak = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
        q.iter_mut().for_each(|v| *v *= sign / peak);

        // Rayleigh quotient on the normalized vector.
        let kq = apply_stiffness(&q, h);
        let num: f64 = q.iter().zip(&kq).map(|(a, b)| a * b).sum();
        let den: f64 = q.iter().zip(&mass).map(|(a, m)| m * a * a).sum();
        pulsations.push((num / den).max(0.0).sqrt());
        modes.push(q);
    }

    Ok(ModalBasis {
        n_nodes,
        modes,
        pulsations,
        mass,
    })
}

/// Closed-form mode shape `cos((k-1) pi j / (n_nodes-1))`, unit amplitude.
pub fn analytic_mode(k: usize, n_nodes: usize) -> Result<Vec<f64>> {
    if k == 0 || n_nodes < 2 {
        return Err(Error::InvalidInput(format!(
            "mode index must be >= 1 and n_nodes >= 2, got k = {k}, n_nodes = {n_nodes}"
        )));
    }
    let l = (n_nodes - 1) as f64;
    Ok((0..n_nodes)
        .map(|j| ((k - 1) as f64 * std::f64::consts::PI * j as f64 / l).cos())
        .collect())
}

/// Projects `v` on the first `n_modes` modes:
/// `lambda_i = <V, Q_i>_M / <Q_i, Q_i>_M`.
pub fn project(
    v: &DeviationVector,
    basis: &ModalBasis,
    n_modes: usize,
) -> Result<ModalCoordinates> {
    if v.len() != basis.n_nodes() {
        return Err(Error::InvalidInput(format!(
            "deviation vector has {} nodes, basis has {}",
            v.len(),
            basis.n_nodes()
        )));
    }
    if n_modes == 0 || n_modes > basis.n_modes() {
        return Err(Error::InvalidInput(format!(
            "requested {n_modes} modes, basis holds {}",
            basis.n_modes()
        )));
    }
    let lambda: Vec<f64> = basis.modes[..n_modes]
        .iter()
        .map(|q| basis.inner(q, v.values()) / basis.inner(q, q))
        .collect();

    let norm = v.max_abs();
    let residue = if norm == 0.0 {
        0.0
    } else {
        let approx = combine(&lambda, basis);
        let rem = v
            .values()
            .iter()
            .zip(&approx)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rem / norm
    };
    Ok(ModalCoordinates { lambda, residue })
}

fn combine(lambda: &[f64], basis: &ModalBasis) -> Vec<f64> {
    let mut out = vec![0.0; basis.n_nodes()];
    for (l, q) in lambda.iter().zip(&basis.modes) {
        for (o, x) in out.iter_mut().zip(q) {
            *o += l * x;
        }
    }
    out
}

/// Truncated modal expansion `sum lambda_i Q_i`.
pub fn reconstruct(coords: &ModalCoordinates, basis: &ModalBasis) -> Result<DeviationVector> {
    if coords.lambda.len() > basis.n_modes() {
        return Err(Error::InvalidInput(format!(
            "{} coordinates but basis holds {} modes",
            coords.lambda.len(),
            basis.n_modes()
        )));
    }
    DeviationVector::new(combine(&coords.lambda, basis))
}

/// Deviation vector of `profile` about `target_height`, projected on `basis`.
pub fn decompose(
    profile: &ContourProfile,
    target_height: f64,
    basis: &ModalBasis,
    n_modes: usize,
) -> Result<ModalCoordinates> {
    if basis.n_nodes() != QUARTER_NODES {
        return Err(Error::InvalidInput(format!(
            "profile decomposition needs a {QUARTER_NODES}-node basis, got {}",
            basis.n_nodes()
        )));
    }
    project(&deviation_vector(profile, target_height)?, basis, n_modes)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn dv(values: Vec<f64>) -> DeviationVector {
        DeviationVector::new(values).unwrap()
    }

    #[test]
    fn first_mode_is_rigid() {
        let b = build_modal_basis(36, 5).unwrap();
        for &x in b.mode(1) {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        }
        assert!(b.pulsations()[0] <= 1e-6 * b.pulsations()[1]);
    }

    #[test]
    fn pulsations_ascend() {
        let b = build_modal_basis(36, 8).unwrap();
        assert!(b.pulsations().windows(2).all(|w| w[0] < w[1]));
        // Second mode of a unit free-free chain: w = 2/h sin(pi h / 2) ~ pi.
        let h = 1.0 / 35.0;
        let expected = 2.0 / h * (std::f64::consts::PI * h / 2.0).sin();
        assert_abs_diff_eq!(b.pulsations()[1], expected, epsilon = 1e-9);
    }

    #[test]
    fn third_mode_matches_cosine() {
        let b = build_modal_basis(36, 5).unwrap();
        for (j, &x) in b.mode(3).iter().enumerate() {
            let c = (2.0 * std::f64::consts::PI * j as f64 / 35.0).cos();
            assert!((x - c).abs() <= 0.02);
        }
    }

    #[test]
    fn analytic_mode_values() {
        assert!(analytic_mode(1, 36).unwrap().iter().all(|&x| x == 1.0));
        let m2 = analytic_mode(2, 36).unwrap();
        assert_eq!(m2[0], 1.0);
        assert_abs_diff_eq!(m2[35], -1.0, epsilon = 1e-15);
        let m3 = analytic_mode(3, 36).unwrap();
        // Minimum -1 at midspan x = l/2, between nodes 17 and 18.
        assert!(m3[17] < -0.99 && m3[18] < -0.99);
        assert_abs_diff_eq!(m3[17], m3[18], epsilon = 1e-12);
        assert!(analytic_mode(0, 36).is_err());
    }

    #[test]
    fn bad_mode_counts() {
        assert!(build_modal_basis(36, 1).is_err());
        assert!(build_modal_basis(4, 5).is_err());
    }

    #[test]
    fn projection_of_basis_vectors() {
        let b = ModalBasis::standard();
        let v = dv(b.mode(1).iter().map(|x| 3.0 * x).collect());
        let c = project(&v, &b, 5).unwrap();
        assert_abs_diff_eq!(c.lambda[0], 3.0, epsilon = 1e-12);
        for &l in &c.lambda[1..] {
            assert_abs_diff_eq!(l, 0.0, epsilon = 1e-12);
        }
        assert!(c.residue <= 1e-12);

        let v = dv(b
            .mode(2)
            .iter()
            .zip(b.mode(3))
            .map(|(a, c)| a + 2.0 * c)
            .collect());
        let c = project(&v, &b, 5).unwrap();
        for (got, want) in c.lambda.iter().zip([0.0, 1.0, 2.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_vector_has_zero_residue() {
        let b = ModalBasis::standard();
        let c = project(&DeviationVector::zeros(36), &b, 5).unwrap();
        assert_eq!(c.residue, 0.0);
        assert!(c.lambda.iter().all(|&l| l == 0.0));
        let r = reconstruct(&c, &b).unwrap();
        assert!(r.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let b = ModalBasis::standard();
        assert!(project(&DeviationVector::zeros(10), &b, 5).is_err());
        assert!(project(&DeviationVector::zeros(36), &b, 6).is_err());
    }

    fn vec36() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 36)
    }

    proptest! {
        #[test]
        fn projection_is_linear(v1 in vec36(), v2 in vec36(), a in -3.0f64..3.0, c in -3.0f64..3.0) {
            let b = ModalBasis::standard();
            let mix: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| a * x + c * y).collect();
            let p1 = project(&dv(v1), &b, 5).unwrap();
            let p2 = project(&dv(v2), &b, 5).unwrap();
            let pm = project(&dv(mix), &b, 5).unwrap();
            for i in 0..5 {
                prop_assert!((pm.lambda[i] - (a * p1.lambda[i] + c * p2.lambda[i])).abs() <= 1e-9);
            }
        }

        #[test]
        fn reconstruction_error_equals_residue(v in vec36()) {
            let b = ModalBasis::standard();
            let v = dv(v);
            let c = project(&v, &b, 5).unwrap();
            let r = reconstruct(&c, &b).unwrap();
            let err = v.values().iter().zip(r.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            prop_assert!((err - c.residue * v.max_abs()).abs() <= 1e-12);
        }

        #[test]
        fn span_vectors_reconstruct_exactly(l in prop::collection::vec(-2.0f64..2.0, 5)) {
            let b = ModalBasis::standard();
            let coords = ModalCoordinates { lambda: l.clone(), residue: 0.0 };
            let v = reconstruct(&coords, &b).unwrap();
            let c = project(&v, &b, 5).unwrap();
            prop_assert!(c.residue <= 1e-9);
            for (got, want) in c.lambda.iter().zip(&l) {
                prop_assert!((got - want).abs() <= 1e-9);
            }
        }

        #[test]
        fn mass_norm_residual_never_grows(v in vec36()) {
            let b = build_modal_basis(36, 8).unwrap();
            let v = dv(v);
            let mut prev = f64::INFINITY;
            for k in 1..=8 {
                let c = project(&v, &b, k).unwrap();
                let r = reconstruct(&c, &b).unwrap();
                let d: Vec<f64> = v.values().iter().zip(r.values()).map(|(x, y)| x - y).collect();
                let e = b.inner(&d, &d);
                prop_assert!(e <= prev + 1e-12);
                prev = e;
            }
        }
    }
}
