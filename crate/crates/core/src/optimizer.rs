//! Minimization of the summed squared modal coordinates over the factor box.
//!
//! `F(x) = sum_i L_i(x)^2` is a quartic in the normalized factors. It is
//! minimized by multi-start projected gradient descent: every point of a
//! uniform seed grid is polished with Barzilai-Borwein trial steps and an
//! Armijo backtracking line search, then the best polished point wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doe::FactorSpace;
use crate::error::{Error, Result};
use crate::geometry::BlankSpec;
use crate::rsm::QuadraticModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub models: Vec<QuadraticModel>,
    /// Per-factor normalized interval.
    pub bounds: Vec<(f64, f64)>,
}

impl ObjectiveSpec {
    /// Objective over the unit cube `[-1, 1]^f`.
    pub fn new(models: Vec<QuadraticModel>) -> Result<Self> {
        let f = models.first().map_or(0, QuadraticModel::n_factors);
        Self::with_bounds(models, vec![(-1.0, 1.0); f])
    }

    pub fn with_bounds(models: Vec<QuadraticModel>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidInput(
                "objective needs at least one model".into(),
            ));
        }
        let f = models[0].n_factors();
        if models.iter().any(|m| m.n_factors() != f) || bounds.len() != f {
            return Err(Error::InvalidInput(
                "models and bounds must share one factor count".into(),
            ));
        }
        if let Some(b) = bounds
            .iter()
            .find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::InvalidInput(format!(
                "empty or non-finite bound {b:?}"
            )));
        }
        Ok(Self { models, bounds })
    }

    pub fn n_factors(&self) -> usize {
        self.bounds.len()
    }

    fn project_into(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.bounds)
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

/// `sum_i L_i(x)^2`.
pub fn objective_f(spec: &ObjectiveSpec, point: &[f64]) -> f64 {
    spec.models.iter().map(|m| m.predict(point).powi(2)).sum()
}

/// Closed-form gradient `sum_i 2 L_i(x) grad L_i(x)`.
pub fn objective_gradient(spec: &ObjectiveSpec, point: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; spec.n_factors()];
    for m in &spec.models {
        let l = m.predict(point);
        for (gi, di) in g.iter_mut().zip(m.gradient(point)) {
            *gi += 2.0 * l * di;
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// Seed grid points per axis.
    pub grid_per_axis: usize,
    pub max_iterations: usize,
    /// Stop when the projected-gradient step is shorter than this.
    pub step_tolerance: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            grid_per_axis: 21,
            max_iterations: 500,
            step_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub starts: usize,
    /// Iterations summed over all starts.
    pub total_iterations: usize,
    /// Iterations used by the winning start.
    pub best_iterations: usize,
    /// Norm of the projected gradient `x - P(x - grad F)` at the optimum.
    pub projected_gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub normalized: Vec<f64>,
    pub f_value: f64,
    /// Model predictions at the optimum, in model order.
    pub predicted: Vec<f64>,
    pub report: ConvergenceReport,
}

impl Optimum {
    pub fn physical(&self, space: &FactorSpace) -> Vec<f64> {
        space.to_physical(&self.normalized)
    }

    /// Blank at the optimum, for a `(D, A1, A2)` factor space.
    pub fn blank(&self, space: &FactorSpace) -> Result<BlankSpec> {
        match self.physical(space)[..] {
            [d, a1, a2] => Ok(BlankSpec::new(d, a1, a2)),
            _ => Err(Error::InvalidInput(
                "blank optimum needs exactly three factors (D, A1, A2)".into(),
            )),
        }
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Uniform tensor grid over the bounds, first axis slowest.
fn grid_points(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = bounds.iter().map(|(lo, hi)| axis(*lo, *hi, n)).collect();
    let total = n.pow(bounds.len() as u32);
    (0..total)
        .map(|mut code| {
            let mut p = vec![0.0; bounds.len()];
            for d in (0..bounds.len()).rev() {
                p[d] = axes[d][code % n];
                code /= n;
            }
            p
        })
        .collect()
}

/// `a` is better than `b`: lower F, ties broken by smaller coordinates.
fn better(a: (&[f64], f64), b: (&[f64], f64)) -> bool {
    let tie = 1e-14 * (1.0 + a.1.abs().max(b.1.abs()));
    if (a.1 - b.1).abs() > tie {
        return a.1 < b.1;
    }
    a.0.iter()
        .zip(b.0)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

fn projected_step(spec: &ObjectiveSpec, x: &[f64], g: &[f64], t: f64) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - t * gi).collect();
    spec.project_into(&mut y);
    y
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn projected_gradient_norm(spec: &ObjectiveSpec, x: &[f64]) -> f64 {
    let g = objective_gradient(spec, x);
    let y = projected_step(spec, x, &g, 1.0);
    norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>())
}

struct Polished {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
}

fn polish(spec: &ObjectiveSpec, seed: Vec<f64>, opts: &MinimizeOptions) -> Result<Polished> {
    const ARMIJO: f64 = 1e-4;
    let mut x = seed;
    let mut f = objective_f(spec, &x);
    if !f.is_finite() {
        return Err(Error::Numeric(format!("non-finite objective at {x:?}")));
    }
    let mut g = objective_gradient(spec, &x);
    let mut t = 1.0;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut accepted = None;
        let mut trial = t;
        for _ in 0..60 {
            let y = projected_step(spec, &x, &g, trial);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            if norm(&d) <= opts.step_tolerance {
                break;
            }
            let fy = objective_f(spec, &y);
            if !fy.is_finite() {
                return Err(Error::Numeric(format!("non-finite objective at {y:?}")));
            }
            let decrease: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if fy <= f + ARMIJO * decrease {
                accepted = Some((y, fy, d));
                break;
            }
            trial *= 0.5;
        }
        let Some((y, fy, s)) = accepted else { break };
        let gy = objective_gradient(spec, &y);
        // Barzilai-Borwein trial step for the next iteration.
        let dg: Vec<f64> = gy.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&dg).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        t = if sy > 0.0 {
            (ss / sy).clamp(1e-10, 1e10)
        } else {
            (2.0 * trial).min(1e10)
        };
        x = y;
        f = fy;
        g = gy;
    }
    Ok(Polished { x, f, iterations })
}

/// Multi-start minimization of `F` over the box.
pub fn minimize(spec: &ObjectiveSpec) -> Result<Optimum> {
    minimize_with(spec, &MinimizeOptions::default())
}

pub fn minimize_with(spec: &ObjectiveSpec, opts: &MinimizeOptions) -> Result<Optimum> {
    if opts.grid_per_axis == 0 {
        return Err(Error::InvalidInput(
            "seed grid needs at least one point per axis".into(),
        ));
    }
    let seeds = grid_points(&spec.bounds, opts.grid_per_axis);
    let starts = seeds.len();
    let polished: Vec<Polished> = seeds
        .into_par_iter()
        .map(|s| polish(spec, s, opts))
        .collect::<Result<_>>()?;

    let total_iterations = polished.iter().map(|p| p.iterations).sum();
    let best = polished
        .into_iter()
        .reduce(|best, p| {
            if better((&p.x, p.f), (&best.x, best.f)) {
                p
            } else {
                best
            }
        })
        .expect("at least one start");
    debug_assert!(spec.contains(&best.x));

    Ok(Optimum {
        predicted: spec.models.iter().map(|m| m.predict(&best.x)).collect(),
        report: ConvergenceReport {
            starts,
            total_iterations,
            best_iterations: best.iterations,
            projected_gradient_norm: projected_gradient_norm(spec, &best.x),
        },
        f_value: best.f,
        normalized: best.x,
    })
}

/// Exhaustive search over a uniform grid; an independent check on `minimize`.
pub fn grid_oracle(spec: &ObjectiveSpec, resolution: usize) -> Result<(Vec<f64>, f64)> {
    if resolution < 3 {
        return Err(Error::InvalidInput(format!(
            "grid oracle needs at least 3 points per axis, got {resolution}"
        )));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for p in grid_points(&spec.bounds, resolution) {
        let f = objective_f(spec, &p);
        match &best {
            Some((bx, bf)) if !better((&p, f), (bx, *bf)) => {}
            _ => best = Some((p, f)),
        }
    }
    Ok(best.expect("non-empty grid"))
}
