//! Second-degree response surfaces fitted by least squares.
//!
//! Models are expressed in normalized factor units with terms ordered as
//! `1, X1..Xf, X1X2, X1X3, .., X(f-1)Xf, X1^2..Xf^2`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::doe::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Intercept,
    Linear(usize),
    Interaction(usize, usize),
    Square(usize),
}

impl Term {
    /// All terms of a full quadratic in `f` factors, in model order.
    pub fn all(f: usize) -> Vec<Term> {
        let mut terms = vec![Term::Intercept];
        terms.extend((0..f).map(Term::Linear));
        for i in 0..f {
            for j in i + 1..f {
                terms.push(Term::Interaction(i, j));
            }
        }
        terms.extend((0..f).map(Term::Square));
        terms
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Term::Intercept => 1.0,
            Term::Linear(i) => x[i],
            Term::Interaction(i, j) => x[i] * x[j],
            Term::Square(i) => x[i] * x[i],
        }
    }

    pub fn label(&self, names: &[String]) -> String {
        match *self {
            Term::Intercept => "1".to_owned(),
            Term::Linear(i) => names[i].clone(),
            Term::Interaction(i, j) => format!("{}*{}", names[i], names[j]),
            Term::Square(i) => format!("{}^2", names[i]),
        }
    }
}

pub fn coefficient_count(f: usize) -> usize {
    1 + f + f * (f - 1) / 2 + f
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rms_residual: f64,
    pub max_abs_residual: f64,
}

/// A fitted quadratic response surface for one response.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub response: String,
    pub factors: Vec<String>,
    /// One coefficient per entry of `Term::all(factors.len())`.
    pub coefficients: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

impl QuadraticModel {
    /// Builds a model from raw coefficients (no fit diagnostics).
    pub fn from_coefficients(
        response: impl Into<String>,
        factors: Vec<String>,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        let expected = coefficient_count(factors.len());
        if coefficients.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{} factors need {expected} coefficients, got {}",
                factors.len(),
                coefficients.len()
            )));
        }
        Ok(Self {
            response: response.into(),
            factors,
            coefficients,
            diagnostics: FitDiagnostics::default(),
        })
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn terms(&self) -> Vec<Term> {
        Term::all(self.n_factors())
    }

    pub fn coefficient(&self, term: Term) -> f64 {
        let idx = self
            .terms()
            .iter()
            .position(|t| *t == term)
            .expect("term belongs to model");
        self.coefficients[idx]
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    /// Polynomial value at a normalized point.
    pub fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_factors(), "point dimension mismatch");
        self.terms()
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| c * t.eval(x))
            .sum()
    }

    /// Analytic gradient with respect to the normalized factors.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_factors()];
        for (t, c) in self.terms().iter().zip(&self.coefficients) {
            match *t {
                Term::Intercept => {}
                Term::Linear(i) => g[i] += c,
                Term::Interaction(i, j) => {
                    g[i] += c * x[j];
                    g[j] += c * x[i];
                }
                Term::Square(i) => g[i] += 2.0 * c * x[i],
            }
        }
        g
    }

    /// Returns `c * self`; diagnostics are scaled accordingly.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            response: self.response.clone(),
            factors: self.factors.clone(),
            coefficients: self.coefficients.iter().map(|a| a * c).collect(),
            diagnostics: FitDiagnostics {
                rms_residual: self.diagnostics.rms_residual * c.abs(),
                max_abs_residual: self.diagnostics.max_abs_residual * c.abs(),
            },
        }
    }
}

struct OrderedCoefficients(Vec<(String, f64)>);

impl Serialize for OrderedCoefficients {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for OrderedCoefficients {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = OrderedCoefficients;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of term labels to coefficients")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut m: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = m.next_entry::<String, f64>()? {
                    out.push(entry);
                }
                Ok(OrderedCoefficients(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    response: String,
    factors: Vec<String>,
    coefficients: OrderedCoefficients,
    diagnostics: FitDiagnostics,
}

impl Serialize for QuadraticModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coefficients = self
            .terms()
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| (t.label(&self.factors), *c))
            .collect();
        ModelRepr {
            response: self.response.clone(),
            factors: self.factors.clone(),
            coefficients: OrderedCoefficients(coefficients),
            diagnostics: self.diagnostics,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadraticModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = ModelRepr::deserialize(d)?;
        let terms = Term::all(repr.factors.len());
        if terms.len() != repr.coefficients.0.len() {
            return Err(D::Error::custom(format!(
                "model {:?}: expected {} coefficients, found {}",
                repr.response,
                terms.len(),
                repr.coefficients.0.len()
            )));
        }
        let mut coefficients = Vec::with_capacity(terms.len());
        for t in &terms {
            let label = t.label(&repr.factors);
            let value = repr
                .coefficients
                .0
                .iter()
                .find(|(k, _)| *k == label)
                .map(|(_, v)| *v)
                .ok_or_else(|| D::Error::custom(format!("missing coefficient {label:?}")))?;
            coefficients.push(value);
        }
        Ok(QuadraticModel {
            response: repr.response,
            factors: repr.factors,
            coefficients,
            diagnostics: repr.diagnostics,
        })
    }
}

/// Observed responses, one row per design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResponseTable {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some((i, r)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.len() != names.len())
        {
            return Err(Error::InvalidInput(format!(
                "response row {} has {} values, expected {}",
                i + 1,
                r.len(),
                names.len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("responses must be finite".into()));
        }
        Ok(Self { names, rows })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Householder QR with column pivoting on the largest remaining column norm.
struct PivotedQr {
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    fn new(mut a: DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let steps = m.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut tau = vec![0.0; steps];
        let mut first_diag = 0.0f64;
        let mut rank = steps;
        let tol = 1e-10;
        for k in 0..steps {
            let (piv, norm) = (k..n)
                .map(|j| (j, a.view((k, j), (m - k, 1)).norm()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if piv != k {
                a.swap_columns(k, piv);
                perm.swap(k, piv);
            }
            if k == 0 {
                first_diag = norm;
            }
            if norm <= tol * first_diag.max(f64::MIN_POSITIVE) {
                rank = k;
                break;
            }
            let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
            v[0] -= alpha;
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            tau[k] = if vnorm2 == 0.0 { 0.0 } else { 2.0 / vnorm2 };
            for j in k..n {
                let dot: f64 = v.iter().enumerate().map(|(r, vi)| vi * a[(k + r, j)]).sum();
                let s = tau[k] * dot;
                for (r, vi) in v.iter().enumerate() {
                    a[(k + r, j)] -= s * vi;
                }
            }
            // Keep the reflector below the diagonal; v[0] is stored separately.
            for (r, vi) in v.iter().enumerate().skip(1) {
                a[(k + r, k)] = *vi;
            }
            a[(k, k)] = alpha;
            tau[k] = if vnorm2 == 0.0 {
                0.0
            } else {
                tau[k] * v[0] * v[0]
            };
            for r in 1..v.len() {
                a[(k + r, k)] /= v[0];
            }
        }
        Self {
            qr: a,
            tau,
            perm,
            rank,
        }
    }

    /// Least-squares solution of `A x = b` for a full-rank factorization.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (m, n) = self.qr.shape();
        let mut y = DVector::from_column_slice(b);
        for k in 0..self.rank {
            // Reflector H = I - tau * w w^T with w = [1, qr[k+1.., k]].
            let mut dot = y[k];
            for i in k + 1..m {
                dot += self.qr[(i, k)] * y[i];
            }
            let s = self.tau[k] * dot;
            y[k] -= s;
            for i in k + 1..m {
                y[i] -= s * self.qr[(i, k)];
            }
        }
        let mut z = vec![0.0; n];
        for k in (0..self.rank).rev() {
            let mut acc = y[k];
            for (j, zj) in z.iter().enumerate().take(self.rank).skip(k + 1) {
                acc -= self.qr[(k, j)] * zj;
            }
            z[k] = acc / self.qr[(k, k)];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }
}

pub fn model_matrix(points: &[&[f64]], f: usize) -> DMatrix<f64> {
    let terms = Term::all(f);
    DMatrix::from_fn(points.len(), terms.len(), |i, j| terms[j].eval(points[i]))
}

/// Ordinary least squares fit of one quadratic model per response column.
pub fn fit_quadratic(
    design: &DesignMatrix,
    responses: &ResponseTable,
    factor_names: &[String],
) -> Result<Vec<QuadraticModel>> {
    let f = factor_names.len();
    if design.n_factors() != f {
        return Err(Error::InvalidInput(format!(
            "design has {} factors but {} names were given",
            design.n_factors(),
            f
        )));
    }
    if responses.rows.len() != design.len() {
        return Err(Error::InvalidInput(format!(
            "{} response rows for {} design points",
            responses.rows.len(),
            design.len()
        )));
    }
    let p = coefficient_count(f);
    if design.len() < p {
        return Err(Error::InvalidInput(format!(
            "{} design points cannot determine {p} coefficients",
            design.len()
        )));
    }
    let points: Vec<&[f64]> = design.coords().collect();
    let x = model_matrix(&points, f);
    let qr = PivotedQr::new(x.clone());
    if qr.rank < p {
        let terms = Term::all(f);
        return Err(Error::SingularDesign {
            columns: qr.perm[qr.rank..]
                .iter()
                .map(|&j| terms[j].label(factor_names))
                .collect(),
        });
    }

    let models = responses
        .names
        .iter()
        .enumerate()
        .map(|(col, name)| {
            let y = responses.column(col);
            let coefficients = qr.solve(&y);
            let fitted = &x * DVector::from_column_slice(&coefficients);
            let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
            let rms =
                (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
            let max = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            QuadraticModel {
                response: name.clone(),
                factors: factor_names.to_vec(),
                coefficients,
                diagnostics: FitDiagnostics {
                    rms_residual: rms,
                    max_abs_residual: max,
                },
            }
        })
        .collect();
    Ok(models)
}

/// Non-constant terms sorted by absolute normalized coefficient, largest first.
pub fn rank_influence(model: &QuadraticModel) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = model
        .terms()
        .iter()
        .zip(&model.coefficients)
        .filter(|(t, _)| **t != Term::Intercept)
        .map(|(t, c)| (t.label(&model.factors), c.abs()))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

/// Factor whose linear coefficient has the largest magnitude.
pub fn dominant_linear_factor(model: &QuadraticModel) -> &str {
    let f = (0..model.n_factors())
        .max_by(|&i, &j| {
            model
                .coefficient(Term::Linear(i))
                .abs()
                .total_cmp(&model.coefficient(Term::Linear(j)).abs())
        })
        .expect("model has factors");
    &model.factors[f]
}
