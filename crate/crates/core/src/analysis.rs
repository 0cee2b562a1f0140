//! Conservativeness diagnostics.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::data::BoxBounds;
use crate::error::{Error, Result};
use crate::fields::{field_jacobian, VectorField};
use crate::numerics::{dot, Matrix, Rng, Vector};

/// `‖(A+Aᵀ)/2‖²_F / ‖A‖²_F`: 1 for symmetric, 0 for antisymmetric matrices.
pub fn symmetricity(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::shape("symmetricity", "square matrix", format!("{:?}", a.shape())));
    }
    let n = a.rows();
    let (mut sym, mut total) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            sym += s * s;
            total += a[(i, j)] * a[(i, j)];
        }
    }
    if total == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok((sym / total).clamp(0.0, 1.0))
}

/// Mean symmetricity over a set of Jacobians. Zero matrices carry no
/// direction information and are skipped; with nothing left the field is
/// locally constant and trivially conservative, so the result is 1.
pub fn mean_symmetricity(jacobians: impl IntoIterator<Item = Matrix>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for j in jacobians {
        if let Ok(s) = symmetricity(&j) {
            sum += s;
            count += 1;
        }
    }
    if count == 0 {
        1.0
    } else {
        sum / count as f64
    }
}

/// `∂f₂/∂x₁ − ∂f₁/∂x₂`.
pub fn curl2d(f: &dyn VectorField, x: &[f64]) -> Result<f64> {
    if f.dim() != 2 {
        return Err(Error::shape("curl2d", 2, f.dim()));
    }
    let j = field_jacobian(f, x)?;
    Ok(j[(1, 0)] - j[(0, 1)])
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurlGrid {
    pub points: Vec<Vector>,
    pub values: Vec<f64>,
    pub mean_abs: f64,
}

impl CurlGrid {
    /// CSV `x,y,curl`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,curl\n");
        for (p, v) in self.points.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{},{}", p[0], p[1], v);
        }
        out
    }
}

/// Curl on an `n×n` lattice spanning the box.
pub fn curl_grid(f: &dyn VectorField, bounds: &BoxBounds, n: usize) -> Result<CurlGrid> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("curl grid needs n >= 2, got {n}")));
    }
    if bounds.dim() != 2 {
        return Err(Error::shape("curl_grid", 2, bounds.dim()));
    }
    let points = bounds.grid2d(n);
    let values = points.iter().map(|x| curl2d(f, x)).collect::<Result<Vec<f64>>>()?;
    let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64;
    Ok(CurlGrid { points, values, mean_abs })
}

/// `∫ f·dl` along a polyline, composite midpoint rule with `steps` nodes per segment.
pub fn line_integral(f: &dyn VectorField, path: &[Vector], steps: usize) -> Result<f64> {
    if steps < 1 {
        return Err(Error::InvalidInput("line integral needs at least one step per segment".into()));
    }
    if let Some(bad) = path.iter().find(|p| p.len() != f.dim()) {
        return Err(Error::shape("line_integral", f.dim(), bad.len()));
    }
    let mut total = 0.0;
    for seg in path.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let delta: Vector = b.iter().zip(a).map(|(x, y)| x - y).collect();
        let mut acc = 0.0;
        for k in 0..steps {
            let t = (k as f64 + 0.5) / steps as f64;
            let x: Vector = a.iter().zip(&delta).map(|(ai, di)| ai + t * di).collect();
            let v = f.eval(&x);
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("field is not finite at {x:?}")));
            }
            acc += dot(&v, &delta);
        }
        total += acc / steps as f64;
    }
    Ok(total)
}

/// `∫₀¹ f(x0 + t(x − x0))·(x − x0) dt`, i.e. `F(x) − F(x0)` when `f = ∇F`.
pub fn energy_by_line_integral(f: &dyn VectorField, x: &[f64], x0: &[f64], steps: usize) -> Result<f64> {
    line_integral(f, &[x0.to_vec(), x.to_vec()], steps)
}

pub const COMMUTATOR_TOLERANCE: f64 = 1e-9;

/// Builds `R = C W E` for a linear auto-encoder, which makes `R Wᵀ` symmetric
/// whenever `C` and `E` are symmetric and `C` commutes with `W E Wᵀ`.
pub fn sufficient_condition_construct(w: &Matrix, c: &Matrix, e: &Matrix) -> Result<Matrix> {
    let (d, h) = w.shape();
    if c.shape() != (d, d) {
        return Err(Error::shape("sufficient_condition_construct (C)", format!("({d}, {d})"), format!("{:?}", c.shape())));
    }
    if e.shape() != (h, h) {
        return Err(Error::shape("sufficient_condition_construct (E)", format!("({h}, {h})"), format!("{:?}", e.shape())));
    }
    let scale = |m: &Matrix| m.max_abs().max(1.0);
    for (name, m) in [("C", c), ("E", e)] {
        if m.max_abs_diff(&m.transpose()) > COMMUTATOR_TOLERANCE * scale(m) {
            return Err(Error::Contract(format!("{name} must be symmetric")));
        }
    }
    let wew = w.matmul(e)?.matmul(&w.transpose())?;
    let commutator = c.matmul(&wew)?.sub(&wew.matmul(c)?)?.frobenius();
    let tolerance = COMMUTATOR_TOLERANCE * (c.frobenius() * wew.frobenius()).max(1.0);
    if commutator > tolerance {
        return Err(Error::Commutator {
            commutator_norm: commutator,
            tolerance,
        });
    }
    let r = c.matmul(w)?.matmul(e)?;
    let rw = r.matmul(&w.transpose())?;
    if rw.frobenius() > 0.0 && symmetricity(&rw)? < 1.0 - 1e-10 {
        return Err(Error::Contract(format!(
            "constructed R Wᵀ is not symmetric (sym = {})",
            symmetricity(&rw)?
        )));
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConservativeWithinTol,
    NonConservative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservativityReport {
    pub mean_sym: f64,
    pub min_sym: f64,
    pub mean_abs_curl: Option<f64>,
    pub path_residual: f64,
    pub verdict: Verdict,
}

impl ConservativityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn is_conservative(&self) -> bool {
        self.verdict == Verdict::ConservativeWithinTol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOptions {
    /// Tolerance on `1 − mean sym`.
    pub sym_tol: f64,
    /// Tolerance on the mean absolute curl (2D only).
    pub curl_tol: f64,
    pub curl_grid: usize,
    pub loops: usize,
    pub steps_per_segment: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            sym_tol: 1e-3,
            curl_tol: 1e-2,
            curl_grid: 16,
            loops: 8,
            steps_per_segment: 64,
            seed: 0,
        }
    }
}

/// Symmetricity of the Jacobian at every probe, curl over the probes'
/// bounding box (2D), and the mean absolute circulation around random
/// closed triangles inside that box.
pub fn conservativity_report(f: &dyn VectorField, probes: &[Vector], opts: &ReportOptions) -> Result<ConservativityReport> {
    if probes.is_empty() {
        return Err(Error::InvalidInput("conservativity report needs at least one probe".into()));
    }
    let mut syms = Vec::with_capacity(probes.len());
    for x in probes {
        match symmetricity(&field_jacobian(f, x)?) {
            Ok(s) => syms.push(s),
            Err(Error::UndefinedMetric) => {}
            Err(e) => return Err(e),
        }
    }
    let (mean_sym, min_sym) = if syms.is_empty() {
        (1.0, 1.0)
    } else {
        (syms.iter().sum::<f64>() / syms.len() as f64, syms.iter().copied().fold(f64::INFINITY, f64::min))
    };

    let bounds = BoxBounds::bounding(probes).expect("probes are non-empty");
    let mean_abs_curl = if f.dim() == 2 {
        Some(curl_grid(f, &bounds, opts.curl_grid)?.mean_abs)
    } else {
        None
    };

    let mut rng = Rng::new(opts.seed);
    let mut residual = 0.0;
    for _ in 0..opts.loops {
        let a = bounds.sample(&mut rng);
        let b = bounds.sample(&mut rng);
        let c = bounds.sample(&mut rng);
        residual += line_integral(f, &[a.clone(), b, c, a], opts.steps_per_segment)?.abs();
    }
    let path_residual = if opts.loops == 0 { 0.0 } else { residual / opts.loops as f64 };

    let conservative = mean_sym >= 1.0 - opts.sym_tol && mean_abs_curl.map_or(true, |c| c <= opts.curl_tol);
    Ok(ConservativityReport {
        mean_sym,
        min_sym,
        mean_abs_curl,
        path_residual,
        verdict: if conservative {
            Verdict::ConservativeWithinTol
        } else {
            Verdict::NonConservative
        },
    })
}
