//! Datasets: synthetic 2D manifolds, IDX image files, rendered digits,
//! corruption operators and lattices.

mod digits;
mod idx;

pub use digits::{render_digit, synthetic_digits, synthetic_digits_at, CANVAS_SIDE};
pub use idx::{
    area_downscale, load_idx, load_idx_labels, load_idx_with, parse_idx_images, parse_idx_labels, write_idx_images,
    write_idx_labels, IdxImages, IMAGES_MAGIC, LABELS_MAGIC,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{Rng, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Line,
    Circle,
    Spiral,
    IdxFile,
    Grid,
    Digits,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vector>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
    /// Class labels, carried through untouched when the source has them.
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(points: Vec<Vector>, provenance: Provenance, seed: Option<u64>) -> Self {
        Dataset {
            points,
            provenance,
            seed,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    /// Keeps the first `n` points (and labels).
    pub fn truncate(&mut self, n: usize) {
        self.points.truncate(n);
        if let Some(l) = &mut self.labels {
            l.truncate(n);
        }
    }

    /// One point per row under a `x_1,...,x_D` header.
    pub fn to_csv(&self) -> String {
        points_to_csv(&self.points)
    }
}

pub(crate) fn points_to_csv(points: &[Vector]) -> String {
    let d = points.first().map_or(0, Vec::len);
    let mut out = (1..=d).map(|i| format!("x_{i}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for p in points {
        let row: Vec<String> = p.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Axis-aligned box `[lo_1, hi_1] × … × [lo_D, hi_D]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vector,
    pub hi: Vector,
}

impl BoxBounds {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::shape("BoxBounds::new", lo.len(), hi.len()));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("box bounds must be finite".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidInput("box lower bound exceeds upper bound".into()));
        }
        Ok(BoxBounds { lo, hi })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        BoxBounds {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    /// Smallest box containing every point; `None` for an empty set.
    pub fn bounding(points: &[Vector]) -> Option<Self> {
        let first = points.first()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in &points[1..] {
            for (i, &v) in p.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        Some(BoxBounds { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn sample(&self, rng: &mut Rng) -> Vector {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| rng.uniform(l, h)).collect()
    }

    /// `n×n` lattice over the first two axes, corners included; row-major in y.
    pub fn grid2d(&self, n: usize) -> Vec<Vector> {
        let axis = |k: usize, i: usize| {
            if n == 1 {
                0.5 * (self.lo[k] + self.hi[k])
            } else {
                self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                out.push(vec![axis(0, i), axis(1, j)]);
            }
        }
        out
    }
}

pub fn grid2d(bounds: &BoxBounds, n: usize) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("grid needs at least 2 points per axis, got {n}")));
    }
    if bounds.dim() != 2 {
        return Err(Error::shape("grid2d", 2, bounds.dim()));
    }
    Ok(Dataset::new(bounds.grid2d(n), Provenance::Grid, None))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Line,
    Circle,
    Spiral,
}

impl FromStr for ManifoldKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "line" => Ok(ManifoldKind::Line),
            "circle" => Ok(ManifoldKind::Circle),
            "spiral" => Ok(ManifoldKind::Spiral),
            other => Err(format!("unknown manifold `{other}` (expected line, circle or spiral)")),
        }
    }
}

pub const CIRCLE_RADIUS: f64 = 0.8;
pub const SPIRAL_INNER: f64 = 0.1;
pub const SPIRAL_PITCH: f64 = 0.3;
pub const SPIRAL_TURN: f64 = 3.0 * PI;
/// Outer radius of the raw spiral; points are divided by it to land in `[-1, 1]²`.
pub const SPIRAL_OUTER: f64 = SPIRAL_INNER + SPIRAL_PITCH * SPIRAL_TURN;

/// Noisy samples from a 2D line, circle or spiral.
///
/// * line: `(t, 0.5 t + 0.1)`, `t ∈ [-1, 1]`
/// * circle: radius 0.8 about the origin
/// * spiral: `r = 0.1 + 0.3 θ`, `θ ∈ [0, 3π]`, scaled by the outer radius
///
/// Each point then receives isotropic Gaussian noise of std-dev `sigma`.
pub fn gen_synthetic(kind: ManifoldKind, n: usize, sigma: f64, rng: &mut Rng) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::InvalidInput("need at least one point".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("noise sigma must be non-negative, got {sigma}")));
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, y) = match kind {
            ManifoldKind::Line => {
                let t = rng.uniform(-1.0, 1.0);
                (t, 0.5 * t + 0.1)
            }
            ManifoldKind::Circle => {
                let phi = rng.uniform(0.0, 2.0 * PI);
                (CIRCLE_RADIUS * phi.cos(), CIRCLE_RADIUS * phi.sin())
            }
            ManifoldKind::Spiral => {
                let theta = rng.uniform(0.0, SPIRAL_TURN);
                let r = (SPIRAL_INNER + SPIRAL_PITCH * theta) / SPIRAL_OUTER;
                (r * theta.cos(), r * theta.sin())
            }
        };
        let (nx, ny) = if sigma > 0.0 {
            (sigma * rng.normal(), sigma * rng.normal())
        } else {
            (0.0, 0.0)
        };
        points.push(vec![x + nx, y + ny]);
    }
    let provenance = match kind {
        ManifoldKind::Line => Provenance::Line,
        ManifoldKind::Circle => Provenance::Circle,
        ManifoldKind::Spiral => Provenance::Spiral,
    };
    Ok(Dataset::new(points, provenance, None))
}

/// Replaces each entry, with probability `p`, by 0 or 1 with equal odds.
pub fn salt_pepper(x: &[f64], p: f64, rng: &mut Rng) -> Vector {
    x.iter()
        .map(|&v| {
            if rng.bernoulli(p) {
                if rng.bernoulli(0.5) {
                    1.0
                } else {
                    0.0
                }
            } else {
                v
            }
        })
        .collect()
}

/// Independent Bernoulli(`q`) coordinates.
pub fn binomial_sample(dim: usize, q: f64, rng: &mut Rng) -> Vector {
    (0..dim).map(|_| if rng.bernoulli(q) { 1.0 } else { 0.0 }).collect()
}

/// How corrupted counterparts of clean images are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Corruption {
    /// [`salt_pepper`] applied to the clean image.
    #[default]
    SaltPepper,
    /// A fresh [`binomial_sample`], unrelated to the clean image.
    Binomial,
}

impl FromStr for Corruption {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "salt-pepper" => Ok(Corruption::SaltPepper),
            "binomial" => Ok(Corruption::Binomial),
            other => Err(format!("unknown corruption `{other}` (expected salt-pepper or binomial)")),
        }
    }
}

impl Corruption {
    /// `level` is the replacement probability or the Bernoulli parameter.
    pub fn apply(self, x: &[f64], level: f64, rng: &mut Rng) -> Vector {
        match self {
            Corruption::SaltPepper => salt_pepper(x, level, rng),
            Corruption::Binomial => binomial_sample(x.len(), level, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_circle_is_on_radius() {
        let ds = gen_synthetic(ManifoldKind::Circle, 4, 0.0, &mut Rng::new(1)).unwrap();
        assert_eq!(ds.len(), 4);
        for p in &ds.points {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - CIRCLE_RADIUS).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_line_and_spiral_satisfy_their_equations() {
        let line = gen_synthetic(ManifoldKind::Line, 50, 0.0, &mut Rng::new(2)).unwrap();
        for p in &line.points {
            assert!((p[1] - (0.5 * p[0] + 0.1)).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&p[0]));
        }
        let spiral = gen_synthetic(ManifoldKind::Spiral, 200, 0.0, &mut Rng::new(3)).unwrap();
        for p in &spiral.points {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt() * SPIRAL_OUTER;
            let base = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            // θ = base + 2πk for the winding k that matches the radius.
            let residual = (0..2)
                .map(|k| (r - (SPIRAL_INNER + SPIRAL_PITCH * (base + 2.0 * PI * k as f64))).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(residual < 1e-12, "residual {residual}");
        }
    }

    #[test]
    fn noisy_spiral_stays_in_box() {
        let ds = gen_synthetic(ManifoldKind::Spiral, 1000, 0.02, &mut Rng::new(4)).unwrap();
        assert!(ds.points.iter().all(|p| p.iter().all(|v| v.abs() <= 1.1)));
    }

    #[test]
    fn generators_are_seeded() {
        for kind in [ManifoldKind::Line, ManifoldKind::Circle, ManifoldKind::Spiral] {
            let a = gen_synthetic(kind, 30, 0.05, &mut Rng::new(5)).unwrap();
            let b = gen_synthetic(kind, 30, 0.05, &mut Rng::new(5)).unwrap();
            assert_eq!(a, b);
        }
        assert!(gen_synthetic(ManifoldKind::Line, 0, 0.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn salt_pepper_cases() {
        let mut rng = Rng::new(6);
        let x: Vector = (0..100).map(|i| i as f64 / 100.0).collect();
        assert_eq!(salt_pepper(&x, 0.0, &mut rng), x);
        assert!(salt_pepper(&x, 1.0, &mut rng).iter().all(|&v| v == 0.0 || v == 1.0));

        let x = vec![0.5; 10_000];
        let changed = salt_pepper(&x, 0.25, &mut rng).iter().filter(|&&v| v != 0.5).count();
        assert!((2300..=2700).contains(&changed), "{changed}");
    }

    #[test]
    fn binomial_cases() {
        let mut rng = Rng::new(7);
        assert!(binomial_sample(50, 0.0, &mut rng).iter().all(|&v| v == 0.0));
        assert!(binomial_sample(50, 1.0, &mut rng).iter().all(|&v| v == 1.0));
        let v = binomial_sample(10_000, 0.5, &mut rng);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn grid_cases() {
        let unit = BoxBounds::cube(2, 0.0, 1.0);
        let corners = grid2d(&unit, 2).unwrap().points;
        assert_eq!(corners, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert!(grid2d(&unit, 3).unwrap().points.contains(&vec![0.5, 0.5]));
        assert!(grid2d(&unit, 1).is_err());

        let g = grid2d(&BoxBounds::cube(2, -1.0, 1.0), 17).unwrap().points;
        let step = 2.0 / 16.0;
        for row in g.chunks(17) {
            for pair in row.windows(2) {
                assert!((pair[1][0] - pair[0][0] - step).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bounding_box() {
        let pts = vec![vec![0.0, 2.0], vec![-1.0, 3.0], vec![0.5, -4.0]];
        let b = BoxBounds::bounding(&pts).unwrap();
        assert_eq!(b.lo, vec![-1.0, -4.0]);
        assert_eq!(b.hi, vec![0.5, 3.0]);
        assert!(pts.iter().all(|p| b.contains(p)));
        assert!(BoxBounds::bounding(&[]).is_none());
        assert!(BoxBounds::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn csv_export() {
        let ds = Dataset::new(vec![vec![1.0, 0.5], vec![-2.0, 3.0]], Provenance::Grid, None);
        assert_eq!(ds.to_csv(), "x_1,x_2\n1,0.5\n-2,3\n");
    }
}
