//! Procedurally rendered handwritten-style digits.
//!
//! Each digit is a fixed set of pen strokes in a unit box. A sample applies a
//! random affine jitter and stroke width, rasterizes onto a 28×28 canvas with
//! anti-aliased edges, and area-averages the canvas down to 8×8, the same
//! path used for downscaled IDX images.

use std::f64::consts::PI;

use super::{area_downscale, Dataset, Provenance};
use crate::numerics::{Rng, Vector};

pub const CANVAS_SIDE: usize = 28;
const OUTPUT_SIDE: usize = 8;

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Stroke {
    const SEGMENTS: usize = 16;
    (0..=SEGMENTS)
        .map(|i| {
            let a = (from_deg + (to_deg - from_deg) * i as f64 / SEGMENTS as f64) * PI / 180.0;
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

/// Strokes in unit coordinates, y pointing down.
fn strokes(digit: u8) -> Vec<Stroke> {
    match digit % 10 {
        0 => vec![arc(0.5, 0.5, 0.2, 0.32, 0.0, 360.0)],
        1 => vec![vec![(0.5, 0.18), (0.5, 0.82)], vec![(0.4, 0.3), (0.5, 0.18)]],
        2 => vec![
            arc(0.5, 0.35, 0.18, 0.17, 200.0, 380.0),
            vec![(0.67, 0.41), (0.3, 0.82), (0.74, 0.82)],
        ],
        3 => vec![arc(0.5, 0.34, 0.17, 0.16, -160.0, 90.0), arc(0.5, 0.66, 0.19, 0.16, -90.0, 160.0)],
        4 => vec![vec![(0.62, 0.18), (0.27, 0.6), (0.76, 0.6)], vec![(0.62, 0.35), (0.62, 0.82)]],
        5 => vec![
            vec![(0.7, 0.18), (0.36, 0.18), (0.33, 0.46)],
            arc(0.5, 0.62, 0.19, 0.19, -150.0, 150.0),
        ],
        6 => vec![arc(0.68, 0.62, 0.36, 0.44, 250.0, 175.0), arc(0.5, 0.65, 0.18, 0.17, 0.0, 360.0)],
        7 => vec![vec![(0.27, 0.18), (0.73, 0.18), (0.43, 0.82)]],
        8 => vec![arc(0.5, 0.33, 0.15, 0.15, 0.0, 360.0), arc(0.5, 0.66, 0.18, 0.17, 0.0, 360.0)],
        _ => vec![arc(0.5, 0.36, 0.17, 0.17, 0.0, 360.0), vec![(0.67, 0.36), (0.6, 0.82)]],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Renders one jittered digit onto a 28×28 canvas, intensities in `[0, 1]`.
pub fn render_digit(digit: u8, rng: &mut Rng) -> Vector {
    let angle = rng.uniform(-0.2, 0.2);
    let scale = rng.uniform(0.85, 1.1);
    let shear = rng.uniform(-0.2, 0.2);
    let (tx, ty) = (rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    let half_width = 0.5 * rng.uniform(1.6, 2.6);

    // unit box -> 20×20 centred region of the canvas, then jitter about the centre
    let (cos, sin) = (angle.cos(), angle.sin());
    let side = CANVAS_SIDE as f64;
    let to_canvas = |(u, v): (f64, f64)| {
        let (x, y) = ((u - 0.5) * 20.0, (v - 0.5) * 20.0);
        let x = x + shear * y;
        let (x, y) = (scale * (cos * x - sin * y), scale * (sin * x + cos * y));
        (x + side / 2.0 + tx, y + side / 2.0 + ty)
    };
    let segments: Vec<((f64, f64), (f64, f64))> = strokes(digit)
        .into_iter()
        .flat_map(|s| {
            let pts: Vec<_> = s.into_iter().map(to_canvas).collect();
            pts.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
        })
        .collect();

    let mut canvas = vec![0.0; CANVAS_SIDE * CANVAS_SIDE];
    for row in 0..CANVAS_SIDE {
        for col in 0..CANVAS_SIDE {
            let p = (col as f64 + 0.5, row as f64 + 0.5);
            let d = segments
                .iter()
                .map(|&(a, b)| segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min);
            canvas[row * CANVAS_SIDE + col] = (half_width + 0.5 - d).clamp(0.0, 1.0);
        }
    }
    canvas
}

/// `n` digits (classes drawn uniformly), each an 8×8 image flattened row-major.
pub fn synthetic_digits(n: usize, rng: &mut Rng) -> Dataset {
    synthetic_digits_at(n, OUTPUT_SIDE, rng)
}

/// Like [`synthetic_digits`] at `side×side`; `side = 28` keeps the raw canvas.
pub fn synthetic_digits_at(n: usize, side: usize, rng: &mut Rng) -> Dataset {
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let digit = rng.index(10) as u8;
        let canvas = render_digit(digit, rng);
        points.push(if side == CANVAS_SIDE {
            canvas
        } else {
            area_downscale(&canvas, CANVAS_SIDE, CANVAS_SIDE, side)
        });
        labels.push(digit);
    }
    let mut ds = Dataset::new(points, Provenance::Digits, None);
    ds.labels = Some(labels);
    ds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_are_in_unit_range_and_seeded() {
        let a = synthetic_digits(50, &mut Rng::new(1));
        let b = synthetic_digits(50, &mut Rng::new(1));
        assert_eq!(a, b);
        assert_eq!(a.dim(), Some(64));
        for p in &a.points {
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            let ink: f64 = p.iter().sum();
            assert!(ink > 1.5 && ink < 40.0, "ink {ink}");
        }
    }

    #[test]
    fn full_resolution_is_the_raw_canvas() {
        let full = synthetic_digits_at(3, CANVAS_SIDE, &mut Rng::new(3));
        let small = synthetic_digits(3, &mut Rng::new(3));
        assert_eq!(full.dim(), Some(784));
        for (f, s) in full.points.iter().zip(&small.points) {
            assert_eq!(&area_downscale(f, 28, 28, 8), s);
        }
    }

    #[test]
    fn classes_are_distinguishable() {
        // Mean images of different classes should differ far more than
        // two halves of the same class.
        let ds = synthetic_digits(2000, &mut Rng::new(2));
        let labels = ds.labels.as_ref().unwrap();
        let mean_of = |cls: u8, parity: usize| -> Vector {
            let pts: Vec<&Vector> = ds
                .points
                .iter()
                .zip(labels)
                .enumerate()
                .filter(|(i, (_, &l))| l == cls && i % 2 == parity)
                .map(|(_, (p, _))| p)
                .collect();
            (0..64).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64).collect()
        };
        let dist = |a: &Vector, b: &Vector| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        for cls in 0..10u8 {
            let same = dist(&mean_of(cls, 0), &mean_of(cls, 1));
            let other = dist(&mean_of(cls, 0), &mean_of((cls + 1) % 10, 1));
            assert!(other > 3.0 * same, "class {cls}: same {same}, other {other}");
        }
    }
}
