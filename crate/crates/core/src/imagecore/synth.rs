//! Deterministic procedural test scenes.
//!
//! Scenes mix a smooth illumination field, oriented gratings, hard-edged
//! shapes and fine texture so that a 3x3 defocus blur visibly removes detail.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GrayImage;
use crate::error::Result;

enum Shape {
    Disc { cy: f64, cx: f64, r: f64, v: f64 },
    Rect { r0: f64, c0: f64, r1: f64, c1: f64, v: f64 },
    Grating { fy: f64, fx: f64, phase: f64, amp: f64 },
}

/// Builds a textured scene of the given size from `seed`.
pub fn textured_scene(height: usize, width: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);

    let gy: f64 = rng.random_range(-0.25..0.25);
    let gx: f64 = rng.random_range(-0.25..0.25);
    let base: f64 = rng.random_range(0.35..0.6);

    let mut shapes = Vec::new();
    for _ in 0..3 {
        let theta: f64 = rng.random_range(0.0..PI);
        let freq: f64 = rng.random_range(0.15..0.45);
        shapes.push(Shape::Grating {
            fy: freq * theta.sin(),
            fx: freq * theta.cos(),
            phase: rng.random_range(0.0..2.0 * PI),
            amp: rng.random_range(0.04..0.1),
        });
    }
    for _ in 0..10 {
        if rng.random_bool(0.5) {
            shapes.push(Shape::Disc {
                cy: rng.random_range(0.0..h),
                cx: rng.random_range(0.0..w),
                r: rng.random_range(0.05..0.2) * h.min(w),
                v: rng.random_range(-0.3..0.3),
            });
        } else {
            let r0 = rng.random_range(0.0..h);
            let c0 = rng.random_range(0.0..w);
            shapes.push(Shape::Rect {
                r0,
                c0,
                r1: r0 + rng.random_range(0.1..0.4) * h,
                c1: c0 + rng.random_range(0.1..0.4) * w,
                v: rng.random_range(-0.3..0.3),
            });
        }
    }
    let noise: Vec<f64> = (0..height * width).map(|_| rng.random_range(-0.04..0.04)).collect();

    let mut data = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let (y, x) = (r as f64, c as f64);
            let mut v = base + gy * (y / h - 0.5) + gx * (x / w - 0.5);
            for s in &shapes {
                match *s {
                    Shape::Disc { cy, cx, r, v: dv } => {
                        if (y - cy).powi(2) + (x - cx).powi(2) <= r * r {
                            v += dv;
                        }
                    }
                    Shape::Rect { r0, c0, r1, c1, v: dv } => {
                        if y >= r0 && y < r1 && x >= c0 && x < c1 {
                            v += dv;
                        }
                    }
                    Shape::Grating { fy, fx, phase, amp } => {
                        v += amp * (2.0 * PI * (fy * y + fx * x) + phase).sin();
                    }
                }
            }
            v += noise[r * width + c];
            data.push(v);
        }
    }
    GrayImage::from_clamped(height, width, data)
}
