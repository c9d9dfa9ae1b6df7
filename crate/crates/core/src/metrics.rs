//! Average gradient, PSNR and SSIM for unit-range images.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::imagecore::GrayImage;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ag: f64,
    /// Decibels; `+inf` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

/// AG of `img`, PSNR and SSIM against `reference`.
pub fn evaluate(img: &GrayImage, reference: &GrayImage) -> Result<MetricsReport> {
    Ok(MetricsReport { ag: average_gradient(img)?, psnr: psnr(img, reference)?, ssim: ssim(img, reference)? })
}

/// Mean of `sqrt((Δx² + Δy²) / 2)` over forward-difference sites.
pub fn average_gradient(img: &GrayImage) -> Result<f64> {
    let (h, w) = img.dims();
    if h < 2 || w < 2 {
        return param_err(format!("average gradient needs at least 2x2 pixels, got {h}x{w}"));
    }
    let mut total = 0.0;
    for r in 0..h - 1 {
        for c in 0..w - 1 {
            let v = img.get(r, c);
            let dx = img.get(r, c + 1) - v;
            let dy = img.get(r + 1, c) - v;
            total += ((dx * dx + dy * dy) / 2.0).sqrt();
        }
    }
    Ok(total / ((h - 1) * (w - 1)) as f64)
}

pub fn mse(img: &GrayImage, reference: &GrayImage) -> Result<f64> {
    same_dims(img, reference)?;
    let sum: f64 = img.data().iter().zip(reference.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / img.data().len() as f64)
}

/// Peak signal-to-noise ratio with peak 1.
pub fn psnr(img: &GrayImage, reference: &GrayImage) -> Result<f64> {
    let m = mse(img, reference)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / m).log10())
}

fn ssim_weights() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW * SSIM_WINDOW)
        .map(|i| {
            let y = (i / SSIM_WINDOW) as f64 - half;
            let x = (i % SSIM_WINDOW) as f64 - half;
            (-(x * x + y * y) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean structural similarity over all fully-contained 11x11 Gaussian
/// windows (σ = 1.5, C₁ = 0.01², C₂ = 0.03²).
pub fn ssim(img: &GrayImage, reference: &GrayImage) -> Result<f64> {
    same_dims(img, reference)?;
    let (h, w) = img.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return param_err(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"));
    }
    let weights = ssim_weights();
    let (x, y) = (img.data(), reference.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=h - SSIM_WINDOW {
        for c0 in 0..=w - SSIM_WINDOW {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                let row = (r0 + i) * w + c0;
                for j in 0..SSIM_WINDOW {
                    let wt = weights[i * SSIM_WINDOW + j];
                    let (a, b) = (x[row + j], y[row + j]);
                    mx += wt * a;
                    my += wt * b;
                    sxx += wt * (a * a);
                    syy += wt * (b * b);
                    sxy += wt * (a * b);
                }
            }
            let var_x = sxx - mx * mx;
            let var_y = syy - my * my;
            let cov = sxy - mx * my;
            let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn same_dims(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.dims() != b.dims() {
        return param_err(format!("image sizes differ: {}x{} vs {}x{}", a.height(), a.width(), b.height(), b.width()));
    }
    Ok(())
}
