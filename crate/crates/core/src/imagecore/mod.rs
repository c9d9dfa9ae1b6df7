//! Grayscale images, masks, Gaussian blurring and synthetic defocus pairs.

mod blur;
mod io;
pub mod synth;

pub use blur::{convolve_replicate, gaussian_blur, gaussian_kernel};
pub use io::{decode_pgm, encode_pgm, load_gray, save_gray};

use crate::error::{param_err, Result};

/// A single-channel image with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return param_err(format!("image dimensions must be positive, got {height}x{width}"));
        }
        if data.len() != height * width {
            return param_err(format!("image data length {} does not match {height}x{width}", data.len()));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return param_err(format!("intensity {bad} outside [0, 1]"));
        }
        Ok(Self { height, width, data })
    }

    /// Builds an image from arbitrary values, clamping each to `[0, 1]`.
    /// NaN maps to 0.
    pub fn from_clamped(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let data = data.into_iter().map(clamp_unit).collect();
        Self::new(height, width, data)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks(self.width) {
            data.extend(row.iter().rev());
        }
        Self { height: self.height, width: self.width, data }
    }

    /// Extracts the `height x width` sub-image whose top-left pixel is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self> {
        if row + height > self.height || col + width > self.width {
            return param_err("crop window exceeds image bounds");
        }
        Self::from_fn(height, width, |r, c| self.get(row + r, col + c))
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Binary per-pixel flags; `true` marks pixels kept sharp in the first
/// image of a synthetic pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FocusMask {
    height: usize,
    width: usize,
    flags: Vec<bool>,
}

impl FocusMask {
    pub fn new(height: usize, width: usize, flags: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || flags.len() != height * width {
            return param_err("mask dimensions do not match flag count");
        }
        Ok(Self { height, width, flags })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut flags = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                flags.push(f(r, c));
            }
        }
        Self::new(height, width, flags)
    }

    pub fn all(height: usize, width: usize, value: bool) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn left_half(height: usize, width: usize) -> Result<Self> {
        Self::from_fn(height, width, |_, c| c < width / 2)
    }

    pub fn right_half(height: usize, width: usize) -> Result<Self> {
        Self::from_fn(height, width, |_, c| c >= width / 2)
    }

    pub fn top_half(height: usize, width: usize) -> Result<Self> {
        Self::from_fn(height, width, |r, _| r < height / 2)
    }

    pub fn bottom_half(height: usize, width: usize) -> Result<Self> {
        Self::from_fn(height, width, |r, _| r >= height / 2)
    }

    /// Pixels whose centre lies within distance `radius` of `(cx, cy)`
    /// (x = column, y = row).
    pub fn circle(height: usize, width: usize, cx: f64, cy: f64, radius: f64) -> Result<Self> {
        Self::from_fn(height, width, |r, c| {
            let dx = c as f64 - cx;
            let dy = r as f64 - cy;
            dx * dx + dy * dy <= radius * radius
        })
    }

    /// Thresholds an image at 0.5.
    pub fn from_image(img: &GrayImage) -> Result<Self> {
        Self::new(img.height, img.width, img.data.iter().map(|&v| v >= 0.5).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.flags[row * self.width + col]
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn complement(&self) -> Self {
        Self { height: self.height, width: self.width, flags: self.flags.iter().map(|f| !f).collect() }
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            data: self.flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Produces a complementary defocus pair from an all-in-focus original.
///
/// The first image keeps the original on mask-true pixels and the blurred
/// original elsewhere; the second image is the complement.
pub fn make_focus_pair(
    original: &GrayImage,
    mask: &FocusMask,
    size: usize,
    sigma: f64,
) -> Result<(GrayImage, GrayImage)> {
    if original.dims() != mask.dims() {
        return param_err(format!(
            "mask is {}x{} but image is {}x{}",
            mask.height, mask.width, original.height, original.width
        ));
    }
    let blurred = gaussian_blur(original, size, sigma)?;
    let mut a = Vec::with_capacity(original.data.len());
    let mut b = Vec::with_capacity(original.data.len());
    for ((&sharp, &soft), &keep_a) in original.data.iter().zip(&blurred.data).zip(&mask.flags) {
        if keep_a {
            a.push(sharp);
            b.push(soft);
        } else {
            a.push(soft);
            b.push(sharp);
        }
    }
    Ok((
        GrayImage { height: original.height, width: original.width, data: a },
        GrayImage { height: original.height, width: original.width, data: b },
    ))
}
