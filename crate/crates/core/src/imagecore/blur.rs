use super::{clamp_unit, GrayImage};
use crate::error::{param_err, Result};

/// Normalized `size x size` Gaussian kernel, row-major.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size == 0 || size.is_multiple_of(2) {
        return param_err(format!("kernel size must be odd and >= 1, got {size}"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return param_err(format!("sigma must be positive, got {sigma}"));
    }
    let half = (size / 2) as f64;
    let two_s2 = 2.0 * sigma * sigma;
    let mut k = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let y = i as f64 - half;
            let x = j as f64 - half;
            k.push((-(x * x + y * y) / two_s2).exp());
        }
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Correlates a row-major plane with a square kernel using replicate-edge
/// boundary handling. No clamping is applied to the result.
pub fn convolve_replicate(data: &[f64], height: usize, width: usize, kernel: &[f64], size: usize) -> Vec<f64> {
    assert_eq!(data.len(), height * width);
    assert_eq!(kernel.len(), size * size);
    let half = (size / 2) as isize;
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut out = vec![0.0; height * width];
    for r in 0..height {
        for c in 0..width {
            let mut acc = 0.0;
            for ki in 0..size {
                let rr = clamp(r as isize + ki as isize - half, height);
                let row = &data[rr * width..(rr + 1) * width];
                for kj in 0..size {
                    let cc = clamp(c as isize + kj as isize - half, width);
                    acc += kernel[ki * size + kj] * row[cc];
                }
            }
            out[r * width + c] = acc;
        }
    }
    out
}

/// Gaussian blur with replicate edges; the output is clamped to `[0, 1]`.
pub fn gaussian_blur(img: &GrayImage, size: usize, sigma: f64) -> Result<GrayImage> {
    let kernel = gaussian_kernel(size, sigma)?;
    let out = convolve_replicate(img.data(), img.height(), img.width(), &kernel, size);
    GrayImage::new(img.height(), img.width(), out.into_iter().map(clamp_unit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_center_to_corner_ratio() {
        let k = gaussian_kernel(3, 7.0).unwrap();
        // exp(0) / exp(-(1+1)/(2*49))
        let expected = (2.0f64 / 98.0).exp();
        assert!((k[4] / k[0] - expected).abs() < 1e-14);
        assert!((k[4] / k[0] - 1.0206).abs() < 1e-4);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn even_size_and_bad_sigma_rejected() {
        assert!(gaussian_kernel(4, 1.0).is_err());
        assert!(gaussian_kernel(0, 1.0).is_err());
        assert!(gaussian_kernel(3, 0.0).is_err());
        let img = GrayImage::constant(4, 4, 0.5).unwrap();
        assert!(gaussian_blur(&img, 2, 1.0).is_err());
    }

    #[test]
    fn size_one_is_identity() {
        let img = GrayImage::from_fn(5, 7, |r, c| ((r * 3 + c * 5) % 11) as f64 / 10.0).unwrap();
        assert_eq!(gaussian_blur(&img, 1, 3.0).unwrap(), img);
    }

    #[test]
    fn constant_image_is_preserved() {
        for &c in &[0.0, 0.25, 0.7, 1.0] {
            let img = GrayImage::constant(6, 9, c).unwrap();
            let out = gaussian_blur(&img, 5, 2.0).unwrap();
            assert!((out.mean() - c).abs() < 1e-12);
            assert!(out.data().iter().all(|v| (v - c).abs() < 1e-12));
        }
    }

    proptest! {
        #[test]
        fn blur_is_linear_before_clamping(
            h in 1usize..10, w in 1usize..10,
            a in -2.0f64..2.0, b in -2.0f64..2.0,
            seed in any::<u64>(),
        ) {
            let n = h * w;
            let gen = |k: u64| -> Vec<f64> {
                (0..n as u64).map(|i| ((((i + 1) * 2654435761u64) ^ seed.wrapping_add(k)) % 1000) as f64 / 999.0).collect()
            };
            let x = gen(1);
            let y = gen(7);
            let kernel = gaussian_kernel(3, 7.0).unwrap();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = convolve_replicate(&mix, h, w, &kernel, 3);
            let bx = convolve_replicate(&x, h, w, &kernel, 3);
            let by = convolve_replicate(&y, h, w, &kernel, 3);
            for i in 0..n {
                prop_assert!((lhs[i] - (a * bx[i] + b * by[i])).abs() < 1e-12);
            }
        }
    }
}
