//! Synthetic defocus benchmark: mask specifications, per-image evaluation
//! and the tab-separated report table.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, FusionError, Result};
use crate::fusion::{fuse_images, FusionConfig, FusionOutput};
use crate::imagecore::{load_gray, make_focus_pair, FocusMask, GrayImage};
use crate::metrics::{evaluate, MetricsReport};

pub const DEFAULT_BLUR_SIZE: usize = 3;
pub const DEFAULT_BLUR_SIGMA: f64 = 7.0;

/// Where source A is in focus.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    Left,
    Right,
    Top,
    Bottom,
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
    },
    /// Mask image; pixels >= 0.5 are in focus in source A.
    Image(PathBuf),
}

impl FromStr for MaskSpec {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "left" => return Ok(Self::Left),
            "right" => return Ok(Self::Right),
            "top" => return Ok(Self::Top),
            "bottom" => return Ok(Self::Bottom),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("circle:") {
            let parts: Vec<f64> = rest
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| FusionError::Parameter(format!("bad circle mask {s:?}; expected circle:cx,cy,r")))?;
            if parts.len() != 3 || !(parts[2] >= 0.0) {
                return param_err(format!("bad circle mask {s:?}; expected circle:cx,cy,r"));
            }
            return Ok(Self::Circle { cx: parts[0], cy: parts[1], r: parts[2] });
        }
        if s.is_empty() {
            return param_err("empty mask specification");
        }
        let path = PathBuf::from(s);
        if !path.exists() {
            return param_err(format!("unknown mask specification {s:?} (not a keyword or existing file)"));
        }
        Ok(Self::Image(path))
    }
}

impl MaskSpec {
    pub fn build(&self, height: usize, width: usize) -> Result<FocusMask> {
        match self {
            Self::Left => FocusMask::left_half(height, width),
            Self::Right => FocusMask::right_half(height, width),
            Self::Top => FocusMask::top_half(height, width),
            Self::Bottom => FocusMask::bottom_half(height, width),
            Self::Circle { cx, cy, r } => FocusMask::circle(height, width, *cx, *cy, *r),
            Self::Image(path) => {
                let img = load_gray(path)?;
                if img.dims() != (height, width) {
                    return param_err(format!(
                        "mask image is {}x{} but the original is {height}x{width}",
                        img.height(),
                        img.width()
                    ));
                }
                FocusMask::from_image(&img)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub name: String,
    pub source_a: MetricsReport,
    pub source_b: MetricsReport,
    pub fused: MetricsReport,
}

pub struct BenchCase {
    pub row: BenchRow,
    pub mask: FocusMask,
    pub source_a: GrayImage,
    pub source_b: GrayImage,
    pub output: FusionOutput,
}

/// Builds the defocus pair for `original`, fuses it and scores all three
/// images against the original.
pub fn run_case(
    name: &str,
    original: &GrayImage,
    mask: &FocusMask,
    blur_size: usize,
    blur_sigma: f64,
    cfg: &FusionConfig,
) -> Result<BenchCase> {
    let (a, b) = make_focus_pair(original, mask, blur_size, blur_sigma)?;
    let output = fuse_images(&a, &b, cfg)?;
    let row = BenchRow {
        name: name.to_string(),
        source_a: evaluate(&a, original)?,
        source_b: evaluate(&b, original)?,
        fused: evaluate(&output.image, original)?,
    };
    Ok(BenchCase { row, mask: mask.clone(), source_a: a, source_b: b, output })
}

pub fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

pub const TABLE_HEADER: &str = "image\tAG_a\tPSNR_a\tSSIM_a\tAG_b\tPSNR_b\tSSIM_b\tAG_fused\tPSNR_fused\tSSIM_fused";

/// One header line, then one tab-separated row per image with 4 decimals.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(TABLE_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.name);
        for m in [&row.source_a, &row.source_b, &row.fused] {
            for v in [m.ag, m.psnr, m.ssim] {
                let _ = write!(out, "\t{}", format_value(v));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mask_keywords() {
        assert_eq!("left".parse::<MaskSpec>().unwrap(), MaskSpec::Left);
        assert_eq!("bottom".parse::<MaskSpec>().unwrap(), MaskSpec::Bottom);
        assert_eq!("circle:10,12.5,4".parse::<MaskSpec>().unwrap(), MaskSpec::Circle { cx: 10.0, cy: 12.5, r: 4.0 });
        assert!("circle:1,2".parse::<MaskSpec>().is_err());
        assert!("diagonal".parse::<MaskSpec>().is_err());
    }

    #[test]
    fn table_layout() {
        let m = MetricsReport { ag: 0.123456, psnr: f64::INFINITY, ssim: 1.0 };
        let rows = vec![BenchRow { name: "x".into(), source_a: m, source_b: m, fused: m }];
        let t = format_table(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "x\t0.1235\t+inf\t1.0000\t0.1235\t+inf\t1.0000\t0.1235\t+inf\t1.0000");
        assert_eq!(lines[0].split('\t').count(), 10);
    }
}
