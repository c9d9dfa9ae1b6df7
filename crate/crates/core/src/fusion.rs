//! Choose-max coefficient fusion, reconstruction and the end-to-end
//! two-image pipeline.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::hog::{self, classify_columns, group_by_label};
use crate::imagecore::{FocusMask, GrayImage};
use crate::lrr::{column_l1_norms, lrr_solve, LrrDiagnostics, LrrParams, LrrSolution};
use crate::patching::{average_columns, extract_patches, PatchGeometry};
use crate::sparsecoding::{build_global_dictionary_with_stats, select_columns, ClassTraining, Dictionary, KsvdParams};

/// Which source wins a column when both l1 norms are equal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// `Z_A` is taken only when its l1 norm is strictly larger.
    #[default]
    PreferB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub window: usize,
    pub step: usize,
    pub bins: usize,
    pub hog_threshold: f64,
    pub ksvd: KsvdParams,
    pub lrr: LrrParams,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            window: 8,
            step: 1,
            bins: 6,
            hog_threshold: hog::DEFAULT_THRESHOLD,
            ksvd: KsvdParams::default(),
            lrr: LrrParams::default(),
            tie_break: TieBreak::PreferB,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.step == 0 {
            return param_err("window and step must be >= 1");
        }
        if self.bins == 0 {
            return param_err("HOG bin count must be >= 1");
        }
        if !(self.hog_threshold > 0.0 && self.hog_threshold < 1.0) {
            return param_err(format!("HOG threshold must lie in (0, 1), got {}", self.hog_threshold));
        }
        self.ksvd.validate()?;
        self.lrr.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedCoefficients {
    pub z: DMatrix<f64>,
    pub provenance: Vec<Source>,
}

impl FusedCoefficients {
    pub fn count(&self, source: Source) -> usize {
        self.provenance.iter().filter(|&&s| s == source).count()
    }
}

/// Column-wise choose-max on l1 norms: column `i` comes from `Z_A` when
/// `‖Z_Ai‖₁ > ‖Z_Bi‖₁`, otherwise from `Z_B`.
pub fn fuse_coefficients(za: &DMatrix<f64>, zb: &DMatrix<f64>) -> Result<FusedCoefficients> {
    if za.shape() != zb.shape() {
        return param_err(format!("coefficient shapes differ: {:?} vs {:?}", za.shape(), zb.shape()));
    }
    let la = column_l1_norms(za);
    let lb = column_l1_norms(zb);
    let mut z = zb.clone();
    let mut provenance = vec![Source::B; za.ncols()];
    for i in 0..za.ncols() {
        if la[i] > lb[i] {
            z.set_column(i, &za.column(i));
            provenance[i] = Source::A;
        }
    }
    Ok(FusedCoefficients { z, provenance })
}

/// `V_f = D Z_f`, reshaped into patches and overlap-averaged.
pub fn reconstruct_fused(dict: &Dictionary, fused: &FusedCoefficients, geometry: &PatchGeometry) -> Result<GrayImage> {
    if dict.len() != fused.z.nrows() {
        return param_err(format!("dictionary has {} atoms but Z_f has {} rows", dict.len(), fused.z.nrows()));
    }
    if dict.dim() != geometry.patch_len() {
        return param_err(format!("atom dimension {} does not match window {}", dict.dim(), geometry.window()));
    }
    if fused.z.ncols() != geometry.count() {
        return param_err(format!("Z_f has {} columns, geometry has {} patches", fused.z.ncols(), geometry.count()));
    }
    let patches = dict.atoms() * &fused.z;
    average_columns(geometry, &patches)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub patching_s: f64,
    pub dictionary_s: f64,
    pub lrr_s: f64,
    pub fusion_s: f64,
    pub reconstruction_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub height: usize,
    pub width: usize,
    pub patches_per_image: usize,
    /// Pooled patch count per HOG class `0..=L` (empty when a dictionary was supplied).
    pub class_populations: Vec<usize>,
    /// Atoms contributed per class.
    pub class_atoms: Vec<usize>,
    pub dictionary_atoms: usize,
    pub dictionary_trained_here: bool,
    pub lrr_a: LrrDiagnostics,
    pub lrr_b: LrrDiagnostics,
    pub from_a: usize,
    pub from_b: usize,
    pub warnings: Vec<String>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub image: GrayImage,
    pub dictionary: Dictionary,
    pub geometry: PatchGeometry,
    pub solution_a: LrrSolution,
    pub solution_b: LrrSolution,
    pub fused: FusedCoefficients,
    pub report: FusionReport,
}

/// Learns the global dictionary from the pooled patches of `images`.
///
/// Returns the dictionary, per-class training stats and the pooled class
/// populations.
pub fn train_dictionary(
    images: &[&GrayImage],
    cfg: &FusionConfig,
) -> Result<(Dictionary, Vec<ClassTraining>, Vec<usize>)> {
    cfg.validate()?;
    if images.is_empty() {
        return param_err("at least one training image is required");
    }
    let mut blocks = Vec::with_capacity(images.len());
    for img in images {
        blocks.push(extract_patches(img, cfg.window, cfg.step)?.into_data());
    }
    let pooled = hstack(&blocks);
    dictionary_from_pool(&pooled, cfg)
}

fn dictionary_from_pool(
    pooled: &DMatrix<f64>,
    cfg: &FusionConfig,
) -> Result<(Dictionary, Vec<ClassTraining>, Vec<usize>)> {
    let labels = classify_columns(pooled, cfg.window, cfg.bins, cfg.hog_threshold)?;
    let sets = group_by_label(&labels, cfg.bins);
    let populations = sets.iter().map(|s| s.len()).collect();
    let classes: Vec<DMatrix<f64>> = sets.iter().map(|s| select_columns(pooled, s)).collect();
    let (dict, stats) = build_global_dictionary_with_stats(&classes, &cfg.ksvd)?;
    Ok((dict, stats, populations))
}

fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Runs the full method: patching, HOG classes, K-SVD global dictionary
/// from the pooled patches of both sources, two LRR solves, choose-max
/// fusion and overlap-averaged reconstruction.
pub fn fuse_images(a: &GrayImage, b: &GrayImage, cfg: &FusionConfig) -> Result<FusionOutput> {
    fuse_impl(a, b, cfg, None)
}

/// Same pipeline with a pre-trained dictionary.
pub fn fuse_images_with_dictionary(
    a: &GrayImage,
    b: &GrayImage,
    dict: &Dictionary,
    cfg: &FusionConfig,
) -> Result<FusionOutput> {
    fuse_impl(a, b, cfg, Some(dict))
}

fn fuse_impl(a: &GrayImage, b: &GrayImage, cfg: &FusionConfig, given: Option<&Dictionary>) -> Result<FusionOutput> {
    cfg.validate()?;
    if a.dims() != b.dims() {
        return param_err(format!(
            "source images differ in size: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        ));
    }
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let va = extract_patches(a, cfg.window, cfg.step)?;
    let vb = extract_patches(b, cfg.window, cfg.step)?;
    let geometry = *va.geometry();
    timings.patching_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (dictionary, class_populations, trained_here) = match given {
        Some(d) => {
            if d.dim() != geometry.patch_len() {
                return param_err(format!(
                    "dictionary atoms have dimension {} but window {} needs {}",
                    d.dim(),
                    cfg.window,
                    geometry.patch_len()
                ));
            }
            (d.clone(), Vec::new(), false)
        }
        None => {
            let pooled = hstack(&[va.data().clone(), vb.data().clone()]);
            let (d, _, pops) = dictionary_from_pool(&pooled, cfg)?;
            (d, pops, true)
        }
    };
    timings.dictionary_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let atoms = dictionary.atoms();
    let (sol_a, sol_b) = std::thread::scope(|s| {
        let ha = s.spawn(|| lrr_solve(va.data(), atoms, &cfg.lrr));
        let rb = lrr_solve(vb.data(), atoms, &cfg.lrr);
        let ra = ha.join().expect("LRR worker panicked");
        (ra, rb)
    });
    let (sol_a, sol_b) = (sol_a?, sol_b?);
    timings.lrr_s = t.elapsed().as_secs_f64();

    let mut warnings = Vec::new();
    for (name, sol) in [("A", &sol_a), ("B", &sol_b)] {
        if !sol.converged {
            warnings.push(format!(
                "LRR solve for source {name} stopped after {} iterations without converging (feasibility {:.3e}, split {:.3e})",
                sol.iterations, sol.feasibility, sol.split
            ));
        }
    }

    let t = Instant::now();
    let fused = fuse_coefficients(&sol_a.z, &sol_b.z)?;
    timings.fusion_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let image = reconstruct_fused(&dictionary, &fused, &geometry)?;
    timings.reconstruction_s = t.elapsed().as_secs_f64();

    let report = FusionReport {
        height: a.height(),
        width: a.width(),
        patches_per_image: geometry.count(),
        class_populations,
        class_atoms: dictionary.class_sizes(),
        dictionary_atoms: dictionary.len(),
        dictionary_trained_here: trained_here,
        lrr_a: sol_a.diagnostics(),
        lrr_b: sol_b.diagnostics(),
        from_a: fused.count(Source::A),
        from_b: fused.count(Source::B),
        warnings,
        timings,
    };
    Ok(FusionOutput { image, dictionary, geometry, solution_a: sol_a, solution_b: sol_b, fused, report })
}

/// Agreement between fusion provenance and a focus mask, over patches whose
/// window lies entirely inside one mask region. Mask-true pixels are sharp
/// in source A. Returns `(agreeing, interior)`.
pub fn provenance_agreement(
    provenance: &[Source],
    geometry: &PatchGeometry,
    mask: &FocusMask,
) -> Result<(usize, usize)> {
    if mask.dims() != (geometry.height(), geometry.width()) {
        return param_err("mask does not match patch geometry");
    }
    if provenance.len() != geometry.count() {
        return param_err("provenance length does not match patch count");
    }
    let n = geometry.window();
    let mut agree = 0;
    let mut interior = 0;
    for (q, &src) in provenance.iter().enumerate() {
        let (r0, c0) = geometry.origin(q);
        let first = mask.get(r0, c0);
        let uniform = (0..n).all(|i| (0..n).all(|j| mask.get(r0 + i, c0 + j) == first));
        if !uniform {
            continue;
        }
        interior += 1;
        let expected = if first { Source::A } else { Source::B };
        if src == expected {
            agree += 1;
        }
    }
    Ok((agree, interior))
}

/// Per-patch provenance rendered as an image at grid resolution: white for
/// source A, black for source B.
pub fn provenance_image(provenance: &[Source], geometry: &PatchGeometry) -> Result<GrayImage> {
    if provenance.len() != geometry.count() {
        return param_err("provenance length does not match patch count");
    }
    let data = provenance.iter().map(|s| if *s == Source::A { 1.0 } else { 0.0 }).collect();
    GrayImage::new(geometry.grid_rows(), geometry.grid_cols(), data)
}
