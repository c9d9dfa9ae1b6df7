use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;

use lrfuse::bench::{format_table, format_value, run_case, BenchRow, MaskSpec};
use lrfuse::formats::{read_dictionary, write_dictionary, write_matrix};
use lrfuse::fusion::{fuse_images_with_dictionary, provenance_image, train_dictionary, FusionOutput, StageTimings};
use lrfuse::imagecore::{load_gray, make_focus_pair, save_gray};
use lrfuse::lrr::LrrDiagnostics;
use lrfuse::metrics::{evaluate, MetricsReport};
use lrfuse::{fuse_images, FusionConfig, GrayImage};

use crate::config::{EffectiveConfig, FusionFlags};
use crate::CliError;

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn load(path: &Path) -> Result<GrayImage, CliError> {
    load_gray(path).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn to_toml<T: Serialize>(value: &T) -> Result<String, CliError> {
    toml::to_string(value).map_err(|e| CliError::Numeric(format!("cannot serialize manifest: {e}")))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "pgm".into());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

// ------------------------------------------------------------ blur-pair

pub fn blur_pair(
    original: &Path,
    mask: &str,
    size: usize,
    sigma: f64,
    out_a: Option<PathBuf>,
    out_b: Option<PathBuf>,
) -> Result<(), CliError> {
    let spec: MaskSpec = mask.parse()?;
    let img = load(original)?;
    let focus = spec.build(img.height(), img.width())?;
    let (a, b) = make_focus_pair(&img, &focus, size, sigma)?;
    let out_a = out_a.unwrap_or_else(|| sibling(original, "_a"));
    let out_b = out_b.unwrap_or_else(|| sibling(original, "_b"));
    save_gray(&a, &out_a)?;
    save_gray(&b, &out_b)?;
    eprintln!("wrote {} and {}", out_a.display(), out_b.display());
    Ok(())
}

// ------------------------------------------------------------ fuse

#[derive(Debug, Args)]
pub struct FuseArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Fused image (.png or .pgm).
    #[arg(short, long)]
    pub out: PathBuf,
    /// Pre-trained dictionary; skips per-pair training.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// All-in-focus reference for PSNR/SSIM in the manifest.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Per-patch provenance map (white = source A).
    #[arg(long)]
    pub provenance: Option<PathBuf>,
    /// Directory for the dictionary and coefficient/error matrices.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    /// Manifest path; defaults to the output path with a .toml extension.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Leave wall-clock timings out of the manifest so reruns are byte-identical.
    #[arg(long)]
    pub no_timings: bool,
    #[command(flatten)]
    pub flags: FusionFlags,
}

#[derive(Serialize)]
struct DictionarySection {
    atoms: usize,
    trained_here: bool,
    class_atoms: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    class_populations: Vec<usize>,
}

#[derive(Serialize)]
struct FusionSection {
    patches_per_image: usize,
    from_a: usize,
    from_b: usize,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    seed: u64,
    warnings: Vec<String>,
    inputs: BTreeMap<&'static str, String>,
    outputs: BTreeMap<String, String>,
    config: EffectiveConfig,
    dictionary: DictionarySection,
    fusion: FusionSection,
    lrr_a: LrrDiagnostics,
    lrr_b: LrrDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<BTreeMap<&'static str, MetricsReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<StageTimings>,
}

fn dump_matrices(dir: &Path, out: &FusionOutput, outputs: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    create_dir(dir)?;
    let path = dir.join("dictionary.fldict");
    write_dictionary(&out.dictionary, &path)?;
    outputs.insert("dictionary".into(), show(&path));
    for (name, m) in [
        ("z_a", &out.solution_a.z),
        ("z_b", &out.solution_b.z),
        ("z_f", &out.fused.z),
        ("e_a", &out.solution_a.e),
        ("e_b", &out.solution_b.e),
    ] {
        let path = dir.join(format!("{name}.flmat"));
        write_matrix(m, &path)?;
        outputs.insert(name.into(), show(&path));
    }
    Ok(())
}

pub fn fuse(args: &FuseArgs) -> Result<(), CliError> {
    let cfg = args.flags.resolve()?;
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let reference = args.reference.as_deref().map(load).transpose()?;
    if let Some(r) = &reference {
        if r.dims() != a.dims() {
            return Err(CliError::Usage(format!(
                "reference is {}x{} but the sources are {}x{}",
                r.height(),
                r.width(),
                a.height(),
                a.width()
            )));
        }
    }
    let out = match &args.dict {
        Some(path) => fuse_images_with_dictionary(&a, &b, &read_dictionary(path)?, &cfg)?,
        None => fuse_images(&a, &b, &cfg)?,
    };
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }

    let mut inputs = BTreeMap::from([("a", show(&args.a)), ("b", show(&args.b))]);
    if let Some(p) = &args.dict {
        inputs.insert("dictionary", show(p));
    }
    if let Some(p) = &args.reference {
        inputs.insert("reference", show(p));
    }
    let mut outputs = BTreeMap::new();
    save_gray(&out.image, &args.out)?;
    outputs.insert("fused".to_string(), show(&args.out));
    if let Some(p) = &args.provenance {
        save_gray(&provenance_image(&out.fused.provenance, &out.geometry)?, p)?;
        outputs.insert("provenance".into(), show(p));
    }
    if let Some(dir) = &args.dump_dir {
        dump_matrices(dir, &out, &mut outputs)?;
    }
    let metrics = match &reference {
        Some(r) => Some(BTreeMap::from([
            ("source_a", evaluate(&a, r)?),
            ("source_b", evaluate(&b, r)?),
            ("fused", evaluate(&out.image, r)?),
        ])),
        None => None,
    };

    let report = &out.report;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| args.out.with_extension("toml"));
    outputs.insert("manifest".into(), show(&manifest_path));
    let manifest = RunManifest {
        command: "fuse",
        seed: cfg.ksvd.seed,
        warnings: report.warnings.clone(),
        inputs,
        outputs,
        config: EffectiveConfig::from(&cfg),
        dictionary: DictionarySection {
            atoms: report.dictionary_atoms,
            trained_here: report.dictionary_trained_here,
            class_atoms: report.class_atoms.clone(),
            class_populations: report.class_populations.clone(),
        },
        fusion: FusionSection {
            patches_per_image: report.patches_per_image,
            from_a: report.from_a,
            from_b: report.from_b,
        },
        lrr_a: report.lrr_a,
        lrr_b: report.lrr_b,
        metrics,
        timings: (!args.no_timings).then(|| report.timings.clone()),
    };
    write_text(&manifest_path, &to_toml(&manifest)?)?;
    eprintln!(
        "fused {}x{} ({} patches per image, {} from A, {} from B) -> {}",
        report.height,
        report.width,
        report.patches_per_image,
        report.from_a,
        report.from_b,
        args.out.display()
    );
    Ok(())
}

// ------------------------------------------------------------ corpus

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("png"))
}

fn is_mask_image(path: &Path) -> bool {
    path.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.ends_with(".mask"))
}

/// Images directly inside `dir`, sorted by file name; `*.mask.{pgm,png}`
/// files are excluded.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("cannot read {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Io(e.to_string()))?.path();
        if is_image(&path) && !is_mask_image(&path) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Mask for `original`: a `<stem>.mask` text file holding a mask spec
/// (paths relative to the corpus), else a `<stem>.mask.{pgm,png}` image,
/// else `fallback`.
fn corpus_mask(original: &Path, fallback: &str) -> Result<(String, MaskSpec), CliError> {
    let dir = original.parent().unwrap_or(Path::new("."));
    let stem = original.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let sidecar = dir.join(format!("{stem}.mask"));
    if sidecar.is_file() {
        let text = fs::read_to_string(&sidecar)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", sidecar.display())))?;
        let text = text.trim();
        let keyword = matches!(text, "left" | "right" | "top" | "bottom") || text.starts_with("circle:");
        let spec = if keyword || Path::new(text).is_absolute() { text.to_string() } else { show(&dir.join(text)) };
        return Ok((text.to_string(), spec.parse()?));
    }
    for ext in ["pgm", "png"] {
        let image = dir.join(format!("{stem}.mask.{ext}"));
        if image.is_file() {
            return Ok((format!("{stem}.mask.{ext}"), MaskSpec::Image(image)));
        }
    }
    Ok((fallback.to_string(), fallback.parse()?))
}

// ------------------------------------------------------------ bench

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of all-in-focus originals (.pgm/.png).
    pub corpus: PathBuf,
    /// Report table path; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Mask for originals without a sidecar.
    #[arg(long, default_value = "left")]
    pub mask: String,
    #[arg(long, default_value_t = lrfuse::bench::DEFAULT_BLUR_SIZE)]
    pub size: usize,
    #[arg(long, default_value_t = lrfuse::bench::DEFAULT_BLUR_SIGMA)]
    pub sigma: f64,
    /// Directory for each pair's sources, fused image and provenance map.
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
    /// Pre-trained dictionary shared by every pair.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Write a TOML manifest with per-image diagnostics.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Leave wall-clock timings out of the manifest.
    #[arg(long)]
    pub no_timings: bool,
    #[command(flatten)]
    pub flags: FusionFlags,
}

#[derive(Serialize)]
struct BenchImage {
    name: String,
    original: String,
    mask: String,
    from_a: usize,
    from_b: usize,
    warnings: Vec<String>,
    source_a: MetricsReport,
    source_b: MetricsReport,
    fused: MetricsReport,
    lrr_a: LrrDiagnostics,
    lrr_b: LrrDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<StageTimings>,
}

#[derive(Serialize)]
struct BenchManifest {
    command: &'static str,
    seed: u64,
    corpus: String,
    blur_size: usize,
    blur_sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dictionary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    total_seconds: Option<f64>,
    config: EffectiveConfig,
    images: Vec<BenchImage>,
}

fn bench_one(
    original_path: &Path,
    spec: &MaskSpec,
    args: &BenchArgs,
    cfg: &FusionConfig,
    dict: Option<&lrfuse::sparsecoding::Dictionary>,
) -> Result<(BenchRow, FusionOutput, [GrayImage; 2]), CliError> {
    let name = original_path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    let original = load(original_path)?;
    let mask = spec.build(original.height(), original.width())?;
    match dict {
        None => {
            let case = run_case(&name, &original, &mask, args.size, args.sigma, cfg)?;
            Ok((case.row, case.output, [case.source_a, case.source_b]))
        }
        Some(d) => {
            let (a, b) = make_focus_pair(&original, &mask, args.size, args.sigma)?;
            let output = fuse_images_with_dictionary(&a, &b, d, cfg)?;
            let row = BenchRow {
                name,
                source_a: evaluate(&a, &original)?,
                source_b: evaluate(&b, &original)?,
                fused: evaluate(&output.image, &original)?,
            };
            Ok((row, output, [a, b]))
        }
    }
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = args.flags.resolve()?;
    let originals = list_images(&args.corpus)?;
    if originals.is_empty() {
        return Err(CliError::Usage(format!("no .pgm/.png originals in {}", args.corpus.display())));
    }
    let masks = originals.iter().map(|p| corpus_mask(p, &args.mask)).collect::<Result<Vec<_>, _>>()?;
    let dict = args.dict.as_ref().map(read_dictionary).transpose()?;
    if let Some(dir) = &args.dump_dir {
        create_dir(dir)?;
    }

    let mut rows = Vec::new();
    let mut images = Vec::new();
    for (i, (path, (mask_label, spec))) in originals.iter().zip(&masks).enumerate() {
        eprintln!("[{}/{}] {} (mask {mask_label})", i + 1, originals.len(), path.display());
        let (row, out, [a, b]) = bench_one(path, spec, args, &cfg, dict.as_ref())?;
        for w in &out.report.warnings {
            eprintln!("warning: {}: {w}", row.name);
        }
        if let Some(dir) = &args.dump_dir {
            save_gray(&a, dir.join(format!("{}_a.png", row.name)))?;
            save_gray(&b, dir.join(format!("{}_b.png", row.name)))?;
            save_gray(&out.image, dir.join(format!("{}_fused.png", row.name)))?;
            save_gray(
                &provenance_image(&out.fused.provenance, &out.geometry)?,
                dir.join(format!("{}_provenance.png", row.name)),
            )?;
        }
        let r = &out.report;
        images.push(BenchImage {
            name: row.name.clone(),
            original: show(path),
            mask: mask_label.clone(),
            from_a: r.from_a,
            from_b: r.from_b,
            warnings: r.warnings.clone(),
            source_a: row.source_a,
            source_b: row.source_b,
            fused: row.fused,
            lrr_a: r.lrr_a,
            lrr_b: r.lrr_b,
            timings: (!args.no_timings).then(|| r.timings.clone()),
        });
        rows.push(row);
    }

    let table = format_table(&rows);
    match &args.report {
        Some(p) => write_text(p, &table)?,
        None => print!("{table}"),
    }
    if let Some(path) = &args.manifest {
        let manifest = BenchManifest {
            command: "bench",
            seed: cfg.ksvd.seed,
            corpus: show(&args.corpus),
            blur_size: args.size,
            blur_sigma: args.sigma,
            dictionary: args.dict.as_deref().map(show),
            report: args.report.as_deref().map(show),
            total_seconds: (!args.no_timings).then(|| start.elapsed().as_secs_f64()),
            config: EffectiveConfig::from(&cfg),
            images,
        };
        write_text(path, &to_toml(&manifest)?)?;
    }
    Ok(())
}

// ------------------------------------------------------------ train-dict

pub fn train_dict(inputs: &[PathBuf], out: &Path, flags: &FusionFlags) -> Result<(), CliError> {
    let cfg = flags.resolve()?;
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(list_images(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no training images found".into()));
    }
    let images = files.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&GrayImage> = images.iter().collect();
    let (dict, stats, populations) = train_dictionary(&refs, &cfg)?;
    write_dictionary(&dict, out)?;
    for (s, pop) in stats.iter().zip(&populations) {
        let err = s.final_error.map_or("-".to_string(), |e| format!("{e:.4e}"));
        eprintln!(
            "class {}: {pop} patches, {} atoms, {} (final error {err})",
            s.class,
            s.atoms,
            if s.trained { "trained" } else { "not trained" }
        );
    }
    eprintln!("wrote {} atoms of dimension {} to {}", dict.len(), dict.dim(), out.display());
    Ok(())
}

// ------------------------------------------------------------ eval

pub fn eval(image: &Path, reference: &Path) -> Result<(), CliError> {
    let img = load(image)?;
    let reference = load(reference)?;
    let m = evaluate(&img, &reference)?;
    println!("AG\tPSNR\tSSIM");
    println!("{}\t{}\t{}", format_value(m.ag), format_value(m.psnr), format_value(m.ssim));
    Ok(())
}
