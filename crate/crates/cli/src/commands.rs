use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hamflow::boosting::{adaboost, roc, Confusion, RoundReport};
use hamflow::dataset::{build_canonical, load_image};
use hamflow::features::{build_feature_bank, feature_matrix, StackedSource};
use hamflow::landscape::{derive_systems, load_scalar_field, normalize, write_field_binary, write_png};
use hamflow::streamline::{orbits_from_json, orbits_to_json, orient_positive, svg_overlay};
use hamflow::topo_index::{boundary_flow, continuous_conley, discrete_conley, poincare_index_lenient};
use hamflow::{
    FeatureBank, FeatureMatrix, FeatureSource, HaarBank, Label, Manifest, Orbit, PatchSampler, ScalarField,
    StrongClassifier,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Stamp};
use crate::{CanonArgs, CliError, EvalArgs, IndicesArgs, OrbitsArgs, PatchesArgs, TrainArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Hamiltonian,
    Haar,
    Both,
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// `PREFIX` + `suffix`, keeping the prefix's directory.
pub(crate) fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// CSV text with a provenance comment line ahead of the header.
pub(crate) fn stamped_csv(stamp: &Stamp, header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = w.into_inner().map_err(|e| CliError::Data(format!("csv: {e}")))?;
    Ok(stamp.csv_comment() + &String::from_utf8(body).expect("csv output is utf-8"))
}

/// Inserts the provenance comment after the opening `<svg>` line.
pub(crate) fn stamped_svg(stamp: &Stamp, svg: &str) -> String {
    match svg.split_once('\n') {
        Some((open, rest)) => format!("{open}\n{}{rest}", stamp.svg_comment()),
        None => svg.to_owned(),
    }
}

pub fn cmd_canon(_cfg: &RunConfig, a: &CanonArgs) -> Result<(), CliError> {
    let manifest = Manifest::load(&a.manifest)?;
    let canon: ScalarField<f64> = build_canonical(&manifest, a.split, Label::Face)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_field_binary(&canon, &a.out)?;
    let preview = a.preview.clone().unwrap_or_else(|| a.out.with_extension("png"));
    write_png(&canon, &preview)?;
    println!("canonical {}x{} -> {} (preview {})", canon.width(), canon.height(), a.out.display(), preview.display());
    Ok(())
}

/// Index diagnostics of one closed orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexRow {
    pub orbit: usize,
    pub length: usize,
    pub poincare: f64,
    pub conley_ratio: f64,
    pub conley_type: String,
}

/// Indexes of every index-eligible orbit, oriented positively first. Others are reported back.
pub fn index_rows(img: &ScalarField<f64>, orbits: &[Orbit], eps: f64) -> Result<(Vec<IndexRow>, Vec<usize>), CliError> {
    let (w, h) = img.dims();
    let (neg_grad, _) = derive_systems(img);
    let dir = normalize(&neg_grad, eps)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (i, o) in orbits.iter().enumerate() {
        if o.points().iter().any(|p| p.col >= w || p.row >= h) {
            return Err(CliError::Data(format!("orbit {i} leaves the {w}x{h} image")));
        }
        if !o.is_index_eligible() {
            skipped.push(i);
            continue;
        }
        let o = orient_positive(o)?;
        let flow = boundary_flow(&o, &neg_grad)?;
        rows.push(IndexRow {
            orbit: i,
            length: o.len(),
            poincare: poincare_index_lenient(&o, &dir)?,
            conley_ratio: continuous_conley(&flow),
            conley_type: discrete_conley(&flow).to_string(),
        });
    }
    Ok((rows, skipped))
}

fn index_csv(stamp: &Stamp, rows: &[IndexRow]) -> Result<String, CliError> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.orbit.to_string(),
                r.length.to_string(),
                r.poincare.to_string(),
                r.conley_ratio.to_string(),
                r.conley_type.clone(),
            ]
        })
        .collect();
    stamped_csv(stamp, &["orbit", "length", "poincare", "conley_ratio", "conley_type"], &body)
}

pub fn cmd_orbits(cfg: &RunConfig, a: &OrbitsArgs) -> Result<(), CliError> {
    let stamp = Stamp::new(cfg);
    let raw: ScalarField<f64> = load_scalar_field(&a.canonical)?;
    let img = cfg.preprocess(&raw)?;
    let bank = build_feature_bank(&img, cfg.bank_config())?;
    let orbits: Vec<Orbit> = bank.orbits().into_iter().cloned().collect();

    let json_path = with_suffix(&a.out_prefix, ".json");
    write_text(&json_path, &orbits_to_json(&orbits, Some(&stamp.tool_version), Some(&stamp.config_hash))?)?;
    write_text(&with_suffix(&a.out_prefix, ".svg"), &stamped_svg(&stamp, &svg_overlay(&img, &orbits)))?;
    let (rows, _) = index_rows(&img, &orbits, cfg.eps_stationary)?;
    write_text(&with_suffix(&a.out_prefix, "_indices.csv"), &index_csv(&stamp, &rows)?)?;
    println!("{} orbits ({} closed) -> {}", bank.orbit_count, bank.closed_count, json_path.display());
    Ok(())
}

pub fn cmd_indices(cfg: &RunConfig, a: &IndicesArgs) -> Result<(), CliError> {
    let stamp = Stamp::new(cfg);
    let raw: ScalarField<f64> = load_scalar_field(&a.image)?;
    let img = cfg.preprocess(&raw)?;
    let orbits = orbits_from_json(&read_text(&a.orbits)?)?;
    let (rows, skipped) = index_rows(&img, &orbits, cfg.eps_stationary)?;
    for i in skipped {
        eprintln!("warning: orbit {i} is open or degenerate; skipped");
    }
    write_text(&a.out, &index_csv(&stamp, &rows)?)?;
    println!("{} closed orbits -> {}", rows.len(), a.out.display());
    Ok(())
}

/// Feature banks a model was trained over, stored beside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankFile {
    pub tool_version: String,
    pub config_hash: String,
    pub feature_mode: FeatureMode,
    pub hamiltonian: Option<FeatureBank<f64>>,
    pub haar: Option<HaarBank>,
}

impl BankFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bank: BankFile = serde_json::from_str(&read_text(path)?)?;
        if bank.hamiltonian.is_none() && bank.haar.is_none() {
            return Err(CliError::Data(format!("{}: bank file holds no features", path.display())));
        }
        if let Some(b) = &bank.hamiltonian {
            b.validate()?;
        }
        if let Some(b) = &bank.haar {
            b.validate()?;
        }
        Ok(bank)
    }

    /// Runs `f` on the column source: hamiltonian columns first, then haar.
    pub fn with_source<R>(&self, f: impl FnOnce(&dyn FeatureSource<f64>) -> Result<R, CliError>) -> Result<R, CliError> {
        let mut parts: Vec<&dyn FeatureSource<f64>> = Vec::new();
        if let Some(b) = &self.hamiltonian {
            parts.push(b);
        }
        if let Some(b) = &self.haar {
            parts.push(b);
        }
        if parts.len() == 1 {
            return f(parts[0]);
        }
        let stacked = StackedSource::new(parts)?;
        f(&stacked)
    }
}

/// Model JSON: the classifier rounds at the top level plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub tool_version: String,
    pub config_hash: String,
    pub feature_mode: FeatureMode,
    /// `[width, height]` of the canonical window.
    pub window: [usize; 2],
    pub feature_count: usize,
    #[serde(flatten)]
    pub classifier: StrongClassifier<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub tool_version: String,
    pub config_hash: String,
    pub feature_mode: FeatureMode,
    pub train_images: usize,
    pub positives: usize,
    pub negatives: usize,
    pub feature_count: usize,
    pub hamiltonian_orbits: Option<usize>,
    pub hamiltonian_closed_orbits: Option<usize>,
    pub wall_seconds: f64,
    pub kind_sequence: Vec<String>,
    pub rounds: Vec<RoundReport>,
    pub stopped_early: Option<String>,
}

pub struct TrainOutcome {
    pub model: ModelFile,
    pub report: TrainReport,
    pub model_path: PathBuf,
    pub bank_path: PathBuf,
    pub report_path: PathBuf,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn cmd_train(cfg: &RunConfig, a: &TrainArgs) -> Result<TrainOutcome, CliError> {
    let started = Instant::now();
    let stamp = Stamp::new(cfg);
    let manifest = Manifest::load(&a.manifest)?;
    let (raw, labels) = manifest.load_split::<f64>(hamflow::Split::Train)?;
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(hamflow::Error::OneClass.into());
    }
    let images = raw.par_iter().map(|im| cfg.preprocess(im)).collect::<Result<Vec<_>, _>>()?;

    let hamiltonian = match a.features {
        FeatureMode::Haar => None,
        _ => {
            let canon = match &a.canonical {
                Some(p) => load_scalar_field(p)?,
                None => build_canonical(&manifest, hamflow::Split::Train, Label::Face)?,
            };
            Some(build_feature_bank(&cfg.preprocess(&canon)?, cfg.bank_config())?)
        }
    };
    let dims = hamiltonian.as_ref().map_or(images[0].dims(), |b| b.canonical.dims());
    let haar = match a.features {
        FeatureMode::Hamiltonian => None,
        _ => Some(HaarBank::new(dims.0, dims.1, cfg.haar_target)?),
    };
    let bank = BankFile {
        tool_version: stamp.tool_version.clone(),
        config_hash: stamp.config_hash.clone(),
        feature_mode: a.features,
        hamiltonian,
        haar,
    };

    let matrix: FeatureMatrix<f64> = bank.with_source(|s| Ok(feature_matrix(s, &images, &labels)?))?;
    let (mut classifier, boost) = adaboost(&matrix, cfg.rounds)?;

    let bank_path = sibling(&a.out, ".bank.json");
    let report_path = sibling(&a.out, ".report.json");
    classifier.bank_reference = bank_path.file_name().map(|n| n.to_string_lossy().into_owned());
    let model = ModelFile {
        tool_version: stamp.tool_version.clone(),
        config_hash: stamp.config_hash.clone(),
        feature_mode: a.features,
        window: [dims.0, dims.1],
        feature_count: matrix.n_cols(),
        classifier,
    };
    write_text(&bank_path, &serde_json::to_string(&bank)?)?;
    write_text(&a.out, &serde_json::to_string_pretty(&model)?)?;

    let report = TrainReport {
        tool_version: stamp.tool_version,
        config_hash: stamp.config_hash,
        feature_mode: a.features,
        train_images: labels.len(),
        positives,
        negatives: labels.len() - positives,
        feature_count: matrix.n_cols(),
        hamiltonian_orbits: bank.hamiltonian.as_ref().map(|b| b.orbit_count),
        hamiltonian_closed_orbits: bank.hamiltonian.as_ref().map(|b| b.closed_count),
        wall_seconds: started.elapsed().as_secs_f64(),
        kind_sequence: boost.kind_sequence().into_iter().map(str::to_owned).collect(),
        rounds: boost.rounds,
        stopped_early: boost.stopped_early,
    };
    write_text(&report_path, &serde_json::to_string_pretty(&report)?)?;

    println!(
        "trained {} rounds over {} features on {} images ({} faces) in {:.2}s",
        report.rounds.len(),
        report.feature_count,
        report.train_images,
        positives,
        report.wall_seconds
    );
    for r in &report.rounds {
        println!(
            "  round {:>3}  {:<10} {:<28} eps={:.6} alpha={:.6} train_err={:.4}",
            r.round + 1,
            r.feature_kind,
            r.feature_id,
            r.weighted_error,
            r.alpha,
            r.training_error
        );
    }
    if let Some(note) = &report.stopped_early {
        println!("  stopped early: {note}");
    }
    Ok(TrainOutcome { model, report, model_path: a.out.clone(), bank_path, report_path })
}

/// A model with its banks, ready to score windows of the canonical size.
pub struct LoadedModel {
    pub model: ModelFile,
    pub bank: BankFile,
    /// Source columns the classifier reads, ascending.
    pub columns: Vec<usize>,
    /// The classifier re-indexed onto `columns`.
    pub compact: StrongClassifier<f64>,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let model: ModelFile = serde_json::from_str(&read_text(path)?)?;
        StrongClassifier::new(model.classifier.rounds.clone())?;
        let reference = model
            .classifier
            .bank_reference
            .clone()
            .ok_or_else(|| CliError::Data(format!("{}: model names no feature bank", path.display())))?;
        let bank = BankFile::load(&path.parent().unwrap_or(Path::new("")).join(reference))?;
        let (len, dims) = bank.with_source(|s| Ok((s.len(), s.dims())))?;
        if len != model.feature_count || [dims.0, dims.1] != model.window {
            return Err(CliError::Data(format!(
                "{}: feature bank does not match the model ({len} features, {}x{})",
                path.display(),
                dims.0,
                dims.1
            )));
        }
        let columns = model.classifier.referenced_features();
        if let Some(&j) = columns.last().filter(|&&j| j >= len) {
            return Err(hamflow::Error::MissingFeature { index: j, len }.into());
        }
        let mut compact = model.classifier.clone();
        for r in &mut compact.rounds {
            r.feature_idx = columns.binary_search(&r.feature_idx).expect("referenced column");
        }
        Ok(LoadedModel { model, bank, columns, compact })
    }

    pub fn window(&self) -> (usize, usize) {
        (self.model.window[0], self.model.window[1])
    }

    /// Values of the referenced columns on an already preprocessed window.
    pub fn features(&self, img: &ScalarField<f64>) -> Result<Vec<f64>, CliError> {
        self.bank.with_source(|s| Ok(s.evaluate_selected(img, &self.columns)?))
    }

    /// `(label, margin)` of a preprocessed window.
    pub fn classify(&self, img: &ScalarField<f64>) -> Result<(u8, f64), CliError> {
        Ok(self.compact.classify(&self.features(img)?)?)
    }

    fn matrix(&self, images: &[ScalarField<f64>], labels: &[u8]) -> Result<FeatureMatrix<f64>, CliError> {
        let rows = images.par_iter().map(|im| self.features(im)).collect::<Result<Vec<_>, _>>()?;
        let (ids, kinds) = self.bank.with_source(|s| {
            Ok((
                self.columns.iter().map(|&j| s.feature_id(j)).collect(),
                self.columns.iter().map(|&j| s.feature_kind(j)).collect(),
            ))
        })?;
        Ok(FeatureMatrix::from_rows(ids, kinds, rows, labels.to_vec())?)
    }
}

pub struct EvalOutcome {
    pub confusion: Confusion,
    pub roc_path: Option<PathBuf>,
}

pub fn cmd_eval(cfg: &RunConfig, a: &EvalArgs) -> Result<EvalOutcome, CliError> {
    let stamp = Stamp::new(cfg);
    let loaded = LoadedModel::load(&a.model)?;
    let manifest = Manifest::load(&a.manifest)?;
    let (raw, labels) = manifest.load_split::<f64>(a.split)?;
    if raw.is_empty() {
        return Err(CliError::Data(format!("manifest has no images in the {} split", a.split)));
    }
    for (i, im) in raw.iter().enumerate() {
        if im.dims() != loaded.window() {
            return Err(hamflow::Error::DimensionMismatch { expected: loaded.window(), found: im.dims(), index: Some(i) }.into());
        }
    }
    let images = raw.par_iter().map(|im| cfg.preprocess(im)).collect::<Result<Vec<_>, _>>()?;
    let matrix = loaded.matrix(&images, &labels)?;
    let c = loaded.compact.confusion(&matrix)?;
    println!("fn={} fp={} tp={} tn={} accuracy={:.4}", c.fn_, c.fp, c.tp, c.tn, c.accuracy());

    let confusion_rows = vec![vec![c.fn_.to_string(), c.fp.to_string(), c.tp.to_string(), c.tn.to_string()]];
    write_text(
        &with_suffix(&a.out_prefix, "_confusion.csv"),
        &stamped_csv(&stamp, &["fn", "fp", "tp", "tn"], &confusion_rows)?,
    )?;

    let roc_path = match roc(&loaded.compact, &matrix) {
        Ok(curve) => {
            let mut body = Vec::new();
            curve.write_csv(&mut body)?;
            let path = with_suffix(&a.out_prefix, "_roc.csv");
            write_text(&path, &(stamp.csv_comment() + &String::from_utf8(body).expect("utf-8")))?;
            println!("auc={:.4} -> {}", curve.auc(), path.display());
            Some(path)
        }
        Err(hamflow::Error::OneClass) => {
            eprintln!("warning: the {} split holds a single class; no ROC written", a.split);
            None
        }
        Err(e) => return Err(e.into()),
    };
    Ok(EvalOutcome { confusion: c, roc_path })
}

pub fn cmd_patches(cfg: &RunConfig, a: &PatchesArgs) -> Result<(), CliError> {
    let stamp = Stamp::new(cfg);
    let sources = a.sources.iter().map(|p| load_image::<f64>(p)).collect::<Result<Vec<_>, _>>()?;
    let sampler = PatchSampler::new(sources, a.width, a.height, a.stride, cfg.seed)?;
    let patches = sampler.sample(a.count)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let mut rows = Vec::with_capacity(patches.len());
    for (i, p) in patches.iter().enumerate() {
        let name = format!("patch_{i:05}.pgm");
        hamflow::landscape::write_pgm(p, a.out_dir.join(&name))?;
        rows.push(vec![name, Label::Nonface.to_string(), a.split.to_string()]);
    }
    let manifest = a.out_dir.join("patches.csv");
    write_text(&manifest, &stamped_csv(&stamp, &["path", "label", "split"], &rows)?)?;
    println!("{} patches -> {}", patches.len(), manifest.display());
    Ok(())
}
