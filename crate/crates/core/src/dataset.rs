//! Labelled image manifests, clutter patch sampling and canonical images.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::landscape::{average_image, load_scalar_field, ScalarField};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Face,
    Nonface,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        u8::from(self == Label::Face)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Face => "face",
            Label::Nonface => "nonface",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "face" => Ok(Label::Face),
            "nonface" => Ok(Label::Nonface),
            other => Err(format!("unknown label {other:?} (expected face or nonface)")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train or test)")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Resolved against the manifest's directory when relative.
    pub path: PathBuf,
    pub label: Label,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Reads a `path,label,split` CSV. Lines starting with `#` are comments.
    /// Row numbers in errors are file line numbers.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let column = |name: &str| {
            header.iter().position(|h| h == name).ok_or_else(|| Error::Manifest {
                row: 1,
                message: format!("header must contain path, label and split (missing {name})"),
            })
        };
        let (pc, lc, sc) = (column("path")?, column("label")?, column("split")?);

        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize| record.get(i).unwrap_or("");
            let bad = |message: String| Error::Manifest { row, message };
            let raw = field(pc);
            if raw.is_empty() {
                return Err(bad("empty path".into()));
            }
            let label = field(lc).parse::<Label>().map_err(bad)?;
            let split = field(sc).parse::<Split>().map_err(bad)?;
            let resolved = base.join(raw);
            if !seen.insert(resolved.clone()) {
                return Err(bad(format!("duplicate path {raw}")));
            }
            entries.push(ManifestEntry { path: resolved, label, split });
        }
        Ok(Manifest { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn select(&self, split: Split, label: Option<Label>) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split && label.is_none_or(|l| e.label == l))
    }

    /// Loads every image of a split in manifest order with 0/1 labels.
    pub fn load_split<T: Real>(&self, split: Split) -> Result<(Vec<ScalarField<T>>, Vec<u8>)> {
        let chosen: Vec<&ManifestEntry> = self.select(split, None).collect();
        let images = chosen.par_iter().map(|e| load_image(&e.path)).collect::<Result<Vec<_>>>()?;
        Ok((images, chosen.iter().map(|e| e.label.as_u8()).collect()))
    }

    pub fn load_selected<T: Real>(&self, split: Split, label: Label) -> Result<Vec<ScalarField<T>>> {
        let chosen: Vec<&ManifestEntry> = self.select(split, Some(label)).collect();
        chosen.par_iter().map(|e| load_image(&e.path)).collect()
    }
}

/// Image loader that names the offending file on decode errors.
pub fn load_image<T: Real>(path: &Path) -> Result<ScalarField<T>> {
    load_scalar_field(path).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::DegenerateImage { .. } => Error::Format(format!("{}: {e}", path.display())),
        other => other,
    })
}

/// Pointwise mean of the manifest images with the given split and label.
pub fn build_canonical<T: Real>(manifest: &Manifest, split: Split, label: Label) -> Result<ScalarField<T>> {
    let images = manifest.load_selected::<T>(split, label)?;
    if images.is_empty() {
        return Err(Error::InvalidArgument(format!("manifest has no {label} images in the {split} split")));
    }
    average_image(&images)
}

/// Seeded random crops of a fixed size from a set of larger images.
#[derive(Debug, Clone)]
pub struct PatchSampler<T> {
    sources: Vec<ScalarField<T>>,
    patch_w: usize,
    patch_h: usize,
    stride: usize,
    seed: u64,
}

impl<T: Real> PatchSampler<T> {
    /// Anchors are restricted to multiples of `stride` along both axes.
    pub fn new(sources: Vec<ScalarField<T>>, patch_w: usize, patch_h: usize, stride: usize, seed: u64) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidArgument("patch sampler needs at least one source image".into()));
        }
        if patch_w < 2 || patch_h < 2 || stride == 0 {
            return Err(Error::InvalidArgument(format!("bad patch geometry {patch_w}x{patch_h} stride {stride}")));
        }
        for (i, s) in sources.iter().enumerate() {
            if s.width() < patch_w || s.height() < patch_h {
                return Err(Error::InvalidArgument(format!(
                    "source {i} is {}x{}, smaller than the {patch_w}x{patch_h} patch",
                    s.width(),
                    s.height()
                )));
            }
        }
        Ok(PatchSampler { sources, patch_w, patch_h, stride, seed })
    }

    pub fn sample(&self, count: usize) -> Result<Vec<ScalarField<T>>> {
        if count == 0 {
            return Err(Error::InvalidArgument("patch count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count)
            .map(|_| {
                let src = &self.sources[rng.gen_range(0..self.sources.len())];
                let nx = (src.width() - self.patch_w) / self.stride;
                let ny = (src.height() - self.patch_h) / self.stride;
                let x = rng.gen_range(0..=nx) * self.stride;
                let y = rng.gen_range(0..=ny) * self.stride;
                src.crop(x, y, self.patch_w, self.patch_h)
            })
            .collect()
    }
}
