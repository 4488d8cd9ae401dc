//! Hamiltonian streamline feature templates.
//!
//! Orbits are traced once on the canonical image. Every orbit yields a
//! density-match and a direction-match template; every closed orbit that
//! bounds a non-degenerate polygon also yields a Poincaré-index and a
//! pseudo-Conley template. Templates are evaluated on other images by reusing
//! the canonical orbit geometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::landscape::{derive_systems, normalize, DirectionField, ScalarField, VectorField, DEFAULT_EPS_STATIONARY};
use crate::streamline::{default_max_len, extract_all_orbits, orient_positive, Orbit, DEFAULT_MIN_ORBIT_LEN};
use crate::topo_index::{boundary_flow, continuous_conley, poincare_index_lenient};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    DensityMatch,
    DirectionMatch,
    PoincareIndex,
    ConleyIndex,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::DensityMatch => "density",
            FeatureKind::DirectionMatch => "direction",
            FeatureKind::PoincareIndex => "poincare",
            FeatureKind::ConleyIndex => "conley",
        }
    }
}

/// Per-point angular distance used by direction match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    /// Circular distance `min(|d|, 2pi - |d|)`.
    #[default]
    Wrapped,
    /// Plain difference of angle values in `[0, 2pi)`.
    Raw,
}

impl std::str::FromStr for DirectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wrapped" => Ok(DirectionMode::Wrapped),
            "raw" => Ok(DirectionMode::Raw),
            other => Err(Error::InvalidArgument(format!("unknown direction mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub eps_stationary: f64,
    pub min_orbit_len: usize,
    /// `None` means `4 * (width + height)`.
    pub max_orbit_len: Option<usize>,
    pub direction_mode: DirectionMode,
}

impl Default for BankConfig {
    fn default() -> Self {
        BankConfig {
            eps_stationary: DEFAULT_EPS_STATIONARY,
            min_orbit_len: DEFAULT_MIN_ORBIT_LEN,
            max_orbit_len: None,
            direction_mode: DirectionMode::Wrapped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTemplate<T> {
    pub kind: FeatureKind,
    /// Position of the source orbit in the bank's orbit order.
    pub orbit_index: usize,
    pub orbit: Orbit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_density: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_direction: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_stationary: Option<Vec<bool>>,
}

impl<T: Real> FeatureTemplate<T> {
    pub fn id(&self) -> String {
        format!("{}_o{}", self.kind.as_str(), self.orbit_index)
    }
}

/// An image together with the derived negative gradient flow, cached for evaluation.
#[derive(Debug, Clone)]
pub struct PreparedImage<T> {
    pub image: ScalarField<T>,
    pub neg_grad: VectorField<T>,
    pub direction: DirectionField<T>,
}

impl<T: Real> PreparedImage<T> {
    pub fn new(image: ScalarField<T>, eps_stationary: T) -> Result<Self> {
        let (neg_grad, _) = derive_systems(&image);
        let direction = normalize(&neg_grad, eps_stationary)?;
        Ok(PreparedImage { image, neg_grad, direction })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBank<T> {
    pub canonical: ScalarField<T>,
    pub config: BankConfig,
    pub orbit_count: usize,
    pub closed_count: usize,
    pub templates: Vec<FeatureTemplate<T>>,
}

/// Traces every Hamiltonian orbit of `canonical` and turns them into templates.
pub fn build_feature_bank<T: Real>(canonical: &ScalarField<T>, config: BankConfig) -> Result<FeatureBank<T>> {
    let (w, h) = canonical.dims();
    let eps = T::of(config.eps_stationary);
    let (neg_grad, hamiltonian) = derive_systems(canonical);
    let ham_dir = normalize(&hamiltonian, eps)?;
    let grad_dir = normalize(&neg_grad, eps)?;
    let max_len = config.max_orbit_len.unwrap_or_else(|| default_max_len(w, h));
    let orbits = extract_all_orbits(&ham_dir, canonical, config.min_orbit_len, max_len)?;
    if orbits.is_empty() {
        return Err(Error::NoOrbits);
    }

    let mut templates = Vec::new();
    let mut closed_count = 0;
    for (idx, orbit) in orbits.iter().enumerate() {
        let oriented = if orbit.is_index_eligible() { orient_positive(orbit).ok() } else { None };
        let orbit = oriented.clone().unwrap_or_else(|| orbit.clone());
        let ref_density = orbit.points().iter().map(|p| canonical.get(p.col, p.row)).collect();
        let ref_direction = orbit.points().iter().map(|p| grad_dir.angle(p.col, p.row)).collect();
        let ref_stationary = orbit.points().iter().map(|p| grad_dir.is_stationary(p.col, p.row)).collect();
        let base = |kind| FeatureTemplate {
            kind,
            orbit_index: idx,
            orbit: orbit.clone(),
            ref_density: None,
            ref_direction: None,
            ref_stationary: None,
        };
        templates.push(FeatureTemplate { ref_density: Some(ref_density), ..base(FeatureKind::DensityMatch) });
        templates.push(FeatureTemplate {
            ref_direction: Some(ref_direction),
            ref_stationary: Some(ref_stationary),
            ..base(FeatureKind::DirectionMatch)
        });
        if oriented.is_some() {
            closed_count += 1;
            templates.push(base(FeatureKind::PoincareIndex));
            templates.push(base(FeatureKind::ConleyIndex));
        }
    }
    Ok(FeatureBank {
        canonical: canonical.clone(),
        config,
        orbit_count: orbits.len(),
        closed_count,
        templates,
    })
}

impl<T: Real> FeatureBank<T> {
    /// Distinct orbits in bank order.
    pub fn orbits(&self) -> Vec<&Orbit> {
        let mut out: Vec<&Orbit> = Vec::with_capacity(self.orbit_count);
        for t in &self.templates {
            if t.orbit_index == out.len() {
                out.push(&t.orbit);
            }
        }
        out
    }

    pub fn prepare(&self, img: &ScalarField<T>) -> Result<PreparedImage<T>> {
        self.prepare_indexed(img, None)
    }

    fn prepare_indexed(&self, img: &ScalarField<T>, index: Option<usize>) -> Result<PreparedImage<T>> {
        if img.dims() != self.canonical.dims() {
            return Err(Error::DimensionMismatch { expected: self.canonical.dims(), found: img.dims(), index });
        }
        PreparedImage::new(img.clone(), T::of(self.config.eps_stationary))
    }

    pub fn evaluate_template(&self, t: &FeatureTemplate<T>, img: &PreparedImage<T>) -> T {
        match t.kind {
            FeatureKind::DensityMatch => density_match(t, &img.image),
            FeatureKind::DirectionMatch => direction_match(t, &img.direction, self.config.direction_mode),
            FeatureKind::PoincareIndex => poincare_value(t, &img.direction),
            FeatureKind::ConleyIndex => conley_value(t, &img.neg_grad),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: Self = serde_json::from_str(text)?;
        bank.validate()?;
        Ok(bank)
    }

    /// Structural checks for a bank that did not come from [`build_feature_bank`].
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.canonical.dims();
        for t in &self.templates {
            let o = &t.orbit;
            Orbit::new(o.points().to_vec(), o.is_closed(), o.seed_index(), o.seed_level())?;
            if o.points().iter().any(|p| p.col >= w || p.row >= h) {
                return Err(Error::InvalidArgument(format!("template {} leaves the {w}x{h} canonical", t.id())));
            }
            let n = o.len();
            let ok = match t.kind {
                FeatureKind::DensityMatch => t.ref_density.as_ref().is_some_and(|r| r.len() == n),
                FeatureKind::DirectionMatch => {
                    t.ref_direction.as_ref().is_some_and(|r| r.len() == n)
                        && t.ref_stationary.as_ref().is_some_and(|r| r.len() == n)
                }
                FeatureKind::PoincareIndex | FeatureKind::ConleyIndex => o.is_index_eligible(),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!("malformed template {}", t.id())));
            }
        }
        Ok(())
    }
}

fn density_match<T: Real>(t: &FeatureTemplate<T>, img: &ScalarField<T>) -> T {
    let reference = t.ref_density.as_deref().expect("density template carries reference values");
    t.orbit
        .points()
        .iter()
        .zip(reference)
        .fold(T::zero(), |acc, (p, &r)| {
            let d = r - img.get(p.col, p.row);
            acc + d * d
        })
        .sqrt()
}

fn direction_match<T: Real>(t: &FeatureTemplate<T>, df: &DirectionField<T>, mode: DirectionMode) -> T {
    let reference = t.ref_direction.as_deref().expect("direction template carries reference angles");
    let ref_stationary = t.ref_stationary.as_deref().expect("direction template carries stationary flags");
    let two_pi = T::PI() + T::PI();
    let mut acc = T::zero();
    for ((p, &r), &r_still) in t.orbit.points().iter().zip(reference).zip(ref_stationary) {
        let still = df.is_stationary(p.col, p.row);
        let d = match (r_still, still) {
            (true, true) => T::zero(),
            (true, false) | (false, true) => T::PI(),
            (false, false) => {
                let delta = r - df.angle(p.col, p.row);
                match mode {
                    DirectionMode::Raw => delta,
                    DirectionMode::Wrapped => {
                        let a = delta.abs();
                        a.min(two_pi - a)
                    }
                }
            }
        };
        acc += d * d;
    }
    acc.sqrt()
}

fn poincare_value<T: Real>(t: &FeatureTemplate<T>, df: &DirectionField<T>) -> T {
    poincare_index_lenient(&t.orbit, df).expect("index templates hold closed in-bounds orbits")
}

fn conley_value<T: Real>(t: &FeatureTemplate<T>, vf: &VectorField<T>) -> T {
    let flow = boundary_flow(&t.orbit, vf).expect("index templates hold closed in-bounds orbits");
    continuous_conley(&flow)
}

fn expect_kind<T>(t: &FeatureTemplate<T>, kind: FeatureKind) -> Result<()> {
    if t.kind != kind {
        return Err(Error::InvalidArgument(format!("expected a {} template, got {}", kind.as_str(), t.kind.as_str())));
    }
    Ok(())
}

fn check_template_dims<T: Real>(t: &FeatureTemplate<T>, img: &ScalarField<T>) -> Result<()> {
    let (w, h) = img.dims();
    if t.orbit.points().iter().any(|p| p.col >= w || p.row >= h) {
        return Err(Error::InvalidArgument(format!("dimension mismatch: template orbit does not fit a {w}x{h} image")));
    }
    Ok(())
}

/// `||canonical|_o - img|_o||_2`.
pub fn eval_density<T: Real>(t: &FeatureTemplate<T>, img: &ScalarField<T>) -> Result<T> {
    expect_kind(t, FeatureKind::DensityMatch)?;
    check_template_dims(t, img)?;
    Ok(density_match(t, img))
}

/// L2 distance between canonical and `img` negative-gradient directions along the orbit.
pub fn eval_direction<T: Real>(
    t: &FeatureTemplate<T>,
    img: &ScalarField<T>,
    mode: DirectionMode,
    eps_stationary: T,
) -> Result<T> {
    expect_kind(t, FeatureKind::DirectionMatch)?;
    check_template_dims(t, img)?;
    let prepared = PreparedImage::new(img.clone(), eps_stationary)?;
    Ok(direction_match(t, &prepared.direction, mode))
}

/// Poincaré index of the template orbit in `img`'s negative gradient flow.
pub fn eval_poincare<T: Real>(t: &FeatureTemplate<T>, img: &ScalarField<T>, eps_stationary: T) -> Result<T> {
    expect_kind(t, FeatureKind::PoincareIndex)?;
    check_template_dims(t, img)?;
    let prepared = PreparedImage::new(img.clone(), eps_stationary)?;
    Ok(poincare_value(t, &prepared.direction))
}

/// Continuous pseudo Conley index of the template orbit in `img`'s negative gradient flow.
pub fn eval_conley<T: Real>(t: &FeatureTemplate<T>, img: &ScalarField<T>) -> Result<T> {
    expect_kind(t, FeatureKind::ConleyIndex)?;
    check_template_dims(t, img)?;
    let (neg_grad, _) = derive_systems(img);
    Ok(conley_value(t, &neg_grad))
}

/// Anything that maps an image of fixed size to a vector of feature values.
pub trait FeatureSource<T: Real>: Sync {
    /// Image size this source expects.
    fn dims(&self) -> (usize, usize);

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn feature_id(&self, j: usize) -> String;

    /// Short kind label used in training reports.
    fn feature_kind(&self, j: usize) -> String;

    /// Values of the listed columns, in the order given.
    fn evaluate_selected(&self, img: &ScalarField<T>, columns: &[usize]) -> Result<Vec<T>>;

    fn evaluate(&self, img: &ScalarField<T>) -> Result<Vec<T>> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.evaluate_selected(img, &all)
    }
}

impl<T: Real> FeatureSource<T> for FeatureBank<T> {
    fn dims(&self) -> (usize, usize) {
        self.canonical.dims()
    }

    fn len(&self) -> usize {
        self.templates.len()
    }

    fn feature_id(&self, j: usize) -> String {
        self.templates[j].id()
    }

    fn feature_kind(&self, j: usize) -> String {
        self.templates[j].kind.as_str().to_owned()
    }

    fn evaluate_selected(&self, img: &ScalarField<T>, columns: &[usize]) -> Result<Vec<T>> {
        let prepared = self.prepare(img)?;
        columns
            .iter()
            .map(|&j| {
                let t = self.templates.get(j).ok_or(Error::MissingFeature { index: j, len: self.templates.len() })?;
                Ok(self.evaluate_template(t, &prepared))
            })
            .collect()
    }
}

/// Column-wise concatenation of several sources over the same image size.
pub struct StackedSource<'a, T> {
    parts: Vec<&'a dyn FeatureSource<T>>,
    offsets: Vec<usize>,
}

impl<'a, T: Real> StackedSource<'a, T> {
    pub fn new(parts: Vec<&'a dyn FeatureSource<T>>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("no feature sources".into()))?;
        let dims = first.dims();
        let mut offsets = Vec::with_capacity(parts.len());
        let mut total = 0;
        for (i, p) in parts.iter().enumerate() {
            if p.dims() != dims {
                return Err(Error::DimensionMismatch { expected: dims, found: p.dims(), index: Some(i) });
            }
            offsets.push(total);
            total += p.len();
        }
        Ok(StackedSource { parts, offsets })
    }

    fn locate(&self, j: usize) -> (usize, usize) {
        let part = self.offsets.partition_point(|&o| o <= j) - 1;
        (part, j - self.offsets[part])
    }
}

impl<T: Real> FeatureSource<T> for StackedSource<'_, T> {
    fn dims(&self) -> (usize, usize) {
        self.parts[0].dims()
    }

    fn len(&self) -> usize {
        self.parts.iter().map(|p| p.len()).sum()
    }

    fn feature_id(&self, j: usize) -> String {
        let (p, k) = self.locate(j);
        self.parts[p].feature_id(k)
    }

    fn feature_kind(&self, j: usize) -> String {
        let (p, k) = self.locate(j);
        self.parts[p].feature_kind(k)
    }

    fn evaluate_selected(&self, img: &ScalarField<T>, columns: &[usize]) -> Result<Vec<T>> {
        let mut per_part: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.parts.len()];
        for (slot, &j) in columns.iter().enumerate() {
            if j >= self.len() {
                return Err(Error::MissingFeature { index: j, len: self.len() });
            }
            let (p, k) = self.locate(j);
            per_part[p].push((slot, k));
        }
        let mut out = vec![T::zero(); columns.len()];
        for (p, wanted) in per_part.iter().enumerate() {
            if wanted.is_empty() {
                continue;
            }
            let local: Vec<usize> = wanted.iter().map(|&(_, k)| k).collect();
            let values = self.parts[p].evaluate_selected(img, &local)?;
            for (&(slot, _), v) in wanted.iter().zip(values) {
                out[slot] = v;
            }
        }
        Ok(out)
    }
}

/// Rows are images, columns are features; `labels[i]` is 1 for positives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix<T> {
    ids: Vec<String>,
    kinds: Vec<String>,
    rows: usize,
    values: Vec<T>,
    labels: Vec<u8>,
}

impl<T: Real> FeatureMatrix<T> {
    /// Builds a matrix from row-major values.
    pub fn from_rows(ids: Vec<String>, kinds: Vec<String>, rows: Vec<Vec<T>>, labels: Vec<u8>) -> Result<Self> {
        let cols = ids.len();
        if kinds.len() != cols {
            return Err(Error::InvalidArgument("kinds and ids differ in length".into()));
        }
        if labels.len() != rows.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} rows",
                labels.len(),
                rows.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidArgument(format!("row {i} has {} values, expected {cols}", r.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite feature value in row {i}")));
            }
            values.extend_from_slice(r);
        }
        Ok(FeatureMatrix { ids, kinds, rows: rows.len(), values, labels })
    }

    /// Synthetic columns named `f0, f1, ...`, for tests and toy problems.
    pub fn from_plain_rows(rows: Vec<Vec<T>>, labels: Vec<u8>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let ids = (0..cols).map(|j| format!("f{j}")).collect();
        let kinds = vec!["plain".to_owned(); cols];
        Self::from_rows(ids, kinds, rows, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn kinds(&self) -> &[String] {
        &self.kinds
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Columns `self ++ other` for the same rows and labels.
    pub fn hstack(&self, other: &FeatureMatrix<T>) -> Result<Self> {
        if self.rows != other.rows || self.labels != other.labels {
            return Err(Error::InvalidArgument("cannot stack matrices with different rows".into()));
        }
        let rows = (0..self.rows).map(|i| [self.row(i), other.row(i)].concat()).collect();
        Self::from_rows(
            [self.ids.clone(), other.ids.clone()].concat(),
            [self.kinds.clone(), other.kinds.clone()].concat(),
            rows,
            self.labels.clone(),
        )
    }

    /// CSV with header `label,<id>...`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_owned()];
        header.extend(self.ids.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.rows {
            let mut rec = vec![self.labels[i].to_string()];
            rec.extend(self.row(i).iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Evaluates every column of `source` on every image. Parallel over images,
/// with rows placed by image index.
pub fn feature_matrix<T: Real, S: FeatureSource<T> + ?Sized>(
    source: &S,
    imgs: &[ScalarField<T>],
    labels: &[u8],
) -> Result<FeatureMatrix<T>> {
    if imgs.len() != labels.len() {
        return Err(Error::InvalidArgument(format!("{} images but {} labels", imgs.len(), labels.len())));
    }
    if let Some((i, img)) = imgs.iter().enumerate().find(|(_, img)| img.dims() != source.dims()) {
        return Err(Error::DimensionMismatch { expected: source.dims(), found: img.dims(), index: Some(i) });
    }
    let rows = imgs
        .par_iter()
        .map(|img| source.evaluate(img))
        .collect::<Result<Vec<_>>>()?;
    let ids = (0..source.len()).map(|j| source.feature_id(j)).collect();
    let kinds = (0..source.len()).map(|j| source.feature_kind(j)).collect();
    FeatureMatrix::from_rows(ids, kinds, rows, labels.to_vec())
}
