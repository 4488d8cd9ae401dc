//! Integral images and upright Haar-like rectangle features.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FeatureSource;
use crate::landscape::ScalarField;
use crate::{Error, Real, Result};

/// Summed-area table with a zero first row and column: `at(c, r)` is the sum
/// of all pixels with `col < c` and `row < r`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage<T> {
    width: usize,
    height: usize,
    table: Vec<T>,
}

impl<T: Real> IntegralImage<T> {
    pub fn new(field: &ScalarField<T>) -> Self {
        let (w, h) = field.dims();
        Self::from_values(w, h, field.values()).expect("field dimensions are consistent")
    }

    /// Table over a row-major `w x h` buffer of any size, including 1x1.
    pub fn from_values(w: usize, h: usize, values: &[T]) -> Result<Self> {
        if values.len() != w * h {
            return Err(Error::InvalidArgument(format!("{} values for a {w}x{h} image", values.len())));
        }
        let stride = w + 1;
        let mut table = vec![T::zero(); stride * (h + 1)];
        for r in 0..h {
            let mut row_sum = T::zero();
            for c in 0..w {
                row_sum += values[r * w + c];
                table[(r + 1) * stride + c + 1] = table[r * stride + c + 1] + row_sum;
            }
        }
        Ok(IntegralImage { width: w, height: h, table })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, col: usize, row: usize) -> T {
        self.table[row * (self.width + 1) + col]
    }

    /// Sum over the `w x h` rectangle whose top-left pixel is `(x, y)`.
    #[inline]
    pub fn rect_sum(&self, x: usize, y: usize, w: usize, h: usize) -> T {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        self.at(x + w, y + h) - self.at(x + w, y) - self.at(x, y + h) + self.at(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaarKind {
    TwoRectH,
    TwoRectV,
    ThreeRectH,
    ThreeRectV,
    FourRect,
}

impl HaarKind {
    pub const ALL: [HaarKind; 5] =
        [HaarKind::TwoRectH, HaarKind::TwoRectV, HaarKind::ThreeRectH, HaarKind::ThreeRectV, HaarKind::FourRect];

    /// Footprint size in base rectangles, `(across, down)`.
    pub fn cells(self) -> (usize, usize) {
        match self {
            HaarKind::TwoRectH => (2, 1),
            HaarKind::TwoRectV => (1, 2),
            HaarKind::ThreeRectH => (3, 1),
            HaarKind::ThreeRectV => (1, 3),
            HaarKind::FourRect => (2, 2),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HaarKind::TwoRectH => "two_rect_h",
            HaarKind::TwoRectV => "two_rect_v",
            HaarKind::ThreeRectH => "three_rect_h",
            HaarKind::ThreeRectV => "three_rect_v",
            HaarKind::FourRect => "four_rect",
        }
    }
}

impl fmt::Display for HaarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HaarKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HaarKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown haar kind {s:?}")))
    }
}

/// A feature with base rectangle `w x h` anchored at `(x, y)`; the footprint
/// spans `cells()` base rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HaarFeature {
    pub kind: HaarKind,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl HaarFeature {
    pub fn footprint(&self) -> (usize, usize) {
        let (a, d) = self.kind.cells();
        (a * self.w, d * self.h)
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        let (fw, fh) = self.footprint();
        self.w >= 1 && self.h >= 1 && self.x + fw <= width && self.y + fh <= height
    }

    pub fn id(&self) -> String {
        format!("haar_{}_{}_{}_{}_{}", self.kind, self.x, self.y, self.w, self.h)
    }
}

/// Light-minus-dark rectangle response. Two-rect kinds subtract the right
/// (bottom) half from the left (top); three-rect kinds subtract twice the
/// middle band from the outer pair; four-rect is the main diagonal minus the
/// anti-diagonal.
pub fn eval_haar<T: Real>(f: &HaarFeature, ii: &IntegralImage<T>) -> Result<T> {
    if !f.fits(ii.width(), ii.height()) {
        return Err(Error::InvalidArgument(format!(
            "haar feature {} does not fit a {}x{} image",
            f.id(),
            ii.width(),
            ii.height()
        )));
    }
    Ok(eval_unchecked(f, ii))
}

#[inline]
fn eval_unchecked<T: Real>(f: &HaarFeature, ii: &IntegralImage<T>) -> T {
    let HaarFeature { kind, x, y, w, h } = *f;
    let two = T::of(2.0);
    match kind {
        HaarKind::TwoRectH => ii.rect_sum(x, y, w, h) - ii.rect_sum(x + w, y, w, h),
        HaarKind::TwoRectV => ii.rect_sum(x, y, w, h) - ii.rect_sum(x, y + h, w, h),
        HaarKind::ThreeRectH => {
            ii.rect_sum(x, y, w, h) + ii.rect_sum(x + 2 * w, y, w, h) - two * ii.rect_sum(x + w, y, w, h)
        }
        HaarKind::ThreeRectV => {
            ii.rect_sum(x, y, w, h) + ii.rect_sum(x, y + 2 * h, w, h) - two * ii.rect_sum(x, y + h, w, h)
        }
        HaarKind::FourRect => {
            ii.rect_sum(x, y, w, h) + ii.rect_sum(x + w, y + h, w, h)
                - ii.rect_sum(x + w, y, w, h)
                - ii.rect_sum(x, y + h, w, h)
        }
    }
}

/// One `(kind, w, h)` block of placements in enumeration order.
struct Block {
    kind: HaarKind,
    w: usize,
    h: usize,
    nx: usize,
    count: usize,
}

fn blocks(width: usize, height: usize) -> Vec<Block> {
    let mut out = Vec::new();
    for kind in HaarKind::ALL {
        let (a, d) = kind.cells();
        for w in 1..=width / a {
            for h in 1..=height / d {
                let nx = width - a * w + 1;
                let ny = height - d * h + 1;
                out.push(Block { kind, w, h, nx, count: nx * ny });
            }
        }
    }
    out
}

/// Number of distinct upright features of all five kinds in a `width x height` window.
pub fn haar_feature_count(width: usize, height: usize) -> usize {
    blocks(width, height).iter().map(|b| b.count).sum()
}

/// Strided subsample of the full feature list, ordered by kind, base width,
/// base height, then row-major anchor. Index `floor(k N / target)` is kept for
/// `k < target`; when `target >= N` every feature is returned.
pub fn enumerate_haar(width: usize, height: usize, target: usize) -> Result<Vec<HaarFeature>> {
    if target == 0 {
        return Err(Error::InvalidArgument("haar target count must be at least 1".into()));
    }
    let blocks = blocks(width, height);
    let total: usize = blocks.iter().map(|b| b.count).sum();
    let wanted = target.min(total);
    let mut out = Vec::with_capacity(wanted);
    let mut block = 0;
    let mut block_start = 0;
    for k in 0..wanted {
        let g = if wanted == total { k } else { ((k as u128 * total as u128) / wanted as u128) as usize };
        while g >= block_start + blocks[block].count {
            block_start += blocks[block].count;
            block += 1;
        }
        let b = &blocks[block];
        let local = g - block_start;
        out.push(HaarFeature { kind: b.kind, x: local % b.nx, y: local / b.nx, w: b.w, h: b.h });
    }
    Ok(out)
}

/// Fixed list of Haar features over a `width x height` window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarBank {
    pub width: usize,
    pub height: usize,
    pub features: Vec<HaarFeature>,
}

impl HaarBank {
    pub fn new(width: usize, height: usize, target: usize) -> Result<Self> {
        Ok(HaarBank { width, height, features: enumerate_haar(width, height, target)? })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: HaarBank = serde_json::from_str(text)?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        match self.features.iter().find(|f| !f.fits(self.width, self.height)) {
            Some(f) => Err(Error::InvalidArgument(format!(
                "haar feature {} does not fit the {}x{} window",
                f.id(),
                self.width,
                self.height
            ))),
            None => Ok(()),
        }
    }
}

impl<T: Real> FeatureSource<T> for HaarBank {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn len(&self) -> usize {
        self.features.len()
    }

    fn feature_id(&self, j: usize) -> String {
        self.features[j].id()
    }

    fn feature_kind(&self, _j: usize) -> String {
        "haar".to_owned()
    }

    fn evaluate_selected(&self, img: &ScalarField<T>, columns: &[usize]) -> Result<Vec<T>> {
        if img.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch { expected: (self.width, self.height), found: img.dims(), index: None });
        }
        let ii = IntegralImage::new(img);
        columns
            .iter()
            .map(|&j| {
                let f = self.features.get(j).ok_or(Error::MissingFeature { index: j, len: self.features.len() })?;
                eval_haar(f, &ii)
            })
            .collect()
    }
}
