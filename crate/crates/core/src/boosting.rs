//! Discrete AdaBoost over single-feature threshold stumps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::{Error, Real, Result};

/// Weighted error is clamped into `[EPS_CLAMP, 1 - EPS_CLAMP]` before computing alpha.
pub const EPS_CLAMP: f64 = 1e-10;

/// Predicts 1 iff `polarity * value < polarity * threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump<T> {
    pub feature_idx: usize,
    pub threshold: T,
    pub polarity: i8,
}

impl<T: Real> Stump<T> {
    #[inline]
    pub fn predict(&self, value: T) -> u8 {
        let below = value < self.threshold;
        let above = value > self.threshold;
        u8::from(if self.polarity >= 0 { below } else { above })
    }
}

/// One boosting round as stored in a model file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedStump<T> {
    pub feature_idx: usize,
    pub threshold: T,
    pub polarity: i8,
    pub alpha: T,
}

impl<T: Real> WeightedStump<T> {
    pub fn stump(&self) -> Stump<T> {
        Stump { feature_idx: self.feature_idx, threshold: self.threshold, polarity: self.polarity }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongClassifier<T> {
    pub rounds: Vec<WeightedStump<T>>,
    pub decision_threshold: T,
    pub bank_reference: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn accuracy(&self) -> f64 {
        let total = self.tp + self.fp + self.tn + self.fn_;
        if total == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / total as f64
    }
}

impl<T: Real> StrongClassifier<T> {
    pub fn new(rounds: Vec<WeightedStump<T>>) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::InvalidArgument("a strong classifier needs at least one round".into()));
        }
        if rounds.iter().any(|r| !r.alpha.is_finite() || r.alpha <= T::zero()) {
            return Err(Error::Numeric("round weights must be finite and positive".into()));
        }
        let half = T::of(0.5);
        let decision_threshold = rounds.iter().fold(T::zero(), |s, r| s + r.alpha) * half;
        Ok(StrongClassifier { rounds, decision_threshold, bank_reference: None })
    }

    pub fn total_alpha(&self) -> T {
        self.rounds.iter().fold(T::zero(), |s, r| s + r.alpha)
    }

    /// `sum alpha_t h_t(x)`, reading feature values through `value`.
    pub fn score_with(&self, mut value: impl FnMut(usize) -> Result<T>) -> Result<T> {
        let mut s = T::zero();
        for r in &self.rounds {
            if r.stump().predict(value(r.feature_idx)?) == 1 {
                s += r.alpha;
            }
        }
        Ok(s)
    }

    pub fn score(&self, features: &[T]) -> Result<T> {
        self.score_with(|j| {
            features.get(j).copied().ok_or(Error::MissingFeature { index: j, len: features.len() })
        })
    }

    /// `(label, margin)` with `margin = score - decision_threshold`; label 1 iff margin >= 0.
    pub fn classify(&self, features: &[T]) -> Result<(u8, T)> {
        let margin = self.score(features)? - self.decision_threshold;
        Ok((u8::from(margin >= T::zero()), margin))
    }

    /// Sorted, de-duplicated feature columns used by any round.
    pub fn referenced_features(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.rounds.iter().map(|r| r.feature_idx).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    pub fn confusion(&self, matrix: &FeatureMatrix<T>) -> Result<Confusion> {
        let mut c = Confusion::default();
        for i in 0..matrix.n_rows() {
            let (label, _) = self.classify(matrix.row(i))?;
            match (matrix.labels()[i], label) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fn_ += 1,
                (_, 1) => c.fp += 1,
                _ => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(text)?;
        let mut checked = Self::new(sc.rounds)?;
        checked.decision_threshold = sc.decision_threshold;
        checked.bank_reference = sc.bank_reference;
        Ok(checked)
    }
}

fn check_weights<T: Real>(weights: &[T]) -> Result<()> {
    if weights.iter().any(|w| w.is_nan() || *w < T::zero()) {
        return Err(Error::InvalidArgument("weights must be non-negative".into()));
    }
    let total = weights.iter().fold(T::zero(), |s, &w| s + w);
    if (total.as_f64() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Optimal stump for one column given an ascending `order` of its values.
/// Returns `(threshold, polarity, weighted_error)`.
fn best_split<T: Real>(values: &[T], order: &[usize], labels: &[u8], weights: &[T]) -> (T, i8, T) {
    let (mut w1, mut w0) = (T::zero(), T::zero());
    for (&y, &w) in labels.iter().zip(weights) {
        if y == 1 {
            w1 += w;
        } else {
            w0 += w;
        }
    }
    let lo = values[order[0]];
    let hi = values[order[order.len() - 1]];

    // Candidates ascend; the first strictly better one wins, +1 before -1.
    let mut best = (lo - (T::one() + lo.abs()), 1i8, w1);
    // lower sentinel, polarity -1: everything predicted positive
    if w0 < best.2 {
        best = (best.0, -1, w0);
    }
    let mut consider = |thr: T, below1: T, below0: T| {
        let err_pos = below0 + (w1 - below1);
        let err_neg = below1 + (w0 - below0);
        if err_pos < best.2 {
            best = (thr, 1, err_pos);
        }
        if err_neg < best.2 {
            best = (thr, -1, err_neg);
        }
    };
    let (mut below1, mut below0) = (T::zero(), T::zero());
    let half = T::of(0.5);
    let mut k = 0;
    while k < order.len() {
        let v = values[order[k]];
        while k < order.len() && values[order[k]] == v {
            let i = order[k];
            if labels[i] == 1 {
                below1 += weights[i];
            } else {
                below0 += weights[i];
            }
            k += 1;
        }
        let thr = if k < order.len() { (v + values[order[k]]) * half } else { hi + (T::one() + hi.abs()) };
        consider(thr, below1, below0);
    }
    best
}

fn ascending_order<T: Real>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite feature values").then(a.cmp(&b)));
    order
}

/// Exhaustive single-column stump search. The returned stump has `feature_idx = 0`.
pub fn train_stump<T: Real>(values: &[T], labels: &[u8], weights: &[T]) -> Result<(Stump<T>, T)> {
    if values.len() < 2 || values.len() != labels.len() || values.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "stump training needs >= 2 aligned samples, got {} values, {} labels, {} weights",
            values.len(),
            labels.len(),
            weights.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }
    check_weights(weights)?;
    let order = ascending_order(values);
    let (threshold, polarity, err) = best_split(values, &order, labels, weights);
    Ok((Stump { feature_idx: 0, threshold, polarity }, err))
}

/// Per-round training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub feature_idx: usize,
    pub feature_id: String,
    pub feature_kind: String,
    pub weighted_error: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Running product of `2 sqrt(eps (1 - eps))`.
    pub error_bound: f64,
    pub training_error: f64,
    /// Sum of the weights after normalization at the start of the round.
    pub weight_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingReport {
    pub rounds: Vec<RoundReport>,
    /// Set when training ended before the requested round count.
    pub stopped_early: Option<String>,
}

impl TrainingReport {
    pub fn kind_sequence(&self) -> Vec<&str> {
        self.rounds.iter().map(|r| r.feature_kind.as_str()).collect()
    }
}

/// Viola-Jones discrete AdaBoost for `rounds` rounds.
///
/// Training stops early, with a note in the report, if the best stump reaches
/// weighted error 0.5 (no weak learner left).
pub fn adaboost<T: Real>(matrix: &FeatureMatrix<T>, rounds: usize) -> Result<(StrongClassifier<T>, TrainingReport)> {
    if rounds < 1 {
        return Err(Error::InvalidArgument("boosting needs at least one round".into()));
    }
    let labels = matrix.labels();
    let n = matrix.n_rows();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::OneClass);
    }
    if matrix.n_cols() == 0 {
        return Err(Error::InvalidArgument("feature matrix has no columns".into()));
    }

    let columns: Vec<Vec<T>> = (0..matrix.n_cols()).into_par_iter().map(|j| matrix.column(j)).collect();
    let orders: Vec<Vec<usize>> = columns.par_iter().map(|c| ascending_order(c)).collect();

    let (wp, wn) = (T::of(0.5 / positives as f64), T::of(0.5 / negatives as f64));
    let mut weights: Vec<T> = labels.iter().map(|&y| if y == 1 { wp } else { wn }).collect();
    let mut scores = vec![T::zero(); n];
    let mut selected = Vec::new();
    let mut report = TrainingReport::default();
    let mut bound = 1.0f64;
    let eps_clamp = T::of(EPS_CLAMP);

    for round in 0..rounds {
        let total = weights.iter().fold(T::zero(), |s, &w| s + w);
        weights.iter_mut().for_each(|w| *w /= total);
        let weight_sum = weights.iter().fold(T::zero(), |s, &w| s + w).as_f64();

        let candidates: Vec<(T, i8, T)> = columns
            .par_iter()
            .zip(orders.par_iter())
            .map(|(col, order)| best_split(col, order, labels, &weights))
            .collect();
        let mut best_j = 0;
        for (j, c) in candidates.iter().enumerate() {
            if c.2 < candidates[best_j].2 {
                best_j = j;
            }
        }
        let (threshold, polarity, raw_err) = candidates[best_j];
        if raw_err >= T::of(0.5) {
            if round == 0 {
                return Err(Error::Numeric("no stump beats chance on the training data".into()));
            }
            report.stopped_early = Some(format!("round {round}: best weighted error {raw_err} >= 0.5"));
            break;
        }
        let eps = raw_err.max(eps_clamp).min(T::one() - eps_clamp);
        let beta = eps / (T::one() - eps);
        let alpha = beta.recip().ln();
        let stump = Stump { feature_idx: best_j, threshold, polarity };

        for i in 0..n {
            let h = stump.predict(columns[best_j][i]);
            if h == 1 {
                scores[i] += alpha;
            }
            if h == labels[i] {
                weights[i] *= beta;
            }
        }
        selected.push(WeightedStump { feature_idx: best_j, threshold, polarity, alpha });

        let e = eps.as_f64();
        bound *= 2.0 * (e * (1.0 - e)).sqrt();
        let half_total = selected.iter().fold(T::zero(), |s, r| s + r.alpha) * T::of(0.5);
        let wrong = (0..n).filter(|&i| u8::from(scores[i] >= half_total) != labels[i]).count();
        report.rounds.push(RoundReport {
            round,
            feature_idx: best_j,
            feature_id: matrix.ids()[best_j].clone(),
            feature_kind: matrix.kinds()[best_j].clone(),
            weighted_error: raw_err.as_f64(),
            beta: beta.as_f64(),
            alpha: alpha.as_f64(),
            error_bound: bound,
            training_error: wrong as f64 / n as f64,
            weight_sum,
        });
    }
    Ok((StrongClassifier::new(selected)?, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint<T> {
    pub threshold: T,
    pub fpr: f64,
    pub tpr: f64,
}

/// Operating points of a classifier as its decision threshold sweeps downward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve<T> {
    pub points: Vec<RocPoint<T>>,
}

impl<T: Real> RocCurve<T> {
    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "fpr", "tpr"])?;
        for p in &self.points {
            w.write_record([format!("{}", p.threshold), format!("{}", p.fpr), format!("{}", p.tpr)])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Sweeps the decision threshold over every distinct ensemble score.
/// The first point (threshold above every score) is `(0, 0)`, the last `(1, 1)`.
pub fn roc<T: Real>(sc: &StrongClassifier<T>, matrix: &FeatureMatrix<T>) -> Result<RocCurve<T>> {
    let labels = matrix.labels();
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::OneClass);
    }
    let scores: Vec<T> = (0..matrix.n_rows()).map(|i| sc.score(matrix.row(i))).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b)));

    let top = scores[order[0]];
    let mut points = vec![RocPoint { threshold: top + T::one(), fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint { threshold: s, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
    }
    Ok(RocCurve { points })
}
