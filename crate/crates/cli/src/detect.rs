//! Multi-scale sliding-window scanning with greedy overlap suppression.

use std::fmt::Write as _;

use hamflow::landscape::load_scalar_field;
use hamflow::streamline::svg_raster;
use hamflow::ScalarField;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{stamped_csv, stamped_svg, with_suffix, write_text, LoadedModel};
use crate::config::{RunConfig, Stamp};
use crate::{CliError, DetectArgs};

/// A window in source-image pixels with its classifier margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub margin: f64,
}

impl Detection {
    pub fn iou(&self, o: &Detection) -> f64 {
        let ix = (self.x + self.w).min(o.x + o.w).saturating_sub(self.x.max(o.x));
        let iy = (self.y + self.h).min(o.y + o.h).saturating_sub(self.y.max(o.y));
        let inter = (ix * iy) as f64;
        let union = (self.w * self.h + o.w * o.h) as f64 - inter;
        inter / union
    }
}

/// Window geometries `(x, y, w, h)` at scales `factor^k` of the base window, in scan order.
pub fn windows(image: (usize, usize), base: (usize, usize), factor: f64, stride: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    let mut scale = 1.0f64;
    loop {
        let w = (base.0 as f64 * scale).round() as usize;
        let h = (base.1 as f64 * scale).round() as usize;
        if w > image.0 || h > image.1 {
            break;
        }
        let step = ((stride as f64 * scale).round() as usize).max(1);
        for y in (0..=image.1 - h).step_by(step) {
            for x in (0..=image.0 - w).step_by(step) {
                out.push((x, y, w, h));
            }
        }
        scale *= factor;
    }
    out
}

/// Every window with margin >= 0, in scan order.
pub fn scan(model: &LoadedModel, img: &ScalarField<f64>, cfg: &RunConfig) -> Result<Vec<Detection>, CliError> {
    let base = model.window();
    if img.width() < base.0 || img.height() < base.1 {
        return Err(CliError::Data(format!(
            "image {}x{} is smaller than the {}x{} detector window",
            img.width(),
            img.height(),
            base.0,
            base.1
        )));
    }
    let found = windows(img.dims(), base, cfg.scale_factor, cfg.stride)
        .into_par_iter()
        .map(|(x, y, w, h)| {
            let patch = cfg.preprocess(&img.resample_window(x, y, w, h, base.0, base.1)?)?;
            let (label, margin) = model.classify(&patch)?;
            Ok((label == 1).then_some(Detection { x, y, w, h, margin }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(found.into_iter().flatten().collect())
}

/// Greedy suppression: highest margin first, dropping anything overlapping a kept box by more than `iou`.
pub fn suppress(mut candidates: Vec<Detection>, iou: f64) -> Vec<Detection> {
    candidates.sort_by(|a, b| b.margin.total_cmp(&a.margin));
    let mut kept: Vec<Detection> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| k.iou(&c) <= iou) {
            kept.push(c);
        }
    }
    kept
}

pub fn detect(model: &LoadedModel, img: &ScalarField<f64>, cfg: &RunConfig) -> Result<Vec<Detection>, CliError> {
    Ok(suppress(scan(model, img, cfg)?, cfg.nms_iou))
}

fn detection_svg(img: &ScalarField<f64>, dets: &[Detection]) -> String {
    let (w, h) = img.dims();
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" width=\"{w}\" height=\"{h}\">\n");
    s.push_str(&svg_raster(img));
    for (i, d) in dets.iter().enumerate() {
        let _ = writeln!(
            s,
            "<rect id=\"det-{i}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#3cb44b\" stroke-width=\"1\"/>",
            d.x, d.y, d.w, d.h
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn cmd_detect(cfg: &RunConfig, a: &DetectArgs) -> Result<Vec<Detection>, CliError> {
    let stamp = Stamp::new(cfg);
    let model = LoadedModel::load(&a.model)?;
    let img: ScalarField<f64> = load_scalar_field(&a.image)?;
    let dets = detect(&model, &img, cfg)?;
    let rows: Vec<Vec<String>> = dets
        .iter()
        .map(|d| vec![d.x.to_string(), d.y.to_string(), d.w.to_string(), d.h.to_string(), d.margin.to_string()])
        .collect();
    write_text(&with_suffix(&a.out_prefix, ".csv"), &stamped_csv(&stamp, &["x", "y", "w", "h", "margin"], &rows)?)?;
    write_text(&with_suffix(&a.out_prefix, ".svg"), &stamped_svg(&stamp, &detection_svg(&img, &dets)))?;
    println!("{} detections -> {}", dets.len(), with_suffix(&a.out_prefix, ".csv").display());
    Ok(dets)
}
