//! Lattice-constrained streamlines.
//!
//! [`step`] is the midpoint forward rule: advance half a (unit) step, estimate
//! the flow there by inverse-square-distance weighting of the four surrounding
//! lattice vectors, then move to whichever of the eight neighbours lies best
//! along that estimate. Orbits are grown forward and backward from a seed until
//! they leave the lattice, stall on a stationary pixel, or intersect themselves.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::landscape::{DirectionField, ScalarField};
use crate::{Error, Real, Result};

pub const DEFAULT_MIN_ORBIT_LEN: usize = 8;

/// Closed orbits shorter than this never carry index features.
pub const MIN_CLOSED_LEN: usize = 4;

/// Default cap on orbit length for a `width x height` lattice.
pub fn default_max_len(width: usize, height: usize) -> usize {
    4 * (width + height)
}

/// A lattice site. Serialized as `[col, row]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct LatticePoint {
    pub col: usize,
    pub row: usize,
}

impl LatticePoint {
    pub const fn new(col: usize, row: usize) -> Self {
        LatticePoint { col, row }
    }

    /// Chebyshev distance.
    pub fn chebyshev(self, other: LatticePoint) -> usize {
        self.col.abs_diff(other.col).max(self.row.abs_diff(other.row))
    }
}

impl From<[usize; 2]> for LatticePoint {
    fn from([col, row]: [usize; 2]) -> Self {
        LatticePoint { col, row }
    }
}

impl From<LatticePoint> for [usize; 2] {
    fn from(p: LatticePoint) -> Self {
        [p.col, p.row]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Next(LatticePoint),
    OutOfBounds,
    Stationary,
}

/// Neighbour offsets, clockwise from east in the y-down frame. Ties go to the lower index.
const NEIGHBOURS: [(isize, isize); 8] =
    [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// One forward step of the midpoint rule on the unit-normalized field.
pub fn step<T: Real>(df: &DirectionField<T>, p: LatticePoint) -> StepOutcome {
    let (w, h) = df.dims();
    debug_assert!(p.col < w && p.row < h);
    if df.is_stationary(p.col, p.row) {
        return StepOutcome::Stationary;
    }
    let half = T::of(0.5);
    let (ux, uy) = df.unit(p.col, p.row);
    let zx = T::from_usize_lossy(p.col) + half * ux;
    let zy = T::from_usize_lossy(p.row) + half * uy;

    let x0 = zx.floor().to_isize().unwrap_or(-1);
    let y0 = zy.floor().to_isize().unwrap_or(-1);
    let (mut vx, mut vy) = (T::zero(), T::zero());
    let mut any_moving = false;
    for (cx, cy) in [(x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)] {
        if cx < 0 || cy < 0 || cx as usize >= w || cy as usize >= h {
            continue;
        }
        let (cx, cy) = (cx as usize, cy as usize);
        let dx = T::from_usize_lossy(cx) - zx;
        let dy = T::from_usize_lossy(cy) - zy;
        let d2 = dx * dx + dy * dy;
        let (a, b) = df.unit(cx, cy);
        let moving = !df.is_stationary(cx, cy);
        if d2 == T::zero() {
            // midpoint sits on a lattice site: take its vector as is
            (vx, vy) = (a, b);
            any_moving = moving;
            break;
        }
        any_moving |= moving;
        let wgt = d2.recip();
        vx += wgt * a;
        vy += wgt * b;
    }
    if !any_moving || (vx == T::zero() && vy == T::zero()) {
        return StepOutcome::Stationary;
    }

    // argmax of cos(angle(n - z, v_z)); |v_z| is common to all candidates
    let mut best = 0usize;
    let mut best_score = T::neg_infinity();
    for (k, &(ox, oy)) in NEIGHBOURS.iter().enumerate() {
        let dx = T::from_usize_lossy(p.col) + T::of(ox as f64) - zx;
        let dy = T::from_usize_lossy(p.row) + T::of(oy as f64) - zy;
        let score = (dx * vx + dy * vy) / dx.hypot(dy);
        if score > best_score {
            best_score = score;
            best = k;
        }
    }
    let (ox, oy) = NEIGHBOURS[best];
    let nc = p.col as isize + ox;
    let nr = p.row as isize + oy;
    if nc < 0 || nr < 0 || nc as usize >= w || nr as usize >= h {
        StepOutcome::OutOfBounds
    } else {
        StepOutcome::Next(LatticePoint::new(nc as usize, nr as usize))
    }
}

/// A traced streamline: distinct, 8-connected lattice points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    points: Vec<LatticePoint>,
    closed: bool,
    seed_index: usize,
    seed_level: f64,
}

impl Orbit {
    /// Validates a user-supplied orbit. A closed orbit must also have its last
    /// point adjacent to its first.
    pub fn new(points: Vec<LatticePoint>, closed: bool, seed_index: usize, seed_level: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidOrbit("no points".into()));
        }
        if seed_index >= points.len() {
            return Err(Error::InvalidOrbit(format!("seed index {seed_index} out of range")));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert(*p) {
                return Err(Error::InvalidOrbit(format!("duplicate point ({}, {})", p.col, p.row)));
            }
        }
        for pair in points.windows(2) {
            if pair[0].chebyshev(pair[1]) != 1 {
                return Err(Error::InvalidOrbit("consecutive points are not 8-neighbours".into()));
            }
        }
        if closed && points.len() > 1 && points[points.len() - 1].chebyshev(points[0]) != 1 {
            return Err(Error::InvalidOrbit("closing step is not an 8-neighbour move".into()));
        }
        Ok(Orbit { points, closed, seed_index, seed_level })
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn seed_index(&self) -> usize {
        self.seed_index
    }

    pub fn seed(&self) -> LatticePoint {
        self.points[self.seed_index]
    }

    pub fn seed_level(&self) -> f64 {
        self.seed_level
    }

    /// Twice the signed polygon area, `sum x_k y_(k+1) - x_(k+1) y_k` over the cycle.
    pub fn shoelace(&self) -> i64 {
        let n = self.points.len();
        (0..n)
            .map(|k| {
                let a = self.points[k];
                let b = self.points[(k + 1) % n];
                a.col as i64 * b.row as i64 - b.col as i64 * a.row as i64
            })
            .sum()
    }

    /// Orbit with its point order reversed.
    pub fn reversed(&self) -> Orbit {
        let mut points = self.points.clone();
        points.reverse();
        let seed_index = points.len() - 1 - self.seed_index;
        Orbit::with_points(points, self.closed, seed_index, self.seed_level)
    }

    /// Whether this orbit is eligible for Poincaré/Conley features.
    pub fn is_index_eligible(&self) -> bool {
        self.closed && self.points.len() >= MIN_CLOSED_LEN && self.shoelace() != 0
    }
}

impl Orbit {
    fn with_points(points: Vec<LatticePoint>, closed: bool, seed_index: usize, seed_level: f64) -> Self {
        Orbit { points, closed, seed_index, seed_level }
    }
}

fn grow<T: Real>(
    df: &DirectionField<T>,
    start: LatticePoint,
    seed: LatticePoint,
    visited: &mut HashSet<LatticePoint>,
    budget: usize,
    out: &mut Vec<LatticePoint>,
) -> bool {
    let mut cur = start;
    while out.len() < budget {
        match step(df, cur) {
            StepOutcome::Next(q) if q == seed => return true,
            StepOutcome::Next(q) => {
                if !visited.insert(q) {
                    return false;
                }
                out.push(q);
                cur = q;
            }
            StepOutcome::OutOfBounds | StepOutcome::Stationary => return false,
        }
    }
    false
}

fn trace_with<T: Real>(
    forward: &DirectionField<T>,
    backward: &DirectionField<T>,
    seed: LatticePoint,
    seed_level: f64,
    max_len: usize,
) -> Orbit {
    let mut visited = HashSet::new();
    visited.insert(seed);
    let mut fwd = Vec::new();
    let closed = grow(forward, seed, seed, &mut visited, max_len - 1, &mut fwd);
    if closed {
        let mut points = Vec::with_capacity(fwd.len() + 1);
        points.push(seed);
        points.extend(fwd);
        return Orbit::with_points(points, true, 0, seed_level);
    }
    let mut back = Vec::new();
    let budget = max_len - 1 - fwd.len();
    grow(backward, seed, seed, &mut visited, budget, &mut back);
    let seed_index = back.len();
    let mut points: Vec<_> = back.into_iter().rev().collect();
    points.push(seed);
    points.extend(fwd);
    Orbit::with_points(points, false, seed_index, seed_level)
}

fn check_seed<T: Real>(df: &DirectionField<T>, seed: LatticePoint, max_len: usize) -> Result<()> {
    if seed.col >= df.width() || seed.row >= df.height() {
        return Err(Error::InvalidArgument(format!("seed ({}, {}) out of bounds", seed.col, seed.row)));
    }
    if max_len < 2 {
        return Err(Error::InvalidArgument("max_len must be >= 2".into()));
    }
    if df.is_stationary(seed.col, seed.row) {
        return Err(Error::Stationary { col: seed.col, row: seed.row });
    }
    Ok(())
}

/// Traces the complete orbit through `seed`: forward until a stopping rule
/// fires, then (unless the forward pass closed on the seed) backward.
///
/// `seed_level` is recorded as is; pass the landscape value at the seed.
pub fn trace_orbit<T: Real>(
    df: &DirectionField<T>,
    seed: LatticePoint,
    seed_level: f64,
    max_len: usize,
) -> Result<Orbit> {
    check_seed(df, seed, max_len)?;
    Ok(trace_with(df, &df.reversed(), seed, seed_level, max_len))
}

/// Seeds every uncovered non-stationary pixel in row-major order. Orbits with
/// fewer than `min_len` points are dropped but still mark their pixels covered.
pub fn extract_all_orbits<T: Real>(
    df: &DirectionField<T>,
    levels: &ScalarField<T>,
    min_len: usize,
    max_len: usize,
) -> Result<Vec<Orbit>> {
    if min_len < 1 {
        return Err(Error::InvalidArgument("min_len must be >= 1".into()));
    }
    if max_len < 2 {
        return Err(Error::InvalidArgument("max_len must be >= 2".into()));
    }
    if levels.dims() != df.dims() {
        return Err(Error::DimensionMismatch { expected: df.dims(), found: levels.dims(), index: None });
    }
    let (w, h) = df.dims();
    let backward = df.reversed();
    let mut covered = vec![false; w * h];
    let mut orbits = Vec::new();
    for row in 0..h {
        for col in 0..w {
            if covered[row * w + col] || df.is_stationary(col, row) {
                continue;
            }
            let seed = LatticePoint::new(col, row);
            let orbit = trace_with(df, &backward, seed, levels.get(col, row).as_f64(), max_len);
            for p in orbit.points() {
                covered[p.row * w + p.col] = true;
            }
            if orbit.len() >= min_len {
                orbits.push(orbit);
            }
        }
    }
    Ok(orbits)
}

/// Returns the closed orbit with positive shoelace sum, reversing it if needed.
pub fn orient_positive(orbit: &Orbit) -> Result<Orbit> {
    if !orbit.closed {
        return Err(Error::OpenOrbit);
    }
    if orbit.len() < MIN_CLOSED_LEN {
        return Err(Error::OrbitTooShort { len: orbit.len(), min: MIN_CLOSED_LEN });
    }
    match orbit.shoelace() {
        0 => Err(Error::DegeneratePolygon),
        s if s > 0 => Ok(orbit.clone()),
        _ => Ok(orbit.reversed()),
    }
}

/// Closed 8-connected digital circle, positively oriented in the y-down frame.
pub fn lattice_circle(center_col: usize, center_row: usize, radius: f64) -> Result<Orbit> {
    let samples = ((radius * 64.0).ceil() as usize).max(64);
    let mut points: Vec<LatticePoint> = Vec::new();
    for k in 0..samples {
        let t = std::f64::consts::TAU * k as f64 / samples as f64;
        let c = center_col as f64 + radius * t.cos();
        let r = center_row as f64 + radius * t.sin();
        if c.round() < 0.0 || r.round() < 0.0 {
            return Err(Error::InvalidArgument("circle leaves the lattice".into()));
        }
        let p = LatticePoint::new(c.round() as usize, r.round() as usize);
        match points.iter().position(|&q| q == p) {
            // around the circle and back near the start: drop any leading spur
            Some(i) if 2 * k > samples && 2 * i < points.len() => {
                points.drain(..i);
                break;
            }
            // rounding wobbled back onto a recent pixel: cut the spur
            Some(i) => points.truncate(i + 1),
            None => points.push(p),
        }
    }
    Orbit::new(points, true, 0, 0.0)
}

#[derive(Serialize, Deserialize)]
struct OrbitDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tool_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    orbits: Vec<Orbit>,
}

/// JSON document `{orbits: [{points: [[col,row],...], closed, seed_index, seed_level}]}`.
pub fn orbits_to_json(orbits: &[Orbit], tool_version: Option<&str>, config_hash: Option<&str>) -> Result<String> {
    let doc = OrbitDocument {
        tool_version: tool_version.map(str::to_owned),
        config_hash: config_hash.map(str::to_owned),
        orbits: orbits.to_vec(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses an orbit document, accepting either the wrapped form or a bare array.
pub fn orbits_from_json(text: &str) -> Result<Vec<Orbit>> {
    let raw: Vec<Orbit> = match serde_json::from_str::<OrbitDocument>(text) {
        Ok(doc) => doc.orbits,
        Err(_) => serde_json::from_str(text)?,
    };
    raw.into_iter()
        .map(|o| Orbit::new(o.points, o.closed, o.seed_index, o.seed_level))
        .collect()
}

pub const CLOSED_STROKE: &str = "#e6194b";
pub const OPEN_STROKE: &str = "#3cb4ff";

/// Grayscale raster of `field` as one SVG `<rect>` per pixel.
pub fn svg_raster<T: Real>(field: &ScalarField<T>) -> String {
    let (lo, hi) = field.min_max();
    let span = (hi - lo).as_f64();
    let mut s = String::new();
    s.push_str("<g shape-rendering=\"crispEdges\">\n");
    for row in 0..field.height() {
        for col in 0..field.width() {
            let v = if span > 0.0 { (field.get(col, row) - lo).as_f64() / span * 255.0 } else { 0.0 };
            let g = v.round().clamp(0.0, 255.0) as u8;
            let _ = writeln!(
                s,
                "<rect x=\"{col}\" y=\"{row}\" width=\"1\" height=\"1\" fill=\"#{g:02x}{g:02x}{g:02x}\"/>"
            );
        }
    }
    s.push_str("</g>\n");
    s
}

/// SVG of the image with orbits drawn through pixel centres.
pub fn svg_overlay<T: Real>(field: &ScalarField<T>, orbits: &[Orbit]) -> String {
    let (w, h) = field.dims();
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" width=\"{}\" height=\"{}\">\n",
        w * 4,
        h * 4
    );
    s.push_str(&svg_raster(field));
    for (i, o) in orbits.iter().enumerate() {
        let tag = if o.closed { "polygon" } else { "polyline" };
        let stroke = if o.closed { CLOSED_STROKE } else { OPEN_STROKE };
        let pts: Vec<String> = o
            .points
            .iter()
            .map(|p| format!("{}.5,{}.5", p.col, p.row))
            .collect();
        let _ = writeln!(
            s,
            "<{tag} id=\"orbit-{i}\" points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"0.3\"/>",
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{derive_systems, normalize, VectorField};

    fn uniform(w: usize, h: usize, u: f64, v: f64) -> DirectionField<f64> {
        let vf = VectorField::from_fn(w, h, |_, _| (u, v)).unwrap();
        normalize(&vf, 1e-9).unwrap()
    }

    fn hamiltonian_df(f: &ScalarField<f64>) -> DirectionField<f64> {
        normalize(&derive_systems(f).1, 1e-9).unwrap()
    }

    #[test]
    fn step_uniform_east() {
        let df = uniform(10, 10, 1.0, 0.0);
        assert_eq!(step(&df, LatticePoint::new(5, 5)), StepOutcome::Next(LatticePoint::new(6, 5)));
    }

    #[test]
    fn step_uniform_diagonal() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let df = uniform(10, 10, s, s);
        assert_eq!(step(&df, LatticePoint::new(5, 5)), StepOutcome::Next(LatticePoint::new(6, 6)));
    }

    #[test]
    fn step_right_edge_leaves_lattice() {
        let df = uniform(10, 10, 1.0, 0.0);
        assert_eq!(step(&df, LatticePoint::new(9, 4)), StepOutcome::OutOfBounds);
    }

    #[test]
    fn step_on_constant_image_is_stationary() {
        let f = ScalarField::constant(6, 6, 7.0).unwrap();
        let df = hamiltonian_df(&f);
        assert_eq!(step(&df, LatticePoint::new(2, 3)), StepOutcome::Stationary);
    }

    #[test]
    fn step_with_all_stationary_neighbours_is_stationary() {
        // Only (2,2) moves; its midpoint lands in a cell whose corners it is not part of.
        let vf = VectorField::from_fn(6, 6, |c, r| if (c, r) == (2, 2) { (0.0, -1.0) } else { (0.0, 0.0) })
            .unwrap();
        let df = normalize(&vf, 1e-9).unwrap();
        // midpoint (2, 1.5): corners (2,1),(3,1),(2,2),(3,2) include (2,2) itself, so it moves
        assert_eq!(step(&df, LatticePoint::new(2, 2)), StepOutcome::Next(LatticePoint::new(2, 1)));
        let vf = VectorField::from_fn(6, 6, |c, r| if (c, r) == (2, 2) { (1.0, 1.0) } else { (0.0, 0.0) })
            .unwrap();
        let df = normalize(&vf, 1e-9).unwrap();
        // midpoint (2.35, 2.35): corners include (2,2) again; direction survives
        assert_eq!(step(&df, LatticePoint::new(2, 2)), StepOutcome::Next(LatticePoint::new(3, 3)));
    }

    #[test]
    fn ramp_orbit_is_a_full_column() {
        let ramp = ScalarField::from_fn(20, 20, |x, _| x as f64).unwrap();
        let df = hamiltonian_df(&ramp);
        let o = trace_orbit(&df, LatticePoint::new(10, 10), 10.0, 80).unwrap();
        assert!(!o.is_closed());
        assert_eq!(o.len(), 20);
        assert_eq!(o.seed_index(), 10);
        for (r, p) in o.points().iter().enumerate() {
            assert_eq!(*p, LatticePoint::new(10, r));
        }
    }

    #[test]
    fn stationary_seed_is_rejected() {
        let f = ScalarField::constant(6, 6, 1.0).unwrap();
        let df = hamiltonian_df(&f);
        assert!(matches!(
            trace_orbit(&df, LatticePoint::new(1, 1), 1.0, 10),
            Err(Error::Stationary { col: 1, row: 1 })
        ));
    }

    #[test]
    fn max_len_caps_orbit() {
        let ramp = ScalarField::from_fn(20, 20, |x, _| x as f64).unwrap();
        let df = hamiltonian_df(&ramp);
        let o = trace_orbit(&df, LatticePoint::new(3, 10), 3.0, 5).unwrap();
        assert_eq!(o.len(), 5);
    }

    #[test]
    fn bowl_orbit_closes_near_level_set() {
        let n = 41;
        let bowl = ScalarField::from_fn(n, n, |x, y| {
            let (dx, dy) = (x as f64 - 20.0, y as f64 - 20.0);
            dx * dx + dy * dy
        })
        .unwrap();
        let df = hamiltonian_df(&bowl);
        let seed = LatticePoint::new(28, 20);
        let level = bowl.get(28, 20);
        let o = trace_orbit(&df, seed, level, default_max_len(n, n)).unwrap();
        assert!(o.is_closed(), "orbit of length {} did not close", o.len());
        for p in o.points() {
            assert!((bowl.get(p.col, p.row) - level).abs() <= 0.15 * level);
        }
        for w in o.points().windows(2) {
            assert_eq!(w[0].chebyshev(w[1]), 1);
        }
        // closing step: successor of the last point is the seed
        assert_eq!(step(&df, *o.points().last().unwrap()), StepOutcome::Next(o.points()[0]));
    }

    #[test]
    fn extract_all_on_constant_and_ramp() {
        let c = ScalarField::constant(8, 8, 3.0).unwrap();
        assert!(extract_all_orbits(&hamiltonian_df(&c), &c, 1, 32).unwrap().is_empty());

        let ramp = ScalarField::from_fn(20, 20, |x, _| x as f64).unwrap();
        let orbits = extract_all_orbits(&hamiltonian_df(&ramp), &ramp, 2, 160).unwrap();
        assert_eq!(orbits.len(), 20);
        for (col, o) in orbits.iter().enumerate() {
            let expected: Vec<_> = (0..20).map(|r| LatticePoint::new(col, r)).collect();
            assert_eq!(o.points(), &expected[..]);
            assert_eq!(o.seed(), LatticePoint::new(col, 0));
        }
    }

    fn closed(points: &[(usize, usize)]) -> Orbit {
        Orbit::new(points.iter().map(|&(c, r)| LatticePoint::new(c, r)).collect(), true, 0, 0.0).unwrap()
    }

    #[test]
    fn orient_positive_flips_and_is_idempotent() {
        let diamond = closed(&[(1, 0), (0, 1), (1, 2), (2, 1)]);
        assert!(diamond.shoelace() < 0);
        let o = orient_positive(&diamond).unwrap();
        assert!(o.shoelace() > 0);
        assert_eq!(orient_positive(&o).unwrap(), o);
    }

    #[test]
    fn orient_positive_errors() {
        let line = Orbit::new(
            (0..4).map(|c| LatticePoint::new(c, 0)).collect(),
            true,
            0,
            0.0,
        );
        // not a valid closed orbit: last is not adjacent to first
        assert!(line.is_err());
        let flat = closed(&[(0, 0), (1, 0), (2, 0), (1, 1)]);
        assert!(orient_positive(&flat).is_ok());
        let back_and_forth = Orbit::with_points(
            vec![LatticePoint::new(0, 0), LatticePoint::new(1, 0), LatticePoint::new(2, 0), LatticePoint::new(1, 0)],
            true,
            0,
            0.0,
        );
        assert!(matches!(orient_positive(&back_and_forth), Err(Error::DegeneratePolygon)));
        let open = Orbit::new(vec![LatticePoint::new(0, 0), LatticePoint::new(1, 0)], false, 0, 0.0).unwrap();
        assert!(matches!(orient_positive(&open), Err(Error::OpenOrbit)));
        let tiny = closed(&[(0, 0), (1, 0), (1, 1)]);
        assert!(matches!(orient_positive(&tiny), Err(Error::OrbitTooShort { .. })));
    }

    #[test]
    fn lattice_circle_is_valid_and_positive() {
        let o = lattice_circle(20, 20, 8.0).unwrap();
        assert!(o.is_closed());
        assert!(o.shoelace() > 0);
        assert!(o.len() > 40);
    }

    #[test]
    fn lattice_circle_any_radius() {
        for r10 in 15..=195 {
            let r = r10 as f64 / 10.0;
            let o = lattice_circle(20, 20, r).unwrap_or_else(|e| panic!("radius {r}: {e}"));
            assert!(o.shoelace() > 0, "radius {r}");
            for p in o.points() {
                let d = ((p.col as f64 - 20.0).powi(2) + (p.row as f64 - 20.0).powi(2)).sqrt();
                assert!((d - r).abs() <= 0.75, "radius {r}: point at {d}");
            }
        }
    }

    #[test]
    fn orbit_json_round_trip() {
        let o = lattice_circle(10, 10, 4.0).unwrap();
        let text = orbits_to_json(std::slice::from_ref(&o), Some("x"), None).unwrap();
        assert!(text.contains("\"points\""));
        assert_eq!(orbits_from_json(&text).unwrap(), vec![o.clone()]);
        let bare = serde_json::to_string(&vec![o.clone()]).unwrap();
        assert_eq!(orbits_from_json(&bare).unwrap(), vec![o]);
        assert!(orbits_from_json(r#"[{"points":[[0,0],[5,5]],"closed":false,"seed_index":0,"seed_level":0}]"#).is_err());
    }

    #[test]
    fn svg_overlay_marks_open_and_closed() {
        let f = ScalarField::from_fn(12, 12, |x, y| (x * y) as f64).unwrap();
        let c = lattice_circle(6, 6, 3.0).unwrap();
        let open = Orbit::new(vec![LatticePoint::new(0, 0), LatticePoint::new(1, 1)], false, 0, 0.0).unwrap();
        let svg = svg_overlay(&f, &[c, open]);
        assert!(svg.contains(CLOSED_STROKE) && svg.contains(OPEN_STROKE));
        assert!(svg.contains("<polygon") && svg.contains("<polyline"));
    }
}
