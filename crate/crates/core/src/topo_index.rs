//! Numerical Poincaré index and pseudo Conley indexes along closed orbits.

use serde::{Deserialize, Serialize};

use crate::landscape::{DirectionField, VectorField};
use crate::streamline::{Orbit, MIN_CLOSED_LEN};
use crate::{Error, Real, Result};

/// Homotopy types a disk-like isolating block in the plane can have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConleyType {
    /// `D^2`: one exiting and one entering arc.
    Disk,
    /// `S^0`: nothing exits (attractor).
    TwoPointSet,
    /// `n`-fold wedge of circles: `n + 1` exiting arcs.
    WedgeOfCircles(usize),
    /// `S^2`: everything exits (repellor).
    Sphere,
}

impl std::fmt::Display for ConleyType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConleyType::Disk => f.write_str("D2"),
            ConleyType::TwoPointSet => f.write_str("S0"),
            ConleyType::WedgeOfCircles(1) => f.write_str("S1"),
            ConleyType::WedgeOfCircles(n) => write!(f, "wedge{n}(S1)"),
            ConleyType::Sphere => f.write_str("S2"),
        }
    }
}

/// Exit/entry classification of every point on a closed orbit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFlow {
    exit_flags: Vec<bool>,
    entering_count: usize,
    exiting_count: usize,
}

impl BoundaryFlow {
    pub fn from_flags(exit_flags: Vec<bool>) -> Self {
        let exiting_count = exit_flags.iter().filter(|&&f| f).count();
        BoundaryFlow {
            entering_count: exit_flags.len() - exiting_count,
            exiting_count,
            exit_flags,
        }
    }

    pub fn exit_flags(&self) -> &[bool] {
        &self.exit_flags
    }

    pub fn entering_count(&self) -> usize {
        self.entering_count
    }

    pub fn exiting_count(&self) -> usize {
        self.exiting_count
    }

    pub fn len(&self) -> usize {
        self.exit_flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit_flags.is_empty()
    }

    /// Number of maximal cyclic runs of exiting points.
    pub fn exit_runs(&self) -> usize {
        let n = self.exit_flags.len();
        if self.exiting_count == 0 {
            return 0;
        }
        if self.entering_count == 0 {
            return 1;
        }
        (0..n)
            .filter(|&k| self.exit_flags[k] && !self.exit_flags[(k + n - 1) % n])
            .count()
    }
}

/// `a2 - a1` wrapped into `(-pi, pi]`.
#[inline]
pub fn angle_diff<T: Real>(a2: T, a1: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut d = a2 - a1;
    if d > T::PI() {
        d -= two_pi;
    } else if d <= -T::PI() {
        d += two_pi;
    }
    d
}

fn check_closed(orbit: &Orbit) -> Result<()> {
    if !orbit.is_closed() {
        return Err(Error::OpenOrbit);
    }
    if orbit.len() < MIN_CLOSED_LEN {
        return Err(Error::OrbitTooShort { len: orbit.len(), min: MIN_CLOSED_LEN });
    }
    Ok(())
}

fn check_dims(expected: (usize, usize), orbit: &Orbit) -> Result<()> {
    if orbit.points().iter().any(|p| p.col >= expected.0 || p.row >= expected.1) {
        return Err(Error::InvalidOrbit(format!(
            "orbit leaves the {}x{} lattice",
            expected.0, expected.1
        )));
    }
    Ok(())
}

/// Winding number (in turns) of `df` along the closed orbit, including the
/// closing step back to the first point. Every orbit point must be non-stationary.
pub fn poincare_index<T: Real>(orbit: &Orbit, df: &DirectionField<T>) -> Result<T> {
    check_closed(orbit)?;
    check_dims(df.dims(), orbit)?;
    if let Some(p) = orbit.points().iter().find(|p| df.is_stationary(p.col, p.row)) {
        return Err(Error::Stationary { col: p.col, row: p.row });
    }
    Ok(winding(orbit, df))
}

/// Like [`poincare_index`] but stationary points are skipped, so they add no
/// angle step; an orbit that is stationary everywhere winds zero times.
pub fn poincare_index_lenient<T: Real>(orbit: &Orbit, df: &DirectionField<T>) -> Result<T> {
    check_closed(orbit)?;
    check_dims(df.dims(), orbit)?;
    Ok(winding(orbit, df))
}

fn winding<T: Real>(orbit: &Orbit, df: &DirectionField<T>) -> T {
    let angles: Vec<T> = orbit
        .points()
        .iter()
        .filter(|p| !df.is_stationary(p.col, p.row))
        .map(|p| df.angle(p.col, p.row))
        .collect();
    let n = angles.len();
    if n < 2 {
        return T::zero();
    }
    let steps: Vec<T> = (0..n).map(|k| angle_diff(angles[(k + 1) % n], angles[k])).collect();
    orientation_symmetric_sum(&steps) / (T::PI() + T::PI())
}

/// Sums positive and negative terms separately, each in order of magnitude.
/// Negating every term negates the result exactly, whatever the input order.
fn orientation_symmetric_sum<T: Real>(terms: &[T]) -> T {
    let partial = |keep: fn(&T) -> bool| {
        let mut mags: Vec<T> = terms.iter().filter(|t| keep(t)).map(|t| t.abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).expect("finite angle steps"));
        mags.into_iter().fold(T::zero(), |acc, m| acc + m)
    };
    let pos = partial(|t| *t > T::zero());
    let neg = partial(|t| *t < T::zero());
    pos - neg
}

/// Classifies each orbit point as exiting (`vf` points outward) or entering.
///
/// Normals are the central-difference tangent rotated by 90 degrees, with one
/// global sign chosen so the normals point away from the centroid on average.
/// A zero dot product counts as entering.
pub fn boundary_flow<T: Real>(orbit: &Orbit, vf: &VectorField<T>) -> Result<BoundaryFlow> {
    check_closed(orbit)?;
    check_dims(vf.dims(), orbit)?;
    let pts = orbit.points();
    let n = pts.len();
    let xy = |k: usize| (pts[k].col as f64, pts[k].row as f64);
    let (cx, cy) = (0..n).fold((0.0, 0.0), |(sx, sy), k| {
        let (x, y) = xy(k);
        (sx + x, sy + y)
    });
    let (cx, cy) = (cx / n as f64, cy / n as f64);

    let normals: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let (x1, y1) = xy((k + 1) % n);
            let (x0, y0) = xy((k + n - 1) % n);
            let (tx, ty) = ((x1 - x0) / 2.0, (y1 - y0) / 2.0);
            (ty, -tx)
        })
        .collect();
    let outward: f64 = (0..n)
        .map(|k| {
            let (x, y) = xy(k);
            normals[k].0 * (x - cx) + normals[k].1 * (y - cy)
        })
        .sum();
    let sign = if outward < 0.0 { -1.0 } else { 1.0 };

    // None marks a degenerate tangent, resolved from the predecessor below.
    let raw: Vec<Option<bool>> = (0..n)
        .map(|k| {
            let (nx, ny) = normals[k];
            if nx == 0.0 && ny == 0.0 {
                return None;
            }
            let p = pts[k];
            let (u, v) = vf.get(p.col, p.row);
            let dot = T::of(sign * nx) * u + T::of(sign * ny) * v;
            Some(dot > T::zero())
        })
        .collect();
    let flags = match raw.iter().position(Option::is_some) {
        None => vec![false; n],
        Some(start) => {
            let mut flags = vec![false; n];
            let mut last = raw[start].unwrap();
            for i in 0..n {
                let k = (start + i) % n;
                if let Some(f) = raw[k] {
                    last = f;
                }
                flags[k] = last;
            }
            flags
        }
    };
    Ok(BoundaryFlow::from_flags(flags))
}

/// Fraction of boundary points that exit: `card(exit set) / card(boundary)`.
pub fn continuous_conley<T: Real>(flow: &BoundaryFlow) -> T {
    if flow.is_empty() {
        return T::zero();
    }
    T::from_usize_lossy(flow.exiting_count) / T::from_usize_lossy(flow.len())
}

/// Homotopy type read off the number of connected exiting arcs.
pub fn discrete_conley(flow: &BoundaryFlow) -> ConleyType {
    match flow.exit_runs() {
        0 => ConleyType::TwoPointSet,
        1 if flow.entering_count == 0 => ConleyType::Sphere,
        1 => ConleyType::Disk,
        runs => ConleyType::WedgeOfCircles(runs - 1),
    }
}
