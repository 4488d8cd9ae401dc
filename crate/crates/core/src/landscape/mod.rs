//! Intensity landscapes and the two flows they induce.
//!
//! Coordinates: `x` is the column index (increasing rightward), `y` is the row
//! index (increasing downward). Every angle and orientation in the crate is
//! measured in this frame.

mod io;

pub use io::{load_scalar_field, read_field_binary, write_field_binary, write_pgm, write_png};

use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Default threshold on raw gradient magnitude below which a pixel is stationary.
pub const DEFAULT_EPS_STATIONARY: f64 = 1e-9;

/// Real-valued intensity landscape on a `width x height` lattice, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::DegenerateImage { width, height });
        }
        if values.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} values supplied for a {width}x{height} field",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite field value".into()));
        }
        Ok(ScalarField { width, height, values })
    }

    /// Samples `f(x, y)` at every lattice point, `x` = column, `y` = row.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                values.push(f(col, row));
            }
        }
        Self::new(width, height, values)
    }

    pub fn constant(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> T {
        self.values[row * self.width + col]
    }

    pub fn min_max(&self) -> (T, T) {
        self.values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    /// Applies `f` pointwise.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn offset(&self, c: T) -> Result<Self> {
        self.map(|v| v + c)
    }

    /// `255 - I`, the photographic negative of an 8-bit range landscape.
    pub fn inverted(&self) -> Result<Self> {
        let full = T::of(255.0);
        self.map(|v| full - v)
    }

    /// Copies the `w x h` sub-window with top-left corner `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::InvalidArgument(format!(
                "crop {w}x{h}+{x}+{y} exceeds {}x{} field",
                self.width, self.height
            )));
        }
        Self::from_fn(w, h, |c, r| self.get(x + c, y + r))
    }

    /// Bilinear resampling of the `src_w x src_h` window at `(x0, y0)` onto a
    /// `out_w x out_h` lattice. Pixel centers are aligned, not corners.
    pub fn resample_window(
        &self,
        x0: usize,
        y0: usize,
        src_w: usize,
        src_h: usize,
        out_w: usize,
        out_h: usize,
    ) -> Result<Self> {
        if x0 + src_w > self.width || y0 + src_h > self.height || src_w == 0 || src_h == 0 {
            return Err(Error::InvalidArgument(format!(
                "window {src_w}x{src_h}+{x0}+{y0} exceeds {}x{} field",
                self.width, self.height
            )));
        }
        if src_w == out_w && src_h == out_h {
            return self.crop(x0, y0, src_w, src_h);
        }
        let sx = src_w as f64 / out_w as f64;
        let sy = src_h as f64 / out_h as f64;
        Self::from_fn(out_w, out_h, |c, r| {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (src_w - 1) as f64);
            let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (src_h - 1) as f64);
            let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
            let (ix1, iy1) = ((ix + 1).min(src_w - 1), (iy + 1).min(src_h - 1));
            let (ax, ay) = (T::of(fx - ix as f64), T::of(fy - iy as f64));
            let p = |cx: usize, cy: usize| self.get(x0 + cx, y0 + cy);
            let top = p(ix, iy) * (T::one() - ax) + p(ix1, iy) * ax;
            let bottom = p(ix, iy1) * (T::one() - ax) + p(ix1, iy1) * ax;
            top * (T::one() - ay) + bottom * ay
        })
    }

    /// Pastes `patch` into a copy of `self` with its top-left corner at `(x, y)`.
    pub fn embed(&self, patch: &ScalarField<T>, x: usize, y: usize) -> Result<Self> {
        if x + patch.width > self.width || y + patch.height > self.height {
            return Err(Error::InvalidArgument("embedded patch exceeds field".into()));
        }
        let mut out = self.clone();
        for r in 0..patch.height {
            for c in 0..patch.width {
                out.values[(y + r) * self.width + x + c] = patch.get(c, r);
            }
        }
        Ok(out)
    }

    /// Converts the element type, e.g. `f64` to `f32`.
    pub fn cast<U: Real>(&self) -> ScalarField<U> {
        ScalarField {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Planar velocity field on the lattice. `u` runs along columns (x), `v` along rows (y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField<T> {
    width: usize,
    height: usize,
    u: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> VectorField<T> {
    pub fn new(width: usize, height: usize, u: Vec<T>, v: Vec<T>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::DegenerateImage { width, height });
        }
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::InvalidArgument("vector component length mismatch".into()));
        }
        if u.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite vector component".into()));
        }
        Ok(VectorField { width, height, u, v })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> (T, T),
    ) -> Result<Self> {
        let n = width * height;
        let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for row in 0..height {
            for col in 0..width {
                let (a, b) = f(col, row);
                u.push(a);
                v.push(b);
            }
        }
        Self::new(width, height, u, v)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> (T, T) {
        let i = row * self.width + col;
        (self.u[i], self.v[i])
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_magnitude(&self) -> T {
        self.u
            .iter()
            .zip(&self.v)
            .fold(T::zero(), |m, (&a, &b)| m.max(a.hypot(b)))
    }

    /// Applies `f` to every vector.
    pub fn map(&self, f: impl Fn(T, T) -> (T, T)) -> Result<Self> {
        let (u, v) = self.u.iter().zip(&self.v).map(|(&a, &b)| f(a, b)).unzip();
        Self::new(self.width, self.height, u, v)
    }
}

/// Normalized form of a [`VectorField`]: angle in `[0, 2pi)` plus the original magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionField<T> {
    width: usize,
    height: usize,
    angle: Vec<T>,
    magnitude: Vec<T>,
    eps_stationary: T,
}

impl<T: Real> DirectionField<T> {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn angle(&self, col: usize, row: usize) -> T {
        self.angle[row * self.width + col]
    }

    #[inline]
    pub fn magnitude(&self, col: usize, row: usize) -> T {
        self.magnitude[row * self.width + col]
    }

    #[inline]
    pub fn is_stationary(&self, col: usize, row: usize) -> bool {
        self.magnitude[row * self.width + col] <= self.eps_stationary
    }

    pub fn eps_stationary(&self) -> T {
        self.eps_stationary
    }

    /// Unit vector at a lattice point, or the zero vector where stationary.
    #[inline]
    pub fn unit(&self, col: usize, row: usize) -> (T, T) {
        if self.is_stationary(col, row) {
            (T::zero(), T::zero())
        } else {
            let a = self.angle(col, row);
            (a.cos(), a.sin())
        }
    }

    /// The same field with every direction rotated by pi (the backward flow).
    pub fn reversed(&self) -> Self {
        let two_pi = T::PI() + T::PI();
        let angle = self
            .angle
            .iter()
            .zip(&self.magnitude)
            .map(|(&a, &m)| {
                if m <= self.eps_stationary {
                    T::zero()
                } else {
                    wrap_angle(a + T::PI(), two_pi)
                }
            })
            .collect();
        DirectionField { angle, ..self.clone() }
    }
}

fn wrap_angle<T: Real>(a: T, two_pi: T) -> T {
    let mut r = a % two_pi;
    if r < T::zero() {
        r += two_pi;
    }
    // `-tiny % 2pi + 2pi` can round up to exactly 2pi
    if r >= two_pi {
        r = T::zero();
    }
    r
}

/// Full-range angle of `(u, v)` in `[0, 2pi)`.
#[inline]
pub fn direction_angle<T: Real>(u: T, v: T) -> T {
    wrap_angle(v.atan2(u), T::PI() + T::PI())
}

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`, `radius = ceil(3 sigma)`.
pub fn gaussian_kernel<T: Real>(sigma: T) -> Vec<T> {
    let radius = (sigma * T::of(3.0)).ceil().to_usize().unwrap_or(0).max(1);
    let two_s2 = T::of(2.0) * sigma * sigma;
    let taps: Vec<T> = (0..=2 * radius)
        .map(|i| {
            let d = T::from_usize_lossy(i) - T::from_usize_lossy(radius);
            (-(d * d) / two_s2).exp()
        })
        .collect();
    let total = taps.iter().fold(T::zero(), |s, &t| s + t);
    taps.into_iter().map(|t| t / total).collect()
}

/// Mirror index for half-sample symmetric boundaries: `-1 -> 0`, `n -> n - 1`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable Gaussian smoothing with reflective boundaries. `sigma = 0` copies.
pub fn smooth<T: Real>(field: &ScalarField<T>, sigma: T) -> Result<ScalarField<T>> {
    if !sigma.is_finite() || sigma < T::zero() {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == T::zero() {
        return Ok(field.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = field.dims();

    let mut tmp = vec![T::zero(); w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = T::zero();
            for (k, &g) in kernel.iter().enumerate() {
                let c = reflect(col as isize + k as isize - radius, w);
                acc += g * field.get(c, row);
            }
            tmp[row * w + col] = acc;
        }
    }
    let mut out = vec![T::zero(); w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = T::zero();
            for (k, &g) in kernel.iter().enumerate() {
                let r = reflect(row as isize + k as isize - radius, h);
                acc += g * tmp[r * w + col];
            }
            out[row * w + col] = acc;
        }
    }
    ScalarField::new(w, h, out)
}

/// `(dI/dx, dI/dy)`: central differences inside, one-sided differences on the border.
pub fn gradient<T: Real>(field: &ScalarField<T>) -> VectorField<T> {
    let (w, h) = field.dims();
    let half = T::of(0.5);
    let diff = |lo: T, hi: T, span: usize| if span == 2 { (hi - lo) * half } else { hi - lo };
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for row in 0..h {
        let (r0, r1) = (row.saturating_sub(1), (row + 1).min(h - 1));
        for col in 0..w {
            let (c0, c1) = (col.saturating_sub(1), (col + 1).min(w - 1));
            u.push(diff(field.get(c0, row), field.get(c1, row), c1 - c0));
            v.push(diff(field.get(col, r0), field.get(col, r1), r1 - r0));
        }
    }
    VectorField { width: w, height: h, u, v }
}

/// Negative gradient flow `(-Ix, -Iy)` and Hamiltonian flow `(-Iy, Ix)` of `field`.
pub fn derive_systems<T: Real>(field: &ScalarField<T>) -> (VectorField<T>, VectorField<T>) {
    let grad = gradient(field);
    let neg_grad = VectorField {
        width: grad.width,
        height: grad.height,
        u: grad.u.iter().map(|&a| -a).collect(),
        v: grad.v.iter().map(|&b| -b).collect(),
    };
    let hamiltonian = VectorField {
        width: grad.width,
        height: grad.height,
        u: grad.v.iter().map(|&b| -b).collect(),
        v: grad.u,
    };
    (neg_grad, hamiltonian)
}

/// Angle/magnitude decomposition. Points with magnitude `<= eps_stationary` get angle 0.
pub fn normalize<T: Real>(vf: &VectorField<T>, eps_stationary: T) -> Result<DirectionField<T>> {
    if eps_stationary.is_nan() || eps_stationary <= T::zero() {
        return Err(Error::InvalidArgument("eps_stationary must be > 0".into()));
    }
    let (angle, magnitude) = vf
        .u
        .iter()
        .zip(&vf.v)
        .map(|(&a, &b)| {
            let m = a.hypot(b);
            let theta = if m <= eps_stationary { T::zero() } else { direction_angle(a, b) };
            (theta, m)
        })
        .unzip();
    Ok(DirectionField {
        width: vf.width,
        height: vf.height,
        angle,
        magnitude,
        eps_stationary,
    })
}

/// Pointwise arithmetic mean of equally sized fields.
pub fn average_image<T: Real>(fields: &[ScalarField<T>]) -> Result<ScalarField<T>> {
    let first = fields
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot average an empty list of images".into()))?;
    let dims = first.dims();
    let mut acc = vec![T::zero(); dims.0 * dims.1];
    for (i, f) in fields.iter().enumerate() {
        if f.dims() != dims {
            return Err(Error::DimensionMismatch { expected: dims, found: f.dims(), index: Some(i) });
        }
        for (a, &v) in acc.iter_mut().zip(&f.values) {
            *a += v;
        }
    }
    let n = T::from_usize_lossy(fields.len());
    ScalarField::new(dims.0, dims.1, acc.into_iter().map(|a| a / n).collect())
}
