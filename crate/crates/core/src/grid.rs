//! Periodic grid container for multivector fields and the discrete Fourier
//! transform contract.
//!
//! Fields live on a uniform periodic box [0, L)^n with N points per axis.
//! The periodic values are stored node-major, blade-minor (the dump-file
//! order); an optional non-periodic polynomial part rides along symbolically
//! and is differentiated exactly instead of spectrally.
//!
//! Transform convention: c_xi = N^{-n} sum_x f(x) e^{-i xi.x}, so the zero
//! mode is the node average and parseval reads ||f||_{L2}^2 = L^n sum |c|^2.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::algebra::{blade_count, Multivector, RealMultivector};
use crate::error::{Error, Result};
use crate::poly::PolyMultivector;

/// Periodic grid geometry: dimension, points per axis, box length.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    pub box_len: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, box_len: f64) -> Result<Self> {
        if !(1..=crate::algebra::MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if points < 4 || points % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "points per axis must be even and >= 4, got {points}"
            )));
        }
        if !(box_len > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "box length must be positive, got {box_len}"
            )));
        }
        Ok(GridSpec {
            dim,
            points,
            box_len,
        })
    }

    /// Default 2*pi box.
    pub fn two_pi(dim: usize, points: usize) -> Result<Self> {
        Self::new(dim, points, 2.0 * std::f64::consts::PI)
    }

    pub fn spacing(&self) -> f64 {
        self.box_len / self.points as f64
    }

    pub fn node_count(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn n_blades(&self) -> usize {
        blade_count(self.dim)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.box_len.powi(self.dim as i32)
    }

    /// Signed integer frequency index of an FFT bin: 0..N/2-1, then -N/2..-1.
    pub fn signed_index(&self, bin: usize) -> i64 {
        if bin < self.points / 2 {
            bin as i64
        } else {
            bin as i64 - self.points as i64
        }
    }

    /// Physical frequency of a bin: 2 pi k / L.
    pub fn frequency(&self, bin: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.signed_index(bin) as f64 / self.box_len
    }

    pub fn is_nyquist(&self, bin: usize) -> bool {
        bin == self.points / 2
    }

    /// Node coordinates from a flat row-major index (axis 0 slowest).
    pub fn node_coords(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim).rev() {
            out[axis] = flat % self.points;
            flat /= self.points;
        }
    }

    /// Physical position of a node.
    pub fn node_position(&self, flat: usize) -> Vec<f64> {
        let mut coords = vec![0usize; self.dim];
        self.node_coords(flat, &mut coords);
        let h = self.spacing();
        coords.iter().map(|&c| c as f64 * h).collect()
    }

    /// Frequency vector of a flat mode index. Nyquist bins report their
    /// frequency; multiplier code checks [`Self::mode_has_nyquist`] separately.
    pub fn mode_frequency(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            let bin = rest % self.points;
            rest /= self.points;
            out[axis] = self.frequency(bin);
        }
    }

    /// True when any axis bin of the flat mode index is the nyquist bin.
    pub fn mode_has_nyquist(&self, flat: usize) -> bool {
        let mut rest = flat;
        for _ in 0..self.dim {
            if self.is_nyquist(rest % self.points) {
                return true;
            }
            rest /= self.points;
        }
        false
    }
}

/// Axis-aligned sub-box given as fractions of the box length, identical on
/// every axis; half-open membership [lo*L, hi*L).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoxRegion {
    pub lo: f64,
    pub hi: f64,
}

impl BoxRegion {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "box region fractions must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi}]"
            )));
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn contains(&self, x: &[f64], box_len: f64) -> bool {
        x.iter()
            .all(|&xi| xi >= self.lo * box_len && xi < self.hi * box_len)
    }

    /// Shrink towards the center by the given factor (1.0 = unchanged).
    pub fn shrink(&self, factor: f64) -> BoxRegion {
        let mid = 0.5 * (self.lo + self.hi);
        let half = 0.5 * (self.hi - self.lo) * factor;
        BoxRegion {
            lo: mid - half,
            hi: mid + half,
        }
    }

    pub fn volume(&self, box_len: f64, dim: usize) -> f64 {
        ((self.hi - self.lo) * box_len).powi(dim as i32)
    }
}

/// Nested boxes U inside V inside the periodic box, with a raised-cosine
/// cutoff equal to 1 on U, 0 outside V.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubdomainSpec {
    pub u: BoxRegion,
    pub v: BoxRegion,
}

impl SubdomainSpec {
    pub fn new(u: BoxRegion, v: BoxRegion) -> Result<Self> {
        if !(v.lo < u.lo && u.hi < v.hi) {
            return Err(Error::InvalidConfig(format!(
                "subdomain must nest strictly: V [{}, {}] around U [{}, {}]",
                v.lo, v.hi, u.lo, u.hi
            )));
        }
        Ok(SubdomainSpec { u, v })
    }

    /// Symmetric default: U = [u_lo, 1-u_lo], V = [v_lo, 1-v_lo].
    pub fn symmetric(u_lo: f64, v_lo: f64) -> Result<Self> {
        Self::new(BoxRegion::new(u_lo, 1.0 - u_lo)?, BoxRegion::new(v_lo, 1.0 - v_lo)?)
    }

    fn profile_1d(&self, t: f64) -> f64 {
        // t is the coordinate as a fraction of L
        if t < self.v.lo || t > self.v.hi {
            0.0
        } else if t < self.u.lo {
            let s = (t - self.v.lo) / (self.u.lo - self.v.lo);
            0.5 * (1.0 - (std::f64::consts::PI * s).cos())
        } else if t <= self.u.hi {
            1.0
        } else {
            let s = (t - self.u.hi) / (self.v.hi - self.u.hi);
            0.5 * (1.0 + (std::f64::consts::PI * s).cos())
        }
    }

    fn profile_1d_derivative(&self, t: f64) -> f64 {
        // derivative with respect to t (fraction units)
        if t < self.v.lo || t > self.v.hi || (t >= self.u.lo && t <= self.u.hi) {
            0.0
        } else if t < self.u.lo {
            let w = self.u.lo - self.v.lo;
            let s = (t - self.v.lo) / w;
            0.5 * std::f64::consts::PI / w * (std::f64::consts::PI * s).sin()
        } else {
            let w = self.v.hi - self.u.hi;
            let s = (t - self.u.hi) / w;
            -0.5 * std::f64::consts::PI / w * (std::f64::consts::PI * s).sin()
        }
    }

    /// Cutoff value phi(x): product of per-axis raised-cosine profiles.
    pub fn cutoff(&self, x: &[f64], box_len: f64) -> f64 {
        x.iter().map(|&xi| self.profile_1d(xi / box_len)).product()
    }

    /// Analytic gradient of the cutoff.
    pub fn cutoff_gradient(&self, x: &[f64], box_len: f64, out: &mut [f64]) {
        let dim = x.len();
        let profiles: Vec<f64> = x.iter().map(|&xi| self.profile_1d(xi / box_len)).collect();
        for k in 0..dim {
            let mut g = self.profile_1d_derivative(x[k] / box_len) / box_len;
            for (j, p) in profiles.iter().enumerate() {
                if j != k {
                    g *= p;
                }
            }
            out[k] = g;
        }
    }
}

/// Deterministic pairwise tree reduction; independent of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// A multivector attached to every grid node, plus an optional symbolic
/// polynomial part for the non-periodic component.
#[derive(Clone, PartialEq)]
pub struct MultivectorField {
    spec: GridSpec,
    values: Vec<f64>,
    poly: Option<PolyMultivector>,
}

impl MultivectorField {
    pub fn zero(spec: GridSpec) -> Self {
        MultivectorField {
            spec,
            values: vec![0.0; spec.node_count() * spec.n_blades()],
            poly: None,
        }
    }

    /// Evaluate a closure at every node.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(&[f64]) -> RealMultivector) -> Self {
        let nb = spec.n_blades();
        let mut values = vec![0.0; spec.node_count() * nb];
        for node in 0..spec.node_count() {
            let x = spec.node_position(node);
            let mv = f(&x);
            assert_eq!(mv.dim(), spec.dim);
            values[node * nb..(node + 1) * nb].copy_from_slice(mv.coeffs());
        }
        MultivectorField {
            spec,
            values,
            poly: None,
        }
    }

    /// Field whose value is carried entirely by the symbolic polynomial part.
    pub fn from_poly(spec: GridSpec, poly: PolyMultivector) -> Self {
        assert_eq!(poly.dim(), spec.dim);
        MultivectorField {
            spec,
            values: vec![0.0; spec.node_count() * spec.n_blades()],
            poly: Some(poly),
        }
    }

    /// Sample a polynomial into periodic node values (no symbolic part kept).
    pub fn sample_poly(spec: GridSpec, poly: &PolyMultivector) -> Self {
        Self::from_fn(spec, |x| poly.evaluate(x))
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>, poly: Option<PolyMultivector>) -> Self {
        assert_eq!(values.len(), spec.node_count() * spec.n_blades());
        MultivectorField { spec, values, poly }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn poly(&self) -> Option<&PolyMultivector> {
        self.poly.as_ref()
    }

    pub fn set_poly(&mut self, poly: Option<PolyMultivector>) {
        self.poly = poly;
    }

    pub fn has_poly(&self) -> bool {
        self.poly.is_some()
    }

    /// Periodic node value as a slice.
    pub fn node_slice(&self, node: usize) -> &[f64] {
        let nb = self.spec.n_blades();
        &self.values[node * nb..(node + 1) * nb]
    }

    /// Full value (periodic + polynomial part) at a node.
    pub fn value_at(&self, node: usize) -> RealMultivector {
        let mut mv = Multivector::from_coeffs(self.spec.dim, self.node_slice(node).to_vec());
        if let Some(poly) = &self.poly {
            let x = self.spec.node_position(node);
            mv = mv + poly.evaluate(&x);
        }
        mv
    }

    /// Materialize the polynomial part into the node values.
    pub fn flatten_poly(&self) -> MultivectorField {
        match &self.poly {
            None => self.clone(),
            Some(poly) => {
                let nb = self.spec.n_blades();
                let mut values = self.values.clone();
                for node in 0..self.spec.node_count() {
                    let x = self.spec.node_position(node);
                    let mv = poly.evaluate(&x);
                    for (b, v) in mv.coeffs().iter().enumerate() {
                        values[node * nb + b] += v;
                    }
                }
                MultivectorField {
                    spec: self.spec,
                    values,
                    poly: None,
                }
            }
        }
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.spec, other.spec
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        let poly = match (&self.poly, &other.poly) {
            (None, None) => None,
            (Some(p), None) | (None, Some(p)) => Some(p.clone()),
            (Some(p), Some(q)) => Some(p.clone() + q.clone()),
        };
        Ok(MultivectorField {
            spec: self.spec,
            values,
            poly,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        let poly = match (&self.poly, &other.poly) {
            (None, None) => None,
            (Some(p), None) => Some(p.clone()),
            (None, Some(q)) => Some(q.scale(-1.0)),
            (Some(p), Some(q)) => {
                let diff = p.clone() - q.clone();
                if diff.is_zero() {
                    None
                } else {
                    Some(diff)
                }
            }
        };
        Ok(MultivectorField {
            spec: self.spec,
            values,
            poly,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        MultivectorField {
            spec: self.spec,
            values: self.values.iter().map(|v| v * s).collect(),
            poly: self.poly.as_ref().map(|p| p.scale(s)),
        }
    }

    /// Node average of the full field value.
    pub fn node_mean(&self) -> RealMultivector {
        let nb = self.spec.n_blades();
        let nodes = self.spec.node_count();
        let mut acc = vec![0.0; nb];
        // blade-by-blade pairwise reduction keeps the result deterministic
        let mut channel = vec![0.0; nodes];
        for b in 0..nb {
            for node in 0..nodes {
                channel[node] = self.values[node * nb + b];
            }
            acc[b] = pairwise_sum(&channel) / nodes as f64;
        }
        let mut mv = Multivector::from_coeffs(self.spec.dim, acc);
        if let Some(poly) = &self.poly {
            let mut sums = vec![0.0; nb];
            for b in 0..nb {
                for node in 0..nodes {
                    let x = self.spec.node_position(node);
                    channel[node] = poly.evaluate(&x).coeffs()[b];
                }
                sums[b] = pairwise_sum(&channel) / nodes as f64;
            }
            mv = mv + Multivector::from_coeffs(self.spec.dim, sums);
        }
        mv
    }

    /// Subtract a constant multivector from the periodic values.
    pub fn subtract_constant(&self, c: &RealMultivector) -> Self {
        let nb = self.spec.n_blades();
        let mut values = self.values.clone();
        for node in 0..self.spec.node_count() {
            for b in 0..nb {
                values[node * nb + b] -= c.coeffs()[b];
            }
        }
        MultivectorField {
            spec: self.spec,
            values,
            poly: self.poly.clone(),
        }
    }

    /// Discrete L2 norm sqrt(h^n sum |value|^2), optionally over a sub-box.
    pub fn l2_norm(&self, mask: Option<&BoxRegion>) -> f64 {
        let nb = self.spec.n_blades();
        let mut squares = Vec::with_capacity(self.spec.node_count());
        for node in 0..self.spec.node_count() {
            if let Some(region) = mask {
                let x = self.spec.node_position(node);
                if !region.contains(&x, self.spec.box_len) {
                    continue;
                }
            }
            let s = if self.poly.is_some() {
                self.value_at(node).norm_sq()
            } else {
                self.node_slice(node).iter().map(|v| v * v).sum()
            };
            squares.push(s);
        }
        let _ = nb;
        (self.spec.cell_volume() * pairwise_sum(&squares)).sqrt()
    }

    /// Discrete L1 norm h^n sum |value|, optionally over a sub-box.
    pub fn l1_norm(&self, mask: Option<&BoxRegion>) -> f64 {
        let mut mags = Vec::with_capacity(self.spec.node_count());
        for node in 0..self.spec.node_count() {
            if let Some(region) = mask {
                let x = self.spec.node_position(node);
                if !region.contains(&x, self.spec.box_len) {
                    continue;
                }
            }
            mags.push(self.value_at(node).norm());
        }
        self.spec.cell_volume() * pairwise_sum(&mags)
    }

    /// Forward transform of the periodic part.
    pub fn fft(&self) -> SpectralField {
        let plan = NdFft::new(self.spec);
        plan.forward(self)
    }

    /// Spectral partial derivative along one axis; the polynomial part is
    /// differentiated symbolically. The nyquist mode of the multiplier is
    /// zeroed to keep real fields real.
    pub fn derivative_axis(&self, axis: usize) -> MultivectorField {
        assert!(axis < self.spec.dim);
        let mut spectral = self.fft();
        spectral.scale_modes(|spec, mode_bins, value| {
            let bin = mode_bins[axis];
            if spec.is_nyquist(bin) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, spec.frequency(bin)) * value
            }
        });
        let mut out = spectral.ifft_real();
        out.poly = self.poly.as_ref().map(|p| p.partial(axis)).filter(|p| !p.is_zero());
        out
    }

    /// W^{1,2} norm: sqrt(||f||^2 + sum_k ||d_k f||^2), derivatives spectral
    /// (plus exact polynomial parts), optionally restricted to a sub-box.
    pub fn sobolev_norm(&self, mask: Option<&BoxRegion>) -> f64 {
        let mut total = self.l2_norm(mask).powi(2);
        for axis in 0..self.spec.dim {
            total += self.derivative_axis(axis).l2_norm(mask).powi(2);
        }
        total.sqrt()
    }
}

/// Spectral counterpart of a field: complex coefficients per frequency,
/// mode-major blade-minor, bins in FFT output order per axis.
#[derive(Clone, PartialEq)]
pub struct SpectralField {
    spec: GridSpec,
    data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zero(spec: GridSpec) -> Self {
        SpectralField {
            spec,
            data: vec![Complex64::new(0.0, 0.0); spec.node_count() * spec.n_blades()],
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn mode_slice(&self, mode: usize) -> &[Complex64] {
        let nb = self.spec.n_blades();
        &self.data[mode * nb..(mode + 1) * nb]
    }

    /// The zero-frequency coefficient as a real multivector (imaginary parts
    /// of a real field's mean are zero to rounding).
    pub fn mean_mode(&self) -> RealMultivector {
        let nb = self.spec.n_blades();
        Multivector::from_coeffs(
            self.spec.dim,
            (0..nb).map(|b| self.data[b].re).collect(),
        )
    }

    pub fn zero_mean_mode(&mut self) {
        let nb = self.spec.n_blades();
        for b in 0..nb {
            self.data[b] = Complex64::new(0.0, 0.0);
        }
    }

    /// Apply a per-mode scalar multiplier given the per-axis bins.
    pub fn scale_modes(&mut self, f: impl Fn(&GridSpec, &[usize], Complex64) -> Complex64) {
        let nb = self.spec.n_blades();
        let dim = self.spec.dim;
        let n = self.spec.points;
        let mut bins = vec![0usize; dim];
        for mode in 0..self.spec.node_count() {
            let mut rest = mode;
            for axis in (0..dim).rev() {
                bins[axis] = rest % n;
                rest /= n;
            }
            for b in 0..nb {
                let idx = mode * nb + b;
                self.data[idx] = f(&self.spec, &bins, self.data[idx]);
            }
        }
    }

    /// Parseval L2 norm: sqrt(L^n sum |c|^2).
    pub fn l2_norm(&self) -> f64 {
        let squares: Vec<f64> = self.data.iter().map(|c| c.norm_sqr()).collect();
        (self.spec.volume() * pairwise_sum(&squares)).sqrt()
    }

    pub fn ifft_real(&self) -> MultivectorField {
        let plan = NdFft::new(self.spec);
        plan.inverse_real(self)
    }
}

/// Per-grid FFT plans; forward normalizes by N^{-n}.
pub struct NdFft {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl NdFft {
    pub fn new(spec: GridSpec) -> Self {
        use std::collections::HashMap;
        use std::sync::Mutex;
        #[allow(clippy::type_complexity)]
        static PLANS: Mutex<Option<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>>> =
            Mutex::new(None);
        let mut guard = PLANS.lock().unwrap();
        let cache = guard.get_or_insert_with(HashMap::new);
        let (forward, inverse) = cache
            .entry(spec.points)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (
                    planner.plan_fft_forward(spec.points),
                    planner.plan_fft_inverse(spec.points),
                )
            })
            .clone();
        NdFft {
            spec,
            forward,
            inverse,
        }
    }

    fn transform_axes(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.spec.points;
        let nb = self.spec.n_blades();
        let nodes = self.spec.node_count();
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.spec.dim {
            // row-major with axis 0 slowest: node stride of this axis
            let stride = n.pow((self.spec.dim - 1 - axis) as u32);
            for base in 0..nodes {
                if (base / stride) % n != 0 {
                    continue;
                }
                for blade in 0..nb {
                    for i in 0..n {
                        line[i] = data[(base + i * stride) * nb + blade];
                    }
                    plan.process(&mut line);
                    for i in 0..n {
                        data[(base + i * stride) * nb + blade] = line[i];
                    }
                }
            }
        }
    }

    pub fn forward(&self, field: &MultivectorField) -> SpectralField {
        let mut data: Vec<Complex64> = field
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.transform_axes(&mut data, false);
        let norm = 1.0 / self.spec.node_count() as f64;
        for c in data.iter_mut() {
            *c *= norm;
        }
        SpectralField {
            spec: self.spec,
            data,
        }
    }

    pub fn inverse_real(&self, field: &SpectralField) -> MultivectorField {
        let mut data = field.data.clone();
        self.transform_axes(&mut data, true);
        MultivectorField {
            spec: self.spec,
            values: data.iter().map(|c| c.re).collect(),
            poly: None,
        }
    }
}

/// Random real field with uniform(-1,1) values, low-pass projected so every
/// surviving mode has |k| <= kmax per axis (and no nyquist content).
pub fn random_band_limited<R: Rng>(
    spec: GridSpec,
    kmax: usize,
    rng: &mut R,
) -> MultivectorField {
    let mut field = MultivectorField::zero(spec);
    for v in field.values_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    band_limit(&field, kmax)
}

/// Project a field onto modes with |k| <= kmax per axis.
pub fn band_limit(field: &MultivectorField, kmax: usize) -> MultivectorField {
    let mut spectral = field.fft();
    let kmax = kmax as i64;
    spectral.scale_modes(|spec, bins, value| {
        for &bin in bins {
            if spec.is_nyquist(bin) || spec.signed_index(bin).abs() > kmax {
                return Complex64::new(0.0, 0.0);
            }
        }
        value
    });
    let mut out = spectral.ifft_real();
    out.poly = field.poly.clone();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fft_roundtrip_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (dim, n) in [(1, 16), (2, 16), (3, 8)] {
            let spec = GridSpec::two_pi(dim, n).unwrap();
            let mut f = MultivectorField::zero(spec);
            for v in f.values_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let g = f.fft().ifft_real();
            let err = f.sub(&g).unwrap().l2_norm(None) / f.l2_norm(None);
            assert!(err < 1e-13, "dim {dim}: roundtrip error {err}");
        }
    }

    #[test]
    fn constant_field_concentrates_at_zero_mode() {
        let spec = GridSpec::two_pi(2, 8).unwrap();
        let c = Multivector::scalar(2, 3.5);
        let f = MultivectorField::from_fn(spec, |_| c.clone());
        let s = f.fft();
        assert!((s.mean_mode().coeff(crate::algebra::Blade(0)) - 3.5).abs() < 1e-13);
        let off_mean: f64 = s
            .data()
            .iter()
            .skip(spec.n_blades())
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(off_mean < 1e-13);
    }

    #[test]
    fn cosine_occupies_two_modes() {
        let spec = GridSpec::two_pi(2, 16).unwrap();
        let f = MultivectorField::from_fn(spec, |x| {
            Multivector::basis_vector(2, 0).scale(x[0].cos())
        });
        let s = f.fft();
        let nb = spec.n_blades();
        let mut nonzero = Vec::new();
        for mode in 0..spec.node_count() {
            for b in 0..nb {
                if s.data()[mode * nb + b].norm() > 1e-12 {
                    nonzero.push((mode, b));
                }
            }
        }
        // two modes (k1 = +-1, k2 = 0) on the e1 channel with weight 1/2
        assert_eq!(nonzero.len(), 2);
        for &(mode, b) in &nonzero {
            assert_eq!(b, 1);
            assert!((s.data()[mode * nb + b].re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let spec = GridSpec::two_pi(2, 16).unwrap();
            let mut f = MultivectorField::zero(spec);
            for v in f.values_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let physical = f.l2_norm(None);
            let spectral = f.fft().l2_norm();
            assert!((physical - spectral).abs() / physical < 1e-12);
        }
    }

    #[test]
    fn l2_norm_of_constants() {
        let spec = GridSpec::two_pi(2, 16).unwrap();
        assert_eq!(MultivectorField::zero(spec).l2_norm(None), 0.0);
        let c = 2.0;
        let f = MultivectorField::from_fn(spec, |_| Multivector::scalar(2, c));
        let want = c * spec.volume().sqrt();
        assert!((f.l2_norm(None) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn masked_norm_matches_direct_summation_oracle() {
        let spec = GridSpec::two_pi(2, 32).unwrap();
        let region = BoxRegion::new(0.25, 0.625).unwrap();
        let c = 1.7;
        let f = MultivectorField::from_fn(spec, |_| Multivector::scalar(2, c));
        // independent oracle: plain loop over nodes
        let mut count = 0usize;
        for node in 0..spec.node_count() {
            let x = spec.node_position(node);
            if region.contains(&x, spec.box_len) {
                count += 1;
            }
        }
        let oracle = (spec.cell_volume() * count as f64).sqrt() * c;
        let got = f.l2_norm(Some(&region));
        assert!((got - oracle).abs() < 1e-12 * oracle);
        // and the continuum value is approached within a boundary layer
        let cont = c * region.volume(spec.box_len, 2).sqrt();
        let cell_budget = 2.0 * c * spec.spacing().sqrt() * spec.box_len.sqrt();
        assert!((got - cont).abs() <= cell_budget);
    }

    #[test]
    fn sobolev_norm_closed_form() {
        // f = sin(x1) on the 2-pi box in n = 2: ||f||^2 = L^2/2 and
        // ||d1 f||^2 = L^2/2, every other derivative zero.
        for n in [8, 16, 32] {
            let spec = GridSpec::two_pi(2, n).unwrap();
            let f = MultivectorField::from_fn(spec, |x| Multivector::scalar(2, x[0].sin()));
            let want = spec.box_len;
            let got = f.sobolev_norm(None);
            assert!((got - want).abs() < 1e-11 * want, "N = {n}: {got} vs {want}");
            // constant field: sobolev norm equals l2 norm
            let g = MultivectorField::from_fn(spec, |_| Multivector::scalar(2, 1.25));
            assert!((g.sobolev_norm(None) - g.l2_norm(None)).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_exact_on_band_limited() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = GridSpec::two_pi(2, 32).unwrap();
        let f = random_band_limited(spec, 7, &mut rng);
        // oracle: differentiate each retained mode analytically
        let s = f.fft();
        let mut expect = s.clone();
        expect.scale_modes(|spec, bins, v| {
            Complex64::new(0.0, spec.frequency(bins[0])) * v
        });
        let got = f.derivative_axis(0);
        let err = got
            .sub(&expect.ifft_real())
            .unwrap()
            .l2_norm(None);
        assert!(err < 1e-11 * f.l2_norm(None).max(1.0));
    }

    #[test]
    fn derivative_of_polynomial_part_is_symbolic() {
        let spec = GridSpec::two_pi(2, 8).unwrap();
        let p = PolyMultivector::scalar_monomial(2, &[1, 1], 1.0);
        let f = MultivectorField::from_poly(spec, p.clone());
        let df = f.derivative_axis(0);
        assert_eq!(df.poly().unwrap(), &p.partial(0));
        assert!(df.values().iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn sobolev_matches_symbolic_derivatives_of_monogenic_field() {
        // sample a monogenic polynomial on the grid; its sobolev norm via the
        // symbolic-poly route must match exact node evaluation of derivatives
        let spec = GridSpec::two_pi(2, 32).unwrap();
        let p = PolyMultivector::scalar_monomial(2, &[1, 1], 1.0);
        let h = crate::poly::make_monogenic(&p).unwrap();
        let f = MultivectorField::from_poly(spec, h.clone());
        let got = f.sobolev_norm(None);
        // independent oracle: exact symbolic derivative fields sampled node-wise
        let mut total = 0.0;
        for g in [h.clone(), h.partial(0), h.partial(1)] {
            let sampled = MultivectorField::sample_poly(spec, &g);
            total += sampled.l2_norm(None).powi(2);
        }
        let want = total.sqrt();
        assert!((got - want).abs() < 1e-10 * want.max(1.0));
    }

    #[test]
    fn sobolev_monotone_in_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = GridSpec::two_pi(2, 16).unwrap();
        let f = random_band_limited(spec, 5, &mut rng);
        let small = BoxRegion::new(0.3, 0.6).unwrap();
        let large = BoxRegion::new(0.2, 0.8).unwrap();
        assert!(f.sobolev_norm(Some(&small)) <= f.sobolev_norm(Some(&large)) + 1e-12);
    }

    #[test]
    fn cutoff_profile_shape() {
        let sub = SubdomainSpec::symmetric(0.35, 0.2).unwrap();
        let box_len = 2.0 * std::f64::consts::PI;
        // 1 on U, 0 outside V, intermediate in the transition
        assert_eq!(sub.cutoff(&[0.5 * box_len, 0.5 * box_len], box_len), 1.0);
        assert_eq!(sub.cutoff(&[0.1 * box_len, 0.5 * box_len], box_len), 0.0);
        let mid = sub.cutoff(&[0.27 * box_len, 0.5 * box_len], box_len);
        assert!(mid > 0.0 && mid < 1.0);
        // gradient vanishes on U and outside V, matches finite differences in between
        let mut g = [0.0; 2];
        sub.cutoff_gradient(&[0.27 * box_len, 0.45 * box_len], box_len, &mut g);
        let hstep = 1e-6;
        for k in 0..2 {
            let mut xp = [0.27 * box_len, 0.45 * box_len];
            let mut xm = xp;
            xp[k] += hstep;
            xm[k] -= hstep;
            let fd = (sub.cutoff(&xp, box_len) - sub.cutoff(&xm, box_len)) / (2.0 * hstep);
            assert!((g[k] - fd).abs() < 1e-6, "axis {k}: {} vs {}", g[k], fd);
        }
    }
}
