//! Multivector-coefficient polynomials with exact symbolic differentiation.
//!
//! These generate the monogenic fields H feeding the solver: on the torus the
//! only periodic monogenic fields are constants, so nontrivial H must be
//! non-periodic and is carried symbolically. Differentiation multiplies
//! coefficients by small integers, so derivatives of integer-coefficient
//! polynomials are exact.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::algebra::{axis_contract, axis_wedge, blade_count, Blade, Multivector, RealMultivector, MAX_DIM};
use crate::error::{Error, Result};

/// Exponent vector; entries beyond the active dimension stay zero.
pub type MultiIndex = [u8; MAX_DIM];

fn add_index(a: &MultiIndex, b: &MultiIndex) -> MultiIndex {
    let mut out = [0u8; MAX_DIM];
    for k in 0..MAX_DIM {
        out[k] = a[k] + b[k];
    }
    out
}

/// A polynomial with multivector coefficients, stored term-by-term.
#[derive(Clone, PartialEq)]
pub struct PolyMultivector {
    dim: usize,
    terms: BTreeMap<MultiIndex, RealMultivector>,
}

impl PolyMultivector {
    pub fn zero(dim: usize) -> Self {
        PolyMultivector {
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// Single term c * x^alpha.
    pub fn monomial(exponents: &[u8], coeff: RealMultivector) -> Self {
        let dim = coeff.dim();
        assert!(exponents.len() <= MAX_DIM);
        assert!(exponents.iter().skip(dim).all(|&e| e == 0));
        let mut idx = [0u8; MAX_DIM];
        idx[..exponents.len()].copy_from_slice(exponents);
        let mut p = Self::zero(dim);
        p.add_term(idx, coeff);
        p
    }

    /// Scalar monomial c * x^alpha (grade-0 coefficient).
    pub fn scalar_monomial(dim: usize, exponents: &[u8], c: f64) -> Self {
        Self::monomial(exponents, Multivector::scalar(dim, c))
    }

    /// Constant polynomial.
    pub fn constant(coeff: RealMultivector) -> Self {
        Self::monomial(&[], coeff)
    }

    /// The affine scalar polynomial <slope, x>.
    pub fn affine_scalar(dim: usize, slope: &[f64]) -> Self {
        assert_eq!(slope.len(), dim);
        let mut p = Self::zero(dim);
        for (axis, &s) in slope.iter().enumerate() {
            if s != 0.0 {
                let mut idx = [0u8; MAX_DIM];
                idx[axis] = 1;
                p.add_term(idx, Multivector::scalar(dim, s));
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &RealMultivector)> {
        self.terms.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, idx: MultiIndex, coeff: RealMultivector) {
        assert_eq!(coeff.dim(), self.dim);
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&idx) {
            Some(existing) => {
                *existing = existing.clone() + coeff;
                if existing.is_zero() {
                    self.terms.remove(&idx);
                }
            }
            None => {
                self.terms.insert(idx, coeff);
            }
        }
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|idx| idx.iter().map(|&e| e as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.terms.values().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// Exactly zero: no surviving terms.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Zero up to coefficient dust below `tol`.
    pub fn is_zero_within(&self, tol: f64) -> bool {
        self.max_coeff_abs() <= tol
    }

    pub fn evaluate(&self, x: &[f64]) -> RealMultivector {
        assert_eq!(x.len(), self.dim);
        let mut out = Multivector::zero(self.dim);
        for (idx, coeff) in &self.terms {
            let mut w = 1.0;
            for (axis, &e) in idx.iter().take(self.dim).enumerate() {
                for _ in 0..e {
                    w *= x[axis];
                }
            }
            out = out + coeff.scale(w);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.dim);
        for (idx, coeff) in &self.terms {
            out.add_term(*idx, coeff.scale(s));
        }
        out
    }

    pub fn grade_project(&self, k: usize) -> Result<Self> {
        let mut out = Self::zero(self.dim);
        for (idx, coeff) in &self.terms {
            out.add_term(*idx, coeff.grade_project(k)?);
        }
        Ok(out)
    }

    /// Apply a pointwise linear map to every coefficient.
    pub fn map_coeffs(&self, f: impl Fn(&RealMultivector) -> RealMultivector) -> Self {
        let mut out = Self::zero(self.dim);
        for (idx, coeff) in &self.terms {
            out.add_term(*idx, f(coeff));
        }
        out
    }

    /// Partial derivative along one axis; exact on the coefficients.
    pub fn partial(&self, axis: usize) -> Self {
        assert!(axis < self.dim);
        let mut out = Self::zero(self.dim);
        for (idx, coeff) in &self.terms {
            let e = idx[axis];
            if e == 0 {
                continue;
            }
            let mut lowered = *idx;
            lowered[axis] = e - 1;
            out.add_term(lowered, coeff.scale(e as f64));
        }
        out
    }

    /// Exterior derivative: d P = sum_k e_k ^ (d_k P).
    pub fn d(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for axis in 0..self.dim {
            let dp = self.partial(axis);
            for (idx, coeff) in &dp.terms {
                let mut wedged = Multivector::zero(self.dim);
                for (mask, &c) in coeff.coeffs().iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    if let Some((sign, target)) = axis_wedge(axis, mask as u32) {
                        wedged.coeffs_mut()[target as usize] += sign * c;
                    }
                }
                out.add_term(*idx, wedged);
            }
        }
        out
    }

    /// Interior derivative: delta P = sum_k e_k -| (d_k P).
    ///
    /// The sign is fixed so that delta = -d* on the box, pinned by the
    /// integration-by-parts oracle in the tests below.
    pub fn delta(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for axis in 0..self.dim {
            let dp = self.partial(axis);
            for (idx, coeff) in &dp.terms {
                let mut contracted = Multivector::zero(self.dim);
                for (mask, &c) in coeff.coeffs().iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    if let Some((sign, target)) = axis_contract(axis, mask as u32) {
                        contracted.coeffs_mut()[target as usize] += sign * c;
                    }
                }
                out.add_term(*idx, contracted);
            }
        }
        out
    }

    /// Hodge-Dirac operators d + delta (plus) and d - delta (minus).
    pub fn dirac(&self, plus: bool) -> Self {
        let d = self.d();
        let del = self.delta();
        if plus {
            d + del
        } else {
            d - del
        }
    }

    /// Componentwise laplacian sum_k d_k^2.
    pub fn laplacian(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for axis in 0..self.dim {
            out = out + self.partial(axis).partial(axis);
        }
        out
    }

    /// Exact integral of every coefficient over the box [0, L]^n,
    /// returned as a multivector of integrated blade coefficients.
    pub fn integral_over_box(&self, box_len: f64) -> RealMultivector {
        let mut out = Multivector::zero(self.dim);
        for (idx, coeff) in &self.terms {
            let mut w = 1.0;
            for &e in idx.iter().take(self.dim) {
                w *= box_len.powi(e as i32 + 1) / (e as f64 + 1.0);
            }
            out = out + coeff.scale(w);
        }
        out
    }

    /// Pointwise inner product <P(x), Q(x)> as a scalar polynomial.
    pub fn pointwise_inner(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zero(self.dim);
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                let dot: f64 = ca
                    .coeffs()
                    .iter()
                    .zip(cb.coeffs())
                    .map(|(a, b)| a * b)
                    .sum();
                if dot != 0.0 {
                    out.add_term(add_index(ia, ib), Multivector::scalar(self.dim, dot));
                }
            }
        }
        out
    }

    /// Exact L2(box) inner product of two polynomial fields.
    pub fn l2_inner_box(&self, other: &Self, box_len: f64) -> f64 {
        self.pointwise_inner(other)
            .integral_over_box(box_len)
            .coeff(Blade(0))
    }

    /// Exact L2(box) norm.
    pub fn l2_norm_box(&self, box_len: f64) -> f64 {
        self.l2_inner_box(self, box_len).max(0.0).sqrt()
    }

    /// Face integral of the grade-0 part: integrate over the box face
    /// x_axis = value, i.e. over the remaining n-1 axes on [0, L].
    pub fn face_integral_scalar(&self, axis: usize, value: f64, box_len: f64) -> f64 {
        let mut acc = 0.0;
        for (idx, coeff) in &self.terms {
            let c = coeff.coeff(Blade(0));
            if c == 0.0 {
                continue;
            }
            let mut w = value.powi(idx[axis] as i32);
            for (j, &e) in idx.iter().take(self.dim).enumerate() {
                if j != axis {
                    w *= box_len.powi(e as i32 + 1) / (e as f64 + 1.0);
                }
            }
            acc += c * w;
        }
        acc
    }
}

impl std::ops::Add for PolyMultivector {
    type Output = PolyMultivector;
    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        for (idx, coeff) in rhs.terms {
            self.add_term(idx, coeff);
        }
        self
    }
}

impl std::ops::Sub for PolyMultivector {
    type Output = PolyMultivector;
    fn sub(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        for (idx, coeff) in rhs.terms {
            self.add_term(idx, -coeff);
        }
        self
    }
}

impl std::fmt::Debug for PolyMultivector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (idx, coeff) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "x^{:?}*({:?})", &idx[..self.dim], coeff)?;
            first = false;
        }
        Ok(())
    }
}

/// Relative tolerance for the harmonicity gate in [`make_monogenic`].
const HARMONIC_GATE: f64 = 1e-8;

/// Build the monogenic field H = (d - delta) P from a componentwise harmonic
/// polynomial P. Since (d - delta)^2 = -laplacian, the output satisfies
/// (d - delta) H = 0 identically.
pub fn make_monogenic(p: &PolyMultivector) -> Result<PolyMultivector> {
    let lap = p.laplacian();
    let scale = p.max_coeff_abs().max(1e-300);
    let residual = lap.max_coeff_abs();
    if residual > HARMONIC_GATE * scale {
        return Err(Error::NotHarmonic { residual });
    }
    Ok(p.dirac(false))
}

fn multi_indices_of_degree(dim: usize, degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut idx = [0u8; MAX_DIM];
    fn rec(dim: usize, axis: usize, remaining: usize, idx: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if axis == dim - 1 {
            idx[axis] = remaining as u8;
            out.push(*idx);
            idx[axis] = 0;
            return;
        }
        for e in 0..=remaining {
            idx[axis] = e as u8;
            rec(dim, axis + 1, remaining - e, idx, out);
        }
        idx[axis] = 0;
    }
    rec(dim, 0, degree, &mut idx, &mut out);
    out
}

/// Orthonormal basis of scalar harmonic polynomials of exact total degree
/// `degree` in `dim` variables, computed as the nullspace of the laplacian
/// acting on monomial coefficients.
pub fn harmonic_basis(dim: usize, degree: usize) -> Vec<PolyMultivector> {
    let monos = multi_indices_of_degree(dim, degree);
    if degree < 2 {
        // every polynomial of degree <= 1 is harmonic
        return monos
            .iter()
            .map(|idx| PolyMultivector::scalar_monomial(dim, &idx[..dim], 1.0))
            .collect();
    }
    let lower = multi_indices_of_degree(dim, degree - 2);
    let lower_pos: BTreeMap<MultiIndex, usize> =
        lower.iter().enumerate().map(|(i, idx)| (*idx, i)).collect();
    let mut mat = DMatrix::<f64>::zeros(lower.len(), monos.len());
    for (col, alpha) in monos.iter().enumerate() {
        for axis in 0..dim {
            let e = alpha[axis];
            if e >= 2 {
                let mut beta = *alpha;
                beta[axis] = e - 2;
                let row = lower_pos[&beta];
                mat[(row, col)] += (e as f64) * (e as f64 - 1.0);
            }
        }
    }
    // kernel of the laplacian map = eigenvectors of the gram matrix D^T D
    // with eigenvalue zero (full eigenbasis, unlike a thin SVD), polished by
    // projecting out the row space: v <- (I - D^T (D D^T)^{-1} D) v
    let gram = mat.transpose() * &mat;
    let eig = gram.symmetric_eigen();
    let emax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = emax * 1e-10 + 1e-300;
    let mut selected: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] <= tol)
        .collect();
    selected.sort_unstable();
    let ddt = &mat * mat.transpose();
    let chol = ddt.cholesky().expect("laplacian map is surjective for degree >= 2");
    let mut vectors: Vec<nalgebra::DVector<f64>> = Vec::new();
    for i in selected {
        let mut v: nalgebra::DVector<f64> = eig.eigenvectors.column(i).into();
        for _ in 0..2 {
            let dv = &mat * &v;
            v -= mat.transpose() * chol.solve(&dv);
        }
        // modified gram-schmidt against the vectors already kept
        for u in &vectors {
            let proj = u.dot(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            vectors.push(v / norm);
        }
    }
    let mut basis = Vec::new();
    for v in vectors {
        let mut p = PolyMultivector::zero(dim);
        for (col, alpha) in monos.iter().enumerate() {
            let c = v[col];
            if c.abs() > 1e-13 {
                p.add_term(*alpha, Multivector::scalar(dim, c));
            }
        }
        basis.push(p);
    }
    basis
}

/// Random scalar harmonic polynomial with degrees 0..=degree_max, standard
/// normal coefficients over the precomputed harmonic basis.
pub fn random_harmonic_scalar<R: Rng>(dim: usize, degree_max: usize, rng: &mut R) -> PolyMultivector {
    let mut p = PolyMultivector::zero(dim);
    for degree in 0..=degree_max {
        for q in harmonic_basis(dim, degree) {
            let g: f64 = rng.sample(rand_distr::StandardNormal);
            p = p + q.scale(g);
        }
    }
    p
}

/// Random multivector-valued polynomial, componentwise harmonic.
pub fn random_harmonic_multivector<R: Rng>(
    dim: usize,
    degree_max: usize,
    rng: &mut R,
) -> PolyMultivector {
    let mut p = PolyMultivector::zero(dim);
    for blade in 0..blade_count(dim) {
        let scalar_part = random_harmonic_scalar(dim, degree_max, rng);
        for (idx, coeff) in scalar_part.terms {
            let mut mv = Multivector::zero(dim);
            mv.coeffs_mut()[blade] = coeff.coeff(Blade(0));
            p.add_term(idx, mv);
        }
    }
    p
}
