//! Exact arithmetic in the exterior algebra of R^n for n <= 6.
//!
//! Elements are stored densely: one coefficient per basis blade, blades
//! indexed by bitmasks over axes (bit k set = axis k present, axes 0-based
//! in code, written e1..en in docs). Coefficients are `f64` in the spatial
//! domain and `Complex64` in the frequency domain; the algebra is generic
//! over both through [`Scalar`].

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported dimension. Dense 2^n storage stays small for n <= 6.
pub const MAX_DIM: usize = 6;

/// Scalar field for multivector coefficients: real in space, complex in frequency.
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    /// Multiply by a real scalar.
    fn scale(self, x: f64) -> Self;
    fn conj(self) -> Self;
    fn abs_sq(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn conj(self) -> Self {
        self
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
}

/// A basis blade of the exterior algebra, identified by its axis bitmask.
///
/// The canonical representative is e_{i1} ^ ... ^ e_{ik} with i1 < ... < ik,
/// so a mask determines the blade together with its orientation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Blade(pub u32);

impl Blade {
    pub fn grade(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains_axis(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    /// All 2^n blades of dimension `dim`, in mask order.
    pub fn all(dim: usize) -> impl Iterator<Item = Blade> {
        (0..(1u32 << dim)).map(Blade)
    }
}

impl fmt::Debug for Blade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return write!(f, "1");
        }
        write!(f, "e")?;
        for axis in 0..32 {
            if self.0 & (1 << axis) != 0 {
                write!(f, "{}", axis + 1)?;
            }
        }
        Ok(())
    }
}

/// Number of blades for dimension n.
pub fn blade_count(dim: usize) -> usize {
    1 << dim
}

/// Sign of merging two disjoint blades into canonical order:
/// (-1)^inversions where inversions counts pairs (i in a, j in b) with i > j.
///
/// Caller must guarantee `a & b == 0`.
pub fn wedge_sign(a: u32, b: u32) -> f64 {
    debug_assert_eq!(a & b, 0);
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wedge by a single axis vector: e_axis ^ e_mask.
/// Returns (sign, merged mask), or None when axis already occurs.
pub fn axis_wedge(axis: usize, mask: u32) -> Option<(f64, u32)> {
    let bit = 1u32 << axis;
    if mask & bit != 0 {
        return None;
    }
    let below = mask & (bit - 1);
    let sign = if below.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, mask | bit))
}

/// Interior product by a single axis vector: e_axis -| e_mask.
/// Returns (sign, reduced mask), or None when axis is absent.
pub fn axis_contract(axis: usize, mask: u32) -> Option<(f64, u32)> {
    let bit = 1u32 << axis;
    if mask & bit == 0 {
        return None;
    }
    let below = mask & (bit - 1);
    let sign = if below.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((sign, mask & !bit))
}

/// A dense multivector in dimension `dim`: 2^dim coefficients, one per blade.
#[derive(Clone, PartialEq)]
pub struct Multivector<S: Scalar = f64> {
    dim: usize,
    coeffs: Vec<S>,
}

pub type RealMultivector = Multivector<f64>;
pub type ComplexMultivector = Multivector<Complex64>;

impl<S: Scalar> Multivector<S> {
    pub fn zero(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "dimension {dim} out of range 1..=6"
        );
        Multivector {
            dim,
            coeffs: vec![S::zero(); blade_count(dim)],
        }
    }

    pub fn scalar(dim: usize, value: S) -> Self {
        let mut mv = Self::zero(dim);
        mv.coeffs[0] = value;
        mv
    }

    /// The basis vector e_{axis+1} (grade 1).
    pub fn basis_vector(dim: usize, axis: usize) -> Self {
        assert!(axis < dim, "axis {axis} out of range for dimension {dim}");
        Self::basis_blade(dim, Blade(1 << axis))
    }

    pub fn basis_blade(dim: usize, blade: Blade) -> Self {
        let mut mv = Self::zero(dim);
        assert!((blade.0 as usize) < blade_count(dim));
        mv.coeffs[blade.0 as usize] = S::one();
        mv
    }

    /// Grade-1 element from axis components.
    pub fn vector(dim: usize, components: &[S]) -> Self {
        assert_eq!(components.len(), dim);
        let mut mv = Self::zero(dim);
        for (axis, &c) in components.iter().enumerate() {
            mv.coeffs[1 << axis] = c;
        }
        mv
    }

    pub fn from_coeffs(dim: usize, coeffs: Vec<S>) -> Self {
        assert_eq!(coeffs.len(), blade_count(dim));
        Multivector { dim, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [S] {
        &mut self.coeffs
    }

    pub fn coeff(&self, blade: Blade) -> S {
        self.coeffs[blade.0 as usize]
    }

    pub fn set_coeff(&mut self, blade: Blade, value: S) {
        self.coeffs[blade.0 as usize] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == S::zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.abs_sq().sqrt())
            .fold(0.0, f64::max)
    }

    /// Euclidean norm over the orthonormal blade basis.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs_sq()).sum()
    }

    /// Inner product with the second argument conjugated.
    pub fn inner(&self, other: &Self) -> S {
        assert_eq!(self.dim, other.dim);
        let mut acc = S::zero();
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            acc += *a * b.conj();
        }
        acc
    }

    pub fn scale(&self, x: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.scale(x)).collect();
        Multivector {
            dim: self.dim,
            coeffs,
        }
    }

    /// Keep the grade-k part, zero everything else.
    pub fn grade_project(&self, k: usize) -> Result<Self> {
        if k > self.dim {
            return Err(Error::GradeOutOfRange {
                grade: k,
                dim: self.dim,
            });
        }
        let mut out = Self::zero(self.dim);
        for (idx, c) in self.coeffs.iter().enumerate() {
            if Blade(idx as u32).grade() == k {
                out.coeffs[idx] = *c;
            }
        }
        Ok(out)
    }

    /// True when every nonzero coefficient has the given grade.
    pub fn is_homogeneous(&self, k: usize) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(idx, c)| *c == S::zero() || Blade(idx as u32).grade() == k)
    }

    /// Exterior product. Bilinear, associative, graded-anticommutative.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let mut out = Self::zero(self.dim);
        for (ia, a) in self.coeffs.iter().enumerate() {
            if *a == S::zero() {
                continue;
            }
            for (ib, b) in other.coeffs.iter().enumerate() {
                if *b == S::zero() {
                    continue;
                }
                let (ma, mb) = (ia as u32, ib as u32);
                if ma & mb != 0 {
                    continue;
                }
                let sign = wedge_sign(ma, mb);
                out.coeffs[(ma | mb) as usize] += (*a * *b).scale(sign);
            }
        }
        Ok(out)
    }

    /// Left interior product v -| u by a homogeneous grade-1 element `self`.
    ///
    /// Adjoint of the wedge: <v ^ a, b> = <a, v -| b> for all a, b.
    pub fn interior(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if !self.is_homogeneous(1) {
            return Err(Error::NotGradeOne);
        }
        let mut out = Self::zero(self.dim);
        for axis in 0..self.dim {
            let v = self.coeffs[1 << axis];
            if v == S::zero() {
                continue;
            }
            for (ib, b) in other.coeffs.iter().enumerate() {
                if *b == S::zero() {
                    continue;
                }
                if let Some((sign, target)) = axis_contract(axis, ib as u32) {
                    out.coeffs[target as usize] += (v * *b).scale(sign);
                }
            }
        }
        Ok(out)
    }

    /// The pair (m+(v)u, m-(v)u) = (v^u + v-|u, v^u - v-|u) for grade-1 v.
    ///
    /// These are the principal symbols of the Hodge-Dirac operators:
    /// m+(v)^2 = |v|^2 id and m-(v)^2 = -|v|^2 id.
    pub fn clifford_pair(&self, other: &Self) -> Result<(Self, Self)> {
        let w = other.wedge_by_vector(self)?;
        let c = self.interior(other)?;
        Ok((w.clone() + c.clone(), w - c))
    }

    /// v ^ self for grade-1 v (checked).
    fn wedge_by_vector(&self, v: &Self) -> Result<Self> {
        if !v.is_homogeneous(1) {
            return Err(Error::NotGradeOne);
        }
        v.wedge(self)
    }
}

impl<S: Scalar> Add for Multivector<S> {
    type Output = Multivector<S>;
    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += *b;
        }
        self
    }
}

impl<S: Scalar> Sub for Multivector<S> {
    type Output = Multivector<S>;
    fn sub(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= *b;
        }
        self
    }
}

impl<S: Scalar> Neg for Multivector<S> {
    type Output = Multivector<S>;
    fn neg(mut self) -> Self {
        for a in self.coeffs.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl<S: Scalar> fmt::Debug for Multivector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (idx, c) in self.coeffs.iter().enumerate() {
            if *c == S::zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "{:?}*{:?}", c, Blade(idx as u32))?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Accumulate xi ^ input into `out` (xi a real vector given by components).
///
/// Operating on slices keeps the per-mode hot loops allocation-free.
pub fn wedge_accumulate<S: Scalar>(xi: &[f64], input: &[S], out: &mut [S]) {
    debug_assert_eq!(input.len(), out.len());
    for (axis, &x) in xi.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (mask, v) in input.iter().enumerate() {
            if *v == S::zero() {
                continue;
            }
            if let Some((sign, target)) = axis_wedge(axis, mask as u32) {
                out[target as usize] += v.scale(sign * x);
            }
        }
    }
}

/// Accumulate weight * (xi -| input) into `out`.
pub fn contract_accumulate<S: Scalar>(xi: &[f64], weight: f64, input: &[S], out: &mut [S]) {
    debug_assert_eq!(input.len(), out.len());
    for (axis, &x) in xi.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (mask, v) in input.iter().enumerate() {
            if *v == S::zero() {
                continue;
            }
            if let Some((sign, target)) = axis_contract(axis, mask as u32) {
                out[target as usize] += v.scale(weight * sign * x);
            }
        }
    }
}

/// Apply the symbol m+(xi) = xi^ + xi-| (plus = true) or m-(xi) = xi^ - xi-|
/// (plus = false) to a raw coefficient slice, accumulating into `out`.
pub fn symbol_apply<S: Scalar>(xi: &[f64], plus: bool, input: &[S], out: &mut [S]) {
    wedge_accumulate(xi, input, out);
    contract_accumulate(xi, if plus { 1.0 } else { -1.0 }, input, out);
}

/// m+(xi) or m-(xi) applied to a multivector.
pub fn symbol_map<S: Scalar>(xi: &[f64], plus: bool, u: &Multivector<S>) -> Multivector<S> {
    assert_eq!(xi.len(), u.dim());
    let mut out = Multivector::zero(u.dim());
    symbol_apply(xi, plus, u.coeffs(), out.coeffs_mut());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(dim: usize) -> impl Fn(u32) -> RealMultivector {
        move |mask| Multivector::basis_blade(dim, Blade(mask))
    }

    /// Independent permutation-parity oracle: concatenate the axis lists and
    /// count inversions by explicit bubble sort.
    fn parity_oracle(a: u32, b: u32) -> Option<(f64, u32)> {
        if a & b != 0 {
            return None;
        }
        let axes = |m: u32| (0..32).filter(move |i| m & (1 << i) != 0);
        let mut seq: Vec<u32> = axes(a).chain(axes(b)).collect();
        let mut swaps = 0;
        for i in 0..seq.len() {
            for j in 0..seq.len().saturating_sub(i + 1) {
                if seq[j] > seq[j + 1] {
                    seq.swap(j, j + 1);
                    swaps += 1;
                }
            }
        }
        Some((if swaps % 2 == 0 { 1.0 } else { -1.0 }, a | b))
    }

    #[test]
    fn wedge_matches_parity_oracle_exhaustively() {
        for dim in 1..=4 {
            let e = mv(dim);
            for a in 0..(1u32 << dim) {
                for b in 0..(1u32 << dim) {
                    let got = e(a).wedge(&e(b)).unwrap();
                    match parity_oracle(a, b) {
                        None => assert!(got.is_zero(), "e{a:b} ^ e{b:b} should vanish"),
                        Some((sign, mask)) => {
                            let mut want = RealMultivector::zero(dim);
                            want.set_coeff(Blade(mask), sign);
                            assert_eq!(got, want, "e{a:b} ^ e{b:b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn wedge_basic_examples() {
        let e = mv(3);
        // e1 ^ e2 = e12
        assert_eq!(e(0b001).wedge(&e(0b010)).unwrap(), e(0b011));
        // e1 ^ e1 = 0
        assert!(e(0b001).wedge(&e(0b001)).unwrap().is_zero());
        // e2 ^ e13 = -e123 (one transposition sorts {2,1,3})
        let got = e(0b010).wedge(&e(0b101)).unwrap();
        assert_eq!(got, -e(0b111));
    }

    #[test]
    fn wedge_associative_and_graded_anticommutative() {
        for dim in 1..=4 {
            let e = mv(dim);
            for a in 0..(1u32 << dim) {
                for b in 0..(1u32 << dim) {
                    // graded anticommutativity on homogeneous elements
                    let ab = e(a).wedge(&e(b)).unwrap();
                    let ba = e(b).wedge(&e(a)).unwrap();
                    let sign = if (Blade(a).grade() * Blade(b).grade()) % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    assert_eq!(ab, ba.scale(sign));
                    for c in 0..(1u32 << dim) {
                        let left = e(a).wedge(&e(b)).unwrap().wedge(&e(c)).unwrap();
                        let right = e(a).wedge(&e(b).wedge(&e(c)).unwrap()).unwrap();
                        assert_eq!(left, right);
                    }
                }
            }
        }
    }

    #[test]
    fn interior_basic_examples() {
        let e = mv(3);
        // e1 -| e12 = e2
        assert_eq!(e(0b001).interior(&e(0b011)).unwrap(), e(0b010));
        // e3 -| e12 = 0
        assert!(e(0b100).interior(&e(0b011)).unwrap().is_zero());
        // e2 -| e12 = -e1
        assert_eq!(e(0b010).interior(&e(0b011)).unwrap(), -e(0b001));
    }

    #[test]
    fn interior_is_adjoint_of_wedge() {
        // <v ^ a, b> = <a, v -| b> exhaustively over basis elements, n <= 4.
        for dim in 1..=4 {
            let e = mv(dim);
            for axis in 0..dim {
                let v = RealMultivector::basis_vector(dim, axis);
                for a in 0..(1u32 << dim) {
                    for b in 0..(1u32 << dim) {
                        let lhs = v.wedge(&e(a)).unwrap().inner(&e(b));
                        let rhs = e(a).inner(&v.interior(&e(b)).unwrap());
                        assert_eq!(lhs, rhs, "dim {dim} axis {axis} a {a:b} b {b:b}");
                    }
                }
            }
        }
    }

    #[test]
    fn interior_rejects_non_grade1() {
        let u = RealMultivector::basis_blade(3, Blade(0b011));
        assert!(matches!(
            u.interior(&u).unwrap_err(),
            Error::NotGradeOne
        ));
    }

    #[test]
    fn clifford_pair_examples() {
        let one = RealMultivector::scalar(3, 1.0);
        let e1 = RealMultivector::basis_vector(3, 0);
        let (plus, minus) = e1.clifford_pair(&one).unwrap();
        assert_eq!(plus, e1);
        assert_eq!(minus, e1);

        // m+(e1)^2 = id on every basis blade
        for b in Blade::all(3) {
            let u = RealMultivector::basis_blade(3, b);
            let (p1, _) = e1.clifford_pair(&u).unwrap();
            let (p2, _) = e1.clifford_pair(&p1).unwrap();
            assert_eq!(p2, u);
        }

        // m-(2 e1)^2 = -4 id on every basis blade, n <= 4
        for dim in 1..=4 {
            let v = RealMultivector::vector(dim, &{
                let mut c = vec![0.0; dim];
                c[0] = 2.0;
                c
            });
            for b in Blade::all(dim) {
                let u = RealMultivector::basis_blade(dim, b);
                let (_, m1) = v.clifford_pair(&u).unwrap();
                let (_, m2) = v.clifford_pair(&m1).unwrap();
                assert_eq!(m2, u.scale(-4.0));
            }
        }
    }

    #[test]
    fn clifford_relations_random_vectors() {
        // (v^ + v-|)^2 = |v|^2 id and (v^ - v-|)^2 = -|v|^2 id on random v.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=4 {
            for _ in 0..100 {
                let comps: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v = RealMultivector::vector(dim, &comps);
                let vsq: f64 = comps.iter().map(|c| c * c).sum();
                let u = RealMultivector::from_coeffs(
                    dim,
                    (0..blade_count(dim)).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                );
                let (p1, m1) = v.clifford_pair(&u).unwrap();
                let (p2, _) = v.clifford_pair(&p1).unwrap();
                let (_, m2) = v.clifford_pair(&m1).unwrap();
                let err_p = (p2 - u.scale(vsq)).norm();
                let err_m = (m2 + u.scale(vsq)).norm();
                assert!(err_p < 1e-12 && err_m < 1e-12, "dim {dim}: {err_p} {err_m}");
            }
        }
    }

    #[test]
    fn grade_projection_properties() {
        let mut u = RealMultivector::zero(3);
        u.set_coeff(Blade(0), 1.0);
        u.set_coeff(Blade(0b001), 1.0);
        u.set_coeff(Blade(0b011), 1.0);
        let g1 = u.grade_project(1).unwrap();
        assert_eq!(g1, RealMultivector::basis_vector(3, 0));
        // idempotent
        assert_eq!(g1.grade_project(1).unwrap(), g1);
        // projections sum to the identity
        let mut sum = RealMultivector::zero(3);
        for k in 0..=3 {
            sum = sum + u.grade_project(k).unwrap();
        }
        assert_eq!(sum, u);
        // out of range
        assert!(u.grade_project(4).is_err());
    }

    #[test]
    fn symbol_map_matches_clifford_pair() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for dim in 1..=4 {
            let xi: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v = RealMultivector::vector(dim, &xi);
            let u = RealMultivector::from_coeffs(
                dim,
                (0..blade_count(dim)).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let (plus, minus) = v.clifford_pair(&u).unwrap();
            assert!((symbol_map(&xi, true, &u) - plus).norm() < 1e-14);
            assert!((symbol_map(&xi, false, &u) - minus).norm() < 1e-14);
        }
    }
}
