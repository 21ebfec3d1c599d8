//! The operators d, delta, D+, D-, the laplacian, the inverse Dirac (Cauchy)
//! transform and the Beurling-type transform, all as exact Fourier
//! multipliers on the periodic grid.
//!
//! Per mode, with m+(xi) u = xi^u + xi-|u and m-(xi) u = xi^u - xi-|u:
//!
//! * d       <-> i xi^ .
//! * delta   <-> i xi-| .
//! * D+-     <-> i m+-(xi), so (D+)^2 = -(D-)^2 = laplacian.
//! * cauchy  <-> sigma-(xi) / |xi|^2 with sigma- = i m-(xi), using
//!   sigma-(xi)^2 = |xi|^2 id; the inverse of D- on the gauge complement.
//! * beurling <-> -m+(xi) m-(xi) / |xi|^2 = D+ o (D-)^{-1}, a real orthogonal
//!   matrix per mode, hence unitary away from the gauge modes.
//!
//! Gauge: the torus forces D- to have a kernel. Every axis bin at nyquist is
//! treated as frequency zero (this keeps real fields real), so the effective
//! kernel is the set of modes whose effective frequency vanishes: the mean
//! mode plus pure-nyquist combinations. Inverse operators annihilate exactly
//! those modes, and [`gauge_project`] removes them.

use num_complex::Complex64;

use crate::algebra::{contract_accumulate, symbol_apply, wedge_accumulate, Multivector};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MultivectorField, SpectralField};
use crate::poly::PolyMultivector;

/// Which multiplier an operator applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    ExteriorD,
    InteriorDelta,
    DiracPlus,
    DiracMinus,
    Laplacian,
    InverseLaplacian,
    Cauchy,
    Beurling,
}

/// Structural properties of an operator; verified numerically, not asserted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OperatorFlags {
    pub annihilates_mean: bool,
    pub unitary_on_gauge_complement: bool,
    pub self_adjoint: bool,
    pub skew_adjoint: bool,
}

impl OperatorKind {
    pub fn flags(self) -> OperatorFlags {
        use OperatorKind::*;
        match self {
            ExteriorD | InteriorDelta => OperatorFlags {
                annihilates_mean: true,
                unitary_on_gauge_complement: false,
                self_adjoint: false,
                skew_adjoint: false,
            },
            DiracPlus => OperatorFlags {
                annihilates_mean: true,
                unitary_on_gauge_complement: false,
                self_adjoint: false,
                skew_adjoint: true,
            },
            DiracMinus => OperatorFlags {
                annihilates_mean: true,
                unitary_on_gauge_complement: false,
                self_adjoint: true,
                skew_adjoint: false,
            },
            Laplacian | InverseLaplacian | Cauchy => OperatorFlags {
                annihilates_mean: true,
                unitary_on_gauge_complement: false,
                self_adjoint: true,
                skew_adjoint: false,
            },
            Beurling => OperatorFlags {
                annihilates_mean: true,
                unitary_on_gauge_complement: true,
                self_adjoint: false,
                skew_adjoint: false,
            },
        }
    }
}

/// A Fourier-multiplier operator bound to a grid.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    kind: OperatorKind,
    spec: GridSpec,
    flags: OperatorFlags,
}

/// Effective frequency of a mode: per-axis, with nyquist bins mapped to zero.
pub fn effective_frequency(spec: &GridSpec, bins: &[usize], out: &mut [f64]) {
    for (axis, &bin) in bins.iter().enumerate() {
        out[axis] = if spec.is_nyquist(bin) {
            0.0
        } else {
            spec.frequency(bin)
        };
    }
}

fn mode_bins(spec: &GridSpec, mut flat: usize, out: &mut [usize]) {
    for axis in (0..spec.dim).rev() {
        out[axis] = flat % spec.points;
        flat /= spec.points;
    }
}

impl SpectralOperator {
    pub fn new(kind: OperatorKind, spec: GridSpec) -> Self {
        let op = SpectralOperator {
            kind,
            spec,
            flags: kind.flags(),
        };
        #[cfg(debug_assertions)]
        op.debug_verify_flags();
        op
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn flags(&self) -> OperatorFlags {
        self.flags
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Apply the per-mode symbol to one coefficient slice.
    pub fn apply_mode(&self, xi_eff: &[f64], input: &[Complex64], out: &mut [Complex64]) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); input.len()];
        self.apply_mode_with_scratch(xi_eff, input, out, &mut scratch);
    }

    fn apply_mode_with_scratch(
        &self,
        xi_eff: &[f64],
        input: &[Complex64],
        out: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        for o in out.iter_mut() {
            *o = Complex64::new(0.0, 0.0);
        }
        let xi_sq: f64 = xi_eff.iter().map(|x| x * x).sum();
        match self.kind {
            OperatorKind::ExteriorD => {
                wedge_accumulate(xi_eff, input, out);
                rotate_i(out);
            }
            OperatorKind::InteriorDelta => {
                contract_accumulate(xi_eff, 1.0, input, out);
                rotate_i(out);
            }
            OperatorKind::DiracPlus => {
                symbol_apply(xi_eff, true, input, out);
                rotate_i(out);
            }
            OperatorKind::DiracMinus => {
                symbol_apply(xi_eff, false, input, out);
                rotate_i(out);
            }
            OperatorKind::Laplacian => {
                for (o, v) in out.iter_mut().zip(input) {
                    *o = -xi_sq * v;
                }
            }
            OperatorKind::InverseLaplacian => {
                if xi_sq > 0.0 {
                    for (o, v) in out.iter_mut().zip(input) {
                        *o = -v / xi_sq;
                    }
                }
            }
            OperatorKind::Cauchy => {
                if xi_sq > 0.0 {
                    symbol_apply(xi_eff, false, input, out);
                    rotate_i(out);
                    for o in out.iter_mut() {
                        *o /= xi_sq;
                    }
                }
            }
            OperatorKind::Beurling => {
                if xi_sq > 0.0 {
                    for s in scratch.iter_mut() {
                        *s = Complex64::new(0.0, 0.0);
                    }
                    symbol_apply(xi_eff, false, input, scratch);
                    symbol_apply(xi_eff, true, scratch, out);
                    for o in out.iter_mut() {
                        *o = -*o / xi_sq;
                    }
                }
            }
        }
    }

    /// Densified 2^n x 2^n symbol matrix at one mode, for oracle comparisons.
    pub fn symbol_matrix(&self, bins: &[usize]) -> nalgebra::DMatrix<Complex64> {
        let nb = self.spec.n_blades();
        let mut xi = vec![0.0; self.spec.dim];
        effective_frequency(&self.spec, bins, &mut xi);
        let mut mat = nalgebra::DMatrix::zeros(nb, nb);
        let mut input = vec![Complex64::new(0.0, 0.0); nb];
        let mut out = vec![Complex64::new(0.0, 0.0); nb];
        for col in 0..nb {
            input.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            input[col] = Complex64::new(1.0, 0.0);
            self.apply_mode(&xi, &input, &mut out);
            for row in 0..nb {
                mat[(row, col)] = out[row];
            }
        }
        mat
    }

    pub fn apply_spectral(&self, f: &SpectralField) -> SpectralField {
        let spec = self.spec;
        assert_eq!(f.spec(), spec);
        let nb = spec.n_blades();
        let mut out = SpectralField::zero(spec);
        let mut bins = vec![0usize; spec.dim];
        let mut xi = vec![0.0; spec.dim];
        let mut buf = vec![Complex64::new(0.0, 0.0); nb];
        let mut scratch = vec![Complex64::new(0.0, 0.0); nb];
        for mode in 0..spec.node_count() {
            mode_bins(&spec, mode, &mut bins);
            effective_frequency(&spec, &bins, &mut xi);
            self.apply_mode_with_scratch(&xi, f.mode_slice(mode), &mut buf, &mut scratch);
            out.data_mut()[mode * nb..(mode + 1) * nb].copy_from_slice(&buf);
        }
        out
    }

    /// Symbolic action on the polynomial part, where the operator has one.
    fn apply_poly(&self, p: &PolyMultivector) -> Result<PolyMultivector> {
        match self.kind {
            OperatorKind::ExteriorD => Ok(p.d()),
            OperatorKind::InteriorDelta => Ok(p.delta()),
            OperatorKind::DiracPlus => Ok(p.dirac(true)),
            OperatorKind::DiracMinus => Ok(p.dirac(false)),
            OperatorKind::Laplacian => Ok(p.laplacian()),
            _ => Err(Error::PolynomialPartUnsupported),
        }
    }

    /// Apply to a field: spectral on the periodic part, exact symbolic
    /// differentiation on the polynomial part.
    pub fn apply(&self, f: &MultivectorField) -> Result<MultivectorField> {
        let mut out = self.apply_spectral(&f.fft()).ifft_real();
        if let Some(poly) = f.poly() {
            let image = self.apply_poly(poly)?;
            if !image.is_zero() {
                out.set_poly(Some(image));
            }
        }
        Ok(out)
    }

    #[cfg(debug_assertions)]
    fn debug_verify_flags(&self) {
        use std::collections::HashSet;
        use std::sync::Mutex;
        // verify once per (kind, grid) signature so hot loops stay linear
        static SEEN: Mutex<Option<HashSet<(OperatorKind, usize, usize, u64)>>> =
            Mutex::new(None);
        let key = (
            self.kind,
            self.spec.dim,
            self.spec.points,
            self.spec.box_len.to_bits(),
        );
        {
            let mut guard = SEEN.lock().unwrap();
            let set = guard.get_or_insert_with(HashSet::new);
            if !set.insert(key) {
                return;
            }
        }
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let report = verify_operator_flags(self, &mut rng, 3);
        debug_assert!(
            report.iter().all(|(_, err, tol)| err <= tol),
            "operator {:?} flag verification failed: {:?}",
            self.kind,
            report
        );
    }
}

fn rotate_i(values: &mut [Complex64]) {
    for v in values.iter_mut() {
        *v = Complex64::new(-v.im, v.re);
    }
}

/// Remove every gauge mode (effective frequency zero: mean and pure-nyquist
/// combinations) from a spectral field.
pub fn gauge_project_spectral(f: &mut SpectralField) {
    let spec = f.spec();
    let nb = spec.n_blades();
    let n = spec.points;
    let dim = spec.dim;
    let mut bins = vec![0usize; dim];
    for mode in 0..spec.node_count() {
        mode_bins(&spec, mode, &mut bins);
        if bins.iter().all(|&b| b == 0 || spec.is_nyquist(b)) {
            for b in 0..nb {
                f.data_mut()[mode * nb + b] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let _ = n;
}

/// Gauge projection of a physical field (periodic part only).
pub fn gauge_project(f: &MultivectorField) -> MultivectorField {
    let mut s = f.fft();
    gauge_project_spectral(&mut s);
    let mut out = s.ifft_real();
    out.set_poly(f.poly().cloned());
    out
}

pub fn apply_d(f: &MultivectorField) -> Result<MultivectorField> {
    SpectralOperator::new(OperatorKind::ExteriorD, f.spec()).apply(f)
}

pub fn apply_delta(f: &MultivectorField) -> Result<MultivectorField> {
    SpectralOperator::new(OperatorKind::InteriorDelta, f.spec()).apply(f)
}

pub fn apply_dirac(plus: bool, f: &MultivectorField) -> Result<MultivectorField> {
    let kind = if plus {
        OperatorKind::DiracPlus
    } else {
        OperatorKind::DiracMinus
    };
    SpectralOperator::new(kind, f.spec()).apply(f)
}

pub fn laplacian(f: &MultivectorField) -> Result<MultivectorField> {
    SpectralOperator::new(OperatorKind::Laplacian, f.spec()).apply(f)
}

/// Periodic analog of the Cauchy transform: inverse of D- on the gauge
/// complement; the gauge modes of the output are zero.
pub fn cauchy_transform(f: &MultivectorField) -> Result<MultivectorField> {
    SpectralOperator::new(OperatorKind::Cauchy, f.spec()).apply(f)
}

/// Periodic analog of the Beurling transform: S = D+ o (D-)^{-1}, unitary on
/// the gauge complement, gauge modes mapped to zero.
pub fn beurling_transform(f: &MultivectorField) -> Result<MultivectorField> {
    SpectralOperator::new(OperatorKind::Beurling, f.spec()).apply(f)
}

/// Discrete L2 inner product h^n sum <f(x), g(x)> including polynomial parts.
pub fn field_inner(f: &MultivectorField, g: &MultivectorField) -> f64 {
    assert_eq!(f.spec(), g.spec());
    let spec = f.spec();
    let mut products = Vec::with_capacity(spec.node_count());
    if f.poly().is_none() && g.poly().is_none() {
        let nb = spec.n_blades();
        for node in 0..spec.node_count() {
            let a = &f.values()[node * nb..(node + 1) * nb];
            let b = &g.values()[node * nb..(node + 1) * nb];
            products.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
        }
    } else {
        for node in 0..spec.node_count() {
            let a = f.value_at(node);
            let b = g.value_at(node);
            products.push(a.inner(&b));
        }
    }
    spec.cell_volume() * crate::grid::pairwise_sum(&products)
}

/// Numerically verify an operator's flag set on seeded random band-limited
/// fields. Returns (check name, observed error, tolerance) triples.
pub fn verify_operator_flags<R: rand::Rng>(
    op: &SpectralOperator,
    rng: &mut R,
    trials: usize,
) -> Vec<(String, f64, f64)> {
    let spec = op.spec();
    let kmax = (spec.points / 2).saturating_sub(1).min(spec.points / 3);
    let mut out = Vec::new();
    for _ in 0..trials {
        let f = crate::grid::random_band_limited(spec, kmax, rng);
        let g = crate::grid::random_band_limited(spec, kmax, rng);
        let scale = f.l2_norm(None).max(g.l2_norm(None)).max(1e-30);
        let of = op.apply(&f).expect("band-limited fields have no poly part");
        let og = op.apply(&g).expect("band-limited fields have no poly part");
        if op.flags().annihilates_mean {
            let constant = MultivectorField::from_fn(spec, |_| {
                Multivector::scalar(spec.dim, 1.0)
            });
            let image = op.apply(&constant).unwrap();
            out.push(("annihilates_mean".into(), image.l2_norm(None), 1e-11 * spec.volume().sqrt()));
        }
        if op.flags().unitary_on_gauge_complement {
            let projected = gauge_project(&f);
            let err = (of.l2_norm(None) - projected.l2_norm(None)).abs() / scale;
            out.push(("unitary_on_gauge_complement".into(), err, 1e-11));
        }
        if op.flags().self_adjoint {
            let err = (field_inner(&of, &g) - field_inner(&f, &og)).abs()
                / (scale * scale).max(1e-30);
            out.push(("self_adjoint".into(), err, 1e-10));
        }
        if op.flags().skew_adjoint {
            let err = (field_inner(&of, &g) + field_inner(&f, &og)).abs()
                / (scale * scale).max(1e-30);
            out.push(("skew_adjoint".into(), err, 1e-10));
        }
    }
    out
}
