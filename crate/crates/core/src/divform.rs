//! Cayley-transform bridge between div A grad u = 0 and the Dirac-Beltrami
//! system: M = (I - A)(I + A)^{-1} acting on grade 1, the grade-{0,2} lift
//! F = u + v, and an independent spectral reference solver for the periodic
//! corrector problem div A (xi0 + grad w) = 0.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::Multivector;
use crate::coefficient::{embed_grade1, CoefficientField};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MultivectorField, NdFft};
use crate::operators::{OperatorKind, SpectralOperator};
use crate::poly::PolyMultivector;

/// An elliptic, normal coefficient A(x) in L^inf(box, L(R^n)).
#[derive(Clone)]
pub struct DivFormCoefficient {
    spec: GridSpec,
    blocks: Vec<f64>,
    lambda: f64,
    lambda_up: f64,
}

impl DivFormCoefficient {
    /// Build from a per-node matrix function and verify at every node that
    /// <A v, v> >= lambda |v|^2, ||A|| <= Lambda and [A*, A] = 0.
    pub fn from_fn(
        spec: GridSpec,
        lambda: f64,
        lambda_up: f64,
        mut f: impl FnMut(&[f64]) -> DMatrix<f64>,
    ) -> Result<Self> {
        let n = spec.dim;
        let mut blocks = vec![0.0; spec.node_count() * n * n];
        for node in 0..spec.node_count() {
            let x = spec.node_position(node);
            let a = f(&x);
            assert_eq!(a.nrows(), n);
            assert_eq!(a.ncols(), n);
            for r in 0..n {
                for c in 0..n {
                    blocks[(node * n + r) * n + c] = a[(r, c)];
                }
            }
        }
        Self::from_blocks(spec, blocks, lambda, lambda_up)
    }

    pub fn from_blocks(
        spec: GridSpec,
        blocks: Vec<f64>,
        lambda: f64,
        lambda_up: f64,
    ) -> Result<Self> {
        let n = spec.dim;
        assert_eq!(blocks.len(), spec.node_count() * n * n);
        if !(lambda > 0.0 && lambda <= lambda_up && lambda_up.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ellipticity constants must satisfy 0 < lambda <= Lambda, got {lambda}, {lambda_up}"
            )));
        }
        let out = DivFormCoefficient {
            spec,
            blocks,
            lambda,
            lambda_up,
        };
        for node in 0..spec.node_count() {
            let a = out.block_at(node);
            let sym = (&a + a.transpose()) * 0.5;
            let min_eig = sym
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min_eig < lambda - 1e-12 {
                return Err(Error::EllipticityViolation {
                    node,
                    detail: format!("<Av,v> >= {min_eig:.6} < lambda = {lambda}"),
                });
            }
            let top = a.clone().svd(false, false).singular_values[0];
            if top > lambda_up + 1e-12 {
                return Err(Error::EllipticityViolation {
                    node,
                    detail: format!("||A|| = {top:.6} > Lambda = {lambda_up}"),
                });
            }
            let comm = a.transpose() * &a - &a * a.transpose();
            let defect = comm.norm();
            if defect > 1e-10 * top.max(1.0).powi(2) {
                return Err(Error::NotNormal { node, defect });
            }
        }
        Ok(out)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lambda_upper(&self) -> f64 {
        self.lambda_up
    }

    pub fn block_at(&self, node: usize) -> DMatrix<f64> {
        let n = self.spec.dim;
        DMatrix::from_fn(n, n, |r, c| self.blocks[(node * n + r) * n + c])
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.spec.dim;
        for node in 0..self.spec.node_count() {
            for r in 0..n {
                for c in 0..r {
                    let a = self.blocks[(node * n + r) * n + c];
                    let b = self.blocks[(node * n + c) * n + r];
                    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Pointwise image A(x) q(x) of a grade-1 field.
    pub fn apply_grade1(&self, q: &MultivectorField) -> MultivectorField {
        assert_eq!(q.spec(), self.spec);
        let n = self.spec.dim;
        let nb = self.spec.n_blades();
        let flat = q.flatten_poly();
        let mut out = MultivectorField::zero(self.spec);
        for node in 0..self.spec.node_count() {
            for r in 0..n {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += self.blocks[(node * n + r) * n + c]
                        * flat.values()[node * nb + (1 << c)];
                }
                out.values_mut()[node * nb + (1 << r)] = acc;
            }
        }
        out
    }
}

/// Upper bound on the Cayley norm over the eigenvalue region
/// {Re mu >= lambda, |mu| <= Lambda} of a normal elliptic matrix.
pub fn cayley_norm_bound(lambda: f64, lambda_up: f64) -> f64 {
    (((1.0 - 2.0 * lambda + lambda_up * lambda_up)
        / (1.0 + 2.0 * lambda + lambda_up * lambda_up))
        .max(0.0))
    .sqrt()
}

/// Sharper bound for symmetric A: eigenvalues real in [lambda, Lambda].
pub fn cayley_norm_bound_symmetric(lambda: f64, lambda_up: f64) -> f64 {
    ((1.0 - lambda) / (1.0 + lambda))
        .abs()
        .max(((lambda_up - 1.0) / (lambda_up + 1.0)).abs())
}

/// The Cayley transform M(x) = (I - A(x))(I + A(x))^{-1}, acting on grade 1
/// and zero on every other grade; certifies M < 1 and M <= bound(lambda, Lambda).
pub fn cayley(a: &DivFormCoefficient) -> Result<CoefficientField> {
    let spec = a.spec();
    let n = spec.dim;
    let nb = spec.n_blades();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut blocks = vec![0.0; spec.node_count() * nb * nb];
    for node in 0..spec.node_count() {
        let ablock = a.block_at(node);
        let plus = &eye + &ablock;
        let inv = plus.clone().try_inverse().ok_or(Error::EllipticityViolation {
            node,
            detail: "I + A singular".into(),
        })?;
        let m_small = (&eye - &ablock) * inv;
        let big = embed_grade1(&m_small, n);
        for r in 0..nb {
            for c in 0..nb {
                blocks[(node * nb + r) * nb + c] = big[(r, c)];
            }
        }
    }
    let field = CoefficientField::from_blocks(
        spec,
        blocks,
        crate::coefficient::CoefficientStructure::GradeOneOnly,
    )?;
    let bound = cayley_norm_bound(a.lambda(), a.lambda_upper());
    if field.norm_bound() > bound + 1e-10 {
        return Err(Error::InvalidConfig(format!(
            "cayley norm {} exceeds the lambda/Lambda bound {}",
            field.norm_bound(),
            bound
        )));
    }
    Ok(field)
}

/// Inverse Cayley map A = (I - M)(I + M)^{-1} from the grade-1 block.
pub fn inverse_cayley_block(m_grade1: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m_grade1.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let inv = (&eye + m_grade1).try_inverse().ok_or_else(|| {
        Error::InvalidConfig("I + M singular in inverse Cayley map".into())
    })?;
    Ok((&eye - m_grade1) * inv)
}

/// Affine-plus-periodic scalar solution u(x) = <slope, x> + w(x), w mean-zero.
#[derive(Clone)]
pub struct ScalarSolution {
    spec: GridSpec,
    pub slope: Vec<f64>,
    /// Mean-zero periodic part, one value per node.
    pub periodic: Vec<f64>,
}

impl ScalarSolution {
    pub fn new(spec: GridSpec, slope: Vec<f64>, mut periodic: Vec<f64>) -> Self {
        assert_eq!(slope.len(), spec.dim);
        assert_eq!(periodic.len(), spec.node_count());
        let mean = crate::grid::pairwise_sum(&periodic) / periodic.len() as f64;
        for v in periodic.iter_mut() {
            *v -= mean;
        }
        ScalarSolution {
            spec,
            slope,
            periodic,
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// As a multivector field: grade-0 periodic values plus the affine part.
    pub fn as_field(&self) -> MultivectorField {
        let spec = self.spec;
        let nb = spec.n_blades();
        let mut values = vec![0.0; spec.node_count() * nb];
        for node in 0..spec.node_count() {
            values[node * nb] = self.periodic[node];
        }
        let poly = PolyMultivector::affine_scalar(spec.dim, &self.slope);
        let mut f = MultivectorField::from_values(spec, values, None);
        if !poly.is_zero() {
            f.set_poly(Some(poly));
        }
        f
    }

    /// The gradient du = slope + grad w as a grade-1 grid field.
    pub fn gradient_field(&self) -> MultivectorField {
        let spec = self.spec;
        let nb = spec.n_blades();
        let scalar = self.as_scalar_field();
        let mut out = MultivectorField::zero(spec);
        for axis in 0..spec.dim {
            let d = scalar.derivative_axis(axis);
            for node in 0..spec.node_count() {
                out.values_mut()[node * nb + (1 << axis)] =
                    d.values()[node * nb] + self.slope[axis];
            }
        }
        out
    }

    fn as_scalar_field(&self) -> MultivectorField {
        let spec = self.spec;
        let nb = spec.n_blades();
        let mut values = vec![0.0; spec.node_count() * nb];
        for node in 0..spec.node_count() {
            values[node * nb] = self.periodic[node];
        }
        MultivectorField::from_values(spec, values, None)
    }
}

/// H^{-1}-type discrete norm: sqrt(L^n sum_{xi != 0} |r_hat|^2 / |xi|^2),
/// the L2 norm of grad (-laplacian)^{-1} r.
pub fn h_minus_one_norm(r: &MultivectorField) -> f64 {
    let spec = r.spec();
    let mut s = r.fft();
    s.scale_modes(|spec, bins, v| {
        let mut xi_sq = 0.0;
        for &bin in bins {
            if !spec.is_nyquist(bin) {
                let x = spec.frequency(bin);
                xi_sq += x * x;
            }
        }
        if xi_sq > 0.0 {
            v / xi_sq.sqrt()
        } else {
            num_complex::Complex64::new(0.0, 0.0)
        }
    });
    let _ = spec;
    s.l2_norm()
}

/// Divergence-form residual of u: r = div(A du) = delta(A du), measured in
/// the discrete H^{-1} norm, absolute and relative to ||A du||.
pub fn div_residual(a: &DivFormCoefficient, u: &ScalarSolution) -> Result<(f64, f64)> {
    let du = u.gradient_field();
    let adu = a.apply_grade1(&du);
    let r = crate::operators::apply_delta(&adu)?;
    let abs = h_minus_one_norm(&r);
    let scale = adu.l2_norm(None).max(1e-300);
    Ok((abs, abs / scale))
}

/// Diagnostics of a lift.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LiftReport {
    /// |mean(A du)|: the torus flux obstruction, carried by the affine
    /// grade-2 corrector term.
    pub mean_flux: f64,
    pub div_residual_hminus: f64,
    pub div_residual_relative: f64,
}

/// Residual gate for `lift`: u must approximately solve the equation.
pub const LIFT_GATE: f64 = 1e-3;

/// Lift u to the grade-{0,2} field F = u + v with d v = 0 and
/// delta v = A du (the periodic part solves delta v = P0(A du) spectrally;
/// the flux mean is carried by an affine grade-2 polynomial so the identity
/// holds without projection).
pub fn lift(
    a: &DivFormCoefficient,
    u: &ScalarSolution,
    gate: f64,
) -> Result<(MultivectorField, LiftReport)> {
    let spec = a.spec();
    let (res_abs, res_rel) = div_residual(a, u)?;
    if res_rel > gate {
        return Err(Error::ResidualGate {
            residual: res_rel,
            gate,
        });
    }
    let du = u.gradient_field();
    let adu = a.apply_grade1(&du);
    let mean = adu.node_mean();
    let g = adu.subtract_constant(&mean);

    // v_periodic = d (laplacian)^{-1} g
    let fft = NdFft::new(spec);
    let inv_lap = SpectralOperator::new(OperatorKind::InverseLaplacian, spec);
    let d_op = SpectralOperator::new(OperatorKind::ExteriorD, spec);
    let v_per = fft.inverse_real(&d_op.apply_spectral(&inv_lap.apply_spectral(&fft.forward(&g))));

    // affine grade-2 corrector: delta(m_i x_j e_j ^ e_i) = m_i e_i, d(..) = 0
    let dim = spec.dim;
    let mut v_aff = PolyMultivector::zero(dim);
    for i in 0..dim {
        let mi = mean.coeffs()[1 << i];
        if mi == 0.0 {
            continue;
        }
        let j = (i + 1) % dim;
        let e_j = Multivector::basis_vector(dim, j);
        let e_i = Multivector::basis_vector(dim, i);
        let blade = e_j.wedge(&e_i)?.scale(mi);
        let mut idx = [0u8; crate::algebra::MAX_DIM];
        idx[j] = 1;
        v_aff.add_term(idx, blade);
    }

    let mut f = u.as_field().add(&v_per)?;
    let poly = match f.poly() {
        Some(p) => p.clone() + v_aff,
        None => v_aff,
    };
    if !poly.is_zero() {
        f.set_poly(Some(poly));
    }
    Ok((
        f,
        LiftReport {
            mean_flux: mean.norm(),
            div_residual_hminus: res_abs,
            div_residual_relative: res_rel,
        },
    ))
}

/// Norm fraction of a field outside grades {0, 2}.
pub fn off_even_fraction(f: &MultivectorField) -> f64 {
    let spec = f.spec();
    let nb = spec.n_blades();
    let flat = f.flatten_poly();
    let mut off = 0.0;
    let mut total = 0.0;
    for node in 0..spec.node_count() {
        let s = &flat.values()[node * nb..(node + 1) * nb];
        for (b, v) in s.iter().enumerate() {
            let grade = crate::algebra::Blade(b as u32).grade();
            total += v * v;
            if grade != 0 && grade != 2 {
                off += v * v;
            }
        }
    }
    if total > 0.0 {
        (off / total).sqrt()
    } else {
        0.0
    }
}

/// Recover the scalar solution from a grade-{0,2} field: grade-0 periodic
/// part plus its affine slope. Errors when other grades carry more than
/// 1e-8 of the norm, or the scalar polynomial part is not affine.
pub fn extract_scalar(f: &MultivectorField) -> Result<ScalarSolution> {
    let off = off_even_fraction(f);
    if off > 1e-8 {
        return Err(Error::GradePurity {
            off_grade: off,
            total: 1.0,
        });
    }
    let spec = f.spec();
    let nb = spec.n_blades();
    let dim = spec.dim;
    let mut slope = vec![0.0; dim];
    if let Some(poly) = f.poly() {
        let scalar_part = poly.grade_project(0)?;
        for (idx, coeff) in scalar_part.terms() {
            let total_deg: usize = idx.iter().map(|&e| e as usize).sum();
            let c = coeff.coeff(crate::algebra::Blade(0));
            match total_deg {
                0 => {} // constant offset folds into the periodic mean gauge
                1 => {
                    let axis = idx.iter().position(|&e| e == 1).unwrap();
                    slope[axis] += c;
                }
                _ => {
                    return Err(Error::InvalidConfig(
                        "scalar polynomial part is not affine".into(),
                    ))
                }
            }
        }
    }
    let mut periodic = vec![0.0; spec.node_count()];
    for node in 0..spec.node_count() {
        periodic[node] = f.values()[node * nb];
    }
    Ok(ScalarSolution::new(spec, slope, periodic))
}

/// Report of one reference corrector solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivSolveReport {
    pub iterations: usize,
    pub step_size: f64,
    pub symmetric: bool,
    pub residual_hminus: f64,
    pub residual_relative: f64,
}

/// Solve the periodic corrector problem div A (xi0 + grad w) = 0 by
/// preconditioned Richardson iteration w <- w + tau (-laplacian)^{-1} r.
///
/// The spectral preconditioner turns the residual update into the
/// H^1-representation of the elliptic form; lambda, Lambda give the
/// guaranteed contraction (step 2/(lambda+Lambda) for symmetric A,
/// lambda/Lambda^2 otherwise).
pub fn reference_solve(
    a: &DivFormCoefficient,
    slope: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarSolution, DivSolveReport)> {
    let spec = a.spec();
    assert_eq!(slope.len(), spec.dim);
    let symmetric = a.is_symmetric();
    let (lambda, lam_up) = (a.lambda(), a.lambda_upper());
    let tau = if symmetric {
        2.0 / (lambda + lam_up)
    } else {
        lambda / (lam_up * lam_up)
    };
    let fft = NdFft::new(spec);
    let inv_lap = SpectralOperator::new(OperatorKind::InverseLaplacian, spec);
    let nb = spec.n_blades();

    let mut u = ScalarSolution::new(spec, slope.to_vec(), vec![0.0; spec.node_count()]);
    let mut report = DivSolveReport {
        iterations: 0,
        step_size: tau,
        symmetric,
        residual_hminus: f64::INFINITY,
        residual_relative: f64::INFINITY,
    };
    for k in 1..=max_iter {
        let du = u.gradient_field();
        let adu = a.apply_grade1(&du);
        let r = crate::operators::apply_delta(&adu)?;
        let res = h_minus_one_norm(&r);
        let scale = adu.l2_norm(None).max(1e-300);
        report.iterations = k - 1;
        report.residual_hminus = res;
        report.residual_relative = res / scale;
        if report.residual_relative < tol {
            return Ok((u, report));
        }
        // w <- w + tau (-laplacian)^{-1} r  (inverse laplacian is -1/|xi|^2)
        let correction = fft.inverse_real(&inv_lap.apply_spectral(&fft.forward(&r)));
        let mut periodic = u.periodic.clone();
        for node in 0..spec.node_count() {
            periodic[node] -= tau * correction.values()[node * nb];
        }
        u = ScalarSolution::new(spec, slope.to_vec(), periodic);
    }
    Err(Error::IterationBudget {
        iterations: max_iter,
        residual: report.residual_relative,
    })
}

/// One row of the div-form cross-validation: solve the corrector problem,
/// lift, and compare the two residuals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossValidationRow {
    pub instance: usize,
    pub div_residual_hminus: f64,
    pub beltrami_residual: f64,
    pub cayley_norm: f64,
    pub iterations: usize,
    pub mean_flux: f64,
}

pub fn cross_validate(
    a: &DivFormCoefficient,
    slope: &[f64],
    tol: f64,
    max_iter: usize,
    instance: usize,
) -> Result<CrossValidationRow> {
    let (u, div_report) = reference_solve(a, slope, tol, max_iter)?;
    let m = cayley(a)?;
    let (f, lift_report) = lift(a, &u, LIFT_GATE)?;
    let res = crate::solver::residual(&m, &f)?;
    Ok(CrossValidationRow {
        instance,
        div_residual_hminus: lift_report.div_residual_hminus,
        beltrami_residual: res.absolute,
        cayley_norm: m.norm_bound(),
        iterations: div_report.iterations,
        mean_flux: lift_report.mean_flux,
    })
}

/// Random symmetric matrix field with eigenvalues in [lambda, Lambda],
/// smooth in x, for oracle ensembles.
pub fn random_symmetric_coefficient<R: rand::Rng>(
    spec: GridSpec,
    lambda: f64,
    lambda_up: f64,
    kmax: usize,
    rng: &mut R,
) -> Result<DivFormCoefficient> {
    let n = spec.dim;
    // smooth angle and eigenvalue fields
    let fields: Vec<MultivectorField> = (0..(n * (n + 1) / 2 + n))
        .map(|_| crate::grid::random_band_limited(spec, kmax, rng))
        .collect();
    let nb = spec.n_blades();
    DivFormCoefficient::from_fn(spec, lambda, lambda_up, |x| {
        // build an orthogonal frame from a smooth skew matrix, then scale
        // eigenvalues into [lambda, Lambda]
        let node = nearest_node(spec, x);
        let mut skew = DMatrix::zeros(n, n);
        let mut fi = 0;
        for r in 0..n {
            for c in 0..r {
                let v = fields[fi].values()[node * nb];
                skew[(r, c)] = v;
                skew[(c, r)] = -v;
                fi += 1;
            }
        }
        let q = matrix_exponential(&skew);
        let mut diag = DMatrix::zeros(n, n);
        for i in 0..n {
            let raw = fields[n * (n - 1) / 2 + i].values()[node * nb];
            let t = 0.5 * (raw.tanh() + 1.0);
            diag[(i, i)] = lambda + (lambda_up - lambda) * t;
        }
        &q * diag * q.transpose()
    })
}

/// Random normal (generally non-symmetric) matrix field with the spectrum in
/// {Re mu >= lambda, |mu| <= Lambda}.
pub fn random_normal_coefficient<R: rand::Rng>(
    spec: GridSpec,
    lambda: f64,
    lambda_up: f64,
    kmax: usize,
    rng: &mut R,
) -> Result<DivFormCoefficient> {
    let n = spec.dim;
    let fields: Vec<MultivectorField> = (0..(n * (n - 1) / 2 + 2 * n))
        .map(|_| crate::grid::random_band_limited(spec, kmax, rng))
        .collect();
    let nb = spec.n_blades();
    DivFormCoefficient::from_fn(spec, lambda, lambda_up, |x| {
        let node = nearest_node(spec, x);
        let mut skew = DMatrix::zeros(n, n);
        let mut fi = 0;
        for r in 0..n {
            for c in 0..r {
                let v = fields[fi].values()[node * nb];
                skew[(r, c)] = v;
                skew[(c, r)] = -v;
                fi += 1;
            }
        }
        let q = matrix_exponential(&skew);
        // block-diagonal normal core: real eigenvalues and rotation blocks
        let mut core = DMatrix::zeros(n, n);
        let mut i = 0;
        while i < n {
            let ra = fields[fi].values()[node * nb];
            fi += 1;
            if i + 1 < n {
                let rb = fields[fi].values()[node * nb];
                fi += 1;
                // complex pair a +- i b with a >= lambda, a^2 + b^2 <= Lambda^2
                let a = lambda + (lambda_up * 0.9 - lambda) * 0.5 * (ra.tanh() + 1.0);
                let bmax = (lambda_up * lambda_up - a * a).max(0.0).sqrt();
                let b = bmax * rb.tanh() * 0.9;
                core[(i, i)] = a;
                core[(i + 1, i + 1)] = a;
                core[(i, i + 1)] = -b;
                core[(i + 1, i)] = b;
                i += 2;
            } else {
                let a = lambda + (lambda_up - lambda) * 0.5 * (ra.tanh() + 1.0);
                core[(i, i)] = a;
                i += 1;
            }
        }
        let _ = fi;
        &q * core * q.transpose()
    })
}

fn nearest_node(spec: GridSpec, x: &[f64]) -> usize {
    let h = spec.spacing();
    let mut flat = 0usize;
    for &xi in x {
        let c = ((xi / h).round() as usize) % spec.points;
        flat = flat * spec.points + c;
    }
    flat
}

fn matrix_exponential(skew: &DMatrix<f64>) -> DMatrix<f64> {
    // scaling-and-squaring series; skew input so the result is orthogonal
    let n = skew.nrows();
    let norm = skew.norm();
    let squarings = norm.log2().ceil().max(0.0) as usize + 2;
    let scaled = skew / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut acc = DMatrix::<f64>::identity(n, n);
    for k in 1..=12 {
        term = &term * &scaled / k as f64;
        acc += &term;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    acc
}
