//! Named operator-identity suites with per-check tolerances, used by the
//! verification command and the acceptance gate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{blade_count, Blade, Multivector, RealMultivector};
use crate::error::Result;
use crate::grid::{random_band_limited, GridSpec, MultivectorField};
use crate::operators::{
    apply_d, apply_dirac, cauchy_transform, field_inner, gauge_project, laplacian,
    SpectralOperator,
};

/// Deliberate corruption hooks for negative-control runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorruptionHook {
    None,
    /// Flip the sign of the interior-derivative multiplier.
    FlipDeltaSign,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentitySuiteReport {
    pub grid: GridSpec,
    pub seed: u64,
    pub trials: usize,
    pub corruption: CorruptionHook,
    pub checks: Vec<IdentityCheck>,
    pub all_pass: bool,
}

fn hooked_delta(hook: CorruptionHook, f: &MultivectorField) -> Result<MultivectorField> {
    let out = crate::operators::apply_delta(f)?;
    Ok(match hook {
        CorruptionHook::None => out,
        CorruptionHook::FlipDeltaSign => out.scale(-1.0),
    })
}

fn hooked_dirac(
    hook: CorruptionHook,
    plus: bool,
    f: &MultivectorField,
) -> Result<MultivectorField> {
    match hook {
        CorruptionHook::None => apply_dirac(plus, f),
        CorruptionHook::FlipDeltaSign => {
            let d = apply_d(f)?;
            let del = hooked_delta(hook, f)?;
            if plus {
                d.add(&del)
            } else {
                d.sub(&del)
            }
        }
    }
}

/// Run the operator and exterior-algebra identity suites on random
/// band-limited fields; every check reports its worst observed error.
pub fn run_identity_suite(
    spec: GridSpec,
    trials: usize,
    seed: u64,
    hook: CorruptionHook,
) -> Result<IdentitySuiteReport> {
    let kmax = spec.points / 3;
    let mut checks: Vec<IdentityCheck> = Vec::new();
    let mut record = |name: &str, max_error: f64, tolerance: f64| {
        checks.push(IdentityCheck {
            name: name.into(),
            max_error,
            tolerance,
            pass: max_error <= tolerance,
        });
    };

    // trials are independent; run them in parallel on per-trial seed streams
    // and fold the worst errors (max is order-independent, so reports stay
    // byte-identical for any thread count)
    use rayon::prelude::*;
    let trial_errors: Vec<[f64; 10]> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> crate::error::Result<[f64; 10]> {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let f = random_band_limited(spec, kmax, &mut rng);
            let g = random_band_limited(spec, kmax, &mut rng);
            let mut e = [0.0f64; 10];
            let lap = laplacian(&f)?;
            let lap_scale = lap.l2_norm(None).max(1e-30);
            let dpp = hooked_dirac(hook, true, &hooked_dirac(hook, true, &f)?)?;
            e[0] = dpp.sub(&lap)?.l2_norm(None) / lap_scale;
            let dmm = hooked_dirac(hook, false, &hooked_dirac(hook, false, &f)?)?;
            e[1] = dmm.add(&lap)?.l2_norm(None) / lap_scale;
            let pm = hooked_dirac(hook, true, &hooked_dirac(hook, false, &f)?)?;
            let mp = hooked_dirac(hook, false, &hooked_dirac(hook, true, &f)?)?;
            e[2] = pm.add(&mp)?.l2_norm(None) / lap_scale;

            let pair_scale = (f.l2_norm(None) * g.l2_norm(None)).max(1e-30);
            let dp_f = hooked_dirac(hook, true, &f)?;
            let dp_g = hooked_dirac(hook, true, &g)?;
            e[3] = (field_inner(&dp_f, &g) + field_inner(&f, &dp_g)).abs() / pair_scale;
            let dm_f = hooked_dirac(hook, false, &f)?;
            let dm_g = hooked_dirac(hook, false, &g)?;
            e[4] = (field_inner(&dm_f, &g) - field_inner(&f, &dm_g)).abs() / pair_scale;

            let d2 = apply_d(&apply_d(&f)?)?;
            e[5] = d2.l2_norm(None) / lap_scale;
            let delta2 = hooked_delta(hook, &hooked_delta(hook, &f)?)?;
            e[6] = delta2.l2_norm(None) / lap_scale;
            let df = apply_d(&f)?;
            let delta_g = hooked_delta(hook, &g)?;
            e[7] = (field_inner(&df, &g) + field_inner(&f, &delta_g)).abs() / pair_scale;

            let projected = gauge_project(&g);
            let s = crate::operators::beurling_transform(&g)?;
            e[8] = (s.l2_norm(None) - projected.l2_norm(None)).abs()
                / projected.l2_norm(None).max(1e-30);
            let back = hooked_dirac(hook, false, &cauchy_transform(&projected)?)?;
            e[9] = back.sub(&projected)?.l2_norm(None) / projected.l2_norm(None).max(1e-30);
            Ok(e)
        })
        .collect::<crate::error::Result<_>>()?;
    let mut worst = [0.0f64; 10];
    for e in &trial_errors {
        for (w, v) in worst.iter_mut().zip(e) {
            *w = w.max(*v);
        }
    }
    record("dirac_plus_squares_to_laplacian", worst[0], 1e-10);
    record("dirac_minus_squares_to_neg_laplacian", worst[1], 1e-10);
    record("dirac_plus_minus_anticommute", worst[2], 1e-10);
    record("dirac_plus_skew_adjoint", worst[3], 1e-11);
    record("dirac_minus_self_adjoint", worst[4], 1e-11);
    record("d_squared_zero", worst[5], 1e-11);
    record("delta_squared_zero", worst[6], 1e-11);
    record("d_delta_adjoint_pair", worst[7], 1e-11);
    record("beurling_unitary_on_gauge_complement", worst[8], 1e-11);
    record("cauchy_inverts_dirac_minus", worst[9], 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // exterior-algebra identities (dimension of the grid, capped exhaustives)
    let dim = spec.dim;
    let mut err_clifford = 0.0f64;
    for _ in 0..100 {
        use rand::Rng;
        let comps: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vsq: f64 = comps.iter().map(|c| c * c).sum();
        let v = RealMultivector::vector(dim, &comps);
        let u = RealMultivector::from_coeffs(
            dim,
            (0..blade_count(dim)).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let (p1, m1) = v.clifford_pair(&u)?;
        let (p2, _) = v.clifford_pair(&p1)?;
        let (_, m2) = v.clifford_pair(&m1)?;
        let scale = u.norm().max(1e-30) * vsq.max(1e-30);
        err_clifford = err_clifford
            .max((p2.clone() - u.scale(vsq)).norm() / scale)
            .max((m2.clone() + u.scale(vsq)).norm() / scale);
    }
    record("clifford_symbol_squares", err_clifford, 1e-12);

    let exhaustive_dim = dim.min(4);
    let mut err_wedge = 0.0f64;
    let mut err_adjoint = 0.0f64;
    for a in 0..(1u32 << exhaustive_dim) {
        for b in 0..(1u32 << exhaustive_dim) {
            let ea = RealMultivector::basis_blade(exhaustive_dim, Blade(a));
            let eb = RealMultivector::basis_blade(exhaustive_dim, Blade(b));
            let ab = ea.wedge(&eb)?;
            let ba = eb.wedge(&ea)?;
            let sign = if (Blade(a).grade() * Blade(b).grade()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            err_wedge = err_wedge.max((ab.clone() - ba.scale(sign)).norm());
            for axis in 0..exhaustive_dim {
                let v = RealMultivector::basis_vector(exhaustive_dim, axis);
                let lhs = v.wedge(&ea)?.inner(&eb);
                let rhs = ea.inner(&v.interior(&eb)?);
                err_adjoint = err_adjoint.max((lhs - rhs).abs());
            }
        }
    }
    record("wedge_graded_anticommutativity_exhaustive", err_wedge, 0.0);
    record("interior_adjoint_of_wedge_exhaustive", err_adjoint, 0.0);

    // spectral symbols match the algebra symbol maps at lattice frequencies
    let dplus = SpectralOperator::new(crate::operators::OperatorKind::DiracPlus, spec);
    let mut err_symbol = 0.0f64;
    for trial in 0..8usize {
        let bins: Vec<usize> = (0..dim)
            .map(|axis| (trial * 3 + axis * 5 + 1) % spec.points)
            .collect();
        let mut xi = vec![0.0; dim];
        crate::operators::effective_frequency(&spec, &bins, &mut xi);
        let mat = dplus.symbol_matrix(&bins);
        for col in 0..blade_count(dim) {
            let u = Multivector::<num_complex::Complex64>::basis_blade(dim, Blade(col as u32));
            let want = crate::algebra::symbol_map(&xi, true, &u);
            for row in 0..blade_count(dim) {
                let expect = want.coeffs()[row] * num_complex::Complex64::new(0.0, 1.0);
                err_symbol = err_symbol.max((mat[(row, col)] - expect).norm());
            }
        }
    }
    record("spectral_symbols_match_algebra", err_symbol, 0.0);

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(IdentitySuiteReport {
        grid: spec,
        seed,
        trials,
        corruption: hook,
        checks,
        all_pass,
    })
}
