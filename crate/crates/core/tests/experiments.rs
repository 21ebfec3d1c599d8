//! Cross-module experiments: the divergence-form roundtrip through the
//! spectral solver and the stability of the interior-estimate measurement.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dirac_beltrami::coefficient::random_smooth_coefficient;
use dirac_beltrami::divform::{self, extract_scalar, off_even_fraction, DivFormCoefficient};
use dirac_beltrami::montel::{self, FamilyConfig, GenerationMode};
use dirac_beltrami::solver::{planar, solve, SolveOptions};
use dirac_beltrami::{BoxRegion, CoefficientStructure, GridSpec, SubdomainSpec};

/// F = solve(cayley(A), H) with even monogenic H stays in grades {0, 2}
/// and the scalar extraction passes its gate; the iteration preserves the
/// even subspace exactly for the grade-1-only Cayley coefficient.
#[test]
fn solve_roundtrip_preserves_even_grades_and_extracts() {
    let spec = GridSpec::two_pi(2, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    // smooth symmetric elliptic A, bump-localized so the lifted coefficient
    // has an interior support margin
    let bump = SubdomainSpec {
        u: BoxRegion::new(0.375, 0.625).unwrap(),
        v: BoxRegion::new(0.25, 0.75).unwrap(),
    };
    let noise: Vec<dirac_beltrami::MultivectorField> = (0..3)
        .map(|_| dirac_beltrami::grid::random_band_limited(spec, 2, &mut rng))
        .collect();
    let nb = spec.n_blades();
    let a = DivFormCoefficient::from_fn(spec, 0.5, 2.0, |x| {
        let node = nearest_node(spec, x);
        let chi = bump.cutoff(x, spec.box_len);
        let s = 0.3 * chi;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0 + s * noise[0].values()[node * nb],
                s * noise[1].values()[node * nb],
                s * noise[1].values()[node * nb],
                1.0 + s * noise[2].values()[node * nb],
            ],
        )
    })
    .unwrap();
    let m = divform::cayley(&a).unwrap();
    assert_eq!(m.structure(), CoefficientStructure::GradeOneOnly);

    // even monogenic input with an affine scalar part: the lift of f(z) = z
    let h = planar::lift_complex_poly(
        &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        &[],
    );
    let (f, report) = solve(&m, &h, SolveOptions::default()).unwrap();
    assert!(report.converged);
    // the iteration must not leak outside grades {0, 2}
    let off = off_even_fraction(&f);
    assert!(off < 1e-12, "odd-grade leakage {off}");
    let u = extract_scalar(&f).unwrap();
    assert!((u.slope[0] - 1.0).abs() < 1e-12);
    assert!(u.slope[1].abs() < 1e-12);
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

/// The interior C^j-type ratio stays within a factor 2 when the family is
/// doubled with the same seed extension (prefix-stable generation).
#[test]
fn interior_estimate_stable_under_family_doubling() {
    let spec = GridSpec::two_pi(2, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let m = random_smooth_coefficient(
        spec,
        CoefficientStructure::GradePreserving,
        0.3,
        2,
        Some(BoxRegion::new(0.25, 0.75).unwrap()),
        &mut rng,
    )
    .unwrap();
    let u = BoxRegion::new(0.25, 0.75).unwrap();
    let mut max_ratios = Vec::new();
    for count in [16usize, 32] {
        let family = montel::generate_family(
            &m,
            FamilyConfig {
                count,
                degree_max: 4,
                seed: 13,
                mode: GenerationMode::Independent,
                solve: SolveOptions::default(),
            },
        )
        .unwrap();
        let report = montel::interior_estimate_check(&family, u).unwrap();
        assert!(report.max_ratio.is_finite());
        max_ratios.push(report.max_ratio);
    }
    // doubling can only add members, so the max ratio is monotone, and the
    // stability claim is that it does not blow up
    assert!(max_ratios[1] >= max_ratios[0] - 1e-12);
    assert!(
        max_ratios[1] <= 2.0 * max_ratios[0],
        "interior ratio jumped from {} to {}",
        max_ratios[0],
        max_ratios[1]
    );
}

/// Mean-mode defect identity: for a converged solve the unprojected residual
/// is carried entirely by the gauge modes, whose dominant part is the mean.
#[test]
fn unprojected_residual_is_the_gauge_defect() {
    let spec = GridSpec::two_pi(2, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let m = random_smooth_coefficient(
        spec,
        CoefficientStructure::GradePreserving,
        0.5,
        2,
        Some(BoxRegion::new(0.25, 0.75).unwrap()),
        &mut rng,
    )
    .unwrap();
    let mut coeff = dirac_beltrami::Multivector::zero(2);
    coeff.coeffs_mut()[0] = 1.0;
    coeff.coeffs_mut()[1] = 1.0;
    coeff.coeffs_mut()[3] = 0.5;
    let h = dirac_beltrami::make_monogenic(&dirac_beltrami::PolyMultivector::monomial(
        &[1, 1],
        coeff,
    ))
    .unwrap();
    let opts = SolveOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let (_, report) = solve(&m, &h, opts).unwrap();
    assert!(report.converged);
    let res = report.residual;
    // absolute^2 = projected^2 + (gauge residual)^2; the gauge part consists
    // of the mean defect plus the pure-nyquist content of the products,
    // which is small (spectral tail of the C^1 bump) but not rounding-level
    let gauge = (res.absolute.powi(2) - res.projected_absolute.powi(2))
        .max(0.0)
        .sqrt();
    let mean_part = res.mean_defect * spec.volume().sqrt();
    assert!(gauge >= mean_part * (1.0 - 1e-12));
    assert!(
        gauge - mean_part <= 1e-3 * mean_part,
        "nyquist remainder too large: gauge {gauge} vs mean path {mean_part}"
    );
}
