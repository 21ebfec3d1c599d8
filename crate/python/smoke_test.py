#!/usr/bin/env python3
"""Smoke test for the dirac_beltrami_py extension module.

Build and stage the module first:

    cargo build --release -p dirac-beltrami-py
    cp target/release/libdirac_beltrami_py.so python/dirac_beltrami_py.so

then run `python3 python/smoke_test.py`.
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import dirac_beltrami_py as db


def check(name, condition, detail=""):
    status = "PASS" if condition else "FAIL"
    print(f"{status} {name} {detail}")
    if not condition:
        sys.exit(1)


def main():
    # exterior algebra basics
    e1 = db.Multivector.basis_vector(3, 0)
    e2 = db.Multivector.basis_vector(3, 1)
    e12 = e1.wedge(e2)
    check("wedge e1^e2 = e12", e12.coeffs[0b011] == 1.0)
    check("alternation e1^e1 = 0", e1.wedge(e1).norm() == 0.0)
    back = e1.interior(e12)
    check("interior e1 -| e12 = e2", abs(back.coeffs[0b010] - 1.0) < 1e-15)

    # clifford symbol relation: m+(v)^2 = |v|^2 id
    v = db.Multivector(3, [0.0, 0.3, -1.2, 0.0, 0.7, 0.0, 0.0, 0.0])
    u = db.Multivector(3, [1.0, 0.5, 0.0, -0.25, 0.0, 2.0, 0.0, 1.5])
    p1, _ = v.clifford_pair(u)
    p2, _ = v.clifford_pair(p1)
    vsq = 0.3**2 + 1.2**2 + 0.7**2
    err = math.sqrt(sum((a - vsq * b) ** 2 for a, b in zip(p2.coeffs, u.coeffs)))
    check("clifford m+(v)^2 = |v|^2 id", err < 1e-12, f"err={err:.2e}")

    # symbolic monogenic generator: D-(D- P) = 0
    xy = db.PolyMultivector.monomial([1, 1], db.Multivector.scalar(2, 1.0))
    h = db.make_monogenic(xy)
    check("monogenic annihilation", h.dirac(False).max_coeff_abs() == 0.0)
    value = h.evaluate([0.5, 2.0])
    check(
        "monogenic field values",
        abs(value.coeffs[1] - 2.0) < 1e-15 and abs(value.coeffs[2] - 0.5) < 1e-15,
    )

    # harmonic basis dimensions in the plane: two per degree >= 1
    for degree in (1, 2, 3, 4):
        basis = db.harmonic_basis(2, degree)
        check(f"harmonic basis dim (degree {degree})", len(basis) == 2)
        worst = max(q.laplacian().max_coeff_abs() for q in basis)
        check(f"harmonic basis laplacian (degree {degree})", worst < 1e-12)

    # operator identity suite on a small grid
    report = db.verify_identities(2, 16, trials=5, seed=1)
    check("identity suite", report["all_pass"])
    corrupted = db.verify_identities(2, 16, trials=2, seed=1, corrupted=True)
    check("corrupted suite fails", not corrupted["all_pass"])

    # one random solve with certificates
    solve = db.solve_random(2, 32, 0.5, seed=3)
    check("solver converged", solve["converged"], f"iters={solve['iterations']}")
    check(
        "contraction rate below M + 0.05",
        solve["observed_rate"] <= solve["predicted_rate"] + 0.05,
        f"rate={solve['observed_rate']:.3f}",
    )
    check(
        "projected residual small",
        solve["residual_projected_relative"] < 1e-6,
        f"res={solve['residual_projected_relative']:.2e}",
    )

    # divergence-form bridge: lifted residual within 10x of the div residual
    rows = db.divform_cross_validate(2, 32, 0.6, 1.8, instances=2, seed=5)
    for row in rows:
        quotient = row["beltrami_residual"] / max(row["div_residual_hminus"], 1e-14)
        check(
            f"cross-validation instance {row['instance']}",
            quotient < 10.0,
            f"quotient={quotient:.2f} M={row['cayley_norm']:.3f}",
        )

    # small normal-families experiment
    montel = db.montel_experiment(2, 32, 16, seed=11)
    check(
        "montel chain extracted",
        montel["chain_length"] >= 8,
        f"len={montel['chain_length']}",
    )
    check(
        "limit candidate certified",
        montel["candidate_certified"],
        f"res={montel['candidate_residual']:.2e}",
    )

    print("smoke test passed")


if __name__ == "__main__":
    main()
