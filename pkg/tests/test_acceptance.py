"""Acceptance battery: nine end-to-end criteria, one test each.

Each test prints one pass/fail line with the measured quantities so a
full run doubles as a summary report.
"""

import json
import time

import numpy as np
import pytest

from confbend import pipeline
from confbend.bending import (
    BendingField,
    associated_tensors,
    cib_residual,
    conformality_derivative,
    d_conditions,
    first_order_conformality,
    random_killing,
    theta_checks,
    triviality_test,
)
from confbend.cli import main as cli_main
from confbend.gauss_param import HypersurfaceFamily, focal_loop, \
    random_sample_set
from confbend.pair import (
    SpecialPair,
    g_from_pair,
    g_values_from_pair,
    pair_from_g,
    validate_pair,
)
from confbend.pde import (
    CoefficientField,
    GridFunction,
    GridSpec,
    solve_elliptic,
    solve_goursat,
)
from confbend.surface import (
    ConjugateStructure,
    GenerationError,
    cartan_condition,
    check_conjugate,
    check_special,
    codazzi_residual,
    compute_m,
    conjugate_residual_eqvar,
    interior_max,
    psi_to_phi,
    solve_mu,
)

KINDS = ("hyperbolic", "elliptic")


def announce(num, label, ok, detail):
    state = "pass" if ok else "FAIL"
    print(f"criterion {num} [{state}] {label}: {detail}")


def smooth(u, v):
    return np.sin(u + v)


# -- 1: solver convergence ------------------------------------------------


def test_criterion_1_pde_convergence():
    t0 = time.monotonic()

    def goursat_err(n):
        spec = GridSpec(0, 1, 0, 1, n, n)
        coeff = CoefficientField(GridFunction.constant(spec, 1.0))
        psi = solve_goursat(coeff, np.sin(spec.u), np.sin(spec.v))
        uu, vv = spec.meshgrid()
        return np.max(np.abs(psi.values - np.sin(uu + vv)))

    def elliptic_err(n, a=2.0, b=1.0):
        spec = GridSpec(0, 1, 0, 1, n, n)
        coeff = CoefficientField(
            GridFunction.constant(spec, (a * a + b * b) / 4.0))
        uu, vv = spec.meshgrid()
        exact = np.sin(a * uu) * np.sin(b * vv)
        return np.max(np.abs(solve_elliptic(coeff, exact).values - exact))

    orders = []
    for err in (goursat_err, elliptic_err):
        e = [err(n) for n in (33, 65, 129)]
        orders += [np.log2(e[0] / e[1]), np.log2(e[1] / e[2])]
    elapsed = time.monotonic() - t0
    ok = min(orders) >= 1.8 and elapsed < 10.0
    announce(1, "solver convergence", ok,
             f"orders {', '.join(f'{o:.2f}' for o in orders)}, "
             f"{elapsed:.1f}s")
    assert ok


# -- 2: generation round-trip ---------------------------------------------


def test_criterion_2_generation_roundtrip():
    details = []
    ok = True
    for kind in KINDS:
        gen = pipeline.generate(kind, seed=5)
        patch = gen.patch
        c = 40.0
        tol = patch.h2_tolerance(c)
        mu, mismatch = solve_mu(patch, kind)
        coeff = compute_m(patch, mu, kind)
        target = pipeline.HYPERBOLIC_M if kind == "hyperbolic" \
            else pipeline.ELLIPTIC_M
        m_err, _ = interior_max(np.abs(coeff.m.values - target),
                                patch.spec)
        special = check_special(patch, kind)
        eq_worst = 0.0
        for i in range(patch.ambient_dim):
            phi = GridFunction(patch.spec, patch.g[..., i])
            res = conjugate_residual_eqvar(phi, patch, kind)
            val, _ = interior_max(np.abs(res.values), patch.spec)
            eq_worst = max(eq_worst, val)
        here = (m_err <= tol and special.passed and eq_worst <= tol
                and mismatch < 1e-3)
        ok &= here
        details.append(f"{kind}: M err {m_err:.1e}, eqvar {eq_worst:.1e}"
                       f" <= C*h^2 = {tol:.1e} (C={c:.0f})")
    announce(2, "generation round-trip", ok, "; ".join(details))
    assert ok


# -- 3: pair round-trips and the validity equivalence ---------------------


def _random_raw_g(seed, wild):
    """A smooth de Sitter map, not always an immersion (wild variant)."""
    from confbend import lorentz

    spec = GridSpec(0.0, 1.0, 0.0, 1.0, 33, 33)
    rng = np.random.default_rng(seed)
    uu, vv = spec.meshgrid()

    def waves(freq, amp):
        a, b = rng.uniform(-freq, freq, 2)
        ph = rng.uniform(0, 2 * np.pi)
        return amp * np.cos(a * uu + b * vv + ph)

    k = np.zeros((33, 33, 8))
    if wild:
        k[..., 0] = 2.0 + waves(14.0, 0.9)
        k[..., 7] = -2.0 + waves(14.0, 0.9)
        for i in range(1, 7):
            k[..., i] = waves(2.0, 0.2)
    else:
        k[..., 0] = 2.0 + waves(1.5, 0.2)
        k[..., 7] = -2.0 + waves(1.5, 0.2)
        k[..., 1] = uu + waves(2.0, 0.1)
        k[..., 2] = vv + waves(2.0, 0.1)
        for i in range(3, 7):
            k[..., i] = waves(2.0, 0.15)
    mu = lorentz.norm2(k)
    assert mu.min() > 0.0
    return GridFunction(spec, k / np.sqrt(mu)[..., None])


def _metric_margin(g):
    from confbend import lorentz

    spec = g.spec
    gu = np.gradient(g.values, spec.du, axis=0, edge_order=2)
    gv = np.gradient(g.values, spec.dv, axis=1, edge_order=2)
    e = lorentz.inner(gu, gu)
    f = lorentz.inner(gu, gv)
    gq = lorentz.inner(gv, gv)
    det = e * gq - f * f
    scale = max(np.abs(e).max(), np.abs(det).max(), 1e-30)
    return min(e.min(), det.min()), scale


def test_criterion_3_pair_roundtrips_and_equivalence():
    worst_rt = 0.0
    count = 0
    for kind in KINDS:
        for seed in range(3, 13):
            gen = pipeline.generate(
                kind, pipeline.default_spec(33), seed=seed)
            pair = pair_from_g(gen.patch)
            back = g_from_pair(pair)
            worst_rt = max(worst_rt,
                           np.max(np.abs(back.g - gen.patch.g)))
            pair2 = pair_from_g(g_values_from_pair(pair))
            worst_rt = max(worst_rt,
                           np.max(np.abs(pair2.h.values - pair.h.values)),
                           np.max(np.abs(pair2.r.values - pair.r.values)))
            count += 1

    agree = decided = valid_n = invalid_n = 0
    for seed in range(40):
        g = _random_raw_g(seed, wild=seed % 2 == 1)
        margin, scale = _metric_margin(g)
        try:
            pair = pair_from_g(g)
            rep = validate_pair(pair)
            pair_ok = pair.immersion_ok and pair.gradient_ok
            grad_gap = abs(rep.extra["grad_max"] - 1.0)
        except GenerationError:
            continue
        if abs(margin) < 1e-4 * scale or \
                (pair.immersion_ok and grad_gap < 1e-3):
            continue  # too close to the boundary of either criterion
        decided += 1
        if pair_ok:
            valid_n += 1
        else:
            invalid_n += 1
        agree += int(pair_ok == (margin > 0))
    ok = (worst_rt <= 1e-12 and count >= 20 and agree == decided
          and decided >= 15 and valid_n >= 3 and invalid_n >= 3)
    announce(3, "pair round-trips and validity equivalence", ok,
             f"round-trip {worst_rt:.1e} over {count} patches; "
             f"equivalence {agree}/{decided} "
             f"({valid_n} valid, {invalid_n} invalid)")
    assert ok


# -- 4: Gauss parametrization spectrum ------------------------------------


def test_criterion_4_shape_spectrum():
    t0 = time.monotonic()
    total_regular = 0
    cluster_ok = True
    for kind in KINDS:
        gen = pipeline.generate(kind, seed=2)
        pair = pair_from_g(gen.patch)
        fam = HypersurfaceFamily(pair, n=5)
        band = 40.0 * gen.patch.h2_tolerance(1.0)
        for u, v, theta in random_sample_set(fam, 260, seed=1):
            smp = fam.sample(u, v, theta)
            if not smp.regular:
                continue
            total_regular += 1
            close = np.abs(smp.eigenvalues - smp.lam) <= band * abs(smp.lam)
            outside = np.abs(smp.eigenvalues - smp.lam) \
                > 5.0 * band * abs(smp.lam)
            cluster_ok &= close.sum() == 3 and outside.sum() == 2

    # tube control: r constant, exact spectrum (0, 0, 1/c, 1/c, 1/c)
    c = 0.7
    spec = GridSpec(0, 1, 0, 1, 33, 33)
    uu, vv = spec.meshgrid()
    h = np.zeros((33, 33, 6))
    h[..., 0], h[..., 1] = uu, vv
    tube = HypersurfaceFamily(
        SpecialPair(GridFunction(spec, h),
                    GridFunction.constant(spec, c)), n=5)
    smp = tube.sample(0.5, 0.5, np.array([1.0, 1.2, 2.0]))
    tube_err = np.max(np.abs(np.sort(smp.eigenvalues)
                             - np.array([0, 0, 1 / c, 1 / c, 1 / c])))
    elapsed = time.monotonic() - t0
    ok = (total_regular >= 500 and cluster_ok and tube_err < 1e-6
          and elapsed < 60.0)
    announce(4, "shape-operator spectrum", ok,
             f"{total_regular} regular samples, cluster of 3 at 1/r, "
             f"tube error {tube_err:.1e}, {elapsed:.1f}s")
    assert ok


# -- 5: focal loop --------------------------------------------------------


def test_criterion_5_focal_loop():
    ok = True
    details = []
    for kind in KINDS:
        gen = pipeline.generate(kind, seed=2)
        pair = pair_from_g(gen.patch)
        fam = HypersurfaceFamily(pair, n=5)
        pts = random_sample_set(fam, 30, seed=1)
        samples = [fam.sample(u, v, t) for u, v, t in pts]
        reports = focal_loop(fam, samples,
                             patch_g=GridFunction(gen.patch.spec,
                                                  gen.patch.g))
        by = {r.name: r for r in reports}
        ok &= all(r.passed for r in reports)
        details.append(f"{kind}: |<S,S>-1| {by['focal_unit_norm'].max_residual:.1e}, "
                       f"S=g {by['focal_matches_g'].max_residual:.1e}, "
                       f"metric {by['focal_metric_identity'].max_residual:.1e}")
    announce(5, "focal loop S = g", ok, "; ".join(details))
    assert ok


# -- 6: bending calculus on Killing controls ------------------------------


def test_criterion_6_killing_bendings():
    worst_cib = worst_flat = worst_fo = worst_ctrl = 0.0
    trivial_all = True
    for kind in KINDS:
        gen = pipeline.generate(kind, seed=2)
        fam = HypersurfaceFamily(pair_from_g(gen.patch), n=5)
        pts = random_sample_set(fam, 3, seed=1)
        for i in range(25):
            bf = BendingField.from_killing(
                random_killing(6, seed=1000 + i, scale=0.7))
            worst_cib = max(worst_cib,
                            cib_residual(bf, fam, pts).max_residual)
            tens = associated_tensors(bf, fam, pts)
            flat, _ = theta_checks(tens, seed=i, spec=fam.spec)
            worst_flat = max(worst_flat, flat.max_residual)
            trivial_all &= triviality_test(tens, tol=1e-6)[0]
            worst_fo = max(worst_fo, first_order_conformality(
                bf, fam, pts).max_residual)
            if i == 0:
                wrong = bf.with_shifted_rho(1.0)
                for point in pts:
                    deriv, fr = conformality_derivative(wrong, fam, point)
                    target = -2.0 * fr["gram"]
                    worst_ctrl = max(worst_ctrl,
                                     np.max(np.abs(deriv - target))
                                     / np.max(np.abs(target)))
    ok = (worst_cib <= 1e-10 and trivial_all and worst_flat <= 1e-8
          and worst_fo <= 2e-7 and worst_ctrl < 0.05)
    announce(6, "bending calculus, 50 Killing fields", ok,
             f"cib {worst_cib:.1e}, theta-flat {worst_flat:.1e}, "
             f"first-order {worst_fo:.1e}, rho+1 control within "
             f"{100 * worst_ctrl:.2f}%")
    assert ok


# -- 7: converse construction ---------------------------------------------


def test_criterion_7_converse_conditions():
    ok = True
    details = []
    for kind in KINDS:
        gen = pipeline.generate(kind, seed=2)
        patch = gen.patch
        mu, _ = solve_mu(patch, kind)
        struct = ConjugateStructure(kind=kind, mu=mu)
        fam = HypersurfaceFamily(pair_from_g(patch), n=5)
        pts = random_sample_set(fam, 4, seed=1)
        reps = d_conditions(fam, struct.j_matrix, mu.values, pts)
        ok &= all(r.passed for r in reps)
        cod = codazzi_residual(patch, struct)
        ok &= cod.passed
        bad = codazzi_residual(
            patch, ConjugateStructure(
                kind=kind, mu=GridFunction.constant(patch.spec, 1.0)))
        ok &= not bad.passed
        const_reps = d_conditions(fam, struct.j_matrix,
                                  np.ones_like(mu.values), pts)
        ok &= not {r.name: r for r in const_reps}["d_codazzi"].passed

        from confbend.bending import _HorizontalCalculus
        calc = _HorizontalCalculus(fam, struct.j_matrix, mu.values)
        tens = []
        for u, v, theta in pts:
            pt = calc.point(u, v, theta)
            b2 = (pt["a"] - pt["lam"] * np.eye(2)) @ pt["d"]
            b_full = np.zeros((5, 5))
            b_full[:2, :2] = b2
            a_full = np.eye(5) * pt["lam"]
            a_full[:2, :2] = pt["a"]
            tens.append({"B": b_full, "A": a_full})
        trivial, _, dev = triviality_test(tens, tol=1e-6)
        ok &= not trivial
        worst = max(r.max_residual / r.tolerance for r in reps)
        details.append(f"{kind}: (i)-(v) worst {worst:.2f}x tol, "
                       f"Codazzi {cod.max_residual:.1e}, "
                       f"reconstructed dev {dev:.2f}")
    announce(7, "converse: conditions (i)-(v), nontrivial B", ok,
             "; ".join(details))
    assert ok


# -- 8: Cartan discrimination ---------------------------------------------


def test_criterion_8_cartan_discrimination():
    witnessed = False
    details = []
    for kind in KINDS:
        gen = pipeline.generate(kind, seed=3)
        special = check_special(gen.patch, kind)
        cart = cartan_condition(gen.patch, kind)
        if special.passed and cart.max_residual > 0.05:
            witnessed = True
            details.append(f"{kind}: special {special.max_residual:.1e}, "
                           f"restricted-class residual "
                           f"{cart.max_residual:.2f}")
    announce(8, "bending class strictly larger than restricted class",
             witnessed, "; ".join(details) or "no witness")
    assert witnessed


# -- 9: deterministic reports ---------------------------------------------


def test_criterion_9_deterministic_reports(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(
        {"kind": "hyperbolic", "n": 5, "seed": 11,
         "grid": {"u0": 0.0, "u1": 0.5, "v0": 0.0, "v1": 0.5,
                  "nu": 33, "nv": 33},
         "sample_count": 12, "killing_count": 2,
         "out": str(tmp_path / "out")}))
    assert cli_main(["generate", "--config", str(cfg_path)]) == 0
    assert cli_main(["verify", "--config", str(cfg_path)]) == 0
    first = (tmp_path / "out" / "report.json").read_bytes()
    assert cli_main(["verify", "--config", str(cfg_path)]) == 0
    second = (tmp_path / "out" / "report.json").read_bytes()
    ok = first == second and len(first) > 0
    announce(9, "byte-identical reports under fixed seed", ok,
             f"{len(first)} bytes, two runs identical: {first == second}")
    assert ok
