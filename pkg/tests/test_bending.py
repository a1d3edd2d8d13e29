import numpy as np
import pytest

from confbend import pipeline
from confbend.bending import (
    BendingField,
    KillingData,
    associated_tensors,
    cib_residual,
    conformality_derivative,
    d_conditions,
    first_order_conformality,
    fundamental_residuals,
    random_killing,
    theta_checks,
    triviality_test,
)
from confbend.gauss_param import HypersurfaceFamily, random_sample_set
from confbend.pair import pair_from_g
from confbend.surface import ConjugateStructure


@pytest.fixture(scope="module", params=["hyperbolic", "elliptic"])
def setup(request):
    kind = request.param
    gen = pipeline.generate(kind, seed=2, use_solver=False)
    pair = pair_from_g(gen.patch)
    fam = HypersurfaceFamily(pair, n=5)
    pts = random_sample_set(fam, count=6, seed=1)
    return kind, gen, fam, pts


# -- conformal Killing fields in closed form ------------------------------


def test_killing_rejects_nonskew():
    with pytest.raises(ValueError):
        KillingData(0.0, np.zeros(4), np.zeros(4),
                    np.eye(4))


def test_killing_json_roundtrip(tmp_path):
    kd = random_killing(6, seed=0)
    path = tmp_path / "kd.json"
    kd.save_json(path)
    back = KillingData.load_json(path)
    assert back.lam == kd.lam
    np.testing.assert_array_equal(back.v, kd.v)
    np.testing.assert_array_equal(back.c, kd.c)


def test_dilation_and_rigid_motion_special_cases():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 6))
    dil = KillingData(1.0, np.zeros(6), np.zeros(6), np.zeros((6, 6)))
    np.testing.assert_allclose(dil.chi(x), x, atol=1e-14)
    np.testing.assert_allclose(dil.rho(x), 1.0)
    raw = rng.normal(size=(6, 6))
    c = 0.5 * (raw - raw.T)
    w = rng.normal(size=6)
    rig = KillingData(0.0, np.zeros(6), w, c)
    np.testing.assert_allclose(rig.chi(x), x @ c.T + w, atol=1e-14)
    np.testing.assert_allclose(rig.rho(x), 0.0)


def test_killing_derivative_symmetric_part():
    # the symmetric part of the ambient derivative is rho times the
    # identity, which is the defining property of a conformal field
    kd = random_killing(6, seed=5)
    rng = np.random.default_rng(7)
    x = rng.normal(size=6)
    rho = kd.rho(x[None, :])[0]
    basis = np.eye(6)
    jac = np.stack([kd.dchi(x[None, :], basis[None, k])[0]
                    for k in range(6)], axis=1)
    np.testing.assert_allclose(0.5 * (jac + jac.T), rho * np.eye(6),
                               atol=1e-12)


def test_killing_d2_matches_difference():
    kd = random_killing(6, seed=9)
    rng = np.random.default_rng(11)
    x, u, z = rng.normal(size=(3, 6))
    eps = 1e-6
    fd = (kd.dchi((x + eps * z)[None, :], u[None, :])[0]
          - kd.dchi((x - eps * z)[None, :], u[None, :])[0]) / (2 * eps)
    np.testing.assert_allclose(kd.d2chi(u[None, :], z[None, :])[0], fd,
                               atol=1e-8)


# -- the bending equation -------------------------------------------------


def test_cib_residual_killing(setup):
    _, _, fam, pts = setup
    bf = BendingField.from_killing(random_killing(6, seed=4, scale=0.7))
    rep = cib_residual(bf, fam, pts)
    assert rep.passed and rep.max_residual < 1e-12


def test_cib_residual_constant_and_position(setup):
    _, _, fam, pts = setup
    const = BendingField.constant(np.array([0.3, -1.0, 0.2, 0, 0.5, 1.1]))
    assert cib_residual(const, fam, pts).max_residual < 1e-13
    assert cib_residual(BendingField.position(), fam,
                        pts).max_residual < 1e-13


def test_cib_residual_wrong_rho_fails(setup):
    _, _, fam, pts = setup
    bf = BendingField.from_killing(random_killing(6, seed=4))
    rep = cib_residual(bf.with_shifted_rho(1.0), fam, pts)
    assert rep.max_residual > 0.5


def test_cib_scale_equivariance_and_linearity(setup):
    _, _, fam, pts = setup
    k1 = random_killing(6, seed=21, scale=0.4)
    k2 = random_killing(6, seed=22, scale=0.4)
    assert cib_residual(BendingField.from_killing(k1).rescaled(3.5),
                        fam, pts).max_residual < 1e-12
    total = KillingData(k1.lam + k2.lam, k1.v + k2.v, k1.w + k2.w,
                        k1.c + k2.c)
    assert cib_residual(BendingField.from_killing(total), fam,
                        pts).max_residual < 1e-12


# -- associated tensors and fundamental equations -------------------------


def test_killing_tensors_match_closed_forms(setup):
    # for chi the operator curly-B is -<v, N> I and H is <v, N> A
    _, _, fam, pts = setup
    kd = random_killing(6, seed=4, scale=0.7)
    tensors = associated_tensors(BendingField.from_killing(kd), fam, pts)
    for t in tensors:
        phi = -float(kd.v @ t["frame"]["n"])
        np.testing.assert_allclose(t["B"], phi * np.eye(5), atol=1e-8)
        np.testing.assert_allclose(t["H"], -phi * t["A"], atol=1e-8)
        assert t["asymmetry"] < 1e-10


def test_fundamental_residuals_killing(setup):
    _, _, fam, pts = setup
    bf = BendingField.from_killing(random_killing(6, seed=4, scale=0.7))
    for rep in fundamental_residuals(bf, fam, pts, seed=0):
        assert rep.passed, str(rep)
        assert rep.max_residual < 1e-5


def test_fundamental_gauss_fails_for_perturbed_tensor(setup):
    _, _, fam, pts = setup
    bf = BendingField.from_killing(random_killing(6, seed=4, scale=0.7))
    tensors = associated_tensors(bf, fam, pts)
    rng = np.random.default_rng(0)
    for t in tensors:
        bump = rng.normal(size=(5, 5))
        t["B"] = t["B"] + 0.1 * (bump + bump.T)
    rep = fundamental_residuals(None, fam, pts, seed=0,
                                tensors=tensors)[0]
    assert not rep.passed


def test_theta_flat_and_null_for_killing(setup):
    _, _, fam, pts = setup
    bf = BendingField.from_killing(random_killing(6, seed=4, scale=0.7))
    tensors = associated_tensors(bf, fam, pts)
    flat, null = theta_checks(tensors, seed=3, spec=fam.spec)
    assert flat.passed and null.passed


def test_theta_flat_fails_for_random_tensors(setup):
    _, _, fam, pts = setup
    bf = BendingField.from_killing(random_killing(6, seed=4, scale=0.7))
    tensors = associated_tensors(bf, fam, pts)
    rng = np.random.default_rng(1)
    for t in tensors:
        bump = rng.normal(size=(5, 5))
        t["B"] = t["B"] + 0.5 * (bump + bump.T)
    flat, _ = theta_checks(tensors, seed=3, spec=fam.spec)
    assert not flat.passed


def test_triviality_of_killing_bendings(setup):
    _, _, fam, pts = setup
    kd = random_killing(6, seed=4, scale=0.7)
    tensors = associated_tensors(BendingField.from_killing(kd), fam, pts)
    trivial, phis, dev = triviality_test(tensors, tol=1e-6)
    assert trivial and dev < 1e-8
    assert len(phis) > 0  # the samples are not umbilic


def test_triviality_rejects_shape_like_tensor(setup):
    _, _, fam, pts = setup
    kd = random_killing(6, seed=4, scale=0.7)
    tensors = associated_tensors(BendingField.from_killing(kd), fam, pts)
    for t in tensors:
        t["B"] = t["A"].copy()
    trivial, _, dev = triviality_test(tensors, tol=1e-6)
    assert not trivial and dev > 1e-3


# -- first-order conformality of the line variation -----------------------


def test_first_order_conformality_killing(setup):
    _, _, fam, pts = setup
    bf = BendingField.from_killing(random_killing(6, seed=4, scale=0.7))
    rep = first_order_conformality(bf, fam, pts)
    assert rep.passed, str(rep)


def test_first_order_conformality_zero_field(setup):
    _, _, fam, pts = setup
    zero = BendingField.constant(np.zeros(6))
    rep = first_order_conformality(zero, fam, pts)
    assert rep.max_residual < 1e-13


def test_shifted_rho_derivative_matches_minus_two_metric(setup):
    # with factor rho + 1 the t-derivative of the scaled metric is
    # exactly -2 <X, Y>; the observed matrix must agree within 5%
    _, _, fam, pts = setup
    bf = BendingField.from_killing(random_killing(6, seed=4, scale=0.7))
    wrong = bf.with_shifted_rho(1.0)
    for point in pts[:3]:
        deriv, fr = conformality_derivative(wrong, fam, point)
        target = -2.0 * fr["gram"]
        err = np.max(np.abs(deriv - target)) / np.max(np.abs(target))
        assert err < 0.05


# -- conditions (i)-(v) for D = mu J --------------------------------------


def test_d_conditions_hold_for_generated_mu(setup):
    kind, gen, fam, pts = setup
    struct = ConjugateStructure(kind=kind, mu=gen.mu)
    reps = d_conditions(fam, struct.j_matrix, gen.mu.values, pts[:4])
    for rep in reps:
        assert rep.passed, str(rep)


def test_d_conditions_fail_for_constant_mu(setup):
    # mu == 1 satisfies the pointwise algebra but not the derivative
    # conditions; the Codazzi-type identity must break
    kind, gen, fam, pts = setup
    struct = ConjugateStructure(kind=kind, mu=gen.mu)
    reps = d_conditions(fam, struct.j_matrix,
                        np.ones_like(gen.mu.values), pts[:4])
    by_name = {r.name: r for r in reps}
    assert not by_name["d_codazzi"].passed


def test_d_conditions_reject_zero_mu(setup):
    kind, gen, fam, pts = setup
    struct = ConjugateStructure(kind=kind, mu=gen.mu)
    with pytest.raises(ValueError):
        d_conditions(fam, struct.j_matrix,
                     np.zeros_like(gen.mu.values), pts[:2])
