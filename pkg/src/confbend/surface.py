"""Surfaces in the de Sitter sphere assembled from PDE solutions.

A SurfacePatch holds a discretized map g: L^2 -> S_1^m inside L^{m+1}
together with cached finite-difference jets, metric components and
Christoffel data.  The checks in this module verify the structure that
makes the patch a special hyperbolic or special elliptic surface: the
coordinates are conjugate, the Christoffel data satisfies the
integrability condition, the scale function mu solves its first-order
system and D = mu J is a Codazzi tensor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import lorentz
from .pde import CoefficientField, GridFunction, GridSpec
from .reports import CheckReport

__all__ = [
    "GenerationError",
    "SurfacePatch",
    "ConjugateStructure",
    "assemble_k",
    "normalize_to_sphere",
    "check_conjugate",
    "check_special",
    "interior_max",
    "solve_mu",
    "codazzi_residual",
    "cartan_condition",
    "compute_m",
    "phi_to_psi",
    "psi_to_phi",
    "conjugate_residual_eqvar",
]


class GenerationError(RuntimeError):
    """A hypothesis of the generation recipe failed; carries the location."""

    def __init__(self, reason, location=None):
        super().__init__(reason if location is None
                         else f"{reason} at (u, v) = {location}")
        self.reason = reason
        self.location = location


def _grad_u(spec, a):
    return np.gradient(a, spec.du, axis=0, edge_order=2)


def _grad_v(spec, a):
    return np.gradient(a, spec.dv, axis=1, edge_order=2)


#: Cells skipped at the boundary when reporting residuals that stack two
#: or more finite-difference passes; one-sided stencils lose an order
#: there and would mask the interior convergence rate.
INTERIOR_MARGIN = 5


def interior_max(res, spec, margin=INTERIOR_MARGIN):
    """Max of a residual field over the margin-trimmed interior.

    Returns (value, (u, v)) with the argmax location in coordinates.
    """
    margin = min(margin, (spec.nu - 2) // 2, (spec.nv - 2) // 2)
    inner = res[margin:res.shape[0] - margin, margin:res.shape[1] - margin]
    i, j = np.unravel_index(np.argmax(inner), inner.shape)
    return inner[i, j], (spec.u[i + margin], spec.v[j + margin])


class SurfacePatch:
    """Discretized surface in the de Sitter sphere with cached geometry."""

    def __init__(self, values, de_sitter_tol=1e-9):
        if not isinstance(values, GridFunction) or values.values.ndim != 3:
            raise ValueError("patch values must be a vector GridFunction")
        self.spec = values.spec
        self.g = values.values
        dev = np.max(np.abs(lorentz.norm2(self.g) - 1.0))
        if dev > de_sitter_tol:
            raise GenerationError(f"de Sitter constraint violated ({dev:.2e})")
        if self.det_metric.min() <= 0.0 or self.metric[0].min() <= 0.0:
            i, j = np.unravel_index(np.argmin(self.det_metric),
                                    self.det_metric.shape)
            raise GenerationError("induced metric is not Riemannian",
                                  (self.spec.u[i], self.spec.v[j]))

    @property
    def ambient_dim(self):
        return self.g.shape[-1]

    @cached_property
    def gu(self):
        return _grad_u(self.spec, self.g)

    @cached_property
    def gv(self):
        return _grad_v(self.spec, self.g)

    @cached_property
    def guu(self):
        return _grad_u(self.spec, self.gu)

    @cached_property
    def guv(self):
        return _grad_v(self.spec, self.gu)

    @cached_property
    def gvv(self):
        return _grad_v(self.spec, self.gv)

    @cached_property
    def metric(self):
        """(E, F, G) with E = <g_u, g_u>, F = <g_u, g_v>, G = <g_v, g_v>."""
        return (lorentz.inner(self.gu, self.gu),
                lorentz.inner(self.gu, self.gv),
                lorentz.inner(self.gv, self.gv))

    @cached_property
    def det_metric(self):
        e, f, g = self.metric
        return e * g - f * f

    def tangential_coefficients(self, z):
        """Coefficients (c1, c2) of the tangent part of z: c1 g_u + c2 g_v."""
        e, f, g = self.metric
        zu = lorentz.inner(z, self.gu)
        zv = lorentz.inner(z, self.gv)
        det = self.det_metric
        return (g * zu - f * zv) / det, (e * zv - f * zu) / det

    def sphere_second_form(self, z):
        """Normal part of an ambient second-derivative field z in S_1^m.

        Subtracts the tangential projection and the radial component
        <z, g> g (the position vector is normal to the de Sitter sphere).
        """
        c1, c2 = self.tangential_coefficients(z)
        radial = lorentz.inner(z, self.g)
        return z - c1[..., None] * self.gu - c2[..., None] * self.gv \
            - radial[..., None] * self.g

    @cached_property
    def christoffels_uv(self):
        """(Gamma1, Gamma2) from the tangent part of g_uv."""
        return self.tangential_coefficients(self.guv)

    @cached_property
    def christoffels_full(self):
        """All six coordinate Christoffel symbols c[a][b] = (c1, c2)."""
        out = {}
        for key, z in (("uu", self.guu), ("uv", self.guv), ("vv", self.gvv)):
            out[key] = self.tangential_coefficients(z)
        return out

    @cached_property
    def christoffel_complex(self):
        """Gamma with nabla_{dz} dzbar = Gamma dz + conj(Gamma) dzbar."""
        e, f, g = self.metric
        gz = 0.5 * (self.gu - 1j * self.gv)
        gzz = 0.25 * (self.guu + self.gvv)
        a11 = lorentz.inner(gz, gz)          # <dz, dz>
        a12 = 0.25 * (e + g)                 # <dz, dzbar>, real
        b1 = lorentz.inner(gzz, gz)
        b2 = lorentz.inner(gzz, np.conj(gz))
        # solve [[a11, a12], [a12, conj(a11)]] (Gamma, Gammabar) = (b1, b2)
        det = a11 * np.conj(a11) - a12 * a12
        gamma = (np.conj(a11) * b1 - a12 * b2) / det
        return gamma

    @cached_property
    def grid_scale(self):
        """Characteristic magnitude of the second-derivative jets."""
        mags = [np.max(lorentz.euclidean_norm(z))
                for z in (self.guu, self.guv, self.gvv)]
        return max(1.0, *mags)

    def h2_tolerance(self, c):
        spec = self.spec
        return c * (spec.du ** 2 + spec.dv ** 2) * self.grid_scale

    # -- serialization ------------------------------------------------

    def to_json_dict(self):
        return {"spec": self.spec.to_dict(),
                "shape": list(self.g.shape),
                "g": self.g.ravel().tolist()}

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, d):
        spec = GridSpec.from_dict(d["spec"])
        values = np.array(d["g"]).reshape(d["shape"])
        return cls(GridFunction(spec, values))

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class ConjugateStructure:
    """The tensor D = mu J attached to a conjugate patch.

    In conjugate coordinates the hyperbolic J fixes d_u and flips d_v;
    the elliptic J rotates d_u toward d_v.  J is stored as a constant
    coordinate-frame matrix with columns (J d_u, J d_v).
    """

    kind: str
    mu: GridFunction

    def __post_init__(self):
        if self.kind not in ("hyperbolic", "elliptic"):
            raise ValueError("kind must be 'hyperbolic' or 'elliptic'")
        if np.any(self.mu.values == 0.0) or self.mu.values.min() < 0 < self.mu.values.max():
            raise ValueError("mu must be nowhere vanishing")

    @property
    def j_matrix(self):
        if self.kind == "hyperbolic":
            return np.array([[1.0, 0.0], [0.0, -1.0]])
        return np.array([[0.0, -1.0], [1.0, 0.0]])

    def d_matrix_field(self):
        """D = mu J as an array of shape (nu, nv, 2, 2)."""
        return self.mu.values[..., None, None] * self.j_matrix


def assemble_k(solutions):
    """Stack m+1 scalar solutions into a map k: U -> L^{m+1} and mu = <k,k>.

    Raises GenerationError with the offending location if mu is not
    positive everywhere.
    """
    specs = {s.spec for s in solutions}
    if len(specs) != 1:
        raise ValueError("solutions live on different grids")
    spec = solutions[0].spec
    k = np.stack([s.values for s in solutions], axis=-1)
    mu = lorentz.norm2(k)
    if mu.min() <= 0.0:
        i, j = np.unravel_index(np.argmin(mu), mu.shape)
        raise GenerationError("mu_nonpositive", (spec.u[i], spec.v[j]))
    return GridFunction(spec, k), GridFunction(spec, mu)


def normalize_to_sphere(k, mu):
    """g = k / sqrt(mu), a patch on the de Sitter sphere."""
    if mu.values.min() <= 0.0:
        raise GenerationError("mu_nonpositive")
    g = k.values / np.sqrt(mu.values)[..., None]
    return SurfacePatch(GridFunction(k.spec, g))


def check_conjugate(patch, kind, tol=None):
    """Residual of the conjugate-coordinate condition.

    Hyperbolic: normal part of g_uv vanishes.  Elliptic: normal part of
    g_uu + g_vv vanishes (4 alpha(dz, dzbar) = alpha(du,du)+alpha(dv,dv)).
    """
    if kind == "hyperbolic":
        nor = patch.sphere_second_form(patch.guv)
    elif kind == "elliptic":
        nor = patch.sphere_second_form(0.25 * (patch.guu + patch.gvv))
    else:
        raise ValueError("kind must be 'hyperbolic' or 'elliptic'")
    res = lorentz.euclidean_norm(nor)
    if tol is None:
        tol = patch.h2_tolerance(10.0)
    val, where = interior_max(res, patch.spec)
    return CheckReport(name=f"conjugate_{kind}", max_residual=val,
                       tolerance=tol, argmax=where)


def check_special(patch, kind, tol=None):
    """Residual of the special-surface condition on the Christoffel data.

    Hyperbolic: d_u Gamma1 = d_v Gamma2.  Elliptic: Gamma_z is real.
    """
    spec = patch.spec
    if kind == "hyperbolic":
        g1, g2 = patch.christoffels_uv
        res = np.abs(_grad_u(spec, g1) - _grad_v(spec, g2))
    elif kind == "elliptic":
        gamma = patch.christoffel_complex
        gamma_z = 0.5 * (_grad_u(spec, gamma) - 1j * _grad_v(spec, gamma))
        res = np.abs(gamma_z.imag)
    else:
        raise ValueError("kind must be 'hyperbolic' or 'elliptic'")
    if tol is None:
        tol = patch.h2_tolerance(40.0)
    val, where = interior_max(res, spec)
    return CheckReport(name=f"special_{kind}", max_residual=val,
                       tolerance=tol, argmax=where)


def _omega(patch, kind):
    """The 1-form omega with d(log mu) = -2 omega, as (w_u, w_v)."""
    if kind == "hyperbolic":
        g1, g2 = patch.christoffels_uv
        return g2, g1
    gamma = patch.christoffel_complex
    # mu_zbar + 2 mu Gamma = 0  <=>  d(log mu) = -4 Re(Gamma) du - 4 Im(Gamma) dv
    return 2.0 * gamma.real, 2.0 * gamma.imag


def solve_mu(patch, kind, path_tol=None):
    """Solve d(mu) + 2 mu omega = 0 in log space, normalized mu(corner)=1.

    The mismatch of the two L-shaped corner-to-point path integrals is
    returned as the path-independence residual (large when the special
    condition fails).  The returned mu itself comes from a least-squares
    fit of grad(log mu) = -2 omega over the whole grid, which keeps the
    recovered field smooth enough to differentiate twice.
    """
    spec = patch.spec
    wu, wv = _omega(patch, kind)
    iu = cumulative_trapezoid(wu, dx=spec.du, axis=0, initial=0.0)
    iv = cumulative_trapezoid(wv, dx=spec.dv, axis=1, initial=0.0)
    # Two L-shaped paths from an interior base point (m, m) to (i, j):
    # u-leg first against v-leg first.  Interior legs avoid the boundary
    # strip where the one-sided derivative stencils lose an order.
    m = min(INTERIOR_MARGIN, (spec.nu - 2) // 2, (spec.nv - 2) // 2)
    s = np.s_[m:spec.nu - m], np.s_[m:spec.nv - m]
    log1 = (iv[m:m + 1, s[1]] - iv[m, m]) + (iu[s[0], s[1]] - iu[m:m + 1, s[1]])
    log2 = (iu[s[0], m:m + 1] - iu[m, m]) + (iv[s[0], s[1]] - iv[s[0], m:m + 1])
    mismatch = 2.0 * np.max(np.abs(log1 - log2))
    if path_tol is None:
        path_tol = patch.h2_tolerance(40.0) * max(
            spec.u1 - spec.u0, spec.v1 - spec.v0)
    if mismatch > path_tol:
        raise GenerationError(
            f"mu path-dependence {mismatch:.2e} exceeds {path_tol:.2e} "
            "(special condition violated)")
    phi = _gradient_fit(spec, -2.0 * wu, -2.0 * wv)
    mu = np.exp(phi - phi[0, 0])
    return GridFunction(spec, mu), mismatch


def _gradient_fit(spec, fu, fv):
    """Least-squares potential phi with grad(phi) = (fu, fv), phi[0,0] = 0.

    Midpoint-consistent forward differences on the grid edges; the
    normal equations are a standard Neumann five-point system pinned at
    the corner.
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    nu, nv = spec.nu, spec.nv
    n = nu * nv
    idx = np.arange(n).reshape(nu, nv)

    rows_u = np.repeat(np.arange((nu - 1) * nv), 2)
    cols_u = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1).ravel()
    vals_u = np.tile([-1.0 / spec.du, 1.0 / spec.du], (nu - 1) * nv)
    bu = 0.5 * (fu[:-1, :] + fu[1:, :]).ravel()

    rows_v = np.repeat(np.arange(nu * (nv - 1)), 2)
    cols_v = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1).ravel()
    vals_v = np.tile([-1.0 / spec.dv, 1.0 / spec.dv], nu * (nv - 1))
    bv = 0.5 * (fv[:, :-1] + fv[:, 1:]).ravel()

    du_mat = sp.csr_matrix((vals_u, (rows_u, cols_u)),
                           shape=((nu - 1) * nv, n))
    dv_mat = sp.csr_matrix((vals_v, (rows_v, cols_v)),
                           shape=(nu * (nv - 1), n))
    pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, n))
    a = sp.vstack([du_mat, dv_mat, pin]).tocsr()
    b = np.concatenate([bu, bv, [0.0]])
    phi = spla.spsolve((a.T @ a).tocsc(), a.T @ b)
    return phi.reshape(nu, nv)


def codazzi_residual(patch, structure, tol=None):
    """Residual of (nabla_u D) d_v - (nabla_v D) d_u for D = mu J."""
    spec = patch.spec
    d = structure.d_matrix_field()  # (nu, nv, 2, 2)
    ch = patch.christoffels_full
    # Christoffel array G[a, i, b]: nabla_{d_a} d_b = sum_i G[a,i,b] d_i
    gam = np.empty((spec.nu, spec.nv, 2, 2, 2))
    gam[..., 0, :, 0] = np.stack(ch["uu"], axis=-1)
    gam[..., 0, :, 1] = np.stack(ch["uv"], axis=-1)
    gam[..., 1, :, 0] = np.stack(ch["uv"], axis=-1)
    gam[..., 1, :, 1] = np.stack(ch["vv"], axis=-1)

    dd = np.stack([_grad_u(spec, d), _grad_v(spec, d)], axis=-3)
    # (nabla_a D)^i_j = d_a D^i_j + G^i_{a k} D^k_j - G^k_{a j} D^i_k
    cov = dd + np.einsum("...aik,...kj->...aij", gam, d) \
        - np.einsum("...akj,...ik->...aij", gam, d)
    res_vec = cov[..., 0, :, 1] - cov[..., 1, :, 0]  # components in (d_u, d_v)
    e, f, g = patch.metric
    r1, r2 = res_vec[..., 0], res_vec[..., 1]
    res = np.sqrt(np.maximum(e * r1 ** 2 + 2 * f * r1 * r2 + g * r2 ** 2, 0.0))
    if tol is None:
        tol = patch.h2_tolerance(40.0) * max(1.0, np.max(np.abs(structure.mu.values)))
    val, where = interior_max(res, spec)
    return CheckReport(name=f"codazzi_{structure.kind}",
                       max_residual=val, tolerance=tol, argmax=where)


def cartan_condition(patch, kind, tol=None):
    """Residual of the extra condition selecting genuine conformal variations.

    Hyperbolic: Gamma1_u = Gamma2_v = 2 Gamma1 Gamma2.  Elliptic:
    Gamma_z = 2 Gamma conj(Gamma).
    """
    spec = patch.spec
    if kind == "hyperbolic":
        g1, g2 = patch.christoffels_uv
        prod = 2.0 * g1 * g2
        res = np.maximum(np.abs(_grad_u(spec, g1) - prod),
                         np.abs(_grad_v(spec, g2) - prod))
    elif kind == "elliptic":
        gamma = patch.christoffel_complex
        gamma_z = 0.5 * (_grad_u(spec, gamma) - 1j * _grad_v(spec, gamma))
        res = np.abs(gamma_z - 2.0 * gamma * np.conj(gamma))
    else:
        raise ValueError("kind must be 'hyperbolic' or 'elliptic'")
    if tol is None:
        tol = patch.h2_tolerance(40.0)
    val, where = interior_max(res, spec)
    return CheckReport(name=f"cartan_{kind}", max_residual=val,
                       tolerance=tol, argmax=where)


def compute_m(patch, mu, kind):
    """Recover the PDE coefficient M from the patch metric and mu.

    Hyperbolic: M = F - mu_uv / 2 mu + mu_u mu_v / 4 mu^2 with
    F = <d_u, d_v>.  Elliptic: the analogous formula in z, zbar with
    F = <dz, dzbar> = (E + G) / 4.

    Values within a few cells of the boundary carry an extra order of
    finite-difference error; comparisons should use interior_max.
    """
    spec = patch.spec
    m = mu.values
    mu_u = _grad_u(spec, m)
    mu_v = _grad_v(spec, m)
    e, f, g = patch.metric
    if kind == "hyperbolic":
        mu_uv = _grad_v(spec, mu_u)
        coef = f - mu_uv / (2 * m) + mu_u * mu_v / (4 * m ** 2)
    elif kind == "elliptic":
        mu_uu = _grad_u(spec, mu_u)
        mu_vv = _grad_v(spec, mu_v)
        lap = mu_uu + mu_vv
        coef = 0.25 * (e + g) - lap / (8 * m) \
            + (mu_u ** 2 + mu_v ** 2) / (16 * m ** 2)
    else:
        raise ValueError("kind must be 'hyperbolic' or 'elliptic'")
    return CoefficientField(GridFunction(spec, coef))


def phi_to_psi(phi, mu):
    return GridFunction(phi.spec, np.sqrt(mu.values) * phi.values)


def psi_to_phi(psi, mu):
    return GridFunction(psi.spec, psi.values / np.sqrt(mu.values))


def conjugate_residual_eqvar(phi, patch, kind):
    """Residual of the conjugate-coordinate equation for a scalar field.

    Hyperbolic: phi_uv - Gamma1 phi_u - Gamma2 phi_v + F phi.
    Elliptic: phi_zzbar - Gamma phi_z - conj(Gamma) phi_zbar + F phi.
    """
    spec = patch.spec
    p = phi.values
    pu = _grad_u(spec, p)
    pv = _grad_v(spec, p)
    e, f, g = patch.metric
    if kind == "hyperbolic":
        g1, g2 = patch.christoffels_uv
        puv = _grad_v(spec, pu)
        res = puv - g1 * pu - g2 * pv + f * p
    elif kind == "elliptic":
        gamma = patch.christoffel_complex
        lap = _grad_u(spec, pu) + _grad_v(spec, pv)
        pz = 0.5 * (pu - 1j * pv)
        res = 0.25 * lap - 2.0 * np.real(gamma * pz) + 0.25 * (e + g) * p
    else:
        raise ValueError("kind must be 'hyperbolic' or 'elliptic'")
    return GridFunction(spec, res)
