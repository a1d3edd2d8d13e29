"""Hypersurfaces parametrized over the unit normal bundle of h.

Given a validated pair (h, r), each unit normal xi of h at (u, v)
produces a hypersurface point

    X = h - r (h_* grad_h r + sqrt(1 - |grad_h r|^2) xi)

with Gauss map N = h_* grad_h r + sqrt(1 - |grad_h r|^2) xi and a
principal curvature 1/r of multiplicity n - 2 along the fiber
directions.  The module evaluates X and N anywhere on the bundle
through spline interpolants of h and r, assembles the discrete shape
operator, estimates the splitting tensor of the vertical distribution,
and closes the loop back to the de Sitter surface: the focal map
S = (1/r) Psi(X) + Psi_* N reproduces g sample by sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.linalg import qr, solve_triangular

from .lorentz import LightConeChart, default_chart, inner
from .pair import g_values_from_pair, validate_pair
from .pde import GridFunction
from .reports import CheckReport

__all__ = [
    "HypersurfaceFamily",
    "HypersurfaceSample",
    "parametrize",
    "random_sample_set",
    "gauss_map",
    "shape_operator",
    "splitting_tensor",
    "focal_loop",
    "samples_to_csv",
    "samples_to_json",
    "slice_to_obj",
]

#: Relative singular-value threshold below which a sample counts as
#: irregular (Jacobian rank < n).
RANK_THRESHOLD = 1e-6

#: Central-difference step for the parameter-direction jets.
JET_STEP = 1e-5


@dataclass
class HypersurfaceSample:
    """One evaluated point of the parametrized hypersurface."""

    base: tuple
    angles: np.ndarray
    position: np.ndarray
    normal: np.ndarray
    lam: float
    regular: bool
    shape: np.ndarray | None = field(default=None)
    eigenvalues: np.ndarray | None = field(default=None)
    asymmetry: float = 0.0

    def to_dict(self):
        return {"base": list(self.base),
                "angles": self.angles.tolist(),
                "position": self.position.tolist(),
                "normal": self.normal.tolist(),
                "lam": self.lam,
                "regular": bool(self.regular),
                "eigenvalues": None if self.eigenvalues is None
                else self.eigenvalues.tolist(),
                "asymmetry": self.asymmetry}

    @classmethod
    def from_dict(cls, d):
        eig = d.get("eigenvalues")
        return cls(base=tuple(d["base"]),
                   angles=np.array(d["angles"]),
                   position=np.array(d["position"]),
                   normal=np.array(d["normal"]),
                   lam=d["lam"], regular=d["regular"],
                   eigenvalues=None if eig is None else np.array(eig),
                   asymmetry=d.get("asymmetry", 0.0))


def _sphere_coords(theta):
    """Point of S^{d} from d hyperspherical angles (d+1 coordinates)."""
    theta = np.atleast_1d(theta)
    d = theta.shape[0]
    c = np.empty(d + 1)
    sprod = 1.0
    for i in range(d):
        c[i] = sprod * np.cos(theta[i])
        sprod *= np.sin(theta[i])
    c[d] = sprod
    return c


class HypersurfaceFamily:
    """Evaluator for the normal-bundle parametrization of one pair.

    The dimension n controls the ambient R^{n+1}; the pair's h must map
    into R^{n+1} (components beyond the stored ones are zero).  The
    normal frame at each point comes from Gram-Schmidt of ambient basis
    vectors against the tangents, in an order fixed once at the patch
    center so the frame varies continuously.
    """

    def __init__(self, pair, n=5):
        if n < 3:
            raise ValueError("the hypersurface dimension needs n >= 3")
        if pair.immersion_ok is None:
            validate_pair(pair)
        if not (pair.immersion_ok and pair.gradient_ok):
            raise ValueError("pair failed validation; cannot parametrize")
        self.pair = pair
        self.n = n
        self.ambient = n + 1
        stored = pair.target_dim
        if stored > self.ambient:
            raise ValueError("pair target dimension exceeds n + 1")
        spec = pair.spec
        self.spec = spec
        self._h_spl = [RectBivariateSpline(spec.u, spec.v,
                                           pair.h.values[..., i])
                       for i in range(stored)]
        self._r_spl = RectBivariateSpline(spec.u, spec.v, pair.r.values)
        self._stored = stored
        self._seed_order = self._frame_order()

    # -- frame and first-order data -----------------------------------

    def _h_jet(self, u, v):
        h = np.zeros(self.ambient)
        hu = np.zeros(self.ambient)
        hv = np.zeros(self.ambient)
        for i, s in enumerate(self._h_spl):
            h[i] = s(u, v)[0, 0]
            hu[i] = s(u, v, dx=1)[0, 0]
            hv[i] = s(u, v, dy=1)[0, 0]
        return h, hu, hv

    def _frame_order(self):
        """Ambient axis order by residual size at the patch center."""
        spec = self.spec
        _, hu, hv = self._h_jet(0.5 * (spec.u0 + spec.u1),
                                0.5 * (spec.v0 + spec.v1))
        basis = np.linalg.qr(np.stack([hu, hv], axis=1))[0]
        res = 1.0 - np.sum(basis ** 2, axis=1)
        return np.argsort(-res, kind="stable")

    def frame(self, u, v):
        """(h, hu, hv, xi_frame) with xi_frame of shape (n-1, n+1)."""
        h, hu, hv = self._h_jet(u, v)
        vecs = [hu / np.linalg.norm(hu)]
        second = hv - np.dot(hv, vecs[0]) * vecs[0]
        vecs.append(second / np.linalg.norm(second))
        frame = []
        for idx in self._seed_order:
            if len(frame) == self.n - 1:
                break
            cand = np.zeros(self.ambient)
            cand[idx] = 1.0
            for w in vecs:
                cand -= np.dot(cand, w) * w
            nrm = np.linalg.norm(cand)
            if nrm < 1e-8:
                continue
            cand /= nrm
            vecs.append(cand)
            frame.append(cand)
        if len(frame) != self.n - 1:
            raise RuntimeError("normal frame degenerated")
        return h, hu, hv, np.array(frame)

    def _grad_r(self, u, v, hu, hv):
        e = np.dot(hu, hu)
        f = np.dot(hu, hv)
        g = np.dot(hv, hv)
        ru = self._r_spl(u, v, dx=1)[0, 0]
        rv = self._r_spl(u, v, dy=1)[0, 0]
        det = e * g - f * f
        au = (g * ru - f * rv) / det
        av = (e * rv - f * ru) / det
        grad = au * hu + av * hv
        return grad, au * ru + av * rv  # vector and its squared norm

    def evaluate(self, u, v, theta):
        """(X, N, lam) at base (u, v) and fiber angles theta."""
        h, hu, hv, frame = self.frame(u, v)
        grad, grad2 = self._grad_r(u, v, hu, hv)
        xi = _sphere_coords(theta) @ frame
        normal = grad + np.sqrt(max(1.0 - grad2, 0.0)) * xi
        r = self._r_spl(u, v)[0, 0]
        return h - r * normal, normal, 1.0 / r

    def jacobian(self, u, v, theta, step=JET_STEP):
        """Central-difference jets of X and N in the n directions.

        Returns (dX, dN), each of shape (n+1, n); columns are the u, v
        and fiber-angle directions in that order.
        """
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        cols_x = np.empty((self.ambient, self.n))
        cols_n = np.empty((self.ambient, self.n))
        for a in range(2):
            du = step if a == 0 else 0.0
            dv = step if a == 1 else 0.0
            xp, np_, _ = self.evaluate(u + du, v + dv, theta)
            xm, nm, _ = self.evaluate(u - du, v - dv, theta)
            cols_x[:, a] = (xp - xm) / (2 * step)
            cols_n[:, a] = (np_ - nm) / (2 * step)
        for a in range(self.n - 2):
            tp = theta.copy()
            tm = theta.copy()
            tp[a] += step
            tm[a] -= step
            xp, np_, _ = self.evaluate(u, v, tp)
            xm, nm, _ = self.evaluate(u, v, tm)
            cols_x[:, 2 + a] = (xp - xm) / (2 * step)
            cols_n[:, 2 + a] = (np_ - nm) / (2 * step)
        return cols_x, cols_n

    def sample(self, u, v, theta, with_shape=True):
        x, normal, lam = self.evaluate(u, v, theta)
        dx, dn = self.jacobian(u, v, theta)
        sv = np.linalg.svd(dx, compute_uv=False)
        regular = sv[-1] > RANK_THRESHOLD * sv[0]
        out = HypersurfaceSample(base=(u, v),
                                 angles=np.atleast_1d(theta),
                                 position=x, normal=normal,
                                 lam=lam, regular=regular)
        if regular and with_shape:
            a, eigs, asym = _shape_from_jets(dx, dn)
            out.shape, out.eigenvalues, out.asymmetry = a, eigs, asym
        return out


def _shape_from_jets(dx, dn):
    """Shape operator in an orthonormal tangent basis from the jets.

    With dX = Q R, the second fundamental form -dN^T dX pushed to the
    Q basis is R^{-T} II R^{-1}; the metric there is the identity, so
    this matrix is the shape operator.  The asymmetry removed by
    symmetrization is returned for reporting.
    """
    q, r = qr(dx, mode="economic")
    ii = -0.5 * (dn.T @ dx + dx.T @ dn)
    asym_raw = np.max(np.abs(dn.T @ dx - dx.T @ dn))
    tmp = solve_triangular(r, ii.T, trans="T").T
    a = solve_triangular(r, tmp, trans="T")
    a = 0.5 * (a + a.T)
    return a, np.sort(np.linalg.eigvalsh(a)), float(asym_raw)


def gauss_map(sample):
    """The unit normal attached to a sample."""
    return sample.normal


def shape_operator(family, u, v, theta):
    """(A, eigenvalues) at one bundle point; raises on irregularity."""
    s = family.sample(u, v, theta)
    if not s.regular:
        raise ValueError("irregular sample has no shape operator")
    return s.shape, s.eigenvalues


def random_sample_set(family, count, seed, interior=0.15):
    """Seeded random (u, v, theta) tuples in the patch interior."""
    rng = np.random.default_rng(seed)
    spec = family.spec
    mu = interior * (spec.u1 - spec.u0)
    mv = interior * (spec.v1 - spec.v0)
    out = []
    for _ in range(count):
        u = rng.uniform(spec.u0 + mu, spec.u1 - mu)
        v = rng.uniform(spec.v0 + mv, spec.v1 - mv)
        # keep the leading angles away from the poles so fiber
        # derivatives stay well-scaled
        theta = rng.uniform(0.3, np.pi - 0.3, family.n - 2)
        theta[-1] = rng.uniform(0.0, 2 * np.pi)
        out.append((u, v, theta))
    return out


def parametrize(pair, sample_set=None, n=5, count=100, seed=0):
    """Evaluate the hypersurface at a sample set.

    Returns (samples, report); the report's residual is the fraction of
    irregular samples (they are flagged, kept in the list, and carry no
    shape data).
    """
    family = HypersurfaceFamily(pair, n=n)
    if sample_set is None:
        sample_set = random_sample_set(family, count, seed)
    samples = [family.sample(u, v, theta) for u, v, theta in sample_set]
    bad = sum(1 for s in samples if not s.regular)
    frac = bad / max(len(samples), 1)
    worst = None
    for s in samples:
        if not s.regular:
            worst = s.base
            break
    rep = CheckReport(name="regularity", max_residual=frac,
                      tolerance=0.1, argmax=worst,
                      extra={"total": len(samples), "irregular": bad})
    return samples, rep


def splitting_tensor(family, u, v, theta, step=1e-4):
    """Estimate C_T in the horizontal-lift basis, one 2x2 per fiber angle.

    C_T X = -(nabla_X T) projected onto the orthogonal complement of
    the vertical distribution, for X in that complement.  The matrix is
    expressed in the basis of horizontal lifts of d_u, d_v, which is
    the basis where the structure tensor J of the base surface acts by
    its coordinate matrix.  The derivative along a lift is assembled by
    linearity: the coordinate-direction derivative minus the vertical
    correction, each realized by central differences of the unit fiber
    field T.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    nf = family.n - 2

    def fiber_field(uu, vv, th, a):
        tp, tm = th.copy(), th.copy()
        tp[a] += step
        tm[a] -= step
        xp, _, _ = family.evaluate(uu, vv, tp)
        xm, _, _ = family.evaluate(uu, vv, tm)
        t = (xp - xm) / (2 * step)
        return t / np.linalg.norm(t)

    dx, _ = family.jacobian(u, v, theta)
    vert = dx[:, 2:]                      # vertical basis dX(d_theta)
    gram_v = vert.T @ vert
    lifts = np.empty((family.ambient, 2))
    coeffs = np.empty((nf, 2))
    for b in range(2):
        coeffs[:, b] = np.linalg.solve(gram_v, vert.T @ dx[:, b])
        lifts[:, b] = dx[:, b] - vert @ coeffs[:, b]
    gram_h = lifts.T @ lifts
    proj = np.eye(family.ambient) - vert @ np.linalg.solve(gram_v, vert.T)

    out = []
    for a in range(nf):
        # derivatives of T along the coordinate and fiber directions
        d_coord = []
        for b in range(2):
            du = step if b == 0 else 0.0
            dv = step if b == 1 else 0.0
            tp = fiber_field(u + du, v + dv, theta, a)
            tm = fiber_field(u - du, v - dv, theta, a)
            d_coord.append((tp - tm) / (2 * step))
        d_fiber = []
        for c in range(nf):
            tc_p, tc_m = theta.copy(), theta.copy()
            tc_p[c] += step
            tc_m[c] -= step
            tp = fiber_field(u, v, tc_p, a)
            tm = fiber_field(u, v, tc_m, a)
            d_fiber.append((tp - tm) / (2 * step))
        cols = []
        for b in range(2):
            dt = d_coord[b] - sum(coeffs[c, b] * d_fiber[c]
                                  for c in range(nf))
            rhs = lifts.T @ (proj @ dt)
            cols.append(-np.linalg.solve(gram_h, rhs))
        out.append(np.stack(cols, axis=1))
    return out


def span_ij_deviation(c, j):
    """Distance of a 2x2 matrix from span{I, J} for the given J."""
    basis = np.stack([np.eye(2).ravel(), np.asarray(j).ravel()], axis=1)
    coef, *_ = np.linalg.lstsq(basis, c.ravel(), rcond=None)
    return float(np.linalg.norm(c.ravel() - basis @ coef))


def focal_loop(family, samples, patch_g=None, chart=None, fiber_step=None):
    """Close the loop: the focal map S of the hypersurface equals g.

    Checks per regular sample: (a) <S, S> = 1, (b) S is locally
    constant along the fiber, (c) S coincides with the surface map g
    evaluated at the sample base, (d) base derivatives of S reproduce
    the metric of g.  Checks (c) and (d) need patch_g (a vector
    GridFunction) and the default chart.
    """
    if chart is None:
        chart = default_chart(family.n)
    if fiber_step is None:
        fiber_step = min(family.spec.du, family.spec.dv)

    def s_of(u, v, theta):
        x, normal, lam = family.evaluate(u, v, theta)
        return lam * chart.embed(x) + chart.embed_differential(x, normal)

    g_spl = None
    if patch_g is not None:
        spec = patch_g.spec
        g_spl = [RectBivariateSpline(spec.u, spec.v,
                                     patch_g.values[..., i])
                 for i in range(patch_g.values.shape[-1])]

    res_norm = res_fiber = res_match = res_metric = 0.0
    for smp in samples:
        if not smp.regular:
            continue
        u, v = smp.base
        s0 = s_of(u, v, smp.angles)
        res_norm = max(res_norm, abs(inner(s0, s0) - 1.0))
        for a in range(family.n - 2):
            tp = smp.angles.copy()
            tp[a] += fiber_step
            res_fiber = max(res_fiber,
                            np.max(np.abs(s_of(u, v, tp) - s0)))
        if g_spl is not None:
            g_here = np.array([s(u, v)[0, 0] for s in g_spl])
            res_match = max(res_match, np.max(np.abs(s0 - g_here)))
            e = JET_STEP
            su = (s_of(u + e, v, smp.angles)
                  - s_of(u - e, v, smp.angles)) / (2 * e)
            sv = (s_of(u, v + e, smp.angles)
                  - s_of(u, v - e, smp.angles)) / (2 * e)
            gu = np.array([s(u, v, dx=1)[0, 0] for s in g_spl])
            gv = np.array([s(u, v, dy=1)[0, 0] for s in g_spl])
            dev = max(abs(inner(su, su) - inner(gu, gu)),
                      abs(inner(su, sv) - inner(gu, gv)),
                      abs(inner(sv, sv) - inner(gv, gv)))
            res_metric = max(res_metric, dev)

    spec = family.spec
    h1 = spec.du + spec.dv
    reports = [CheckReport("focal_unit_norm", res_norm, 1e-8),
               CheckReport("focal_fiber_constancy", res_fiber, 4.0 * h1)]
    if g_spl is not None:
        reports.append(CheckReport("focal_matches_g", res_match, 1e-6))
        reports.append(CheckReport("focal_metric_identity", res_metric,
                                   10.0 * h1 ** 2))
    return reports


# -- export ---------------------------------------------------------------


def samples_to_csv(samples, path):
    with open(path, "w") as fh:
        first = samples[0]
        nth = len(first.angles)
        amb = len(first.position)
        head = ["u", "v"]
        head += [f"theta{i + 1}" for i in range(nth)]
        head += [f"X{i + 1}" for i in range(amb)]
        head += [f"N{i + 1}" for i in range(amb)]
        head += ["lambda"]
        head += [f"eig{i + 1}" for i in range(amb - 1)]
        fh.write(",".join(head) + "\n")
        for s in samples:
            row = [*s.base, *s.angles, *s.position, *s.normal, s.lam]
            if s.eigenvalues is not None:
                row += list(s.eigenvalues)
            else:
                row += [float("nan")] * (amb - 1)
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def samples_to_json(samples, path):
    with open(path, "w") as fh:
        json.dump([s.to_dict() for s in samples], fh)


def slice_to_obj(family, theta, path, stride=1, interior=2):
    """Export the 2-D slice at fixed fiber angles as an OBJ mesh.

    Vertices are hypersurface positions over the (strided) base grid;
    only the first three ambient coordinates are written.
    """
    spec = family.spec
    us = spec.u[interior:spec.nu - interior:stride]
    vs = spec.v[interior:spec.nv - interior:stride]
    idx = {}
    lines = []
    for i, u in enumerate(us):
        for j, v in enumerate(vs):
            x, _, _ = family.evaluate(u, v, theta)
            idx[i, j] = len(idx) + 1
            lines.append("v " + " ".join(f"{c:.9g}" for c in x[:3]))
    for i in range(len(us) - 1):
        for j in range(len(vs) - 1):
            a, b = idx[i, j], idx[i + 1, j]
            c, d = idx[i + 1, j + 1], idx[i, j + 1]
            lines.append(f"f {a} {b} {c}")
            lines.append(f"f {a} {c} {d}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
