"""Conformal infinitesimal bending calculus on sampled hypersurfaces.

A variation field T along a hypersurface f with conformal factor rho
satisfies

    <d_X T, f_* Y> + <f_* X, d_Y T> = 2 rho <X, Y>.

The module evaluates this residual for ambient fields (conformal
Killing fields in closed form, or user callables), assembles the
associated tensors: the symmetric operator curly-B with
<curly-B X, Y> = <B(X, Y), N> and the Hessian operator H of rho,
tests the fundamental Gauss/Codazzi system they satisfy, the
flatness/nullity of the R^4-valued form theta, and the triviality
criterion curly-B = phi I.  For the converse direction it checks
conditions (i)-(v) on the tensor D = mu J lifted from the base
surface to the horizontal plane of a parametrized hypersurface, and
the first-order conformality of the straight-line variation f + tT.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .reports import CheckReport

__all__ = [
    "KillingData",
    "BendingField",
    "random_killing",
    "killing_field",
    "cib_residual",
    "associated_tensors",
    "fundamental_residuals",
    "theta_checks",
    "triviality_test",
    "d_conditions",
    "conformality_derivative",
    "first_order_conformality",
]

#: Step for parameter-space stencils of covariant derivatives.
STENCIL_STEP = 1e-4


@dataclass
class KillingData:
    """Coefficients of a conformal Killing field of R^{n+1}.

    chi(x) = (<x, v> + lam) x - |x|^2 v / 2 + C x + w, with C skew.
    The conformal factor is rho(x) = <x, v> + lam.
    """

    lam: float
    v: np.ndarray
    w: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if np.max(np.abs(self.c + self.c.T)) > 1e-12:
            raise ValueError("C must be skew-symmetric")

    def chi(self, x):
        return ((x @ self.v + self.lam)[..., None] * x
                - 0.5 * np.sum(x * x, axis=-1)[..., None] * self.v
                + x @ self.c.T + self.w)

    def rho(self, x):
        return x @ self.v + self.lam

    def dchi(self, x, u):
        """Directional derivative of chi at x along u."""
        return ((u @ self.v)[..., None] * x
                + (x @ self.v + self.lam)[..., None] * u
                - np.sum(x * u, axis=-1)[..., None] * self.v
                + u @ self.c.T)

    def d2chi(self, u, z):
        """Second derivative, constant in x."""
        return ((u @ self.v)[..., None] * z + (z @ self.v)[..., None] * u
                - np.sum(u * z, axis=-1)[..., None] * self.v)

    def to_json_dict(self):
        return {"lam": self.lam, "v": self.v.tolist(),
                "w": self.w.tolist(), "c": self.c.tolist()}

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, d):
        return cls(d["lam"], np.array(d["v"]), np.array(d["w"]),
                   np.array(d["c"]))

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def random_killing(dim, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(dim, dim))
    return KillingData(lam=scale * rng.normal(),
                       v=scale * rng.normal(size=dim),
                       w=scale * rng.normal(size=dim),
                       c=scale * 0.5 * (raw - raw.T))


def killing_field(data, x):
    """(chi(x), rho(x)) for one point or a batch."""
    return data.chi(np.asarray(x, dtype=float)), data.rho(np.asarray(x))


@dataclass
class BendingField:
    """An ambient variation field restricted to the hypersurface.

    All members are callables of the ambient point; derivatives of T
    default to central differences of t_fn when not supplied.
    """

    t_fn: object
    rho_fn: object
    dt_fn: object = field(default=None)
    d2t_fn: object = field(default=None)
    grad_rho_fn: object = field(default=None)
    hess_rho_fn: object = field(default=None)

    def __post_init__(self):
        eps = 1e-6
        if self.dt_fn is None:
            t = self.t_fn
            self.dt_fn = lambda x, u: (t(x + eps * u)
                                       - t(x - eps * u)) / (2 * eps)
        if self.d2t_fn is None:
            dt = self.dt_fn
            self.d2t_fn = lambda x, u, z: (dt(x + eps * z, u)
                                           - dt(x - eps * z, u)) / (2 * eps)
        if self.grad_rho_fn is None:
            r = self.rho_fn

            def grad(x):
                g = np.empty_like(x, dtype=float)
                for i in range(x.shape[-1]):
                    e = np.zeros(x.shape[-1])
                    e[i] = eps
                    g[..., i] = (r(x + e) - r(x - e)) / (2 * eps)
                return g
            self.grad_rho_fn = grad
        if self.hess_rho_fn is None:
            gr = self.grad_rho_fn
            self.hess_rho_fn = lambda x, u: (gr(x + eps * u)
                                             - gr(x - eps * u)) / (2 * eps)

    @classmethod
    def from_killing(cls, data):
        return cls(t_fn=data.chi, rho_fn=data.rho, dt_fn=data.dchi,
                   d2t_fn=lambda x, u, z: data.d2chi(u, z),
                   grad_rho_fn=lambda x: np.broadcast_to(
                       data.v, x.shape).copy(),
                   hess_rho_fn=lambda x, u: np.zeros_like(u))

    @classmethod
    def constant(cls, vec):
        vec = np.asarray(vec, dtype=float)
        zero = np.zeros_like(vec)
        return cls(t_fn=lambda x: np.broadcast_to(vec, x.shape).copy(),
                   rho_fn=lambda x: np.zeros(x.shape[:-1]),
                   dt_fn=lambda x, u: np.zeros_like(u),
                   d2t_fn=lambda x, u, z: np.zeros_like(u),
                   grad_rho_fn=lambda x: np.broadcast_to(zero,
                                                         x.shape).copy(),
                   hess_rho_fn=lambda x, u: np.zeros_like(u))

    @classmethod
    def position(cls):
        """T(x) = x with rho = 1: the dilation field."""
        return cls(t_fn=lambda x: np.array(x, dtype=float),
                   rho_fn=lambda x: np.ones(x.shape[:-1]),
                   dt_fn=lambda x, u: np.array(u, dtype=float),
                   d2t_fn=lambda x, u, z: np.zeros_like(u),
                   grad_rho_fn=lambda x: np.zeros_like(x),
                   hess_rho_fn=lambda x, u: np.zeros_like(u))

    def rescaled(self, c):
        """The field cT with factor c rho (scale equivariance)."""
        return BendingField(
            t_fn=lambda x: c * self.t_fn(x),
            rho_fn=lambda x: c * self.rho_fn(x),
            dt_fn=lambda x, u: c * self.dt_fn(x, u),
            d2t_fn=lambda x, u, z: c * self.d2t_fn(x, u, z),
            grad_rho_fn=lambda x: c * self.grad_rho_fn(x),
            hess_rho_fn=lambda x, u: c * self.hess_rho_fn(x, u))

    def with_shifted_rho(self, shift):
        """Deliberately wrong factor rho + shift (negative control)."""
        return BendingField(t_fn=self.t_fn,
                            rho_fn=lambda x: self.rho_fn(x) + shift,
                            dt_fn=self.dt_fn, d2t_fn=self.d2t_fn,
                            grad_rho_fn=self.grad_rho_fn,
                            hess_rho_fn=self.hess_rho_fn)


# -- per-sample geometry --------------------------------------------------


def _point_frame(family, u, v, theta):
    x, normal, lam = family.evaluate(u, v, theta)
    dx, dn = family.jacobian(u, v, theta)
    gram = dx.T @ dx
    alpha = -0.5 * (dn.T @ dx + dx.T @ dn)  # 2nd fundamental form, coords
    return {"x": x, "n": normal, "lam": lam, "dx": dx, "dn": dn,
            "gram": gram, "alpha": alpha}


def cib_residual(bf, family, sample_points, tol=None):
    """Max residual of the bending equation over the sample set.

    The residual is evaluated on the coordinate tangent basis, which
    spans all tangent pairs by bilinearity, and normalized by the
    metric scale.
    """
    worst, where_pt = 0.0, None
    for u, v, theta in sample_points:
        fr = _point_frame(family, u, v, theta)
        x, dx = fr["x"], fr["dx"]
        rho = float(bf.rho_fn(x))
        dts = np.stack([bf.dt_fn(x, dx[:, k])
                        for k in range(dx.shape[1])], axis=1)
        res = dts.T @ dx + dx.T @ dts - 2.0 * rho * fr["gram"]
        scale = max(np.max(np.abs(fr["gram"])), 1e-30)
        val = np.max(np.abs(res)) / scale
        if val > worst:
            worst, where_pt = val, (u, v)
    if tol is None:
        tol = 1e-8
    return CheckReport(name="bending_equation", max_residual=worst,
                       tolerance=tol, argmax=where_pt or ())


def _tensors_at(bf, family, u, v, theta):
    """curly-B and H as operators in the coordinate tangent basis.

    <curly-B X, Y> = <d2T(f_*X, f_*Y), N> + alpha(X, Y)(<dT N, N> - rho)
    and H = P Hess_rho f_* + <grad rho, N> A, both exact consequences
    of the definitions for an ambient field.
    """
    fr = _point_frame(family, u, v, theta)
    x, nrm, dx, dn = fr["x"], fr["n"], fr["dx"], fr["dn"]
    nd = dx.shape[1]
    rho = float(bf.rho_fn(x))
    b_form = np.empty((nd, nd))
    for i in range(nd):
        d2 = np.stack([bf.d2t_fn(x, dx[:, i], dx[:, j])
                       for j in range(nd)], axis=1)
        b_form[i, :] = nrm @ d2
    corr = float(nrm @ bf.dt_fn(x, nrm)) - rho
    b_form = 0.5 * (b_form + b_form.T) + corr * fr["alpha"]
    gram_inv = np.linalg.inv(fr["gram"])
    b_op = gram_inv @ b_form

    g_amb = bf.grad_rho_fn(x[None, :])[0]
    hess_cols = np.stack([bf.hess_rho_fn(x[None, :],
                                         dx[None, :, k])[0]
                          for k in range(nd)], axis=1)
    h_form = dx.T @ hess_cols  # tangential projection via pairing
    a_op = gram_inv @ fr["alpha"]
    h_op = gram_inv @ h_form + float(g_amb @ nrm) * a_op
    return fr, b_op, h_op, a_op


def associated_tensors(bf, family, sample_points):
    """Per sample: (curly-B, H, A) in an orthonormal tangent basis.

    Returns a list of dicts; asymmetry of the raw curly-B form is
    recorded before symmetrization.
    """
    out = []
    for u, v, theta in sample_points:
        fr, b_op, h_op, a_op = _tensors_at(bf, family, u, v, theta)
        r = np.linalg.cholesky(fr["gram"]).T  # gram = R^T R
        r_inv = np.linalg.inv(r)
        to_on = lambda m: r @ m @ r_inv  # noqa: E731
        b_on = to_on(b_op)
        out.append({"base": (u, v), "theta": np.atleast_1d(theta),
                    "B": 0.5 * (b_on + b_on.T),
                    "H": to_on(h_op), "A": to_on(a_op),
                    "asymmetry": float(np.max(np.abs(b_on - b_on.T))),
                    "frame": fr, "r_factor": r})
    return out


def _wedge_residual(b, a, h, rng, trials=20):
    """Gauss-equation residual over random tangent pairs (orthonormal)."""
    n = b.shape[0]
    worst = 0.0
    for _ in range(trials):
        x, y = rng.normal(size=(2, n))
        bx, by = b @ x, b @ y
        ax, ay = a @ x, a @ y
        hx, hy = h @ x, h @ y
        m = (np.outer(bx, ay) - np.outer(ay, bx)
             - np.outer(by, ax) + np.outer(ax, by)
             + np.outer(x, hy) - np.outer(hy, x)
             - np.outer(y, hx) + np.outer(hx, y))
        scale = max(np.linalg.norm(x) * np.linalg.norm(y), 1e-30)
        worst = max(worst, np.max(np.abs(m)) / scale)
    return worst


def fundamental_residuals(bf, family, sample_points, seed=0, tol=None,
                          tensors=None):
    """Residuals of the Gauss and Codazzi equations for curly-B and H.

    The Codazzi part differentiates the curly-B field over a parameter
    stencil with the discrete Levi-Civita connection of the induced
    metric; it needs the ambient gradient of rho and is skipped when
    the field cannot provide one (tensors passed directly).
    """
    if tensors is None:
        tensors = associated_tensors(bf, family, sample_points)
    rng = np.random.default_rng(seed)
    gauss = max(_wedge_residual(t["B"], t["A"], t["H"], rng)
                for t in tensors)
    spec = family.spec
    h1 = spec.du + spec.dv
    if tol is None:
        tol = 50.0 * h1 ** 2
    reports = [CheckReport(name="fundamental_gauss", max_residual=gauss,
                           tolerance=tol)]
    if bf is not None:
        cod = max(_codazzi_at(bf, family, u, v, theta, rng)
                  for u, v, theta in sample_points)
        reports.append(CheckReport(name="fundamental_codazzi",
                                   max_residual=cod, tolerance=tol))
    return reports


def _codazzi_at(bf, family, u, v, theta, rng, step=STENCIL_STEP):
    """(nabla_X B)Y - (nabla_Y B)X + (X wedge Y) A grad(rho), coords."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    nd = family.n

    def op_at(uu, vv, th):
        _, b_op, _, _ = _tensors_at(bf, family, uu, vv, th)
        return b_op

    fr, b0, _, a_op = _tensors_at(bf, family, u, v, theta)
    gram, dx = fr["gram"], fr["dx"]
    gram_inv = np.linalg.inv(gram)

    # Christoffel matrices of the induced metric over the stencil
    dgram = []
    for k in range(nd):
        up = _shift(u, v, theta, k, step)
        dn_ = _shift(u, v, theta, k, -step)
        gp = _point_frame(family, *up)["gram"]
        gm = _point_frame(family, *dn_)["gram"]
        dgram.append((gp - gm) / (2 * step))
    gamma = np.empty((nd, nd, nd))  # gamma[a][i][b] for nabla_a e_b
    for a in range(nd):
        for b in range(nd):
            rhs = 0.5 * (dgram[a][b, :] + dgram[b][a, :]
                         - np.array([dgram[c][a, b] for c in range(nd)]))
            gamma[a, :, b] = gram_inv @ rhs

    db = []
    for k in range(nd):
        up = _shift(u, v, theta, k, step)
        dn_ = _shift(u, v, theta, k, -step)
        db.append((op_at(*up) - op_at(*dn_)) / (2 * step))
    cov = [db[a] + gamma[a] @ b0 - b0 @ gamma[a] for a in range(nd)]

    x_amb = fr["x"]
    g_amb = bf.grad_rho_fn(x_amb[None, :])[0]
    grad_coords = gram_inv @ (dx.T @ g_amb)
    agr = a_op @ grad_coords

    worst = 0.0
    scale = max(np.max(np.abs(gram)), 1.0)
    for _ in range(10):
        xc, yc = rng.normal(size=(2, nd))
        cx = sum(xc[a] * cov[a] for a in range(nd))
        cy = sum(yc[a] * cov[a] for a in range(nd))
        lhs = cx @ yc - cy @ xc
        wedge = (gram @ yc) @ agr * xc - (gram @ xc) @ agr * yc
        res = np.max(np.abs(lhs + wedge)) / scale
        worst = max(worst, res / max(np.linalg.norm(xc)
                                     * np.linalg.norm(yc), 1e-30))
    return worst


def _shift(u, v, theta, k, s):
    if k == 0:
        return u + s, v, theta
    if k == 1:
        return u, v + s, theta
    t = theta.copy()
    t[k - 2] += s
    return u, v, t


def theta_checks(tensors, seed=0, trials=60, tol=None, spec=None):
    """Flatness and nullity of the R^4-valued form theta.

    theta(X, Y) = (<(A+B)X,Y>, <(I+H)X,Y>, <(A-B)X,Y>, <(I-H)X,Y>)
    with signature (1, 1, -1, -1).  Flatness must hold for every
    bending; nullity is reported as evidence only.
    """
    rng = np.random.default_rng(seed)
    sig = np.array([1.0, 1.0, -1.0, -1.0])
    flat = null = 0.0
    for t in tensors:
        a, b, h = t["A"], t["B"], t["H"]
        n = a.shape[0]
        eye = np.eye(n)
        blocks = np.stack([a + b, eye + h, a - b, eye - h])
        scale = max(np.max(np.abs(blocks)), 1.0) ** 2
        for _ in range(trials):
            x, y, z, w = rng.normal(size=(4, n))
            txy = blocks @ y @ x
            tzw = blocks @ w @ z
            txw = blocks @ w @ x
            tzy = blocks @ y @ z
            ip1 = np.sum(sig * txy * tzw)
            ip2 = np.sum(sig * txw * tzy)
            nrm = (np.linalg.norm(x) * np.linalg.norm(y)
                   * np.linalg.norm(z) * np.linalg.norm(w) * scale)
            flat = max(flat, abs(ip1 - ip2) / nrm)
            null = max(null, abs(ip1) / nrm)
    if tol is None:
        tol = 1e-6 if spec is None else 50.0 * (spec.du + spec.dv) ** 2
    return [CheckReport(name="theta_flat", max_residual=flat,
                        tolerance=tol),
            CheckReport(name="theta_null", max_residual=null,
                        tolerance=tol)]


def triviality_test(tensors, tol=1e-6):
    """True iff curly-B is a pointwise multiple of the identity.

    Returns (trivial, phi values, worst deviation).  Umbilic samples
    (A within tol of a multiple of I) are skipped, as the criterion is
    only decisive away from them.
    """
    phis = []
    worst = 0.0
    for t in tensors:
        a, b = t["A"], t["B"]
        n = a.shape[0]
        a_dev = np.max(np.abs(a - (np.trace(a) / n) * np.eye(n)))
        if a_dev < tol:
            continue
        phi = np.trace(b) / n
        dev = np.max(np.abs(b - phi * np.eye(n)))
        rel = dev / max(np.max(np.abs(b)), 1.0)
        worst = max(worst, rel)
        phis.append(phi)
    return worst <= tol, np.array(phis), worst


def conformality_derivative(bf, family, point, dt=1e-4):
    """Derivative matrix of the scaled metric of f + tT at t = 0.

    Returns (d/dt of e^{-2 t rho} <f_t* e_a, f_t* e_b> at 0, frame).
    """
    u, v, theta = point
    fr = _point_frame(family, u, v, theta)
    x, dx = fr["x"], fr["dx"]
    rho = float(bf.rho_fn(x))
    dts = np.stack([bf.dt_fn(x, dx[:, k])
                    for k in range(dx.shape[1])], axis=1)

    def metric(t):
        cols = dx + t * dts
        return np.exp(-2 * t * rho) * (cols.T @ cols)

    return (metric(dt) - metric(-dt)) / (2 * dt), fr


def first_order_conformality(bf, family, sample_points, dt=1e-4,
                             tol=None, seed=0):
    """d/dt at t=0 of e^{-2 t rho} <f_t* X, f_t* Y> for f_t = f + tT.

    Central differences in t; the derivative must vanish to first
    order exactly when rho is the conformal factor of T.
    """
    rng = np.random.default_rng(seed)
    worst, where_pt = 0.0, None
    for u, v, theta in sample_points:
        deriv, fr = conformality_derivative(bf, family, (u, v, theta), dt)
        scale = max(np.max(np.abs(fr["gram"])), 1e-30)
        for _ in range(5):
            xc, yc = rng.normal(size=(2, deriv.shape[0]))
            val = abs(xc @ deriv @ yc) / (np.linalg.norm(xc)
                                          * np.linalg.norm(yc) * scale)
            if val > worst:
                worst, where_pt = val, (u, v)
    if tol is None:
        tol = 1e-7 + 10.0 * dt ** 2
    return CheckReport(name="first_order_conformality",
                       max_residual=worst, tolerance=tol, argmax=where_pt or ())


# -- conditions (i)-(v) for D = mu J --------------------------------------


class _HorizontalCalculus:
    """Geometry of the horizontal plane of a parametrized hypersurface.

    Wraps the lift basis, its metric, the restricted shape operator
    and derivative stencils along horizontal lifts; D = mu J acts in
    the lift basis by mu times the coordinate matrix of J.
    """

    def __init__(self, family, j_matrix, mu_values, step=STENCIL_STEP):
        self.family = family
        self.j = j_matrix
        spec = family.spec
        self.mu_spl = RectBivariateSpline(spec.u, spec.v, mu_values)
        self.step = step

    def point(self, u, v, theta):
        fam = self.family
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        dx, dn = fam.jacobian(u, v, theta)
        vert = dx[:, 2:]
        gram_v = vert.T @ vert
        coeffs = np.linalg.solve(gram_v, vert.T @ dx[:, :2])
        lifts = dx[:, :2] - vert @ coeffs
        gram = lifts.T @ lifts
        dn_lift = dn[:, :2] - dn[:, 2:] @ coeffs
        a_op = np.linalg.solve(gram, lifts.T @ (-dn_lift))
        r = self.mu_spl(u, v)[0, 0]
        lam = 1.0 / self.family._r_spl(u, v)[0, 0]
        lam_u = -self.family._r_spl(u, v, dx=1)[0, 0] * lam ** 2
        lam_v = -self.family._r_spl(u, v, dy=1)[0, 0] * lam ** 2
        grad_lam = np.linalg.solve(gram, np.array([lam_u, lam_v]))
        return {"u": u, "v": v, "theta": theta, "lifts": lifts,
                "gram": gram, "coeffs": coeffs, "a": a_op,
                "mu": r, "lam": lam, "grad_lam": grad_lam,
                "d": r * self.j}

    def lift_derivative(self, field, pt, b):
        """Central difference of an ambient-valued field along lift b.

        field(u, v, theta) -> ambient vector; the derivative combines
        the coordinate-direction difference with the vertical
        corrections so it runs along the horizontal lift.
        """
        s = self.step
        u, v, theta = pt["u"], pt["v"], pt["theta"]
        if b == 0:
            d = (field(u + s, v, theta) - field(u - s, v, theta)) / (2 * s)
        else:
            d = (field(u, v + s, theta) - field(u, v - s, theta)) / (2 * s)
        for c in range(len(theta)):
            tp, tm = theta.copy(), theta.copy()
            tp[c] += s
            tm[c] -= s
            dv = (field(u, v, tp) - field(u, v, tm)) / (2 * s)
            d -= pt["coeffs"][c, b] * dv
        return d

    def horizontal_coords(self, pt, w):
        """Coordinates of the horizontal part of an ambient vector."""
        return np.linalg.solve(pt["gram"], pt["lifts"].T @ w)

    def op_derivative(self, op_name_fn, pt, b):
        """(nabla^h_b M) in the lift basis for M e_b' ambient fields."""
        cols = []
        for bp in range(2):
            def m_field(uu, vv, th, bp=bp):
                q = self.point(uu, vv, th)
                mat = op_name_fn(q)
                return q["lifts"] @ mat[:, bp]

            def lift_field(uu, vv, th, bp=bp):
                return self.point(uu, vv, th)["lifts"][:, bp]

            d_m = self.lift_derivative(m_field, pt, b)
            d_l = self.lift_derivative(lift_field, pt, b)
            m0 = op_name_fn(pt)
            cols.append(self.horizontal_coords(pt, d_m)
                        - m0 @ self.horizontal_coords(pt, d_l))
        return np.stack(cols, axis=1)

    def fiber_derivative_of_d(self, pt, c):
        """(nabla^h_T D) along the c-th fiber direction (condition ii)."""
        s = self.step
        u, v, theta = pt["u"], pt["v"], pt["theta"]
        cols = []
        for bp in range(2):
            def m_field(uu, vv, th, bp=bp):
                q = self.point(uu, vv, th)
                return q["lifts"] @ q["d"][:, bp]

            def lift_field(uu, vv, th, bp=bp):
                return self.point(uu, vv, th)["lifts"][:, bp]

            tp, tm = theta.copy(), theta.copy()
            tp[c] += s
            tm[c] -= s
            d_m = (m_field(u, v, tp) - m_field(u, v, tm)) / (2 * s)
            d_l = (lift_field(u, v, tp) - lift_field(u, v, tm)) / (2 * s)
            cols.append(self.horizontal_coords(pt, d_m)
                        - pt["d"] @ self.horizontal_coords(pt, d_l))
        return np.stack(cols, axis=1)

    def hessian_lambda(self, pt):
        def w_field(uu, vv, th):
            q = self.point(uu, vv, th)
            return q["lifts"] @ q["grad_lam"]

        rows = [pt["lifts"].T @ self.lift_derivative(w_field, pt, b)
                for b in range(2)]
        h = np.stack(rows, axis=0)
        return 0.5 * (h + h.T)


def d_conditions(family, j_matrix, mu_values, sample_points,
                 tol_scale=1.0):
    """The five admissibility conditions for D = mu J on samples.

    Residuals are normalized by the natural scale of each identity and
    reported against C * (du + dv); first-order accuracy is all the
    one-sided stencil machinery guarantees.
    """
    if np.max(np.abs(mu_values)) == 0.0:
        raise ValueError("D = mu J needs a nowhere-vanishing mu")
    calc = _HorizontalCalculus(family, j_matrix, mu_values)
    spec = family.spec
    h1 = spec.du + spec.dv
    names = ["d_symmetry", "d_leaf_constancy", "d_codazzi",
             "d_hessian", "d_wedge"]
    tols = [2.0 * h1 ** 2 * tol_scale, 0.5 * h1 * tol_scale,
            0.5 * h1 * tol_scale, 1.0 * h1 * tol_scale, 1e-10]
    worst = np.zeros(5)
    arg = [None] * 5

    def track(idx, val, base):
        if val > worst[idx]:
            worst[idx] = val
            arg[idx] = base

    for u, v, theta in sample_points:
        pt = calc.point(u, v, theta)
        gram, a_op, d_op = pt["gram"], pt["a"], pt["d"]
        lam = pt["lam"]
        amli = a_op - lam * np.eye(2)
        m_op = amli @ d_op
        scale = max(np.max(np.abs(gram)) * np.max(np.abs(m_op)), 1e-30)

        # (i) (A - lam I) D symmetric as a bilinear form
        form = gram @ m_op
        track(0, np.max(np.abs(form - form.T)) / scale, (u, v))

        # (ii) D parallel along the leaves
        for c in range(family.n - 2):
            dd = calc.fiber_derivative_of_d(pt, c)
            track(1, np.max(np.abs(dd)) / max(np.max(np.abs(d_op)), 1e-30),
                  (u, v))

        # (iii) Codazzi-type identity for (A - lam I) D
        def m_fn(q):
            return (q["a"] - q["lam"] * np.eye(2)) @ q["d"]

        cov_u = calc.op_derivative(m_fn, pt, 0)
        cov_v = calc.op_derivative(m_fn, pt, 1)
        lhs = cov_u[:, 1] - cov_v[:, 0]
        dt_grad = np.linalg.solve(gram, d_op.T @ gram) @ pt["grad_lam"]
        e_u, e_v = np.eye(2)
        wedge = ((gram @ e_v) @ dt_grad) * e_u \
            - ((gram @ e_u) @ dt_grad) * e_v
        sc3 = max(np.max(np.abs(m_op)), np.max(np.abs(dt_grad)), 1e-30)
        track(2, np.max(np.abs(lhs - wedge)) / sc3, (u, v))

        # (iv) scalar identity with the Hessian of lambda
        def d_fn(q):
            return q["d"]

        dd_u = calc.op_derivative(d_fn, pt, 0)
        dd_v = calc.op_derivative(d_fn, pt, 1)
        hess = calc.hessian_lambda(pt)
        x, y = e_u, e_v
        cd_term = (gram @ ((dd_v @ x) - (dd_u @ y))) @ pt["grad_lam"]
        hs_term = (d_op @ x) @ hess @ y - x @ hess @ (d_op @ y)
        rhs = lam * ((a_op @ x) @ gram @ (m_op @ y)
                     - (m_op @ x) @ gram @ (a_op @ y))
        sc4 = max(abs(lam) * np.max(np.abs(gram))
                  * max(np.max(np.abs(a_op)), 1.0)
                  * np.max(np.abs(m_op)), 1e-30)
        track(3, abs(cd_term + hs_term - rhs) / sc4, (u, v))

        # (v) wedge symmetry of (A - lam I) D against (A - lam I);
        # U wedge V as the operator Z -> <V,Z>U - <U,Z>V on the plane
        def wedge_op(p, q):
            return np.outer(p, gram @ q) - np.outer(q, gram @ p)

        rm = (wedge_op(m_op @ e_u, amli @ e_v)
              - wedge_op(m_op @ e_v, amli @ e_u))
        sc5 = max(np.max(np.abs(gram)) * np.max(np.abs(m_op))
                  * np.max(np.abs(amli)), 1e-30)
        track(4, np.max(np.abs(rm)) / sc5, (u, v))

    return [CheckReport(name=names[i], max_residual=float(worst[i]),
                        tolerance=tols[i], argmax=arg[i] or ())
            for i in range(5)]
