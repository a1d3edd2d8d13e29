"""Grids and the two generating linear PDEs.

Hyperbolic:  psi_uv + M psi = 0, posed as a Goursat problem with data on
the characteristics u = u0 and v = v0, solved by second-order cell
marching.

Elliptic:  psi_zzbar + M psi = 0 with z = u + iv, equivalently
(1/4)(psi_uu + psi_vv) + M psi = 0, posed as a Dirichlet problem and
solved with the five-point stencil and a sparse direct solve.

Grid arrays are indexed values[i, j] = value at (u_i, v_j).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "GridSpec",
    "GridFunction",
    "CoefficientField",
    "coefficient_from_source",
    "solve_goursat",
    "solve_elliptic",
    "residual",
]


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (u, v) sampling of the coordinate domain."""

    u0: float
    u1: float
    v0: float
    v1: float
    nu: int
    nv: int

    def __post_init__(self):
        if self.u1 <= self.u0 or self.v1 <= self.v0:
            raise ValueError("degenerate interval")
        if self.nu < 4 or self.nv < 4:
            raise ValueError("need at least 4 samples per direction")

    @property
    def du(self):
        return (self.u1 - self.u0) / (self.nu - 1)

    @property
    def dv(self):
        return (self.v1 - self.v0) / (self.nv - 1)

    @property
    def u(self):
        return np.linspace(self.u0, self.u1, self.nu)

    @property
    def v(self):
        return np.linspace(self.v0, self.v1, self.nv)

    def meshgrid(self):
        return np.meshgrid(self.u, self.v, indexing="ij")

    def to_dict(self):
        return {"u0": self.u0, "u1": self.u1, "v0": self.v0,
                "v1": self.v1, "nu": self.nu, "nv": self.nv}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in ("u0", "u1", "v0", "v1", "nu", "nv")})


class GridFunction:
    """Scalar or vector field sampled on a GridSpec.

    values has shape (nu, nv) for scalars or (nu, nv, d) for fields with
    values in R^d (or L^d).
    """

    def __init__(self, spec, values):
        values = np.asarray(values, dtype=float) if not np.iscomplexobj(values) \
            else np.asarray(values)
        if values.shape[:2] != (spec.nu, spec.nv):
            raise ValueError("values shape does not match grid spec")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function contains non-finite values")
        self.spec = spec
        self.values = values

    @classmethod
    def sample(cls, spec, fn):
        uu, vv = spec.meshgrid()
        return cls(spec, fn(uu, vv))

    @classmethod
    def constant(cls, spec, c):
        return cls(spec, np.full((spec.nu, spec.nv), float(c)))

    def d_du(self):
        return np.gradient(self.values, self.spec.du, axis=0, edge_order=2)

    def d_dv(self):
        return np.gradient(self.values, self.spec.dv, axis=1, edge_order=2)

    def d_duv(self):
        g = np.gradient(self.values, self.spec.du, axis=0, edge_order=2)
        return np.gradient(g, self.spec.dv, axis=1, edge_order=2)

    # -- serialization ------------------------------------------------

    def to_json_dict(self):
        out = {"spec": self.spec.to_dict(),
               "shape": list(self.values.shape),
               "values": np.real_if_close(self.values).ravel().tolist()}
        return out

    @classmethod
    def from_json_dict(cls, d):
        spec = GridSpec.from_dict(d["spec"])
        values = np.array(d["values"]).reshape(d["shape"])
        return cls(spec, values)

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def save_csv(self, path):
        """Row-major CSV with header u,v,value (scalar fields only)."""
        if self.values.ndim != 2:
            raise ValueError("CSV export is for scalar fields")
        uu, vv = self.spec.meshgrid()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["u", "v", "value"])
            for u, v, w in zip(uu.ravel(), vv.ravel(), self.values.ravel()):
                writer.writerow([repr(float(u)), repr(float(v)), repr(float(w))])

    @classmethod
    def load_csv(cls, path, spec):
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["u", "v", "value"]:
                raise ValueError("expected header u,v,value")
            vals = np.array([float(row[2]) for row in reader])
        return cls(spec, vals.reshape(spec.nu, spec.nv))


@dataclass(frozen=True)
class CoefficientField:
    """Zero-order coefficient M of the generating equations."""

    m: GridFunction

    def __post_init__(self):
        if self.m.values.ndim != 2:
            raise ValueError("coefficient must be scalar")


def coefficient_from_source(source, spec):
    """Build M from a named source.

    Accepted forms: ``const:<c>``, ``poly:<c00,c10,c01,c20,c11,c02,...>``
    (coefficients of u^a v^b ordered by total degree), or a path to a CSV
    file in the GridFunction format.
    """
    if source.startswith("const:"):
        return CoefficientField(GridFunction.constant(spec, float(source[6:])))
    if source.startswith("poly:"):
        coeffs = [float(c) for c in source[5:].split(",")]
        terms = [(a - b, b) for a in range(10) for b in range(a + 1)]

        def poly(uu, vv):
            out = np.zeros_like(uu)
            for c, (pa, pb) in zip(coeffs, terms):
                out += c * uu ** pa * vv ** pb
            return out

        return CoefficientField(GridFunction.sample(spec, poly))
    return CoefficientField(GridFunction.load_csv(source, spec))


def solve_goursat(coeff, data_u, data_v, corner_tol=1e-9):
    """March the Goursat problem psi_uv + M psi = 0.

    data_u are the values on the row v = v0 (length nu), data_v on the
    column u = u0 (length nv); they must agree at the corner.  The update
    uses cell averages of M and psi, which keeps the scheme second order:

        psi[i+1,j+1] = psi[i+1,j] + psi[i,j+1] - psi[i,j]
                       - du dv Mbar psibar.
    """
    m = coeff.m
    spec = m.spec
    data_u = np.asarray(data_u, dtype=float)
    data_v = np.asarray(data_v, dtype=float)
    if data_u.shape != (spec.nu,) or data_v.shape != (spec.nv,):
        raise ValueError("boundary data does not match the grid")
    if abs(data_u[0] - data_v[0]) > corner_tol:
        raise ValueError(
            f"corner mismatch |{data_u[0]} - {data_v[0]}| > {corner_tol}")

    psi = np.empty((spec.nu, spec.nv))
    psi[:, 0] = data_u
    psi[0, :] = data_v
    huv = spec.du * spec.dv
    mv = m.values
    for j in range(spec.nv - 1):
        mbar = 0.25 * (mv[:-1, j] + mv[1:, j] + mv[:-1, j + 1] + mv[1:, j + 1])
        c = 0.25 * huv * mbar
        col = psi[:, j]
        nxt = psi[:, j + 1]
        # implicit in the new corner only; solve cell by cell along u
        for i in range(spec.nu - 1):
            rhs = nxt[i] + col[i + 1] - col[i] - c[i] * (col[i] + col[i + 1] + nxt[i])
            nxt[i + 1] = rhs / (1.0 + c[i])
    return GridFunction(spec, psi)


def solve_elliptic(coeff, dirichlet):
    """Solve (1/4)(psi_uu + psi_vv) + M psi = 0 with Dirichlet data.

    dirichlet is a (nu, nv) array whose boundary ring provides the data;
    interior entries are ignored.  Raises if the five-point system is
    singular (a resonant M for this domain).
    """
    m = coeff.m
    spec = m.spec
    bc = np.asarray(dirichlet, dtype=float)
    if bc.shape != (spec.nu, spec.nv):
        raise ValueError("dirichlet data does not match the grid")

    nu, nv = spec.nu, spec.nv
    niu, niv = nu - 2, nv - 2
    idx = lambda i, j: (i - 1) * niv + (j - 1)  # noqa: E731
    n = niu * niv
    cu = 0.25 / spec.du ** 2
    cv = 0.25 / spec.dv ** 2

    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for i in range(1, nu - 1):
        for j in range(1, nv - 1):
            k = idx(i, j)
            rows.append(k); cols.append(k)
            vals.append(-2.0 * cu - 2.0 * cv + m.values[i, j])
            for (ii, jj, c) in ((i - 1, j, cu), (i + 1, j, cu),
                                (i, j - 1, cv), (i, j + 1, cv)):
                if ii in (0, nu - 1) or jj in (0, nv - 1):
                    rhs[k] -= c * bc[ii, jj]
                else:
                    rows.append(k); cols.append(idx(ii, jj)); vals.append(c)
    a = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    try:
        interior = spla.spsolve(a, rhs)
    except RuntimeError as exc:  # pragma: no cover - singular factorization
        raise np.linalg.LinAlgError(str(exc))
    if not np.all(np.isfinite(interior)):
        raise np.linalg.LinAlgError("five-point system is singular")

    psi = bc.copy()
    psi[1:-1, 1:-1] = interior.reshape(niu, niv)
    return GridFunction(spec, psi)


def residual(psi, coeff, kind):
    """Central-difference residual of a candidate solution.

    kind 'hyperbolic' evaluates psi_uv + M psi, kind 'elliptic'
    (1/4)(psi_uu + psi_vv) + M psi.  Boundary rows/columns of the output
    are zero; only interior values are meaningful.
    """
    if psi.spec != coeff.m.spec:
        raise ValueError("psi and M live on different grids")
    spec = psi.spec
    p = psi.values
    out = np.zeros_like(p)
    if kind == "hyperbolic":
        mixed = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) \
            / (4.0 * spec.du * spec.dv)
        out[1:-1, 1:-1] = mixed + coeff.m.values[1:-1, 1:-1] * p[1:-1, 1:-1]
    elif kind == "elliptic":
        puu = (p[2:, 1:-1] - 2.0 * p[1:-1, 1:-1] + p[:-2, 1:-1]) / spec.du ** 2
        pvv = (p[1:-1, 2:] - 2.0 * p[1:-1, 1:-1] + p[1:-1, :-2]) / spec.dv ** 2
        out[1:-1, 1:-1] = 0.25 * (puu + pvv) \
            + coeff.m.values[1:-1, 1:-1] * p[1:-1, 1:-1]
    else:
        raise ValueError("kind must be 'hyperbolic' or 'elliptic'")
    return GridFunction(spec, out)
