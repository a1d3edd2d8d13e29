"""Conversion between de Sitter surfaces and hypersurface data pairs.

A surface g in the de Sitter sphere with nonvanishing first
pseudo-null coordinate encodes a pair (h, r): a map h into R^{n+1} and
a positive radius function r.  The pair determines a sphere congruence
whose envelope is the hypersurface the rest of the library works with.
The conversion formulas are

    r = 1 / g_1,    h = r (g_2, ..., g_{n+2}),
    g = (1, h, |h|^2 - r^2) / r.

The pair feeds the parametrization step only when h is an immersion
and the induced gradient of r satisfies |grad_h r| < 1; validate_pair
reports both conditions.  That validity is equivalent to the induced
metric of g being Riemannian, which the tests check both ways.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .pde import GridFunction, GridSpec
from .reports import CheckReport
from .surface import GenerationError, SurfacePatch

__all__ = [
    "SpecialPair",
    "pair_from_g",
    "g_from_pair",
    "g_values_from_pair",
    "validate_pair",
    "induced_metric",
    "grad_r_norm",
]

#: Safety margin below 1 for |grad_h r|; keeps the square root in the
#: hypersurface parametrization well-conditioned.
GRADIENT_MARGIN = 1e-6


@dataclass
class SpecialPair:
    """The pair (h, r) with optional validity flags.

    h has shape (nu, nv, n+1) and r is a positive scalar field on the
    same grid.  Flags start unset and are filled in by validate_pair.
    """

    h: GridFunction
    r: GridFunction
    immersion_ok: bool | None = field(default=None)
    gradient_ok: bool | None = field(default=None)

    def __post_init__(self):
        if self.h.values.ndim != 3:
            raise ValueError("h must be a vector GridFunction")
        if self.r.values.ndim != 2 or self.h.spec != self.r.spec:
            raise ValueError("r must be a scalar field on the grid of h")
        if self.r.values.min() <= 0.0:
            raise GenerationError("r_nonpositive")

    @property
    def spec(self):
        return self.h.spec

    @property
    def target_dim(self):
        return self.h.values.shape[-1]

    # -- serialization ------------------------------------------------

    def to_json_dict(self):
        return {"spec": self.spec.to_dict(),
                "shape": list(self.h.values.shape),
                "h": self.h.values.ravel().tolist(),
                "r": self.r.values.ravel().tolist(),
                "immersion_ok": self.immersion_ok,
                "gradient_ok": self.gradient_ok}

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, d):
        spec = GridSpec.from_dict(d["spec"])
        h = np.array(d["h"]).reshape(d["shape"])
        r = np.array(d["r"]).reshape(d["shape"][:2])
        return cls(GridFunction(spec, h), GridFunction(spec, r),
                   d.get("immersion_ok"), d.get("gradient_ok"))

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def save_h_csv(self, path):
        """Write h as a point cloud, one row per grid sample."""
        spec = self.spec
        uu, vv = spec.meshgrid()
        cols = [uu.ravel(), vv.ravel()]
        cols += [self.h.values[..., i].ravel()
                 for i in range(self.target_dim)]
        header = "u,v," + ",".join(f"x{i + 1}"
                                   for i in range(self.target_dim))
        np.savetxt(path, np.column_stack(cols), delimiter=",",
                   header=header, comments="")


def pair_from_g(g):
    """Extract (h, r) from a de Sitter surface.

    Accepts a SurfacePatch or a raw vector GridFunction (the raw form
    lets callers convert patches whose induced metric is not
    Riemannian, which the validity equivalence tests need).  The patch
    is flipped so that g_1 > 0; an error is raised when g_1 changes
    sign or vanishes.
    """
    if isinstance(g, SurfacePatch):
        g = GridFunction(g.spec, g.g)
    vals = g.values
    g1 = vals[..., 0]
    if g1.min() > 0.0:
        pass
    elif g1.max() < 0.0:
        vals = -vals
        g1 = vals[..., 0]
    else:
        i, j = np.unravel_index(np.argmin(np.abs(g1)), g1.shape)
        reason = "g1_vanishes" if np.any(g1 == 0.0) else "r_changes_sign"
        raise GenerationError(reason, (g.spec.u[i], g.spec.v[j]))
    r = 1.0 / g1
    h = r[..., None] * vals[..., 1:-1]
    return SpecialPair(GridFunction(g.spec, h), GridFunction(g.spec, r))


def g_values_from_pair(pair):
    """The raw surface map g = (1, h, |h|^2 - r^2) / r."""
    h, r = pair.h.values, pair.r.values
    n1 = pair.target_dim
    g = np.empty(h.shape[:2] + (n1 + 2,))
    g[..., 0] = 1.0 / r
    g[..., 1:-1] = h / r[..., None]
    g[..., -1] = (np.sum(h * h, axis=-1) - r * r) / r
    return GridFunction(pair.spec, g)


def g_from_pair(pair):
    """Rebuild the SurfacePatch from the pair (validates the metric)."""
    return SurfacePatch(g_values_from_pair(pair))


def induced_metric(h):
    """First fundamental form (E, F, G) of h: U -> R^{n+1}, Euclidean."""
    spec = h.spec
    hu = np.gradient(h.values, spec.du, axis=0, edge_order=2)
    hv = np.gradient(h.values, spec.dv, axis=1, edge_order=2)
    return (np.sum(hu * hu, axis=-1), np.sum(hu * hv, axis=-1),
            np.sum(hv * hv, axis=-1))


def grad_r_norm(pair):
    """|grad_h r| at every sample, gradient taken in the metric of h.

    Degenerate points of h give nan; callers check the immersion
    condition first.
    """
    spec = pair.spec
    e, f, g = induced_metric(pair.h)
    ru = np.gradient(pair.r.values, spec.du, axis=0, edge_order=2)
    rv = np.gradient(pair.r.values, spec.dv, axis=1, edge_order=2)
    det = e * g - f * f
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = (g * ru ** 2 - 2 * f * ru * rv + e * rv ** 2) / det
        return np.sqrt(np.where(sq >= 0, sq, np.nan))


def validate_pair(pair, margin=GRADIENT_MARGIN):
    """Check the two admissibility conditions and fill the pair flags.

    The report's residual is max |grad_h r| against tolerance
    1 - margin; an immersion failure forces the residual to inf so the
    report cannot pass.  Locations of the worst sample and the
    immersion margin are kept in extra.
    """
    e, f, g = induced_metric(pair.h)
    det = e * g - f * f
    immersion_margin = min(float(e.min()), float(det.min()))
    immersion_ok = immersion_margin > 0.0
    extra = {"immersion_ok": immersion_ok,
             "immersion_margin": immersion_margin}
    if immersion_ok:
        gr = grad_r_norm(pair)
        i, j = np.unravel_index(np.argmax(gr), gr.shape)
        worst = float(gr[i, j])
        extra["grad_max"] = worst
        where = (pair.spec.u[i], pair.spec.v[j])
    else:
        i, j = np.unravel_index(np.argmin(det), det.shape)
        worst = np.inf
        where = (pair.spec.u[i], pair.spec.v[j])
    pair.immersion_ok = immersion_ok
    pair.gradient_ok = immersion_ok and worst < 1.0 - margin
    return CheckReport(name="pair_validity", max_residual=worst,
                       tolerance=1.0 - margin, argmax=where, extra=extra)
