"""Lorentzian linear algebra in the pseudo-orthonormal basis.

Vectors in L^d are plain numpy arrays of coordinates in a fixed basis
e_1, ..., e_d with two null vectors pairing to -1/2:

    <e_1, e_1> = <e_d, e_d> = 0,  <e_1, e_d> = -1/2,
    <e_i, e_j> = delta_ij otherwise.

The light cone V = {x : <x,x> = 0} carries the Euclidean-space model
E^{n+1} = {x in V : <x,w> = 1} via the embedding

    Psi(x) = v + C x - (1/2)|x|^2 w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "gram_matrix",
    "inner",
    "norm2",
    "basis_vector",
    "to_orthonormal_frame",
    "euclidean_norm",
    "de_sitter_check",
    "LightConeChart",
    "default_chart",
]


def gram_matrix(d):
    """Gram matrix of the pseudo-orthonormal basis of L^d."""
    if d < 3:
        raise ValueError("pseudo-orthonormal basis needs d >= 3")
    g = np.eye(d)
    g[0, 0] = g[-1, -1] = 0.0
    g[0, -1] = g[-1, 0] = -0.5
    return g


def inner(x, y):
    """Lorentzian inner product <x, y> in the pseudo-orthonormal basis.

    Broadcasts over leading axes; the coordinate axis is the last one.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(
            f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}"
        )
    mid = (x[..., 1:-1] * y[..., 1:-1]).sum(axis=-1)
    return -0.5 * (x[..., 0] * y[..., -1] + x[..., -1] * y[..., 0]) + mid


def norm2(x):
    """Lorentzian squared norm <x, x>."""
    return inner(x, x)


def basis_vector(d, i):
    """The basis vector e_{i+1} of L^d (0-based index)."""
    e = np.zeros(d)
    e[i] = 1.0
    return e


def _frame_change(d):
    """Matrix P with P[:, j] = j-th orthonormal frame vector in pseudo coords.

    The diagonalizing frame is t = e_1 + e_d (timelike, <t,t> = -1),
    s = e_1 - e_d (spacelike after scaling) and the untouched e_2..e_{d-1}.
    """
    p = np.eye(d)
    p[:, 0] = 0.0
    p[:, -1] = 0.0
    p[0, 0] = p[-1, 0] = 1.0   # timelike: <e_1+e_d, e_1+e_d> = -1
    p[0, -1] = 1.0
    p[-1, -1] = -1.0           # spacelike: <e_1-e_d, e_1-e_d> = 1
    return p


def to_orthonormal_frame(x):
    """Coordinates of x in a frame diagonalizing the metric to (-1, 1, ..., 1).

    Only used for signature and residual-norm purposes.
    """
    x = np.asarray(x)
    d = x.shape[-1]
    p = _frame_change(d)
    return np.linalg.solve(p, x[..., None])[..., 0] if x.ndim > 1 else np.linalg.solve(p, x)


def euclidean_norm(x):
    """Positive-definite norm of the coordinate vector in an orthonormal frame.

    Gauge for residual magnitudes of L^d-valued quantities; vanishes only
    on the zero vector, unlike the Lorentzian norm.
    """
    return np.linalg.norm(to_orthonormal_frame(x), axis=-1)


def de_sitter_check(x, tol=1e-10):
    """True if x lies on the unit de Sitter sphere {<x,x> = 1} within tol."""
    return bool(np.all(np.abs(norm2(x) - 1.0) <= tol))


@dataclass(frozen=True)
class LightConeChart:
    """Model of R^{n+1} inside the light cone of L^{n+3}.

    v, w are null with <v,w> = 1; the columns of c_iso are an orthonormal
    basis of (span{v,w})-perp.
    """

    v: np.ndarray
    w: np.ndarray
    c_iso: np.ndarray  # shape (n+3, n+1)

    def __post_init__(self):
        v, w, c = map(np.asarray, (self.v, self.w, self.c_iso))
        tol = 1e-10
        if abs(norm2(v)) > tol or abs(norm2(w)) > tol:
            raise ValueError("chart base vectors must be null")
        if abs(inner(v, w) - 1.0) > tol:
            raise ValueError("<v, w> must equal 1")
        gram = np.array([[inner(c[:, i], c[:, j]) for j in range(c.shape[1])]
                         for i in range(c.shape[1])])
        if not np.allclose(gram, np.eye(c.shape[1]), atol=tol):
            raise ValueError("columns of C must be <,>-orthonormal")
        for b in (v, w):
            if np.max(np.abs([inner(c[:, i], b) for i in range(c.shape[1])])) > tol:
                raise ValueError("columns of C must be orthogonal to v and w")

    @property
    def ambient_dim(self):
        return self.v.shape[0]

    @property
    def space_dim(self):
        return self.c_iso.shape[1]

    def embed(self, x):
        """Psi(x) = v + Cx - (1/2)|x|^2 w, a point on the light cone."""
        x = np.asarray(x)
        if x.shape[-1] != self.space_dim:
            raise ValueError("point dimension does not match chart")
        cx = x @ self.c_iso.T
        n2 = (x * x).sum(axis=-1)
        return self.v + cx - 0.5 * n2[..., None] * self.w

    def embed_differential(self, x, u):
        """Psi_* U = CU - <x, U> w at the base point x."""
        x = np.asarray(x)
        u = np.asarray(u)
        cu = u @ self.c_iso.T
        xu = (x * u).sum(axis=-1)
        return cu - xu[..., None] * self.w


def default_chart(n):
    """Chart with v = e_1, w = -2 e_{n+3}, C e_i = e_{i+1}.

    With this choice Psi(x) has pseudo-basis coordinates (1, x, |x|^2), so
    the sphere congruence of a parametrized hypersurface agrees
    coordinate-wise with the surface it was generated from.
    """
    d = n + 3
    v = basis_vector(d, 0)
    w = -2.0 * basis_vector(d, d - 1)
    c = np.zeros((d, n + 1))
    for i in range(n + 1):
        c[i + 1, i] = 1.0
    return LightConeChart(v=v, w=w, c_iso=c)
