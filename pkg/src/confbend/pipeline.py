"""Generation of special hyperbolic/elliptic surfaces from PDE solutions.

The recipe: pick a coefficient M, produce m+1 = n+3 solutions of the
generating equation, stack them into k: U -> L^{n+3}, require
mu = <k, k> > 0, and normalize g = k / sqrt(mu) onto the de Sitter
sphere.  The closed-form families below solve the constant-coefficient
equations exactly, so they serve both as boundary data for the solvers
and as oracles:

  hyperbolic, M = 1:      sin/cos(a u + v/a + phase)
  elliptic,   M = 1/2:    sin/cos(sqrt(2)(u cos t + v sin t) + phase)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pde import CoefficientField, GridFunction, GridSpec, solve_elliptic, solve_goursat
from .surface import SurfacePatch, assemble_k, normalize_to_sphere

__all__ = ["GeneratedSurface", "component_functions", "generate", "default_spec"]

HYPERBOLIC_M = 1.0
ELLIPTIC_M = 0.5


def default_spec(n_samples=65, side=0.5):
    return GridSpec(0.0, side, 0.0, side, n_samples, n_samples)


def _wave(kind, a_or_theta, phase, trig):
    fn = np.cos if trig == "cos" else np.sin
    if kind == "hyperbolic":
        a = a_or_theta
        return lambda u, v: fn(a * u + v / a + phase)
    t = a_or_theta
    c, s = np.cos(t), np.sin(t)
    return lambda u, v: fn(np.sqrt(2.0) * (u * c + v * s) + phase)


def component_functions(kind, seed=None, perturbation=0.05):
    """Closed-form components (k_1, ..., k_8) of the default generator.

    The first pseudo-null component stays close to 1 on the default
    domain (so g_1 does not vanish) and the last one is small (so
    mu = <k, k> stays positive).  With a seed, small random waves from
    the same solution family are mixed in for variety.
    """
    if kind == "hyperbolic":
        core = [
            [(1.0, 1.0, 0.0, "cos")],                       # k1, near 1
            [(1.0, 2.0, 0.0, "cos")],
            [(1.0, 2.0, 0.0, "sin")],
            [(0.5, 0.5, 0.0, "cos")],
            [(0.5, 0.5, 0.0, "sin")],
            [(0.3, 1.0, 0.0, "sin")],
            [(0.25, 3.0, 0.0, "sin")],
            [(0.1, 1.0, 0.3, "cos")],                       # k8, small
        ]
        rand_par = lambda rng: rng.uniform(0.4, 2.5)  # noqa: E731
    elif kind == "elliptic":
        q = np.pi / 4
        core = [
            [(1.0, q, 0.0, "cos")],                         # k1 = cos(u+v)
            [(1.0, 0.0, 0.0, "cos")],
            [(1.0, 0.0, 0.0, "sin")],
            [(0.5, np.pi / 2, 0.0, "cos")],
            [(0.5, np.pi / 2, 0.0, "sin")],
            [(0.3, q, 0.0, "sin")],
            [(0.25, 0.93, 0.0, "sin")],
            [(0.1, q, 0.3, "cos")],                         # k8, small
        ]
        rand_par = lambda rng: rng.uniform(0.0, 2 * np.pi)  # noqa: E731
    else:
        raise ValueError("kind must be 'hyperbolic' or 'elliptic'")

    if seed is not None:
        rng = np.random.default_rng(seed)
        for i, terms in enumerate(core):
            amp = perturbation * (0.2 if i == 0 else 1.0)
            terms.append((amp * rng.uniform(-1, 1), rand_par(rng),
                          rng.uniform(0, 2 * np.pi),
                          "cos" if rng.random() < 0.5 else "sin"))

    def make(terms):
        waves = [(c, _wave(kind, p, ph, trig)) for c, p, ph, trig in terms]
        return lambda u, v: sum(c * w(u, v) for c, w in waves)

    return [make(terms) for terms in core]


@dataclass
class GeneratedSurface:
    """Everything the generation pipeline produced for one patch."""

    kind: str
    n: int
    coeff: CoefficientField
    k: GridFunction
    mu: GridFunction
    patch: SurfacePatch
    solutions: list


def generate(kind, spec=None, n=5, seed=None, use_solver=True,
             component_scale=None):
    """Run the generation recipe and return the assembled patch.

    With use_solver=True the component solutions are marched/solved from
    boundary data sampled off the closed forms; otherwise the closed
    forms are evaluated on the whole grid (useful as an oracle).
    Raises GenerationError when a hypothesis of the recipe fails.
    """
    if n < 5:
        raise ValueError("the construction needs n >= 5")
    if spec is None:
        spec = default_spec()
    m_value = HYPERBOLIC_M if kind == "hyperbolic" else ELLIPTIC_M
    coeff = CoefficientField(GridFunction.constant(spec, m_value))
    fns = component_functions(kind, seed=seed)
    if n > 5:
        # widen the ambient: repeat small middle components
        extra = n - 5
        fns = fns[:-1] + [
            (lambda f: lambda u, v: 0.1 * f(u, v))(fns[2 + (i % 4)])
            for i in range(extra)
        ] + fns[-1:]

    solutions = []
    uu, vv = spec.meshgrid()
    for fn in fns:
        if not use_solver:
            sol = GridFunction(spec, fn(uu, vv))
        elif kind == "hyperbolic":
            sol = solve_goursat(coeff, fn(spec.u, np.full(spec.nu, spec.v0)),
                                fn(np.full(spec.nv, spec.u0), spec.v))
        else:
            sol = solve_elliptic(coeff, fn(uu, vv))
        solutions.append(sol)

    if component_scale is not None:
        solutions = [GridFunction(spec, c * s.values)
                     for c, s in zip(component_scale, solutions)]
    k, mu = assemble_k(solutions)
    patch = normalize_to_sphere(k, mu)
    return GeneratedSurface(kind=kind, n=n, coeff=coeff, k=k, mu=mu,
                            patch=patch, solutions=solutions)
