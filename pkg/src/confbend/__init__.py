"""Hypersurfaces with nontrivial conformal infinitesimal variations.

Workflow: solve a linear second-order PDE (module pde), assemble a
surface in the de Sitter sphere with conjugate coordinates (surface,
pipeline), convert it to a pair (h, r) of Euclidean data (pair),
parametrize the n-dimensional hypersurface it defines (gauss_param),
and verify the variational geometry (bending).  The cli module wraps
the whole chain for batch runs.
"""

__version__ = "1.0.0"

from . import bending, gauss_param, lorentz, pair, pde, pipeline, \
    reports, surface  # noqa: F401
