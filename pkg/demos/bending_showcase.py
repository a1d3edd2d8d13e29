"""Conformal variations of the constructed hypersurface.

Two sides of the story.  Ambient conformal Killing fields always give
variations, but trivial ones: their curly-B tensor is a multiple of
the identity.  The surface data (mu, J) behind the construction gives
a genuinely new variation: the tensor D = mu J satisfies the five
admissibility conditions and the reconstructed curly-B = (A - 1/r I) D
is visibly not a multiple of the identity.
"""

import numpy as np

from confbend import pipeline
from confbend.bending import (
    BendingField,
    associated_tensors,
    cib_residual,
    d_conditions,
    first_order_conformality,
    random_killing,
    theta_checks,
    triviality_test,
)
from confbend.gauss_param import HypersurfaceFamily, random_sample_set
from confbend.pair import pair_from_g
from confbend.surface import ConjugateStructure, solve_mu

gen = pipeline.generate("elliptic", seed=7)
mu, _ = solve_mu(gen.patch, "elliptic")
struct = ConjugateStructure(kind="elliptic", mu=mu)
family = HypersurfaceFamily(pair_from_g(gen.patch), n=5)
points = random_sample_set(family, 5, seed=0)

print("-- a conformal Killing field (trivial side) --")
bf = BendingField.from_killing(random_killing(6, seed=1, scale=0.6))
print(cib_residual(bf, family, points))
tensors = associated_tensors(bf, family, points)
for rep in theta_checks(tensors, spec=family.spec):
    print(rep)
trivial, phis, dev = triviality_test(tensors)
print(f"trivial: {trivial} (deviation {dev:.2e}, "
      f"phi ~ {phis.mean():.3f})")
print(first_order_conformality(bf, family, points))

print()
print("-- the tensor D = mu J (nontrivial side) --")
for rep in d_conditions(family, struct.j_matrix, mu.values, points):
    print(rep)

# reconstruct curly-B on the horizontal plane and test triviality
from confbend.bending import _HorizontalCalculus  # noqa: E402

calc = _HorizontalCalculus(family, struct.j_matrix, mu.values)
recon = []
for u, v, theta in points:
    pt = calc.point(u, v, theta)
    b2 = (pt["a"] - pt["lam"] * np.eye(2)) @ pt["d"]
    b_full = np.zeros((5, 5))
    b_full[:2, :2] = b2
    a_full = np.eye(5) * pt["lam"]
    a_full[:2, :2] = pt["a"]
    recon.append({"B": b_full, "A": a_full})
trivial, _, dev = triviality_test(recon)
print(f"reconstructed curly-B trivial: {trivial} (deviation {dev:.2f})")
