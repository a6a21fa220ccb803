"""Wasserstein distances between discrete measures.

Measures are weighted point clouds. The exact distance is the value of a
transportation LP; in one dimension it also has a closed form through the
quantile functions, which we use here as a cross-check.
"""
import numpy as np

from interbsde import DiscreteMeasure, pushforward, quantize
from interbsde.transport import optimal_coupling, wasserstein_0, wasserstein_1d, wasserstein_p

mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
nu = DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5])

# The monotone plan sends 0 -> 0 and 1 -> 2, so gamma_2^2 = 0.5 * 1.
coupling = optimal_coupling(mu, nu, p=2)
print("optimal plan:\n", coupling.plan)
print(f"gamma_2 LP        = {wasserstein_p(mu, nu, 2):.15f}")
print(f"gamma_2 quantiles = {wasserstein_1d(mu, nu, 2):.15f}")
print(f"gamma_1           = {wasserstein_p(mu, nu, 1):.15f}")
print(f"gamma_0 (bounded) = {wasserstein_0(mu, nu):.15f}")

# Pushforward keeps the weights and moves the atoms.
image = pushforward(mu, lambda u: 2 * u - 1)
print("pushforward atoms:", image.atoms.ravel(), "weights:", image.weights)

# Quantile quantization of uniform[0, 1] converges at rate 1/N in gamma_2.
fine = quantize("uniform", 1024)
for n in (4, 16, 64):
    print(f"N = {n:3d}: gamma_2(mu_N, mu_1024) = {wasserstein_1d(quantize('uniform', n), fine, 2):.3e}")

# In two dimensions only the LP is available.
rng = np.random.default_rng(0)
a = DiscreteMeasure.uniform(rng.normal(size=(6, 2)))
b = DiscreteMeasure.uniform(rng.normal(size=(6, 2)) + [1.0, 0.0])
print(f"2-D gamma_2 = {wasserstein_p(a, b, 2):.6f}")
