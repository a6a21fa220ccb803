"""Least-squares conditional expectations on a space-time Hermite basis.

The basis at time t consists of the polynomials

    H_alpha(x, t) = prod_l t^(alpha_l/2) He_{alpha_l}(x_l / sqrt(t)),   |alpha| <= q,

built from the probabilists' Hermite polynomials He_k. Each H_alpha(B_t, t)
is a martingale, so once a target observed at node s has been projected onto
the basis at s, its conditional expectation at any earlier node j is the same
coefficient vector evaluated at (B_{t_j}, t_j). The martingale integrand is
likewise exact: by Gaussian integration by parts
``E[H_alpha(B_s, s) dB^l | F_t] = dt * d/dx_l H_alpha(B_t, t)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class DegenerateRegressionError(np.linalg.LinAlgError):
    pass


def multi_indices(dim: int, degree: int) -> np.ndarray:
    """All exponent tuples of total degree <= ``degree``, graded order."""
    out = [a for total in range(degree + 1)
           for a in itertools.product(range(total + 1), repeat=dim) if sum(a) == total]
    return np.array(out, dtype=int).reshape(-1, dim)


def _hermite_table(x: np.ndarray, t: float, degree: int) -> np.ndarray:
    """``H_k(x, t)`` for k = 0..degree stacked on a new leading axis."""
    table = np.empty((degree + 1, *x.shape))
    table[0] = 1.0
    if degree >= 1:
        table[1] = x
    for k in range(1, degree):
        table[k + 1] = x * table[k] - k * t * table[k - 1]
    return table


@dataclass(frozen=True)
class HermiteBasis:
    dim: int
    degree: int

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("basis degree must be >= 1")

    @cached_property
    def exponents(self) -> np.ndarray:
        return multi_indices(self.dim, self.degree)

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def scales(self, t: float) -> np.ndarray:
        """Standard deviation of each basis function at time t."""
        fact = np.array([math.prod(math.factorial(k) for k in a) for a in self.exponents], dtype=float)
        return np.sqrt(fact * t ** self.exponents.sum(axis=1))

    def evaluate(self, x: np.ndarray, t: float) -> np.ndarray:
        """Design matrix of shape ``(M, P)`` for points ``x`` of shape ``(M, d)``."""
        table = _hermite_table(x, t, self.degree)
        cols = np.ones((x.shape[0], self.size))
        for l in range(self.dim):
            cols = cols * table[self.exponents[:, l], :, l].T
        return cols

    def gradient(self, x: np.ndarray, t: float) -> np.ndarray:
        """Spatial gradient, shape ``(M, P, d)``."""
        table = _hermite_table(x, t, self.degree)
        grad = np.ones((x.shape[0], self.size, self.dim))
        for l in range(self.dim):
            e = self.exponents[:, l]
            value = table[e, :, l].T
            deriv = e * table[np.maximum(e - 1, 0), :, l].T
            for m in range(self.dim):
                grad[:, :, m] *= deriv if m == l else value
        return grad


def project(basis: HermiteBasis, x: np.ndarray, t: float, targets: np.ndarray, ridge: float) -> np.ndarray:
    """Ridge least-squares coefficients of ``targets`` (shape ``(M, r)``) at time t.

    Columns are standardized before the fit and the intercept is not
    penalized, so constants are reproduced exactly for any ``ridge``. One
    step of iterated Tikhonov refinement follows the ridge solve, which
    shrinks the ridge bias on well-determined directions from O(ridge) to
    O(ridge**2) while still damping near-null ones. At t = 0 the information
    is trivial and the cross-path mean is returned.
    """
    n_paths = targets.shape[0]
    coef = np.zeros((basis.size, targets.shape[1]))
    if t == 0.0:
        coef[0] = targets.mean(axis=0)
        return coef
    if n_paths < basis.size:
        raise DegenerateRegressionError(
            f"{n_paths} paths cannot identify {basis.size} basis functions")
    scales = basis.scales(t)
    design = basis.evaluate(x, t) / scales
    gram = design.T @ design / n_paths
    penalty = np.full(basis.size, ridge)
    penalty[0] = 0.0
    regularized = gram + np.diag(penalty)
    rhs = design.T @ targets / n_paths
    try:
        factor = cho_factor(regularized)
        beta = cho_solve(factor, rhs)
        beta += cho_solve(factor, rhs - gram @ beta)
    except np.linalg.LinAlgError as exc:
        raise DegenerateRegressionError(str(exc)) from None
    if not np.all(np.isfinite(beta)) or np.linalg.cond(regularized) > 1e14:
        raise DegenerateRegressionError("regression design is numerically singular")
    return beta / scales[:, None]
