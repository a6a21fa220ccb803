"""Exact Wasserstein distances between discrete measures.

The general case solves the transportation linear program with the network
simplex of POT (a vertex solution whose optimality test runs at machine
precision, so the value is exact up to round-off even when atoms nearly
coincide). The one-dimensional closed form through quantile functions is
kept separate so it can serve as an independent check of the LP.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

# POT probes every installed array backend on import; only numpy is used here.
for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

from .measure import DiscreteMeasure  # noqa: E402

MARGINAL_TOL = 1e-9


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Coupling:
    """Transport plan between two discrete measures.

    ``plan[i, j]`` is the mass moved from atom i of the source to atom j of
    the target.
    """

    plan: np.ndarray
    cost: float

    def check_marginals(self, mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = MARGINAL_TOL) -> bool:
        return (np.all(self.plan >= 0)
                and np.allclose(self.plan.sum(axis=1), mu.weights, rtol=0, atol=tol)
                and np.allclose(self.plan.sum(axis=0), nu.weights, rtol=0, atol=tol))


def _check_dims(mu: DiscreteMeasure, nu: DiscreteMeasure):
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")


def pairwise_distances(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    _check_dims(mu, nu)
    diff = mu.atoms[:, None, :] - nu.atoms[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def solve_transport(a: np.ndarray, b: np.ndarray, cost: np.ndarray) -> Coupling:
    """Minimize ``<plan, cost>`` over plans with marginals ``a`` and ``b``."""
    m, n = cost.shape
    if m == 1 or n == 1:
        # the marginal constraints leave exactly one feasible plan
        plan = np.outer(a, b)
        return Coupling(plan, float(np.sum(plan * cost)))
    plan, log = ot.emd(np.ascontiguousarray(a, dtype=float), np.ascontiguousarray(b, dtype=float),
                       np.ascontiguousarray(cost, dtype=float), numItermax=1_000_000, log=True)
    if log["result_code"] != 1:
        raise TransportError(f"transport LP failed: {log['warning']}")
    return Coupling(plan, float(np.sum(plan * cost)))


def optimal_coupling(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> Coupling:
    return solve_transport(mu.weights, nu.weights, pairwise_distances(mu, nu) ** p)


def wasserstein_p(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> float:
    """Order-p Wasserstein distance by exact LP."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return optimal_coupling(mu, nu, p).cost ** (1.0 / p)


def wasserstein_0(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Order-zero distance with the bounded cost ``|u - v| / (1 + |u - v|)``."""
    dist = pairwise_distances(mu, nu)
    return solve_transport(mu.weights, nu.weights, dist / (1.0 + dist)).cost


def _quantile_pieces(x, a, y, b):
    ix = np.argsort(x, kind="stable")
    iy = np.argsort(y, kind="stable")
    ca = np.cumsum(a[ix])
    cb = np.cumsum(b[iy])
    breaks = np.unique(np.concatenate([[0.0], ca[:-1], cb[:-1], [1.0]]))
    widths = np.diff(breaks)
    mids = 0.5 * (breaks[1:] + breaks[:-1])
    i = np.minimum(np.searchsorted(ca, mids), len(ca) - 1)
    j = np.minimum(np.searchsorted(cb, mids), len(cb) - 1)
    return widths, x[ix][i], y[iy][j]


def wasserstein_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> float:
    """Closed form on the line: integrate ``|F^{-1}(q) - G^{-1}(q)|^p`` over q.

    Both quantile functions are piecewise constant, so the integral is an
    exact finite sum over the merged breakpoints of the two CDFs.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("wasserstein_1d needs measures on the real line")
    widths, qx, qy = _quantile_pieces(mu.atoms[:, 0], mu.weights, nu.atoms[:, 0], nu.weights)
    return float(np.sum(widths * np.abs(qx - qy) ** p)) ** (1.0 / p)


def wasserstein2_squared(x: np.ndarray, a: np.ndarray, y: np.ndarray, b: np.ndarray) -> float:
    """Squared order-2 distance between raw atom arrays ``(N, d)``/``(N', d)``.

    Used in the per-path flow comparisons: the closed form for d = 1, the LP
    otherwise. Both are exact.
    """
    if x.shape[1] == 1:
        widths, qx, qy = _quantile_pieces(x[:, 0], a, y[:, 0], b)
        return float(np.sum(widths * (qx - qy) ** 2))
    diff = x[:, None, :] - y[None, :, :]
    return solve_transport(a, b, np.sum(diff * diff, axis=-1)).cost
