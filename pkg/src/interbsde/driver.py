"""Interaction kernels h(y, v) and the mean-field driver f(y, mu)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .measure import DiscreteMeasure

DRIVER_FAMILIES = ("zero", "linear", "bounded-smooth", "attraction")


@dataclass(frozen=True)
class DriverSpec:
    """A builtin interaction kernel with its Lipschitz constant.

    ``zero``            h(y, v) = 0
    ``linear``          h(y, v) = alpha*y + beta*v           L1 = max(|alpha|, |beta|)
    ``bounded-smooth``  h(y, v) = scale*tanh(y)*tanh(v)     L1 = |scale|
    ``attraction``      h(y, v) = kappa*(v - y)             L1 = |kappa|

    ``lipschitz`` overrides the derived L1 (useful to declare a wrong
    constant on purpose). ``combined_constant(L2)`` gives ``max(L1, L2)``.
    """

    family: str = "zero"
    params: Mapping = field(default_factory=dict)
    lipschitz: float | None = None

    def __post_init__(self):
        if self.family not in DRIVER_FAMILIES:
            raise ValueError(f"unknown driver family {self.family!r}")
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", self.derived_lipschitz())

    def _p(self, key, default=0.0):
        return float(self.params.get(key, default))

    def derived_lipschitz(self) -> float:
        if self.family == "zero":
            return 0.0
        if self.family == "linear":
            return max(abs(self._p("alpha")), abs(self._p("beta")))
        if self.family == "bounded-smooth":
            return abs(self._p("scale", 1.0))
        return abs(self._p("kappa", 1.0))

    def combined_constant(self, terminal_lipschitz: float) -> float:
        return max(self.lipschitz, terminal_lipschitz)


def eval_h(spec: DriverSpec, y, v) -> np.ndarray:
    """Kernel value; ``y`` and ``v`` broadcast against each other on leading axes."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if y.shape[-1:] != v.shape[-1:]:
        raise ValueError(f"dimension mismatch: {y.shape} vs {v.shape}")
    if spec.family == "zero":
        return np.zeros(np.broadcast_shapes(y.shape, v.shape))
    if spec.family == "linear":
        return spec._p("alpha") * y + spec._p("beta") * v
    if spec.family == "bounded-smooth":
        return spec._p("scale", 1.0) * np.tanh(y) * np.tanh(v)
    return spec._p("kappa", 1.0) * (v - y)


def _weighted_sum(spec, y, atoms, weights):
    # fixed summation order over atoms so both entry points agree bit for bit
    out = np.zeros(np.broadcast_shapes(y.shape, atoms[0].shape))
    for v, p in zip(atoms, weights):
        out = out + p * eval_h(spec, y, v)
    return out


def eval_driver(spec: DriverSpec, y, mu: DiscreteMeasure) -> np.ndarray:
    """``f(y, mu) = sum_j p_j h(y, u_j)``."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != mu.dim:
        raise ValueError(f"point of dimension {y.shape[-1]} against measure of dimension {mu.dim}")
    return _weighted_sum(spec, y, mu.atoms, mu.weights)


def heavy_drift(spec: DriverSpec, positions, weights) -> np.ndarray:
    """Drift of every heavy particle against the empirical measure of all of them.

    ``positions`` has shape ``(N, ..., d)`` (trailing axes such as paths are
    carried along); component k is ``sum_j h(Y_k, Y_j) p_j``.
    """
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if positions.shape[0] != weights.shape[0]:
        raise ValueError(f"{positions.shape[0]} positions for {weights.shape[0]} weights")
    return _weighted_sum(spec, positions, positions, weights)


def light_drift(spec: DriverSpec, y, heavy_positions, weights) -> np.ndarray:
    """Drift of a light particle at ``y`` (shape ``(..., d)``) against frozen heavy positions."""
    heavy_positions = np.asarray(heavy_positions, dtype=float)
    return _weighted_sum(spec, np.asarray(y, dtype=float), heavy_positions, weights)
