"""Discrete probability measures on R^d.

A measure is stored as an ``(N, d)`` array of atoms with an ``(N,)`` weight
vector. Atoms are never merged: particle identity is preserved so that the
k-th atom of a pushforward is always the image of the k-th atom of the source.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import stats

WEIGHT_TOL = 1e-12


class InvalidMeasureError(ValueError):
    pass


class InvalidMapError(ValueError):
    pass


class UnsupportedFamilyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite atomic probability measure ``sum_k p_k delta_{u_k}``.

    Parameters
    ----------
    atoms : array_like, shape (N, d) or (N,)
        Atom locations. A 1-D input is read as N points in R^1.
    weights : array_like, shape (N,)
        Strictly positive probabilities summing to one within ``1e-12``.
        Inputs outside the tolerance are rejected, never renormalized.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2 or atoms.shape[0] == 0 or atoms.shape[1] == 0:
            raise InvalidMeasureError(f"atoms must be a nonempty (N, d) array, got shape {atoms.shape}")
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != atoms.shape[0]:
            raise InvalidMeasureError(
                f"{weights.shape[0]} weights for {atoms.shape[0]} atoms")
        if not np.all(np.isfinite(atoms)):
            raise InvalidMeasureError("atoms must be finite")
        if not np.all(weights > 0):
            raise InvalidMeasureError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise InvalidMeasureError(f"weights sum to {weights.sum()!r}, not 1")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure":
        """Empirical measure with equal weights on ``atoms``."""
        atoms = np.asarray(atoms, dtype=float)
        n = atoms.shape[0]
        return cls(atoms, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.atleast_1d(np.asarray(point, dtype=float))[None, :], [1.0])

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def mixture(self, other: "DiscreteMeasure", lam: float) -> "DiscreteMeasure":
        """``lam * self + (1 - lam) * other`` built by concatenating atom lists."""
        if not 0.0 < lam < 1.0:
            raise ValueError("mixture weight must lie in (0, 1)")
        if other.dim != self.dim:
            raise InvalidMeasureError("dimension mismatch")
        w = np.concatenate([lam * self.weights, (1.0 - lam) * other.weights])
        return DiscreteMeasure(np.vstack([self.atoms, other.atoms]), w / w.sum())

    # -- serialization -------------------------------------------------------

    def to_table(self) -> str:
        """Plain-text table: header ``w,u_1,...,u_d`` then one row per atom."""
        header = ",".join(["w"] + [f"u_{i + 1}" for i in range(self.dim)])
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([self.weights, self.atoms]),
                   delimiter=",", fmt="%.17g", header=header, comments="")
        return buf.getvalue()

    @classmethod
    def from_table(cls, text: str) -> "DiscreteMeasure":
        data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1:], data[:, 0])

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "DiscreteMeasure":
        try:
            return cls(doc["atoms"], doc["weights"])
        except KeyError as exc:
            raise InvalidMeasureError(f"missing key {exc.args[0]!r}") from None


def pushforward(mu: DiscreteMeasure, mapping) -> DiscreteMeasure:
    """Image measure ``mu o F^{-1}``.

    ``mapping`` is either a callable applied atom by atom or an array of
    already-sampled images, one row per atom. Weights are carried over
    unchanged and coinciding images are kept as separate atoms.
    """
    if callable(mapping):
        images = [np.atleast_1d(np.asarray(mapping(u), dtype=float)) for u in mu.atoms]
        shapes = {im.shape for im in images}
        if len(shapes) != 1:
            raise InvalidMapError(f"mapped points have inconsistent shapes {sorted(shapes)}")
        images = np.vstack(images)
    else:
        images = np.asarray(mapping, dtype=float)
        if images.ndim == 1 and mu.dim == 1:
            images = images[:, None]
    if images.shape != mu.atoms.shape:
        raise InvalidMapError(
            f"map sends {mu.atoms.shape} atoms to shape {images.shape}")
    return DiscreteMeasure(images, mu.weights)


def second_moment(mu: DiscreteMeasure) -> float:
    return float(mu.weights @ np.sum(mu.atoms ** 2, axis=1))


# -- quantization -------------------------------------------------------------

def _uniform_ppf(q, low=0.0, high=1.0):
    return low + (high - low) * q


def _gaussian_ppf(q, loc=0.0, scale=1.0):
    return loc + scale * stats.norm.ppf(q)


_QUANTILE_FAMILIES: dict[str, Callable] = {
    "uniform": _uniform_ppf,
    "gaussian": _gaussian_ppf,
}


def _sample_family(name: str, params: Mapping, rng: np.random.Generator, n: int, dim: int):
    if name == "uniform":
        return rng.uniform(params.get("low", 0.0), params.get("high", 1.0), size=(n, dim))
    if name == "gaussian":
        return rng.normal(params.get("loc", 0.0), params.get("scale", 1.0), size=(n, dim))
    raise UnsupportedFamilyError(f"unsupported family {name!r}")


@dataclass(frozen=True)
class MeasureFamily:
    """Descriptor of a continuous reference measure to be quantized.

    ``name`` is ``"uniform"`` (parameters ``low``, ``high``) or ``"gaussian"``
    (``loc``, ``scale``). ``dim > 1`` means the product measure. ``method``
    selects ``"quantile"`` (d = 1 midpoint quantiles, or the tensor grid of
    them for d > 1) or ``"sample"`` (i.i.d. draws).
    """

    name: str
    dim: int = 1
    method: str = "quantile"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _QUANTILE_FAMILIES:
            raise UnsupportedFamilyError(f"unsupported family {self.name!r}")
        if self.method not in ("quantile", "sample"):
            raise UnsupportedFamilyError(f"unsupported quantization method {self.method!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def quantize(family: MeasureFamily | str, n: int, seed: int = 0) -> DiscreteMeasure:
    """N-atom equal-weight approximation of a continuous measure.

    Quantile quantization puts atom k at the ``(k - 1/2)/N`` quantile. For a
    product family in d > 1 the quantile method needs ``N = m**d`` and builds
    the tensor grid of the m one-dimensional quantiles. Sample quantization
    draws N i.i.d. points from ``seed``.
    """
    if isinstance(family, str):
        family = MeasureFamily(family)
    if n < 1:
        raise ValueError("N must be >= 1")
    if family.method == "sample":
        rng = np.random.default_rng(seed)
        return DiscreteMeasure.uniform(_sample_family(family.name, family.params, rng, n, family.dim))

    ppf = _QUANTILE_FAMILIES[family.name]
    if family.dim == 1:
        q = (np.arange(1, n + 1) - 0.5) / n
        return DiscreteMeasure.uniform(ppf(q, **family.params)[:, None])
    m = round(n ** (1.0 / family.dim))
    if m ** family.dim != n:
        raise ValueError(f"quantile grid in d={family.dim} needs N a perfect power, got {n}")
    axis = ppf((np.arange(1, m + 1) - 0.5) / m, **family.params)
    grid = np.stack(np.meshgrid(*([axis] * family.dim), indexing="ij"), axis=-1)
    return DiscreteMeasure.uniform(grid.reshape(-1, family.dim))


@dataclass(frozen=True, eq=False)
class MeasureFlow:
    """Per-path, per-node pushforwards ``mu_t = mu_0 o Y(., t)^{-1}``.

    ``positions`` has shape ``(N, n_nodes, M, d)``; the weights are those of
    ``mu_0`` at every node and on every path.
    """

    positions: np.ndarray
    weights: np.ndarray

    def at(self, node: int, path: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.positions[:, node, path, :], self.weights)

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[1]

    @property
    def n_paths(self) -> int:
        return self.positions.shape[2]
