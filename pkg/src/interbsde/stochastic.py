"""Time grids, Brownian ensembles and terminal random fields."""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True, eq=False)
class BrownianEnsemble:
    """M sampled Brownian paths on a uniform grid.

    ``increments`` has shape ``(M, n_steps, d)`` and ``values`` has shape
    ``(M, n_steps + 1, d)`` with ``values[:, 0] == 0``.
    """

    grid: TimeGrid
    increments: np.ndarray
    seed: int

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        values = np.concatenate([np.zeros((inc.shape[0], 1, inc.shape[2])),
                                 np.cumsum(inc, axis=1)], axis=1)
        inc.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "_values", values)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n_paths(self) -> int:
        return self.increments.shape[0]

    @property
    def dim(self) -> int:
        return self.increments.shape[2]

    def at(self, node: int) -> np.ndarray:
        """B(t_node) for every path, shape ``(M, d)``."""
        return self._values[:, node, :]

    def terminal(self) -> np.ndarray:
        return self._values[:, -1, :]

    def to_table(self, coord: int = 0) -> str:
        """One row per path, columns ``B(t_0) .. B(t_n)`` of one coordinate."""
        header = ",".join(f"t{j}" for j in range(self.grid.n_steps + 1))
        buf = io.StringIO()
        np.savetxt(buf, self._values[:, :, coord], delimiter=",", fmt="%.17g",
                   header=header, comments="")
        return buf.getvalue()


def _path_increments(seed: int, path: int, shape) -> np.ndarray:
    # one independent stream per (seed, path) so path m does not depend on M
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, path])))
    return rng.standard_normal(shape)


def simulate_paths(grid: TimeGrid, dim: int, n_paths: int, seed: int, threads: int = 1) -> BrownianEnsemble:
    """Simulate ``n_paths`` independent d-dimensional Brownian paths.

    Path m is generated from its own stream keyed by ``(seed, m)``, so the
    ensemble is independent of ``threads`` and its first m paths do not change
    when more paths are requested.
    """
    if dim < 1 or n_paths < 1:
        raise ValueError("need dim >= 1 and n_paths >= 1")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    shape = (grid.n_steps, dim)
    scale = np.sqrt(grid.dt)

    def block(paths):
        return np.stack([_path_increments(seed, m, shape) for m in paths])

    chunks = np.array_split(np.arange(n_paths), max(1, min(threads, n_paths)))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(block, chunks))
    else:
        parts = [block(c) for c in chunks]
    return BrownianEnsemble(grid, scale * np.concatenate(parts, axis=0), seed)


TERMINAL_FAMILIES = ("identity", "deterministic-map", "affine-terminal", "sine-map")


@dataclass(frozen=True)
class TerminalField:
    """Terminal condition ``xi(u) = g(u, B(T))``.

    Families (applied componentwise in d > 1):

    ``identity``           xi(u) = u
    ``deterministic-map``  xi(u) = a*u + b               (defaults a=2, b=-1)
    ``affine-terminal``    xi(u) = a*u + b + sigma*B(T)  (defaults a=1, b=0, sigma=1)
    ``sine-map``           xi(u) = a*u + c*sin(w*u)      (defaults a=1, c=0.5, w=pi)

    ``lipschitz`` is the squared-mean constant L2 in
    ``E|xi(u1) - xi(u2)|^2 <= L2 |u1 - u2|^2``; it is derived from the
    parameters unless given explicitly.
    """

    family: str = "identity"
    params: Mapping = field(default_factory=dict)
    lipschitz: float | None = None

    def __post_init__(self):
        if self.family not in TERMINAL_FAMILIES:
            raise ValueError(f"unknown terminal family {self.family!r}")
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", self._derived_lipschitz())

    def _p(self, key, default):
        return float(self.params.get(key, default))

    def _derived_lipschitz(self) -> float:
        if self.family == "identity":
            return 1.0
        if self.family == "deterministic-map":
            return self._p("a", 2.0) ** 2
        if self.family == "affine-terminal":
            return self._p("a", 1.0) ** 2
        return (abs(self._p("a", 1.0)) + abs(self._p("c", 0.5)) * abs(self._p("w", np.pi))) ** 2

    @property
    def deterministic(self) -> bool:
        return self.family != "affine-terminal" or self._p("sigma", 1.0) == 0.0

    def evaluate(self, u, terminal_b: np.ndarray) -> np.ndarray:
        """xi(u) on every path; ``terminal_b`` has shape ``(M, d)``.

        ``u`` may be a single point ``(d,)`` or a batch ``(N, d)``; the result
        has shape ``(M, d)`` or ``(N, M, d)`` respectively.
        """
        u = np.asarray(u, dtype=float)
        batch = u.ndim == 2
        uu = u[:, None, :] if batch else u[None, :]
        m = terminal_b.shape[0]
        if self.family == "identity":
            out = np.broadcast_to(uu, (*uu.shape[:-2], m, uu.shape[-1]))
        elif self.family == "deterministic-map":
            out = self._p("a", 2.0) * uu + self._p("b", -1.0)
            out = np.broadcast_to(out, (*uu.shape[:-2], m, uu.shape[-1]))
        elif self.family == "sine-map":
            out = self._p("a", 1.0) * uu + self._p("c", 0.5) * np.sin(self._p("w", np.pi) * uu)
            out = np.broadcast_to(out, (*uu.shape[:-2], m, uu.shape[-1]))
        else:
            out = self._p("a", 1.0) * uu + self._p("b", 0.0) + self._p("sigma", 1.0) * terminal_b
        return np.array(out, dtype=float)


def eval_terminal(field_: TerminalField, u, ensemble: BrownianEnsemble, path: int) -> np.ndarray:
    """xi(u) on a single path m."""
    return field_.evaluate(u, ensemble.terminal()[path:path + 1])[0]
