"""Monte Carlo verification of the driver bound, stability and convergence.

All comparisons share one Brownian ensemble (common random numbers), so the
reported gaps isolate the effect of the changed input from sampling noise.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .driver import DriverSpec, eval_driver
from .measure import DiscreteMeasure, MeasureFamily, quantize
from .solver import SolutionField, SolverConfig, picard_iterate, solve_light
from .stochastic import BrownianEnsemble, TerminalField
from .transport import wasserstein2_squared, wasserstein_p


@dataclass
class LipschitzCheck:
    passed: bool
    worst_ratio: float
    violations: int
    trials: int


def _random_measure(rng, dim, max_atoms, scale):
    n = int(rng.integers(1, max_atoms + 1))
    w = rng.random(n) + 0.05
    return DiscreteMeasure(rng.normal(0.0, scale, size=(n, dim)), w / w.sum())


def check_driver_lipschitz(spec: DriverSpec, trials: int = 1000, seed: int = 0, dim: int = 1,
                           max_atoms: int = 8, scale: float = 2.0) -> LipschitzCheck:
    """Sample ``(y, y1, mu, nu)`` and test
    ``|f(y, mu) - f(y1, nu)|^2 <= 2 max(1, L1^2) (|y - y1|^2 + W2(mu, nu)^2)``
    with L1 the constant declared on ``spec``.
    """
    rng = np.random.default_rng(seed)
    const = 2.0 * max(1.0, spec.lipschitz ** 2)
    worst, violations = 0.0, 0
    for _ in range(trials):
        y, y1 = rng.normal(0.0, scale, size=(2, dim))
        if rng.random() < 0.1:
            y1 = y.copy()
        mu = _random_measure(rng, dim, max_atoms, scale)
        nu = mu if rng.random() < 0.1 else _random_measure(rng, dim, max_atoms, scale)
        lhs = float(np.sum((eval_driver(spec, y, mu) - eval_driver(spec, y1, nu)) ** 2))
        rhs = float(np.sum((y - y1) ** 2)) + (0.0 if nu is mu else wasserstein_p(mu, nu, 2) ** 2)
        if lhs == 0.0:
            continue
        ratio = lhs / (const * rhs) if rhs > 0 else np.inf
        worst = max(worst, ratio)
        if lhs > const * rhs * (1 + 1e-12) + 1e-14:
            violations += 1
    return LipschitzCheck(violations == 0, float(worst), violations, trials)


def _map_ordered(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def flow_gaps(first: SolutionField, second: SolutionField, threads: int = 1) -> np.ndarray:
    """``W2^2`` between the two measure flows on every (node, path), shape ``(n + 1, M)``.

    Nodes where both flows are identical across paths are evaluated once.
    """
    n_nodes, n_paths = first.Y.shape[1], first.Y.shape[2]
    out = np.empty((n_nodes, n_paths))

    def node_gaps(j):
        y1, y2 = first.Y[:, j], second.Y[:, j]
        if np.all(y1 == y1[:, :1]) and np.all(y2 == y2[:, :1]):
            return np.full(n_paths, wasserstein2_squared(y1[:, 0], first.weights, y2[:, 0], second.weights))
        return np.array([wasserstein2_squared(y1[:, m], first.weights, y2[:, m], second.weights)
                         for m in range(n_paths)])

    for j, row in enumerate(_map_ordered(node_gaps, range(n_nodes), threads)):
        out[j] = row
    return out


@dataclass
class StabilityRecord:
    u1: list
    u2: list
    left: float
    left_at_zero: float
    u_gap_sq: float
    flow_gap_integral: float
    ratio: float
    converged: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _same_measure(a: DiscreteMeasure, b: DiscreteMeasure) -> bool:
    return a is b or (a.atoms.shape == b.atoms.shape and np.array_equal(a.atoms, b.atoms)
                      and np.array_equal(a.weights, b.weights))


def _light_gap(l1, l2, dt):
    """Left side ``E|dY_t|^2 + E int_t^T ||dZ||^2`` at every node."""
    dy = np.mean(np.sum((l1.Y - l2.Y) ** 2, axis=-1), axis=1)
    dz = np.mean(np.sum((l1.Z - l2.Z) ** 2, axis=(-2, -1)), axis=1)[:-1] * dt
    tail = np.concatenate([np.cumsum(dz[::-1])[::-1], [0.0]])
    return dy + tail


def check_stability(config: SolverConfig, driver: DriverSpec, field_: TerminalField, u1, u2,
                    mu1: DiscreteMeasure, mu2: DiscreteMeasure, ensemble: BrownianEnsemble,
                    threads: int = 1, heavy: tuple | None = None) -> StabilityRecord:
    """Estimate both sides of the stability estimate for two inputs.

    ``left`` is the supremum over nodes of
    ``E|Y1(u1,t) - Y2(u2,t)|^2 + E int_t^T ||Z1 - Z2||^2``; the right side
    ingredients are ``|u1 - u2|^2`` and ``int_0^T E W2^2(mu1_t, mu2_t) dt``.
    ``heavy`` may pass precomputed heavy solutions for ``(mu1, mu2)``.
    """
    if heavy is None:
        h1, r1 = picard_iterate(mu1, field_, driver, ensemble, config)
        if _same_measure(mu1, mu2):
            h2, r2 = h1, r1
        else:
            h2, r2 = picard_iterate(mu2, field_, driver, ensemble, config)
    else:
        (h1, r1), (h2, r2) = heavy
    u1 = np.atleast_1d(np.asarray(u1, dtype=float))
    u2 = np.atleast_1d(np.asarray(u2, dtype=float))
    l1 = solve_light(u1, h1, field_, driver, ensemble, config)
    l2 = solve_light(u2, h2, field_, driver, ensemble, config)
    dt = ensemble.grid.dt
    left = _light_gap(l1, l2, dt)
    if h1 is h2:
        flow_integral = 0.0
    else:
        flow_integral = float(np.sum(flow_gaps(h1, h2, threads).mean(axis=1)[:-1]) * dt)
    u_gap = float(np.sum((u1 - u2) ** 2))
    right = u_gap + flow_integral
    sup_left = float(left.max())
    if right > 0:
        ratio = sup_left / right
    else:
        ratio = 0.0 if sup_left == 0 else float("inf")
    converged = r1.converged and r2.converged and l1.report.converged and l2.report.converged
    return StabilityRecord(u1.tolist(), u2.tolist(), sup_left, float(left[0]), u_gap,
                           flow_integral, float(ratio), converged)


@dataclass
class ConvergenceRecord:
    n_atoms: int
    terminal_gap: float
    max_flow_gap: float
    y_gap: float
    z_gap: float
    converged: bool
    flow_gaps: list = field(default_factory=list, repr=False)

    @property
    def flow_constant(self) -> float:
        """Fitted ratio of the worst flow gap to the terminal gap."""
        return self.max_flow_gap / self.terminal_gap if self.terminal_gap > 0 else float("nan")


@dataclass
class ConvergenceStudy:
    records: list[ConvergenceRecord]
    reference_n: int
    aborted: bool = False

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def trend_holds(self) -> bool:
        """Last record does not exceed the first on each gap metric."""
        if self.aborted or not self.records:
            return False
        first, last = self.records[0], self.records[-1]
        tol = 1e-12
        return all(getattr(last, m) <= getattr(first, m) + tol
                   for m in ("terminal_gap", "max_flow_gap", "y_gap", "z_gap"))

    def to_rows(self) -> list[dict]:
        return [{"N": r.n_atoms, "terminal_gamma2_sq": r.terminal_gap, "max_flow_gamma2_sq": r.max_flow_gap,
                 "mean_sq_dY": r.y_gap, "int_sq_dZ": r.z_gap} for r in self.records]


def convergence_study(family: MeasureFamily | str, n_list, reference_n: int, driver: DriverSpec,
                      field_: TerminalField, ensemble: BrownianEnsemble, config: SolverConfig = SolverConfig(),
                      probes=(0.1, 0.5, 0.9), threads: int = 1, seed: int = 0) -> ConvergenceStudy:
    """Compare discrete-measure solutions at increasing N against a fine reference.

    For each N the heavy system is solved for ``quantize(family, N)`` on the
    shared ensemble and compared with the ``reference_n`` solution through

    * ``terminal_gap``  E W2^2(mu^N_T, mu^ref_T)
    * ``max_flow_gap``  max over nodes of E W2^2(mu^N_t, mu^ref_t)
    * ``y_gap``         max over nodes of E|Y^N(u,t) - Y^ref(u,t)|^2, averaged over probes
    * ``z_gap``         E int_0^T ||Z^N(u,t) - Z^ref(u,t)||^2 dt, averaged over probes
    """
    if isinstance(family, str):
        family = MeasureFamily(family)
    n_list = [int(n) for n in n_list]
    probes = [np.atleast_1d(np.asarray(p, dtype=float)) for p in probes]
    dt = ensemble.grid.dt

    ref_mu = quantize(family, reference_n, seed)
    ref, ref_report = picard_iterate(ref_mu, field_, driver, ensemble, config)
    if not ref_report.converged:
        return ConvergenceStudy([], reference_n, aborted=True)
    ref_light = [solve_light(u, ref, field_, driver, ensemble, config) for u in probes]

    records = []
    for n in n_list:
        if n == reference_n:
            sol, report = ref, ref_report
        else:
            sol, report = picard_iterate(quantize(family, n, seed), field_, driver, ensemble, config)
        if not report.converged:
            records.append(ConvergenceRecord(n, *([float("nan")] * 4), converged=False))
            return ConvergenceStudy(records, reference_n, aborted=True)
        if sol is ref:
            gaps = np.zeros((ensemble.grid.n_steps + 1, ensemble.n_paths))
            lights = ref_light
        else:
            gaps = flow_gaps(sol, ref, threads)
            lights = [solve_light(u, sol, field_, driver, ensemble, config) for u in probes]
        per_node = gaps.mean(axis=1)
        y_gaps, z_gaps = [], []
        for mine, theirs in zip(lights, ref_light):
            y_gaps.append(np.mean(np.sum((mine.Y - theirs.Y) ** 2, axis=-1), axis=1).max())
            dz = np.mean(np.sum((mine.Z - theirs.Z) ** 2, axis=(-2, -1)), axis=1)[:-1]
            z_gaps.append(np.sum(dz) * dt)
        records.append(ConvergenceRecord(n, float(per_node[-1]), float(per_node.max()),
                                         float(np.mean(y_gaps)), float(np.mean(z_gaps)), True,
                                         per_node.tolist()))
    return ConvergenceStudy(records, reference_n)
