"""Independent reference solutions used to validate the solver and the LP."""
from __future__ import annotations

import itertools

import numpy as np

from .driver import DriverSpec, heavy_drift, light_drift
from .measure import DiscreteMeasure
from .stochastic import TerminalField

MAX_BRUTE_FORCE_ATOMS = 4


def _rk4_backward(rhs, y_terminal, horizon, steps):
    dt = horizon / steps
    out = np.empty((steps + 1, *y_terminal.shape))
    out[steps] = y = y_terminal
    for j in range(steps, 0, -1):
        k1 = rhs(y)
        k2 = rhs(y - 0.5 * dt * k1)
        k3 = rhs(y - 0.5 * dt * k2)
        k4 = rhs(y - dt * k3)
        y = y - dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[j - 1] = y
    return out


def rk4_forward(rhs, y0, horizon, steps):
    dt = horizon / steps
    y = y0
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def _deterministic_terminal(field_: TerminalField, atoms: np.ndarray) -> np.ndarray:
    if not field_.deterministic:
        raise ValueError("the ODE oracle needs a deterministic terminal field")
    return field_.evaluate(atoms, np.zeros((1, atoms.shape[1])))[:, 0, :]


def backward_ode_solve(mu0: DiscreteMeasure, field_: TerminalField, spec: DriverSpec, steps: int,
                       horizon: float = 1.0) -> np.ndarray:
    """RK4 solution of ``Y_k' = sum_j h(Y_k, Y_j) p_j``, ``Y_k(T) = xi(u_k)``.

    Returns positions of shape ``(steps + 1, N, d)`` at ``t_j = j T / steps``.
    With a deterministic terminal field this is the Z = 0 solution of the
    heavy-particle system.
    """
    def rhs(y):
        return heavy_drift(spec, y, mu0.weights)

    return _rk4_backward(rhs, _deterministic_terminal(field_, mu0.atoms), horizon, steps)


def light_ode_solve(u, mu0: DiscreteMeasure, field_: TerminalField, spec: DriverSpec, steps: int,
                    horizon: float = 1.0) -> np.ndarray:
    """RK4 for one light particle coupled to the heavy ones; shape ``(steps + 1, d)``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n = mu0.n_atoms
    state = np.vstack([_deterministic_terminal(field_, mu0.atoms),
                       _deterministic_terminal(field_, u[None, :])])

    def rhs(y):
        heavy = heavy_drift(spec, y[:n], mu0.weights)
        light = light_drift(spec, y[n], y[:n], mu0.weights)
        return np.vstack([heavy, light[None]])

    return _rk4_backward(rhs, state, horizon, steps)[:, n]


def linear_mean_closed_form(spec: DriverSpec, terminal_mean, times, horizon: float) -> np.ndarray:
    """Mean of the heavy system for ``h = alpha*y + beta*v``: ``m' = (alpha + beta) m``."""
    if spec.family != "linear":
        raise ValueError("closed form is only available for the linear family")
    rate = spec._p("alpha") + spec._p("beta")
    times = np.asarray(times, dtype=float)
    return np.exp(rate * (times - horizon))[:, None] * np.asarray(terminal_mean, dtype=float)[None, :]


def brute_force_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> float:
    """Minimum transport cost over all vertices of the transportation polytope.

    Every vertex is supported on ``m + n - 1`` cells whose constraint columns
    are independent; all such supports are enumerated and solved.
    """
    m, n = mu.n_atoms, nu.n_atoms
    if max(m, n) > MAX_BRUTE_FORCE_ATOMS:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE_ATOMS} atoms per measure")
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    diff = mu.atoms[:, None, :] - nu.atoms[None, :, :]
    cost = np.sqrt(np.sum(diff * diff, axis=-1)).ravel() ** p
    cells = np.arange(m * n)
    # constraint matrix without the redundant last column-sum row
    a_full = np.zeros((m + n, m * n))
    for i, j in itertools.product(range(m), range(n)):
        a_full[i, i * n + j] = 1.0
        a_full[m + j, i * n + j] = 1.0
    a_eq = a_full[:-1]
    b_eq = np.concatenate([mu.weights, nu.weights])[:-1]
    k = m + n - 1
    supports = np.array(list(itertools.combinations(cells, k)))
    mats = a_eq[:, supports].transpose(1, 0, 2)
    ok = np.abs(np.linalg.det(mats)) > 0.5  # determinants of basis matrices are +-1
    sols = np.linalg.solve(mats[ok], np.broadcast_to(b_eq, (ok.sum(), k))[..., None])[..., 0]
    feasible = np.all(sols >= -1e-13, axis=1)
    values = np.sum(np.clip(sols[feasible], 0, None) * cost[supports[ok][feasible]], axis=1)
    return float(values.min()) ** (1.0 / p)


ANALYTIC_CASES = ("martingale", "squared-brownian", "affine-terminal")


def analytic_cases(case: str):
    """Exact conditional expectations for Brownian test targets.

    Returns a function of ``(b_t, t, horizon)`` where ``b_t`` is ``(M, d)``:

    ``martingale``        E[B_T | F_t] = B_t
    ``squared-brownian``  E[B_T^2 | F_t] = B_t^2 + (T - t)        (d = 1)
    ``affine-terminal``   xi(u) = u + B_T  =>  (Y, Z) = (u + B_t, identity)
    """
    if case == "martingale":
        return lambda b_t, t, horizon: np.array(b_t, dtype=float)
    if case == "squared-brownian":
        return lambda b_t, t, horizon: np.asarray(b_t) ** 2 + (horizon - t)
    if case == "affine-terminal":
        def solution(b_t, t, horizon, u=0.0):
            b_t = np.asarray(b_t, dtype=float)
            z = np.broadcast_to(np.eye(b_t.shape[1]), (b_t.shape[0], b_t.shape[1], b_t.shape[1]))
            return u + b_t, z
        return solution
    raise ValueError(f"unknown analytic case {case!r}")
