import numpy as np
import pytest

from interbsde.stochastic import TerminalField, TimeGrid, eval_terminal, simulate_paths


def test_grid():
    grid = TimeGrid(2.0, 4)
    np.testing.assert_allclose(grid.nodes, [0, 0.5, 1.0, 1.5, 2.0])
    assert grid.dt == 0.5
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_deterministic_and_prefix_stable():
    grid = TimeGrid(1.0, 8)
    a = simulate_paths(grid, 2, 100, seed=9)
    b = simulate_paths(grid, 2, 100, seed=9)
    np.testing.assert_array_equal(a.increments, b.increments)
    longer = simulate_paths(grid, 2, 150, seed=9)
    np.testing.assert_array_equal(longer.increments[:100], a.increments)
    threaded = simulate_paths(grid, 2, 100, seed=9, threads=3)
    np.testing.assert_array_equal(threaded.increments, a.increments)
    assert not np.array_equal(simulate_paths(grid, 2, 100, seed=10).increments, a.increments)


def test_starts_at_zero_and_cumulates():
    ens = simulate_paths(TimeGrid(1.0, 5), 3, 20, seed=1)
    np.testing.assert_array_equal(ens.at(0), 0.0)
    np.testing.assert_allclose(ens.terminal(), ens.increments.sum(axis=1))


def test_increment_statistics():
    n, m = 64, 8192
    ens = simulate_paths(TimeGrid(1.0, n), 1, m, seed=2)
    inc = ens.increments[:, :, 0]
    dt = 1.0 / n
    assert np.all(np.abs(inc.mean(axis=0)) <= 4 * np.sqrt(dt / m))
    var = inc.var(axis=0)
    assert np.all((var >= 0.9 * dt) & (var <= 1.1 * dt))
    assert abs(ens.terminal().mean()) <= 4 / np.sqrt(m)
    lag1 = np.corrcoef(inc[:, :-1].ravel(), inc[:, 1:].ravel())[0, 1]
    assert abs(lag1) <= 4 / np.sqrt(m * n)


def test_terminal_families():
    ens = simulate_paths(TimeGrid(1.0, 2), 1, 3, seed=0)
    np.testing.assert_array_equal(eval_terminal(TerminalField("identity"), [0.7], ens, 1), [0.7])
    assert eval_terminal(TerminalField("deterministic-map"), [0.5], ens, 0)[0] == pytest.approx(0.0)
    field = TerminalField("affine-terminal")
    b = ens.terminal()[2, 0]
    assert eval_terminal(field, [0.4], ens, 2)[0] == pytest.approx(0.4 + b)


def test_affine_terminal_fixed_brownian_value():
    field = TerminalField("affine-terminal")
    out = field.evaluate(np.array([1.0]), np.array([[0.3]]))
    assert out[0, 0] == pytest.approx(1.3)


def test_batch_shapes():
    field = TerminalField("sine-map")
    out = field.evaluate(np.zeros((4, 2)), np.zeros((7, 2)))
    assert out.shape == (4, 7, 2)
    assert field.deterministic
    assert not TerminalField("affine-terminal").deterministic


@pytest.mark.parametrize("family, params", [
    ("identity", {}), ("deterministic-map", {"a": -3.0}), ("affine-terminal", {"a": 0.5}),
    ("sine-map", {"a": 1.0, "c": 0.5, "w": 3.0}),
])
def test_squared_mean_lipschitz(family, params):
    field = TerminalField(family, params)
    ens = simulate_paths(TimeGrid(1.0, 4), 1, 2000, seed=4)
    rng = np.random.default_rng(0)
    for _ in range(50):
        u1, u2 = rng.normal(size=(2, 1)) * 3
        diff = field.evaluate(u1, ens.terminal()) - field.evaluate(u2, ens.terminal())
        assert np.mean(np.sum(diff ** 2, axis=-1)) <= 1.1 * field.lipschitz * np.sum((u1 - u2) ** 2)


def test_path_table():
    ens = simulate_paths(TimeGrid(1.0, 3), 1, 2, seed=0)
    lines = ens.to_table().splitlines()
    assert lines[0] == "t0,t1,t2,t3"
    assert len(lines) == 3
