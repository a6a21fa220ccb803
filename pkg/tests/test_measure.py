import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interbsde.measure import (DiscreteMeasure, InvalidMapError, InvalidMeasureError, MeasureFamily,
                               UnsupportedFamilyError, pushforward, quantize, second_moment)
from interbsde.transport import wasserstein_p


def test_rejects_bad_weights():
    with pytest.raises(InvalidMeasureError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(InvalidMeasureError):
        DiscreteMeasure([[0.0], [1.0]], [1.0, 0.0])
    with pytest.raises(InvalidMeasureError):
        DiscreteMeasure(np.zeros((0, 1)), [])
    # no silent renormalization, even for a tiny excess
    with pytest.raises(InvalidMeasureError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5 + 1e-9])


def test_one_dimensional_atoms_are_columns():
    mu = DiscreteMeasure([0.0, 1.0, 2.0], np.full(3, 1 / 3))
    assert mu.atoms.shape == (3, 1)
    assert mu.dim == 1


def test_immutable():
    mu = DiscreteMeasure.dirac([0.0])
    with pytest.raises(ValueError):
        mu.atoms[0, 0] = 1.0


class TestPushforward:
    def test_translation(self):
        out = pushforward(DiscreteMeasure.dirac([0.0]), lambda u: u + 1)
        np.testing.assert_array_equal(out.atoms, [[1.0]])
        np.testing.assert_array_equal(out.weights, [1.0])

    def test_linear(self):
        mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
        out = pushforward(mu, lambda u: 2 * u)
        np.testing.assert_array_equal(out.atoms, [[0.0], [2.0]])
        np.testing.assert_array_equal(out.weights, [0.5, 0.5])

    def test_constant_map_keeps_atoms_separate(self):
        mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
        out = pushforward(mu, lambda u: np.zeros(1))
        assert out.n_atoms == 2
        np.testing.assert_array_equal(out.atoms, [[0.0], [0.0]])
        np.testing.assert_array_equal(out.weights, [0.5, 0.5])

    def test_sampled_images(self):
        mu = DiscreteMeasure([[0.0, 0.0], [1.0, 1.0]], [0.25, 0.75])
        out = pushforward(mu, np.array([[3.0, 4.0], [5.0, 6.0]]))
        np.testing.assert_array_equal(out.weights, mu.weights)

    def test_dimension_mismatch(self):
        mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
        with pytest.raises(InvalidMapError):
            pushforward(mu, lambda u: np.array([u[0], u[0]]))
        with pytest.raises(InvalidMapError):
            pushforward(mu, lambda u: np.zeros(int(u[0]) + 1))


@pytest.mark.parametrize("n, expected", [(2, [0.25, 0.75]), (4, [0.125, 0.375, 0.625, 0.875])])
def test_uniform_quantiles(n, expected):
    mu = quantize("uniform", n)
    np.testing.assert_allclose(mu.atoms[:, 0], expected, atol=1e-15)
    np.testing.assert_allclose(mu.weights, np.full(n, 1 / n))


def test_gaussian_quantiles_symmetric():
    mu = quantize(MeasureFamily("gaussian"), 10)
    np.testing.assert_allclose(mu.atoms[:, 0], -mu.atoms[::-1, 0], atol=1e-12)


def test_product_grid_and_sample():
    grid = quantize(MeasureFamily("uniform", dim=2), 9)
    assert grid.atoms.shape == (9, 2)
    with pytest.raises(ValueError):
        quantize(MeasureFamily("uniform", dim=2), 8)
    a = quantize(MeasureFamily("gaussian", dim=3, method="sample"), 50, seed=4)
    b = quantize(MeasureFamily("gaussian", dim=3, method="sample"), 50, seed=4)
    np.testing.assert_array_equal(a.atoms, b.atoms)


def test_unsupported_family():
    with pytest.raises(UnsupportedFamilyError):
        quantize("cauchy", 4)


def test_quantization_improves_with_n():
    # finer quantization is closer to the N=200 proxy of the continuous law
    ref = quantize("uniform", 200)
    assert wasserstein_p(quantize("uniform", 100), ref, 2) <= wasserstein_p(quantize("uniform", 50), ref, 2)


def test_doubling_gap_strictly_decreasing():
    gaps = [wasserstein_p(quantize("uniform", n), quantize("uniform", 2 * n), 2) for n in (4, 8, 16, 32)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("atoms, weights, expected", [
    ([[0.0]], [1.0], 0.0),
    ([[1.0], [-1.0]], [0.5, 0.5], 1.0),
    ([[3.0], [1.0]], [0.25, 0.75], 3.0),
])
def test_second_moment(atoms, weights, expected):
    assert second_moment(DiscreteMeasure(atoms, weights)) == pytest.approx(expected, abs=1e-15)


def test_table_and_dict_roundtrip():
    mu = DiscreteMeasure([[0.1, -2.0], [3.5, 1e-7]], [0.3, 0.7])
    text = mu.to_table()
    assert text.splitlines()[0] == "w,u_1,u_2"
    back = DiscreteMeasure.from_table(text)
    np.testing.assert_array_equal(back.atoms, mu.atoms)
    np.testing.assert_array_equal(back.weights, mu.weights)
    again = DiscreteMeasure.from_dict(mu.to_dict())
    np.testing.assert_array_equal(again.atoms, mu.atoms)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8), st.floats(-3, 3))
def test_pushforward_preserves_weights(points, shift):
    mu = DiscreteMeasure.uniform(np.array(points)[:, None])
    out = pushforward(mu, lambda u: u * shift + 1.0)
    np.testing.assert_array_equal(out.weights, mu.weights)
    assert out.dim == mu.dim
