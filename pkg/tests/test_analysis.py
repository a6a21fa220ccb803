import numpy as np
import pytest

from interbsde.analysis import check_stability, convergence_study, flow_gaps
from interbsde.driver import DriverSpec
from interbsde.measure import quantize
from interbsde.solver import SolverConfig, picard_iterate
from interbsde.stochastic import TerminalField, TimeGrid, simulate_paths
from interbsde.transport import wasserstein_p

ATTRACTION = DriverSpec("attraction", {"kappa": 0.5})
SINE = TerminalField("sine-map")


@pytest.fixture(scope="module")
def ens():
    return simulate_paths(TimeGrid(1.0, 32), 1, 256, seed=23)


def test_identical_inputs_have_zero_left_side(ens):
    mu = quantize("uniform", 8)
    rec = check_stability(SolverConfig(), ATTRACTION, TerminalField("affine-terminal"), 0.4, 0.4, mu, mu, ens)
    assert rec.left <= 1e-8
    assert rec.ratio == 0.0


def test_ratio_finite_for_different_measures(ens):
    rec = check_stability(SolverConfig(), ATTRACTION, SINE, 0.3, 0.5,
                          quantize("uniform", 8), quantize("uniform", 16), ens)
    assert rec.converged
    assert np.isfinite(rec.ratio) and rec.ratio > 0
    assert rec.flow_gap_integral > 0


def test_quadratic_scaling_in_starting_point(ens):
    mu = quantize("uniform", 8)
    field = TerminalField("affine-terminal")
    spec = DriverSpec("bounded-smooth", {"scale": 0.5})
    heavy = picard_iterate(mu, field, spec, ens)
    lefts = [check_stability(SolverConfig(), spec, field, 0.3, 0.3 + d, mu, mu, ens, heavy=(heavy, heavy)).left_at_zero
             for d in (0.2, 0.1, 0.05)]
    for big, small in zip(lefts, lefts[1:]):
        assert 3.0 <= big / small <= 5.3


def test_flow_gaps_match_lp(ens):
    s1, _ = picard_iterate(quantize("uniform", 4), SINE, ATTRACTION, ens)
    s2, _ = picard_iterate(quantize("uniform", 6), SINE, ATTRACTION, ens)
    gaps = flow_gaps(s1, s2, threads=2)
    assert gaps.shape == (33, 256)
    for j, m in ((0, 0), (16, 7), (32, 100)):
        direct = wasserstein_p(s1.flow().at(j, m), s2.flow().at(j, m), 2) ** 2
        assert gaps[j, m] == pytest.approx(direct, abs=1e-12)
    np.testing.assert_array_equal(gaps, flow_gaps(s1, s2, threads=1))


def test_study_at_reference_is_zero(ens):
    study = convergence_study("uniform", [16], 16, ATTRACTION, SINE, ens)
    rec = study.records[0]
    for name in ("terminal_gap", "max_flow_gap", "y_gap", "z_gap"):
        assert getattr(rec, name) <= 1e-12


def test_study_zero_driver(ens):
    study = convergence_study("uniform", [4, 8], 32, DriverSpec("zero"), SINE, ens)
    assert np.all(study.column("y_gap") <= 1e-6)
    assert np.all(study.column("z_gap") <= 1e-6)


def test_study_trend_and_fitted_constant(ens):
    study = convergence_study("uniform", [8, 16, 32], 64, ATTRACTION, SINE, ens)
    assert not study.aborted
    assert study.trend_holds
    assert np.all(np.diff(study.column("terminal_gap")) < 0)
    consts = np.array([r.flow_constant for r in study.records])
    assert np.all(np.isfinite(consts))
    assert consts.max() / consts.min() <= 2.0


def test_study_aborts_on_nonconvergence(ens):
    study = convergence_study("uniform", [4, 8], 16, DriverSpec("attraction", {"kappa": 8.0}), SINE, ens,
                              SolverConfig(max_iterations=2))
    assert study.aborted
    assert not study.trend_holds
