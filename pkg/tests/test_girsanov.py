import numpy as np
import pytest
from hypothesis import given, strategies as st

from girsanov_kpz.errors import ConfigError, SingularMatrix
from girsanov_kpz.fields import FieldBundle, build_scenario, constant_matrix
from girsanov_kpz.girsanov import density_process, martingale_check, terminal_zhat, zhat_increment
from girsanov_kpz.sde import PathRecord, TimeGrid, simulate_ensemble


def const_bundle(b, S):
    b = np.asarray(b, dtype=float)
    return FieldBundle(len(b), lambda t, x: np.broadcast_to(b, np.shape(x)), constant_matrix(S))


def test_increment_examples():
    assert zhat_increment(const_bundle([0, 0], np.eye(2)), 0.0, np.zeros(2), 0.01, np.array([0.3, 0.1])) == 0.0
    z = zhat_increment(const_bundle([1, 2], np.eye(2)), 0.0, np.zeros(2), 0.01, np.array([0.1, -0.05]))
    assert z == pytest.approx(0.025, abs=1e-15)
    z = zhat_increment(const_bundle([2, 4], np.diag([2.0, 2.0])), 0.0, np.zeros(2), 0.1, np.zeros(2))
    assert z == pytest.approx(0.25, abs=1e-15)


def test_single_step_series():
    grid = TimeGrid(0.01, 1)
    path = PathRecord(grid, np.zeros((2, 2)), np.array([[0.1, -0.05]]))
    series = density_process(const_bundle([1, 2], np.eye(2)), path)
    np.testing.assert_allclose(series.zhat, [0.0, 0.025], atol=1e-15)


def test_zero_drift_series():
    grid = TimeGrid(1.0, 25)
    ens = simulate_ensemble(const_bundle([0, 0], np.eye(2)), np.zeros(2), grid, 0, 10)
    series = density_process(const_bundle([0, 0], np.eye(2)), ens)
    assert np.all(series.zhat == 0.0) and np.all(series.weights == 1.0)
    res = martingale_check(series.weights[:, -1].repeat(10))
    assert res.mean == 1.0 and res.stderr == 0.0 and res.passed


def test_linear_closed_form_every_path():
    sc = build_scenario("linear")
    S = sc.fields.constant_sigma
    c = np.array(sc.params["c"])
    sc_c = S.T @ c
    grid = TimeGrid(1.0, 400)
    ens = simulate_ensemble(sc.fields, sc.x0, grid, 42, 50)
    series = density_process(sc.fields, ens)
    B = ens.increments.sum(axis=1)
    closed = B @ sc_c + 0.5 * (sc_c @ sc_c) * grid.T
    np.testing.assert_allclose(series.zhat[:, -1], closed, atol=1e-10)


@given(st.integers(0, 1000), st.sampled_from(["linear", "bridge", "rotational", "ou1d"]))
def test_series_invariants(seed, name):
    sc = build_scenario(name)
    ens = simulate_ensemble(sc.fields, sc.x0, TimeGrid(1.0, 30), seed, 8)
    series = density_process(sc.fields, ens)
    assert np.all(np.diff(series.quad, axis=-1) >= 0.0)
    np.testing.assert_allclose(series.weights * np.exp(series.zhat), 1.0, rtol=1e-12)
    assert np.all(series.zhat[:, 0] == 0.0)


def test_singular_sigma_reports_step():
    fb = FieldBundle(1, lambda t, x: np.ones(np.shape(x)),
                     lambda t, x: np.broadcast_to(np.asarray(t > 0.5, dtype=float), np.shape(x)[:-1])[..., None, None] * np.ones((1, 1)))
    grid = TimeGrid(1.0, 10)
    path = PathRecord(grid, np.zeros((11, 1)), np.zeros((10, 1)))
    with pytest.raises(SingularMatrix) as info:
        density_process(fb, path)
    assert info.value.step == 0


def test_martingale_linear_passes():
    sc = build_scenario("linear")
    z, ok = terminal_zhat(sc.fields, sc.x0, TimeGrid(1.0, 10), 42, 20000)
    assert ok.all()
    assert martingale_check(np.exp(-z)).passed


def test_martingale_fault_injection_fails():
    sc = build_scenario("linear")
    ens = simulate_ensemble(sc.fields, sc.x0, TimeGrid(1.0, 10), 42, 20000)
    series = density_process(sc.fields, ens)
    doubled = series.zhat[:, -1] + series.quad[:, -1]
    res = martingale_check(np.exp(-doubled))
    assert res.mean < 1.0 and not res.passed


def test_martingale_needs_paths():
    with pytest.raises(ConfigError):
        martingale_check(np.ones(99))
