"""Windowed fixed-point solver: contraction, stability, cross-validation."""

import math

import numpy as np
import pytest

from opinion_lab import kernels as K
from opinion_lab import picard as P
from opinion_lab.ensemble import Ensemble, IntegratorConfig, integrate, uniform_ensemble


def two_node_ensemble():
    return Ensemble(np.array([0.25, 0.75]), np.array([0.0, 1.0]), np.full(2, 0.5))


def test_window_bound_gaussian():
    # W = 1, declared L = 1: min(1/4, 1/10) = 0.1
    assert P.window_bound(K.gaussian_decay(1.0)) == pytest.approx(0.1)


def test_window_bound_requires_lipschitz():
    with pytest.raises(P.LipschitzRequiredError):
        P.window_bound(K.hegselmann_krause(0.2))
    with pytest.raises(P.LipschitzRequiredError):
        P.picard_window_solve(K.ring_sensing(0.1, 0.3), two_node_ensemble(),
                              0.0, 0.05)


def test_window_bound_violation_rejected():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(10, lambda a: a)
    with pytest.raises(P.WindowBoundError):
        P.picard_window_solve(k, ens, 0.0, 0.1)   # not strictly below 0.1
    with pytest.raises(P.WindowBoundError):
        P.picard_window_solve(k, ens, 0.0, 0.2)


def test_operator_rejects_oversized_iterate():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(5, lambda a: a)
    times = np.linspace(0, 0.05, 9)
    y = np.full((9, 5), 2.5)
    with pytest.raises(P.SupNormError):
        P.picard_operator_apply(k, ens, times, y)


def test_operator_output_time_lipschitz_and_sup():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(20, lambda a: a)
    times = np.linspace(0, 0.09, 65)
    y = np.tile(ens.opinions, (65, 1))
    out = P.picard_operator_apply(k, ens, times, y)
    assert np.max(np.abs(out)) <= 2.0
    w = k.W_bound
    steps = np.abs(np.diff(out, axis=0)) / np.diff(times)[:, None]
    assert np.max(steps) <= 4.0 * w * (1 + 1e-9)


def test_zero_kernel_fixed_in_one_iteration():
    win = P.picard_window_solve(K.constant(0.0), two_node_ensemble(), 0.0, 0.5)
    assert win.converged and win.iterations == 1
    assert win.residuals == [0.0]
    np.testing.assert_array_equal(win.values[-1], [0.0, 1.0])


def test_constant_kernel_window_matches_closed_form():
    # exact solution: x_i(t) = mean + (x_i(0) - mean) e^{-t}
    tol = 1e-9
    win = P.picard_window_solve(K.constant(1.0), two_node_ensemble(), 0.0, 0.1,
                                tol=tol)
    exact = 0.5 + (np.array([0.0, 1.0])[None, :] - 0.5) * np.exp(-win.times)[:, None]
    assert np.max(np.abs(win.values - exact)) < 10 * tol


def test_contraction_ratios_below_bound():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(30, lambda a: a)
    win = P.picard_window_solve(k, ens, 0.0, 0.09, keep_iterates=True)
    bound = P.contraction_factor(k, 0.09)
    assert bound == pytest.approx(0.9)
    for r in win.contraction_ratios():
        assert r <= bound + 0.05
    # every iterate stays in the sup-norm-2 space
    for it in win.iterates:
        assert np.max(np.abs(it)) <= 2.0


def test_fixed_point_residual_small():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(25, lambda a: a)
    tol = 1e-9
    win = P.picard_window_solve(k, ens, 0.0, 0.09, tol=tol)
    again = P.picard_operator_apply(k, ens, win.times, win.values)
    assert np.max(np.abs(again - win.values)) <= 5 * tol


def test_uniqueness_probe_perturbed_initial_iterate():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(15, lambda a: a)
    tol = 1e-9
    grid = 64
    base = P.picard_window_solve(k, ens, 0.0, 0.09, tol=tol, grid_points=grid)
    shifted = np.tile(ens.opinions, (grid + 1, 1)) + 0.5
    other = P.picard_window_solve(k, ens, 0.0, 0.09, tol=tol, grid_points=grid,
                                  initial_iterate=shifted)
    assert np.max(np.abs(base.values - other.values)) <= 2 * tol


def test_window_count_and_truncation():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(10, lambda a: a)
    traj, windows = P.picard_solve_windows(k, ens, 1.0, b=0.09, grid_points=16)
    assert len(windows) == 12
    assert windows[-1].b == pytest.approx(1.0 - 11 * 0.09)
    assert traj.final.t == pytest.approx(1.0)


def test_breakpoint_inside_window_rejected():
    sched = K.MatrixSchedule((0.0, 1.0), (((0.0,),), ((0.5,),)), period=2.0)
    k = K.finite_consensus_embed(1, sched)
    ens = uniform_ensemble(6, lambda a: a)
    with pytest.raises(P.BreakpointError):
        P.picard_window_solve(k, ens, 0.95, 0.2)


def test_requires_box_initial_data():
    k = K.gaussian_decay(1.0)
    ens = Ensemble(np.array([0.25, 0.75]), np.array([-0.1, 0.5]), np.full(2, 0.5))
    with pytest.raises(ValueError):
        P.picard_window_solve(k, ens, 0.0, 0.05)


def test_zero_kernel_chain_identity():
    ens = uniform_ensemble(8, lambda a: a)
    traj = P.picard_solve(K.constant(0.0), ens, 2.0, b=0.5)
    np.testing.assert_array_equal(traj.final.opinions, ens.opinions)


def test_gaussian_agreement_with_rk4():
    k = K.gaussian_decay(1.0)
    ens = uniform_ensemble(50, lambda a: a)
    res = P.cross_validate(k, ens, 1.0, b=0.09, rk4_dt=1e-3)
    assert res["sup_distance"] < 1e-6


def test_constant_kernel_solve_matches_closed_form_chain():
    ens = two_node_ensemble()
    traj = P.picard_solve(K.constant(1.0), ens, 1.0, b=0.2, grid_points=256)
    got = traj.final.opinions
    expected = 0.5 + (np.array([0.0, 1.0]) - 0.5) * math.exp(-1.0)
    np.testing.assert_allclose(got, expected, atol=1e-7)
