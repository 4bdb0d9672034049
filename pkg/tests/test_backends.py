"""Compiled core vs pure-Python twin: bit-identical by contract."""

import numpy as np
import pytest

from opinion_lab import backend
from opinion_lab import kernels as K
from opinion_lab.ensemble import Ensemble, dissipation_rate, rhs

pytestmark = pytest.mark.skipif(backend.BACKEND != "compiled",
                                reason="compiled core not built")


def all_builtin_kernels():
    return [
        K.constant(0.7),
        K.hegselmann_krause(0.2),
        K.bounded_confidence(K.PiecewiseProfile((0.4,), (0.15, 0.3))),
        K.bounded_influence(K.PiecewiseProfile((0.6,), (0.1, 0.25))),
        K.gaussian_decay(1.0),
        K.gaussian_decay(K.PiecewiseProfile((0.5,), (0.6, 1.4))),
        K.ring_sensing(0.05, 0.35),
        K.typed_confidence(0.2, 0.3),
        K.finite_consensus_embed(3, [[0, 1, 0.2], [1, 0, 0.5], [0.2, 0.5, 0]]),
    ]


def random_state(rng, n):
    alphas = np.sort(rng.uniform(0, 1, n))
    while len(np.unique(alphas)) < n:
        alphas = np.sort(rng.uniform(0, 1, n))
    return Ensemble(alphas, rng.uniform(0, 1, n),
                    np.full(n, 1.0 / n), float(rng.uniform(0, 5)))


def _run_both(kernel, ens, fn_name):
    plan = kernel.core_plan(ens.alphas, ens.t)
    results = []
    for name in ("compiled", "python"):
        mod = backend.get_backend(name)
        if fn_name == "rhs":
            out = np.empty(ens.n)
            getattr(mod, "rhs_builtin")(plan.code, ens.t, plan.scal,
                                        plan.node_param, plan.mat, plan.block,
                                        ens.alphas, ens.opinions, ens.masses, out)
            results.append(out)
        else:
            results.append(getattr(mod, "dissipation_builtin")(
                plan.code, ens.t, plan.scal, plan.node_param, plan.mat,
                plan.block, ens.alphas, ens.opinions, ens.masses))
    return results


@pytest.mark.parametrize("n", [2, 5, 8, 33])
def test_rhs_twins_bit_identical(n):
    rng = np.random.default_rng(100 + n)
    for kernel in all_builtin_kernels():
        for _ in range(20):
            ens = random_state(rng, n)
            fast, slow = _run_both(kernel, ens, "rhs")
            assert np.array_equal(fast, slow), kernel.family


@pytest.mark.parametrize("n", [3, 8, 33])
def test_dissipation_twins_bit_identical(n):
    rng = np.random.default_rng(200 + n)
    for kernel in all_builtin_kernels():
        for _ in range(10):
            ens = random_state(rng, n)
            fast, slow = _run_both(kernel, ens, "dissipation")
            assert fast == slow, kernel.family


def test_thread_count_does_not_change_results():
    rng = np.random.default_rng(7)
    ens = random_state(rng, 101)
    for kernel in all_builtin_kernels():
        v1 = rhs(ens, kernel, n_threads=1)
        v4 = rhs(ens, kernel, n_threads=4)
        assert np.array_equal(v1, v4), kernel.family
        d1 = dissipation_rate(ens, kernel, n_threads=1)
        d4 = dissipation_rate(ens, kernel, n_threads=4)
        assert d1 == d4


def test_generic_path_matches_core_for_builtins():
    # the generic evaluate loop and the core must agree bit-for-bit
    rng = np.random.default_rng(13)
    for kernel in all_builtin_kernels():
        ens = random_state(rng, 17)
        assert np.array_equal(rhs(ens, kernel), rhs(ens, kernel, validate=True))
