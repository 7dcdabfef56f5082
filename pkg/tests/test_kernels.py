"""Backend equivalence: compiled kernels vs numpy fallback vs generic engine.

The kinked-coordinate kernels are bit-identical across all three (same keyed
draws, same expression order, same pairwise reduction tree).  The logistic
kernels may differ from each other by libm-vs-numpy exp rounding (about one
ulp per step), so they are compared at a tight tolerance over short horizons
and bit-exactly on their sample-index streams.
"""

import numpy as np
import pytest

from localsgd import kernels, problems
from localsgd.algorithms import ConstantSchedule, RunConfig, simulate_batch

BACKENDS = ["numpy"] + (["cython"] if kernels.BACKEND == "cython" else [])

needs_cython = pytest.mark.skipif(kernels.BACKEND != "cython",
                                  reason="compiled extension not built")

SEEDS = np.arange(12, dtype=np.uint64) * np.uint64(7919) + np.uint64(3)


class TestHingeKernel:
    @pytest.mark.parametrize("minibatch", [False, True])
    @pytest.mark.parametrize("M,K,R", [(1, 1, 5), (3, 4, 6), (8, 2, 3)])
    def test_backends_bit_identical(self, minibatch, M, K, R):
        runs = [np.asarray(kernels.load_backend(b).hinge_run(
            0.25, 0.5, 1.0, 0.3, K, R, M, SEEDS, 0.0, minibatch)) for b in BACKENDS]
        for other in runs[1:]:
            assert (runs[0] == other).all()

    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("pattern", ["local", "minibatch"])
    def test_matches_engine_on_hard_instance(self, backend, pattern):
        inst = problems.HardInstance(mu=0.02, H=1.0, B=1.0, sigma=1.0)
        M, K, R, eta = 4, 3, 5, 0.3
        cfg = RunConfig(algorithm=pattern, M=M, K=K, R=R, schedule=ConstantSchedule(eta))
        res = simulate_batch(inst, cfg, SEEDS)
        coord3 = np.asarray(kernels.load_backend(backend).hinge_run(
            inst.L, inst.c, inst.sigma, eta, K, R, M, SEEDS, 0.0,
            pattern == "minibatch"))
        assert (res.round_iterates[:, :, 2] == coord3).all()

    def test_noise_free_matches_deterministic_recursion(self):
        L, c, eta, K, R = 0.25, 0.5, 0.3, 2, 4
        out = np.asarray(kernels.hinge_run(L, c, 0.0, eta, K, R, 3,
                                           SEEDS[:1], 0.0, False))
        x = 0.0
        for r in range(R):
            for _ in range(K):
                xc = x - c
                x = x - eta * (L * xc + L * max(xc, 0.0))
            assert abs(out[0, r] - x) < 1e-15


class TestLogisticKernel:
    @pytest.mark.parametrize("minibatch", [False, True])
    def test_backends_agree(self, small_dataset, minibatch):
        y = small_dataset.labels.astype(np.float64) * 2 - 1
        runs = [np.asarray(kernels.load_backend(b).logistic_run(
            small_dataset.features, y, 0.05, 3, 6, 4, SEEDS, np.zeros(6), minibatch))
            for b in BACKENDS]
        for other in runs[1:]:
            np.testing.assert_allclose(runs[0], other, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("pattern", ["local", "minibatch"])
    def test_matches_engine(self, small_logistic, backend, pattern):
        ds = small_logistic.dataset
        y = ds.labels.astype(np.float64) * 2 - 1
        M, K, R, eta = 3, 4, 6, 0.05
        cfg = RunConfig(algorithm=pattern, M=M, K=K, R=R, schedule=ConstantSchedule(eta))
        res = simulate_batch(small_logistic, cfg, SEEDS)
        w = np.asarray(kernels.load_backend(backend).logistic_run(
            ds.features, y, eta, K, R, M, SEEDS, np.zeros(6), pattern == "minibatch"))
        np.testing.assert_allclose(res.round_iterates, w, rtol=0, atol=1e-10)

    def test_w0_length_check(self, small_dataset):
        y = small_dataset.labels.astype(np.float64) * 2 - 1
        with pytest.raises(ValueError):
            kernels.logistic_run(small_dataset.features, y, 0.05, 1, 1, 1,
                                 SEEDS, np.zeros(3), False)


class TestFastPathDispatch:
    """monte_carlo's kernel fast paths must agree with the generic engine."""

    @pytest.mark.parametrize("pattern", ["local", "minibatch", "thumb_twiddling", "serial"])
    def test_hard_instance_fast_path(self, pattern):
        from localsgd import harness

        inst = problems.HardInstance(mu=0.02, H=1.0, B=1.0, sigma=1.0)
        cfg = RunConfig(algorithm=pattern, M=3, K=2, R=4, schedule=ConstantSchedule(0.3))
        fast_out, fast_rounds = harness._hard_fast_path(inst, cfg, SEEDS)
        res = simulate_batch(inst, cfg, SEEDS)
        np.testing.assert_allclose(fast_rounds, res.round_suboptimality, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(fast_out, res.suboptimality, rtol=1e-12, atol=1e-14)

    def test_logistic_fast_path(self, small_logistic):
        from localsgd import harness

        cfg = RunConfig(algorithm="local", M=3, K=2, R=4, schedule=ConstantSchedule(0.05))
        fast_out, fast_rounds = harness._logistic_fast_path(small_logistic, cfg, SEEDS)
        res = simulate_batch(small_logistic, cfg, SEEDS)
        np.testing.assert_allclose(fast_rounds, res.round_suboptimality, rtol=1e-9, atol=1e-12)
