import numpy as np
import pytest

from vocabembed.core import build_neighbor_sets
from vocabembed.errors import ConfigError, NumericalError
from vocabembed.loss import LossConfig, LossValueGrad, Objective
from vocabembed.solver import (SolverConfig, TrainTrace, hybrid_minimize, lbfgs_minimize,
                               sgd_minimize, train)
from vocabembed.synth import SynthSpec, generate_benchmark, oracle_ridge


class Bowl:
    """f(W) = sum_i ||W - A||^2 / n over n identical "instances"."""

    def __init__(self, A, n=8):
        self.A = A
        self.n_instances = n

    def __call__(self, W, rows=None):
        diff = W - self.A
        return LossValueGrad(float(np.sum(diff * diff)), 2.0 * diff)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(method="newton"), dict(max_iters=0), dict(grad_tol=0.0),
                                    dict(sgd_lr=-1.0), dict(hybrid_switch_frac=1.2),
                                    dict(weight_rounds=0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SolverConfig(**kw)


class TestLBFGS:
    def test_quadratic_bowl(self):
        A = np.random.default_rng(0).standard_normal((4, 3))
        W, trace = lbfgs_minimize(Bowl(A), np.zeros_like(A), SolverConfig(max_iters=5))
        assert trace.values()[-1] < 1e-12
        assert len(trace.records) <= 6
        np.testing.assert_allclose(W, A, atol=1e-6)

    def test_monotone_on_objective(self, problem):
        _, data, vocab, ns, w, cfg = problem(1, n=20)
        obj = Objective(data, vocab, ns, w, cfg)
        _, trace = lbfgs_minimize(obj, np.zeros(obj.shape), SolverConfig(max_iters=50))
        v = trace.values()
        assert np.all(np.diff(v) <= 0)

    def test_stops_on_relative_gradient(self):
        A = np.ones((2, 2))
        _, trace = lbfgs_minimize(Bowl(A), np.zeros_like(A), SolverConfig(grad_tol=0.5))
        g = [r["gnorm"] for r in trace.records]
        assert g[-1] < 0.5 * g[0] and all(x >= 0.5 * g[0] for x in g[:-1])

    def test_line_search_failure_returns_best(self):
        calls = []

        def f(W):
            # claims descent along -W but every trial point is worse
            calls.append(1)
            v = float(np.sum(W * W))
            return LossValueGrad(v if len(calls) == 1 else v + 100.0, 2 * W)

        W0 = np.ones((2, 2))
        W, trace = lbfgs_minimize(f, W0, SolverConfig())
        np.testing.assert_array_equal(W, W0)
        assert trace.warnings and "line search" in trace.warnings[0]

    def test_non_finite_objective(self):
        def f(W):
            return LossValueGrad(float("nan"), np.zeros_like(W))

        with pytest.raises(NumericalError):
            lbfgs_minimize(f, np.zeros((2, 2)), SolverConfig())


class TestSGD:
    def test_zero_gradient(self):
        class Flat(Bowl):
            def __call__(self, W, rows=None):
                return LossValueGrad(1.0, np.zeros_like(W))

        W0 = np.random.default_rng(1).standard_normal((3, 2))
        W, _ = sgd_minimize(Flat(None), W0, SolverConfig(max_iters=4))
        np.testing.assert_array_equal(W, W0)

    def test_bowl_decreases_each_epoch(self):
        A = np.random.default_rng(2).standard_normal((3, 3))
        _, trace = sgd_minimize(Bowl(A), np.zeros_like(A), SolverConfig(max_iters=10, sgd_lr=0.5))
        assert np.all(np.diff(trace.values()) < 0)

    def test_learning_rate_schedule(self):
        # one instance, lr/n step on grad 2(W - A): W_{e+1} - A = (1 - 2 lr_e)(W_e - A)
        A = np.array([[1.0]])
        cfg = SolverConfig(max_iters=5, sgd_lr=0.1, sgd_lr_halve_every=2, batch_size=1)
        W, _ = sgd_minimize(Bowl(A, n=1), np.zeros_like(A), cfg)
        factor = np.prod([1 - 2 * 0.1 * 0.5 ** (e // 2) for e in range(5)])
        np.testing.assert_allclose(W[0, 0] - 1.0, -factor, rtol=1e-14)

    def test_deterministic(self, problem):
        _, data, vocab, ns, w, cfg = problem(3, n=30)
        obj = Objective(data, vocab, ns, w, cfg)
        scfg = SolverConfig(max_iters=6, batch_size=4, seed=11)
        a, ta = sgd_minimize(obj, np.zeros(obj.shape), scfg)
        b, tb = sgd_minimize(obj, np.zeros(obj.shape), scfg)
        np.testing.assert_array_equal(a, b)
        assert ta.values() == tb.values()

    def test_divergence(self):
        A = np.ones((2, 2))
        with pytest.raises(NumericalError, match="diverged"):
            sgd_minimize(Bowl(A, n=1), np.zeros_like(A), SolverConfig(sgd_lr=50.0, max_iters=50))


class TestHybrid:
    def test_frac_zero_is_lbfgs(self, problem):
        _, data, vocab, ns, w, cfg = problem(4, n=20)
        obj = Objective(data, vocab, ns, w, cfg)
        scfg = SolverConfig(max_iters=30, hybrid_switch_frac=0.0)
        a, _ = hybrid_minimize(obj, obj, np.zeros(obj.shape), scfg)
        b, _ = lbfgs_minimize(obj, np.zeros(obj.shape), scfg)
        np.testing.assert_array_equal(a, b)

    def test_frac_one_is_sgd(self, problem):
        _, data, vocab, ns, w, cfg = problem(5, n=20)
        obj = Objective(data, vocab, ns, w, cfg)
        scfg = SolverConfig(max_iters=8, hybrid_switch_frac=1.0)
        a, _ = hybrid_minimize(obj, obj, np.zeros(obj.shape), scfg)
        b, _ = sgd_minimize(obj, np.zeros(obj.shape), scfg)
        np.testing.assert_array_equal(a, b)

    def test_close_to_lbfgs_on_large_problem(self):
        bench = generate_benchmark(SynthSpec(seed=2, n_source_classes=10, instances_per_class=100))
        ns = build_neighbor_sets(bench.vocab, 5, 5)
        obj = Objective(bench.train, bench.vocab, ns, None, LossConfig())
        W0 = np.zeros(obj.shape)
        _, th = hybrid_minimize(obj, obj, W0, SolverConfig(max_iters=100, sgd_lr=0.05))
        _, tl = lbfgs_minimize(obj, W0, SolverConfig(max_iters=100))
        assert th.values()[-1] <= 1.01 * tl.values()[-1]
        sgd_end = th.values("sgd")[-1]
        assert th.values()[-1] <= sgd_end + 1e-9


class TestTrain:
    def test_ridge_collapse(self, small_bench):
        cfg = LossConfig(alpha=1.0, epsilon=0.0, a_v=0, b_s=0, lambda_reg=0.05)
        W, _, _ = train(small_bench.train, small_bench.vocab, cfg,
                        SolverConfig(grad_tol=1e-12, max_iters=300))
        U = small_bench.vocab.vectors[small_bench.train.labels]
        want = oracle_ridge(small_bench.train.features, U, 0.05)
        assert np.linalg.norm(W - want) / np.linalg.norm(want) < 1e-8

    def test_single_round_alpha_one_is_plain_solve(self, small_bench):
        cfg = LossConfig(alpha=1.0)
        scfg = SolverConfig(weight_rounds=1)
        W, _, _ = train(small_bench.train, small_bench.vocab, cfg, scfg)
        ns = build_neighbor_sets(small_bench.vocab, cfg.a_v, cfg.b_s)
        obj = Objective(small_bench.train, small_bench.vocab, ns, None, cfg)
        want, _ = lbfgs_minimize(obj, np.zeros(obj.shape), scfg)
        np.testing.assert_array_equal(W, want)

    def test_round_bookkeeping(self, small_bench):
        cfg = LossConfig()
        W1, w1, _ = train(small_bench.train, small_bench.vocab, cfg, SolverConfig(weight_rounds=1))
        _, _, trace = train(small_bench.train, small_bench.vocab, cfg, SolverConfig(weight_rounds=2))
        ns = build_neighbor_sets(small_bench.vocab, cfg.a_v, cfg.b_s)
        restart = Objective(small_bench.train, small_bench.vocab, ns, w1, cfg)(W1).value
        assert trace.round_start_values[1] == restart
        first = [r for r in trace.records if r["round"] == 1][0]
        assert first["obj"] == restart
        assert len(trace.weight_snapshots) == 2
        for r in range(2):
            assert trace.round_end_values[r] <= trace.round_start_values[r]

    def test_beats_ridge_init(self):
        bench = generate_benchmark(SynthSpec(seed=4, n_source_classes=6, n_target_classes=2))
        cfg = LossConfig()
        W, weights, trace = train(bench.train, bench.vocab, cfg, SolverConfig(weight_rounds=1))
        ns = build_neighbor_sets(bench.vocab, cfg.a_v, cfg.b_s)
        obj = Objective(bench.train, bench.vocab, ns, None, cfg)
        ridge = oracle_ridge(bench.train.features, bench.vocab.vectors[bench.train.labels],
                             cfg.lambda_reg)
        assert obj(W).value <= obj(ridge).value

    def test_trace_log_format(self, small_bench):
        _, _, trace = train(small_bench.train, small_bench.vocab, LossConfig(),
                            SolverConfig(max_iters=3, weight_rounds=1))
        lines = trace.to_log().splitlines()
        assert len(lines) == len(trace.records)
        assert lines[0].startswith("iter=0 obj=") and " gnorm=" in lines[0] and " t=" in lines[0]

    @pytest.mark.parametrize("method", ["sgd", "hybrid"])
    def test_other_methods_run(self, small_bench, method):
        W, weights, trace = train(small_bench.train, small_bench.vocab, LossConfig(),
                                  SolverConfig(method=method, max_iters=10, sgd_lr=0.05))
        assert np.all(np.isfinite(W)) and abs(weights.weights.mean() - 1) < 1e-9

    def test_rejects_target_labels(self, small_bench):
        with pytest.raises(ValueError):
            train(small_bench.test, small_bench.vocab, LossConfig(), SolverConfig())


def test_trace_rejects_non_finite():
    with pytest.raises(NumericalError):
        TrainTrace().record("lbfgs", float("inf"), 0.0)
