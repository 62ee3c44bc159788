import numpy as np
import pytest

from vocabembed.errors import ConfigError
from vocabembed.evaluation import evaluate
from vocabembed.loss import LossConfig
from vocabembed.solver import SolverConfig, train
from vocabembed.synth import (SynthSpec, generate_benchmark, oracle_linear_scan, oracle_ridge,
                              oracle_weibull_grid, weibull_loglik)


class TestSynthSpec:
    @pytest.mark.parametrize("kw", [dict(d=0), dict(noise_sigma=-1.0), dict(map_condition=0.5),
                                    dict(n_distractor_vocab=-2), dict(class_counts=(1, 2))])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SynthSpec(**kw)

    def test_min_cosine(self):
        assert SynthSpec(d=20).min_cosine == pytest.approx(3 / np.sqrt(20))
        assert SynthSpec(d=4).min_cosine == 0.9


class TestGenerator:
    def test_deterministic(self):
        a = generate_benchmark(SynthSpec(seed=7, d=6, p=8, n_distractor_vocab=5))
        b = generate_benchmark(SynthSpec(seed=7, d=6, p=8, n_distractor_vocab=5))
        np.testing.assert_array_equal(a.train.features, b.train.features)
        np.testing.assert_array_equal(a.test.features, b.test.features)
        np.testing.assert_array_equal(a.vocab.vectors, b.vocab.vectors)
        c = generate_benchmark(SynthSpec(seed=8, d=6, p=8, n_distractor_vocab=5))
        assert not np.array_equal(a.train.features, c.train.features)

    def test_layout(self):
        spec = SynthSpec(n_source_classes=4, n_target_classes=2, n_distractor_vocab=7, d=5, p=9,
                         instances_per_class=3, test_instances_per_class=2)
        b = generate_benchmark(spec)
        assert len(b.vocab) == 13 and b.vocab.labels[4] == "tgt000" and b.vocab.labels[6] == "w000000"
        np.testing.assert_array_equal(b.vocab.source_ids, range(4))
        np.testing.assert_array_equal(b.vocab.target_ids, [4, 5])
        assert b.train.features.shape == (12, 9) and len(b.test) == 12
        assert set(b.train.labels.tolist()) == set(range(4))
        assert set(b.test.labels.tolist()) == set(range(6))
        assert not set(b.train_index.tolist()) & set(b.test_index.tolist())

    def test_class_counts(self):
        b = generate_benchmark(SynthSpec(n_source_classes=3, class_counts=(1, 4, 2), d=4, p=4))
        np.testing.assert_array_equal(np.bincount(b.train.labels), [1, 4, 2])

    def test_condition_number(self):
        spec = SynthSpec(seed=1, map_condition=25.0)
        s = np.linalg.svd(generate_benchmark(spec).mapping, compute_uv=False)
        assert s[0] / s[-1] <= 25.0 * (1 + 1e-9)
        np.testing.assert_allclose(s[0], 1.0, rtol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_prototype_angle_floor(self, seed):
        spec = SynthSpec(seed=seed)
        U = generate_benchmark(spec).vocab.vectors[:13]
        G = U @ U.T
        np.fill_diagonal(G, -1)
        assert G.max() <= spec.min_cosine + 1e-12

    def test_infeasible_floor(self):
        with pytest.raises(ValueError, match="cannot place"):
            generate_benchmark(SynthSpec(n_source_classes=40, n_target_classes=1, d=2, p=2))

    def test_noiseless_map_is_invertible(self):
        b = generate_benchmark(SynthSpec(seed=2, noise_sigma=0.0))
        U = b.vocab.vectors[b.train.labels]
        W = oracle_ridge(b.train.features, U, 1e-10)
        assert np.linalg.norm(b.train.features @ W - U) / np.linalg.norm(U) < 1e-6

    def test_trained_model_far_above_chance(self):
        b = generate_benchmark(SynthSpec(seed=0))
        W, _, _ = train(b.train, b.vocab, LossConfig(), SolverConfig())
        assert evaluate(W, b.test, b.vocab, ["zsl"])["zsl"].top_k_accuracy[1] > 1 / 3 + 0.3


class TestOracles:
    def test_ridge_normal_equations(self):
        rng = np.random.default_rng(0)
        X, U = rng.standard_normal((20, 5)), rng.standard_normal((20, 3))
        W = oracle_ridge(X, U, 0.5)
        np.testing.assert_allclose(X.T @ (X @ W - U) + 0.5 * W, 0.0, atol=1e-12)

    def test_linear_scan_small(self):
        protos = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        d, i = oracle_linear_scan([0.9, 0.1], protos, [10, 11, 12, 13], 3)
        np.testing.assert_array_equal(i, [[11, 13, 10]])
        np.testing.assert_allclose(d, [[0.02, 0.02, 0.82]], rtol=1e-14)

    def test_loglik_by_hand(self):
        x = np.array([0.5, 1.0, 2.0])
        want = sum(np.log(2 / 1.5) + np.log(v / 1.5) - (v / 1.5) ** 2 for v in x)
        assert weibull_loglik(x, 2.0, 1.5) == pytest.approx(want, rel=1e-14)

    def test_grid_recovers_parameters(self):
        rng = np.random.default_rng(3)
        x = 1.5 * rng.weibull(2.0, 2000)
        k, lam, _, _ = oracle_weibull_grid(x, n_grid=200)
        assert abs(k - 2.0) / 2.0 < 0.1 and abs(lam - 1.5) / 1.5 < 0.05
