"""Seeded synthetic benchmarks and brute-force reference computations.

The reference functions here deliberately share no code with the modules
they are compared against.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import LabeledFeatures, SemanticVocabulary
from .errors import ConfigError

MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_source_classes: int = 10
    n_target_classes: int = 3
    n_distractor_vocab: int = 100
    d: int = 20
    p: int = 50
    instances_per_class: int = 30
    test_instances_per_class: int = None
    noise_sigma: float = 0.05
    map_condition: float = 10.0
    # optional per-source-class training counts
    class_counts: tuple = None

    def __post_init__(self):
        for name in ("n_source_classes", "n_target_classes", "d", "p", "instances_per_class"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_distractor_vocab < 0:
            raise ConfigError("n_distractor_vocab must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.map_condition < 1:
            raise ConfigError("map_condition must be >= 1")
        if self.class_counts is not None:
            if len(self.class_counts) != self.n_source_classes or min(self.class_counts) < 1:
                raise ConfigError("class_counts needs one positive count per source class")

    @property
    def min_cosine(self):
        """Largest cosine allowed between two class prototypes."""
        return min(0.9, 3.0 / math.sqrt(self.d))


@dataclass
class Benchmark:
    train: LabeledFeatures
    test: LabeledFeatures
    vocab: SemanticVocabulary
    mapping: np.ndarray
    train_index: np.ndarray = field(repr=False)
    test_index: np.ndarray = field(repr=False)


def _sphere(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _class_prototypes(rng, n, d, max_cos):
    protos = []
    tries = 0
    while len(protos) < n:
        tries += 1
        if tries > MAX_REJECTIONS * n:
            raise ValueError(f"cannot place {n} prototypes in d={d} with cosine <= {max_cos:.3f}")
        v = _sphere(rng, 1, d)[0]
        if all(np.dot(v, q) <= max_cos for q in protos):
            protos.append(v)
    return np.array(protos).reshape(n, d)


def _mapping(rng, p, d, cond):
    r = min(p, d)
    q1, _ = np.linalg.qr(rng.standard_normal((p, r)))
    q2, _ = np.linalg.qr(rng.standard_normal((d, r)))
    sv = np.geomspace(1.0, 1.0 / cond, r) if r > 1 else np.ones(1)
    return q1 @ np.diag(sv) @ q2.T


def generate_benchmark(spec):
    """Deterministic benchmark: vocabulary rows are sources, targets, distractors.

    Features are ``M u + N(0, sigma^2 I)`` with ``M`` a p x d map of condition
    number ``map_condition``. Train holds source classes only; test holds
    fresh draws of both source and target classes.
    """
    rng = np.random.default_rng(spec.seed)
    ns, nt = spec.n_source_classes, spec.n_target_classes
    classes = _class_prototypes(rng, ns + nt, spec.d, spec.min_cosine)
    distractors = _sphere(rng, spec.n_distractor_vocab, spec.d)
    M = _mapping(rng, spec.p, spec.d, spec.map_condition)
    labels = ([f"src{i:03d}" for i in range(ns)] + [f"tgt{i:03d}" for i in range(nt)]
              + [f"w{i:06d}" for i in range(spec.n_distractor_vocab)])
    vocab = SemanticVocabulary(labels, np.vstack([classes, distractors]),
                               source_ids=range(ns), target_ids=range(ns, ns + nt))
    U = vocab.vectors

    def draw(class_ids, counts):
        ys = np.repeat(np.asarray(class_ids, dtype=np.int64), counts)
        X = U[ys] @ M.T + spec.noise_sigma * rng.standard_normal((ys.size, spec.p))
        return X, ys

    train_counts = spec.class_counts or [spec.instances_per_class] * ns
    n_test = spec.test_instances_per_class or spec.instances_per_class
    Xtr, ytr = draw(range(ns), train_counts)
    Xte, yte = draw(range(ns + nt), [n_test] * (ns + nt))
    train_index = np.arange(ytr.size)
    test_index = np.arange(ytr.size, ytr.size + yte.size)
    return Benchmark(LabeledFeatures(Xtr, ytr), LabeledFeatures(Xte, yte), vocab, M,
                     train_index, test_index)


def oracle_objective(W, data, vocab, neighbors, weights, cfg):
    """Literal loop-by-loop evaluation of the objective value."""
    W = np.asarray(W, dtype=np.float64)
    p, d = W.shape
    U = vocab.vectors
    src = [int(s) for s in vocab.source_ids]
    w = [1.0] * len(src) if weights is None else list(getattr(weights, "weights", weights))
    total = 0.0
    for i in range(len(data)):
        x = data.features[i]
        z = int(data.labels[i])
        c = src.index(z)
        g = [sum(W[r, j] * x[r] for r in range(p)) for j in range(d)]
        loss_eps = 0.0
        for j in range(d):
            xi = max(0.0, abs(g[j] - U[z, j]) - w[c] * cfg.epsilon)
            loss_eps += xi * xi
        margin = 0.0
        for group in (neighbors.av_ids[c], neighbors.bs_ids[c]):
            group = list(group)
            part = 0.0
            for a in group:
                dz = sum((g[j] - U[z, j]) ** 2 for j in range(d))
                da = sum((g[j] - U[int(a), j]) ** 2 for j in range(d))
                t = max(0.0, cfg.margin_c + 0.5 * dz - 0.5 * da)
                part += 0.5 * t * t
            if cfg.normalize_triplets and group:
                part /= len(group)
            margin += part
        total += cfg.alpha * loss_eps + (1.0 - cfg.alpha) * margin
    reg = sum(W[r, j] ** 2 for r in range(p) for j in range(d))
    return total + cfg.lambda_reg * reg


def weibull_loglik(samples, shape, scale):
    x = np.asarray(samples, dtype=np.float64)
    z = x / scale
    return float(np.sum(np.log(shape / scale) + (shape - 1.0) * np.log(z) - z ** shape))


def oracle_weibull_grid(samples, n_grid=400):
    """Grid-search maximum likelihood over (shape, scale).

    Shape on a log grid over [0.05, 50]; scale on a log grid over
    [min/10, max*10]. Returns ``(shape, scale, shape_step, scale_step)``
    where the steps are the grid's multiplicative spacings.
    """
    x = np.asarray(samples, dtype=np.float64)
    shapes = np.geomspace(0.05, 50.0, n_grid)
    scales = np.geomspace(x.min() / 10.0, x.max() * 10.0, n_grid)
    logx = np.log(x)
    best = (-np.inf, None, None)
    for k in shapes:
        # (n_grid, n) matrix of (x / scale) for every scale
        z = np.exp(logx[None, :] - np.log(scales)[:, None])
        ll = (x.size * (np.log(k) - np.log(scales)) + (k - 1.0) * np.sum(np.log(z), axis=1)
              - np.sum(z ** k, axis=1))
        j = int(np.argmax(ll))
        if ll[j] > best[0]:
            best = (ll[j], k, scales[j])
    return best[1], best[2], shapes[1] / shapes[0], scales[1] / scales[0]


def oracle_ridge(X, U, lam):
    """Closed-form ridge regression W = (X^T X + lam I)^-1 X^T U."""
    X = np.asarray(X, dtype=np.float64)
    return np.linalg.solve(X.T @ X + lam * np.eye(X.shape[1]), X.T @ np.asarray(U, dtype=np.float64))


def oracle_linear_scan(queries, protos, ids, k):
    """Full distance rows, then a stable (distance, id) sort. No chunking, no heaps."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    P = np.asarray(protos, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    k = min(k, P.shape[0])
    PT = np.ascontiguousarray(P.T)
    out_d = np.empty((Q.shape[0], k))
    out_i = np.empty((Q.shape[0], k), dtype=np.int64)
    for q in range(Q.shape[0]):
        dist = np.zeros(P.shape[0])
        for j in range(P.shape[1]):
            diff = PT[j] - Q[q, j]
            dist += diff * diff
        order = np.lexsort((ids, dist))[:k]
        out_d[q], out_i[q] = dist[order], ids[order]
    return out_d, out_i
