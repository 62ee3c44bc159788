"""Weighted max-margin vocabulary-informed objective and its gradient in W.

For an instance x with class z, projection g = W^T x and D(a) = ||g - u_a||^2:

* data term: sum_j max(0, |g_j - u_zj| - w_z * eps)^2
* triplet term per neighbour a: 1/2 * max(0, C + D(z)/2 - D(a)/2)^2, summed
  over the open-vocabulary neighbours and the source neighbours of z.

The per-instance total is alpha * data + (1 - alpha) * triplet, summed over
instances, plus lambda * ||W||_F^2.
"""

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .core import check_embedding
from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.6
    lambda_reg: float = 0.01
    epsilon: float = 0.1
    margin_c: float = 1.0
    a_v: int = 5
    b_s: int = 5
    # divide each triplet sum by its neighbour count
    normalize_triplets: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        for name in ("lambda_reg", "epsilon", "margin_c"):
            v = getattr(self, name)
            if not (v >= 0.0 and np.isfinite(v)):
                raise ConfigError(f"{name} must be a finite nonnegative number, got {v}")
        for name in ("a_v", "b_s"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def to_dict(self):
        return asdict(self)


class LossValueGrad(NamedTuple):
    value: float
    grad: np.ndarray


def smooth_hinge_sq(t):
    """Squared hinge max(0, t)^2 and its derivative 2 max(0, t)."""
    h = np.maximum(t, 0.0)
    if np.ndim(h) == 0:
        h = float(h)
    return h * h, 2.0 * h


def weight_vector(weights, vocab):
    """Per-source-class tube weights aligned with ``vocab.source_ids``."""
    n = vocab.source_ids.size
    if weights is None:
        return np.ones(n)
    w = np.asarray(getattr(weights, "weights", weights), dtype=np.float64).reshape(-1)
    if w.size != n:
        raise ValueError(f"class weights cover {w.size} classes, vocabulary has {n} source classes")
    return w


def _positions(data, vocab):
    order = np.argsort(vocab.source_ids)
    sorted_src = vocab.source_ids[order]
    pos = np.searchsorted(sorted_src, data.labels)
    pos = np.clip(pos, 0, sorted_src.size - 1)
    if sorted_src.size == 0 or np.any(sorted_src[pos] != data.labels):
        raise ValueError("training labels must all be source classes")
    return order[pos]


def _data_parts(P, targets, tube):
    """Data-term value per instance and its gradient w.r.t. the projections."""
    R = P - targets
    t = np.maximum(np.abs(R) - tube[:, None], 0.0)
    return np.einsum("ij,ij->i", t, t), 2.0 * t * np.sign(R)


def _triplet_parts(P, targets, neigh_vecs, c):
    """Triplet value per instance and gradient w.r.t. projections.

    ``neigh_vecs`` has shape (N, m, d).
    """
    if neigh_vecs.shape[1] == 0:
        return np.zeros(P.shape[0]), np.zeros_like(P)
    Rz = P - targets
    dz = np.einsum("ij,ij->i", Rz, Rz)
    Ra = P[:, None, :] - neigh_vecs
    da = np.einsum("imj,imj->im", Ra, Ra)
    h = np.maximum(c + 0.5 * dz[:, None] - 0.5 * da, 0.0)
    value = 0.5 * np.einsum("im,im->i", h, h)
    grad = np.einsum("im,imj->ij", h, neigh_vecs - targets[:, None, :])
    return value, grad


def _check(W, data, vocab):
    if data.p != np.shape(W)[0]:
        raise ShapeError(f"features have p={data.p}, W has {np.shape(W)[0]} rows")
    return check_embedding(W, data.p, vocab.dim)


def data_term(W, data, vocab, weights, cfg):
    """Weighted epsilon-insensitive squared loss summed over instances (no regularizer)."""
    W = _check(W, data, vocab)
    w = weight_vector(weights, vocab)
    pos = _positions(data, vocab)
    P = data.features @ W
    vals, gP = _data_parts(P, vocab.vectors[data.labels], w[pos] * cfg.epsilon)
    return LossValueGrad(float(vals.sum()), data.features.T @ gP)


def _single_triplet(W, x, class_id, neighbor_ids, vocab, cfg):
    W = check_embedding(W, np.shape(x)[0], vocab.dim)
    x = np.asarray(x, dtype=np.float64)
    ids = np.asarray(neighbor_ids, dtype=np.int64).reshape(-1)
    g = (x @ W)[None, :]
    u_z = vocab.vectors[[class_id]]
    vals, gP = _triplet_parts(g, u_z, vocab.vectors[ids][None, :, :], cfg.margin_c)
    scale = 1.0 / ids.size if cfg.normalize_triplets and ids.size else 1.0
    return LossValueGrad(scale * float(vals[0]), scale * np.outer(x, gP[0]))


def triplet_term_open(W, x, class_id, av_ids, vocab, cfg):
    """Margin term against open-vocabulary (non-source) prototypes for one instance."""
    av = np.asarray(av_ids, dtype=np.int64)
    if np.isin(av, vocab.source_ids).any():
        raise ValueError("open-vocabulary neighbours must not include source classes")
    return _single_triplet(W, x, class_id, av, vocab, cfg)


def triplet_term_source(W, x, class_id, bs_ids, vocab, cfg):
    """Margin term against other source prototypes for one instance."""
    bs = np.asarray(bs_ids, dtype=np.int64)
    if not np.isin(bs, vocab.source_ids).all() or np.any(bs == class_id):
        raise ValueError("source neighbours must be other source classes")
    return _single_triplet(W, x, class_id, bs, vocab, cfg)


class Objective:
    """Value and gradient of the full objective, optionally on a row subset.

    On a subset of rows the instance sum is rescaled by N / |rows| so the
    estimate stays on the scale of the full objective; the regularizer is
    never rescaled.
    """

    def __init__(self, data, vocab, neighbors, weights, cfg):
        self.data = data
        self.vocab = vocab
        self.cfg = cfg
        self.n_instances = len(data)
        if data.p < 1:
            raise ShapeError("features must have p >= 1")
        pos = _positions(data, vocab)
        self.tube = weight_vector(weights, vocab)[pos] * cfg.epsilon
        self.targets = vocab.vectors[data.labels]
        U = vocab.vectors
        av = np.asarray(neighbors.av_ids, dtype=np.int64)[pos]
        bs = np.asarray(neighbors.bs_ids, dtype=np.int64)[pos]
        self.av_vecs = U[av] if av.size else np.zeros((len(data), 0, vocab.dim))
        self.bs_vecs = U[bs] if bs.size else np.zeros((len(data), 0, vocab.dim))
        self.av_scale = 1.0 / av.shape[1] if cfg.normalize_triplets and av.shape[1] else 1.0
        self.bs_scale = 1.0 / bs.shape[1] if cfg.normalize_triplets and bs.shape[1] else 1.0

    @property
    def shape(self):
        return (self.data.p, self.vocab.dim)

    def instance_terms(self, W, rows=None):
        """Per-instance objective contributions (without regularizer) and projection gradients."""
        sl = slice(None) if rows is None else rows
        X = self.data.features[sl]
        P = X @ W
        targets = self.targets[sl]
        a = self.cfg.alpha
        d_val, d_grad = _data_parts(P, targets, self.tube[sl])
        v_val, v_grad = _triplet_parts(P, targets, self.av_vecs[sl], self.cfg.margin_c)
        s_val, s_grad = _triplet_parts(P, targets, self.bs_vecs[sl], self.cfg.margin_c)
        vals = a * d_val + (1.0 - a) * (self.av_scale * v_val + self.bs_scale * s_val)
        gP = a * d_grad + (1.0 - a) * (self.av_scale * v_grad + self.bs_scale * s_grad)
        return X, vals, gP

    def __call__(self, W, rows=None):
        W = check_embedding(W, *self.shape)
        X, vals, gP = self.instance_terms(W, rows)
        scale = 1.0 if rows is None else self.n_instances / max(len(rows), 1)
        lam = self.cfg.lambda_reg
        value = scale * float(vals.sum()) + lam * float(np.sum(W * W))
        grad = scale * (X.T @ gP) + 2.0 * lam * W
        return LossValueGrad(value, grad)


def objective(W, data, vocab, neighbors, weights, cfg):
    """Full objective value and analytic gradient with respect to W."""
    _check(W, data, vocab)
    return Objective(data, vocab, neighbors, weights, cfg)(W)
