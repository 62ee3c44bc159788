"""Vocabulary, dataset and embedding primitives.

Everything here is immutable after construction: arrays are stored as
read-only float64 copies so the objects can be shared across threads.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _frozen_ids(ids):
    ids = np.array(ids if ids is not None else [], dtype=np.int64).reshape(-1)
    ids.setflags(write=False)
    return ids


class SemanticVocabulary:
    """The open label set with one prototype vector per label.

    Parameters
    ----------
    labels : sequence of str
        Unique labels, one per row of ``vectors``.
    vectors : array_like, shape (n, d)
    source_ids, target_ids : sequence of int
        Row indices of the source (labelled) and target (unlabelled) classes.
    synsets : dict, optional
        ``label -> [synonym labels]``. Missing entries mean singleton synsets.
    normalize : bool
        Rescale every prototype to unit L2 norm.
    """

    def __init__(self, labels, vectors, source_ids=(), target_ids=(), synsets=None,
                 normalize=True):
        labels = tuple(str(s) for s in labels)
        vectors = np.array(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            if vectors.size == 0 and len(labels) == 0:
                vectors = vectors.reshape(0, max(vectors.shape[-1] if vectors.ndim else 0, 1))
            else:
                raise ShapeError(f"vectors must be 2-D, got shape {vectors.shape}")
        if vectors.shape[0] != len(labels):
            raise ShapeError(f"{len(labels)} labels but {vectors.shape[0]} vectors")
        if vectors.shape[1] < 1:
            raise ShapeError("prototype dimension must be >= 1")
        if len(set(labels)) != len(labels):
            raise ValueError("labels must be unique")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("prototype vectors must be finite")
        if normalize and len(labels):
            norms = np.sqrt(np.einsum("ij,ij->i", vectors, vectors))
            if np.any(norms == 0):
                bad = labels[int(np.flatnonzero(norms == 0)[0])]
                raise ValueError(f"cannot normalize zero vector for label {bad!r}")
            vectors = vectors / norms[:, None]
        self.labels = labels
        self.vectors = _frozen(vectors)
        self.source_ids = _frozen_ids(source_ids)
        self.target_ids = _frozen_ids(target_ids)
        self.normalized = bool(normalize)
        n = len(labels)
        for name, ids in (("source_ids", self.source_ids), ("target_ids", self.target_ids)):
            if ids.size and (ids.min() < 0 or ids.max() >= n):
                raise IndexError(f"{name} contains an index outside [0, {n})")
            if np.unique(ids).size != ids.size:
                raise ValueError(f"{name} contains duplicates")
        if np.intersect1d(self.source_ids, self.target_ids).size:
            raise ValueError("source and target classes must be disjoint")
        self._index = {s: i for i, s in enumerate(labels)}
        self.synsets = {}
        for label, syns in (synsets or {}).items():
            if label not in self._index:
                continue
            self.synsets[label] = tuple(s for s in syns if s != label)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        return (f"SemanticVocabulary(n={len(self)}, d={self.dim}, "
                f"source={self.source_ids.size}, target={self.target_ids.size})")

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in vocabulary") from None

    def __contains__(self, label):
        return label in self._index

    @property
    def open_ids(self):
        """Rows outside the source set (targets and distractors)."""
        mask = np.ones(len(self), dtype=bool)
        mask[self.source_ids] = False
        return np.flatnonzero(mask)

    def source_position(self):
        """Map vocabulary row -> position within ``source_ids``."""
        return {int(v): i for i, v in enumerate(self.source_ids)}

    def synset(self, label):
        """True-class synset: the label itself plus its synonyms."""
        return (label,) + self.synsets.get(label, ())

    def _derive(self, labels, vectors, source_ids, target_ids, synsets=None):
        # rows are already normalized (or deliberately not): keep bits as-is
        out = SemanticVocabulary(labels, vectors, source_ids, target_ids,
                                 synsets=self.synsets if synsets is None else synsets,
                                 normalize=False)
        out.normalized = self.normalized
        return out

    def with_splits(self, source_ids, target_ids):
        return self._derive(self.labels, self.vectors, source_ids, target_ids)

    def subset(self, rows):
        """Vocabulary restricted to ``rows`` (kept in the given order)."""
        rows = np.asarray(rows, dtype=np.int64)
        remap = {int(r): i for i, r in enumerate(rows)}
        src = [remap[int(i)] for i in self.source_ids if int(i) in remap]
        tgt = [remap[int(i)] for i in self.target_ids if int(i) in remap]
        labels = [self.labels[r] for r in rows]
        return self._derive(labels, self.vectors[rows], src, tgt)


@dataclass(frozen=True)
class LabeledFeatures:
    """N feature vectors in R^p with their class labels.

    ``labels`` holds vocabulary row indices, so the same container serves
    training data (source classes) and test data (source and target).
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64).reshape(-1)
        if x.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise ShapeError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]

    def class_count(self):
        return np.unique(self.labels).size

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledFeatures(self.features[rows], self.labels[rows])

    def check_source(self, vocab):
        """Raise if any label is not a source class of ``vocab``."""
        bad = np.setdiff1d(self.labels, vocab.source_ids)
        if bad.size:
            raise ValueError(f"label {vocab.labels[int(bad[0])]!r} is not a source class")


@dataclass(frozen=True)
class NeighborSets:
    """Per source class: nearest open-vocabulary and nearest other-source prototypes.

    Row ``i`` of each array belongs to ``vocab.source_ids[i]``.
    """

    av_ids: np.ndarray
    bs_ids: np.ndarray


def check_embedding(W, p, d):
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (p, d):
        raise ShapeError(f"W has shape {W.shape}, expected ({p}, {d})")
    if not np.all(np.isfinite(W)):
        raise ValueError("W has non-finite entries")
    return W


def project(W, x):
    """g(x) = W^T x. Accepts a single vector or an (N, p) batch."""
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise ShapeError(f"cannot project x of shape {x.shape} with W of shape {W.shape}")
    return x @ W


def sq_distance(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.dot(diff.ravel(), diff.ravel()))


def nearest_prototypes(query, vocab, candidate_ids, k, threads=1):
    """Indices of the k nearest candidate prototypes, closest first.

    Ties go to the lowest vocabulary index, so the answer does not depend on
    the order of ``candidate_ids``.
    """
    cand = np.unique(np.asarray(candidate_ids, dtype=np.int64))
    if cand.size == 0:
        raise ValueError("empty candidate set")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (vocab.dim,):
        raise ShapeError(f"query has shape {query.shape}, expected ({vocab.dim},)")
    _, idx = kernels.topk_sqdist(query[None, :], vocab.vectors[cand], cand, k, threads=threads)
    return idx[0]


def build_neighbor_sets(vocab, a_v, b_s, threads=1):
    if a_v < 0 or b_s < 0:
        raise ValueError("neighbor counts must be >= 0")
    src = vocab.source_ids
    n_src = src.size
    queries = vocab.vectors[src]
    open_ids = vocab.open_ids
    n_av = min(a_v, open_ids.size)
    n_bs = min(b_s, max(n_src - 1, 0))
    av = np.zeros((n_src, n_av), dtype=np.int64)
    bs = np.zeros((n_src, n_bs), dtype=np.int64)
    if n_src and n_av:
        _, av = kernels.topk_sqdist(queries, vocab.vectors[open_ids], open_ids, n_av,
                                    threads=threads)
    if n_src and n_bs:
        _, near = kernels.topk_sqdist(queries, vocab.vectors[src], src, n_bs + 1,
                                      threads=threads)
        for i, row in enumerate(near):
            bs[i] = row[row != src[i]][:n_bs]
    av = np.asarray(av, dtype=np.int64).reshape(n_src, n_av)
    return NeighborSets(av_ids=av, bs_ids=bs)
