"""Nearest-prototype recognition over the four label settings."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import project
from .errors import ShapeError

SETTINGS = ("supervised", "zsl", "gzsl", "openset")


@dataclass(frozen=True)
class CandidateSet:
    setting: str
    ids: np.ndarray


def candidate_set(vocab, setting):
    """supervised: source classes; zsl: target classes; gzsl: both; openset: every row."""
    if setting == "supervised":
        ids = vocab.source_ids
    elif setting == "zsl":
        ids = vocab.target_ids
    elif setting == "gzsl":
        ids = np.union1d(vocab.source_ids, vocab.target_ids)
    elif setting == "openset":
        ids = np.arange(len(vocab))
    else:
        raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")
    ids = np.sort(np.asarray(ids, dtype=np.int64))
    ids.setflags(write=False)
    return CandidateSet(setting, ids)


def rocchio_prototype(vectors, normalize=False):
    """Mean of the given prototype vectors, optionally rescaled to unit norm."""
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("need a nonempty list of vectors")
    mean = V.mean(axis=0)
    if normalize:
        norm = np.linalg.norm(mean)
        if norm > 0:
            mean = mean / norm
    return mean


def effective_prototypes(vocab, ids):
    """Prototype rows used for ranking: the synset average where a synset is
    defined, the stored vector otherwise."""
    ids = np.asarray(ids, dtype=np.int64)
    if not vocab.synsets:
        return vocab.vectors[ids]
    out = np.array(vocab.vectors[ids])
    for row, i in enumerate(ids):
        label = vocab.labels[i]
        if label in vocab.synsets:
            members = [vocab.index(s) for s in vocab.synset(label) if s in vocab]
            out[row] = rocchio_prototype(vocab.vectors[members], vocab.normalized)
    return out


@dataclass(frozen=True)
class Prediction:
    """Ranked vocabulary rows, closest first, with squared distances."""

    ids: np.ndarray
    distances: np.ndarray

    @property
    def top1(self):
        return int(self.ids[0])

    def __len__(self):
        return len(self.ids)


def rank(W, features, vocab, candidates, k, *, threads=1, chunk_size=kernels.DEFAULT_CHUNK,
         backend=None):
    """Top-k (distance, id) arrays for a batch of feature rows."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {X.shape}")
    ids = candidates.ids if isinstance(candidates, CandidateSet) else np.asarray(candidates)
    ids = np.unique(np.asarray(ids, dtype=np.int64))
    if ids.size == 0:
        raise ValueError("empty candidate set")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(int(k), ids.size)
    if X.shape[0] == 0:
        return np.zeros((0, k)), np.zeros((0, k), dtype=np.int64)
    G = project(W, X)
    dist, idx = kernels.topk_sqdist(G, effective_prototypes(vocab, ids), ids, k,
                                    chunk_size=chunk_size, threads=threads, backend=backend)
    return dist, idx


def classify(W, x, vocab, candidates, k=1, **kw):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("classify takes one feature vector; use batch_classify")
    dist, idx = rank(W, x[None, :], vocab, candidates, k, **kw)
    return Prediction(idx[0], dist[0])


def batch_classify(W, features, vocab, candidates, k=1, **kw):
    dist, idx = rank(W, features, vocab, candidates, k, **kw)
    return [Prediction(i, d) for i, d in zip(idx, dist)]


def format_predictions(predictions, vocab, indices=None):
    """One line per instance: index, then ``label:distance`` pairs (6 decimals).

    ``indices`` overrides the running line number, e.g. with the rows of the
    original test file.
    """
    lines = []
    indices = range(len(predictions)) if indices is None else indices
    for n, pred in zip(indices, predictions):
        cells = [f"{vocab.labels[i]}:{d:.6f}" for i, d in zip(pred.ids, pred.distances)]
        lines.append("\t".join([str(n)] + cells))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_predictions(text):
    """Inverse of format_predictions: list of (index, [(label, distance), ...])."""
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        head, *cells = line.split("\t")
        ranked = []
        for cell in cells:
            label, _, dist = cell.rpartition(":")
            ranked.append((label, float(dist)))
        out.append((int(head), ranked))
    return out
