"""Backend selection for the nearest-prototype scan.

The compiled extension is used when it imports; otherwise the numpy twin is
used. Set ``VOCABEMBED_BACKEND=python`` to force the fallback.
"""

import os
import warnings

import numpy as np

from . import _scan_py

DEFAULT_CHUNK = 65536

_backends = {"python": _scan_py.chunk_topk}
try:
    from . import _scan as _scan_c
except ImportError:  # pragma: no cover - depends on build
    _scan_c = None
else:
    _backends["compiled"] = _scan_c.chunk_topk

_requested = os.environ.get("VOCABEMBED_BACKEND", "").strip().lower()
if _requested and _requested not in _backends:
    warnings.warn(f"backend {_requested!r} unavailable; using default")
    _requested = ""
BACKEND = _requested or ("compiled" if "compiled" in _backends else "python")


def available_backends():
    return sorted(_backends)


def merge_chunks(dist, idx, k):
    """Merge per-chunk survivors into the global k best, ordered by (distance, id)."""
    nq = dist.shape[0]
    flat_d = dist.reshape(nq, -1)
    flat_i = idx.reshape(nq, -1)
    # padding (-1 id, inf distance) sorts last because distance is the primary key
    order = np.lexsort((flat_i, flat_d), axis=-1)[:, :k]
    return (np.take_along_axis(flat_d, order, axis=1),
            np.take_along_axis(flat_i, order, axis=1))


def topk_sqdist(queries, protos, ids, k, *, chunk_size=DEFAULT_CHUNK, threads=1, backend=None):
    """Exact k nearest prototypes of every query under squared Euclidean distance.

    Ties are broken by ascending ``ids``. The result does not depend on
    ``chunk_size``, ``threads`` or the backend.

    Returns
    -------
    dist : (n_queries, min(k, m)) float64
    idx : (n_queries, min(k, m)) int64, entries of ``ids``
    """
    queries = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    protos = np.ascontiguousarray(protos, dtype=np.float64)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    m = protos.shape[0]
    if m == 0:
        raise ValueError("empty candidate set")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(int(k), m)
    fn = _backends[backend or BACKEND]
    dist, idx = fn(queries, protos, ids, k, int(chunk_size), int(threads))
    if dist.shape[1] == 1:
        return dist[:, 0], idx[:, 0]
    return merge_chunks(dist, idx, k)
