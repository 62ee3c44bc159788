"""Pure-numpy twin of the compiled scan.

Distances are accumulated one coordinate at a time, in ascending coordinate
order, so every value is bit-identical to the compiled loop.
"""

import numpy as np

_QUERY_BLOCK = 64


def _block_sqdist(queries, protos_t):
    acc = np.zeros((queries.shape[0], protos_t.shape[1]))
    for j in range(protos_t.shape[0]):
        diff = protos_t[j][None, :] - queries[:, j][:, None]
        acc += diff * diff
    return acc


def _select(dist, ids, k):
    """k smallest (distance, id) pairs of every row, ascending."""
    n = dist.shape[1]
    out_d = np.full((dist.shape[0], k), np.inf)
    out_i = np.full((dist.shape[0], k), -1, dtype=np.int64)
    kk = min(k, n)
    for r in range(dist.shape[0]):
        row = dist[r]
        if kk < n:
            cut = np.partition(row, kk - 1)[kk - 1]
            keep = np.flatnonzero(row <= cut)
        else:
            keep = np.arange(n)
        order = np.lexsort((ids[keep], row[keep]))[:kk]
        out_d[r, :kk] = row[keep[order]]
        out_i[r, :kk] = ids[keep[order]]
    return out_d, out_i


def chunk_topk(queries, protos, ids, k, chunk_size, num_threads=1):
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    protos = np.ascontiguousarray(protos, dtype=np.float64)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if protos.shape[1] != queries.shape[1]:
        raise ValueError("dimension mismatch between queries and prototypes")
    if ids.shape[0] != protos.shape[0]:
        raise ValueError("ids length must equal number of prototypes")
    if k < 1 or chunk_size < 1:
        raise ValueError("k and chunk_size must be positive")
    nq, m = queries.shape[0], protos.shape[0]
    n_chunks = -(-m // chunk_size)
    dist = np.full((nq, n_chunks, k), np.inf)
    idx = np.full((nq, n_chunks, k), -1, dtype=np.int64)
    for c in range(n_chunks):
        start, stop = c * chunk_size, min((c + 1) * chunk_size, m)
        protos_t = np.ascontiguousarray(protos[start:stop].T)
        cids = ids[start:stop]
        for q0 in range(0, nq, _QUERY_BLOCK):
            q1 = min(q0 + _QUERY_BLOCK, nq)
            d_blk = _block_sqdist(queries[q0:q1], protos_t)
            dist[q0:q1, c], idx[q0:q1, c] = _select(d_blk, cids, k)
    return dist, idx
