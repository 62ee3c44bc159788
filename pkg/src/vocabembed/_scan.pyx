# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled exact top-k squared-distance scan.

Work is split into (query, chunk) tasks. Each task keeps a bounded max-heap
ordered by (distance, id) and writes its sorted survivors into a slot of the
output buffer; merging the per-chunk slots is done by the caller.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport INFINITY

cnp.import_array()


cdef inline bint _worse(double da, long long ia, double db, long long ib) noexcept nogil:
    # (da, ia) ranks after (db, ib)
    return da > db or (da == db and ia > ib)


cdef void _sift_down(double* hd, long long* hi, Py_ssize_t n, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t child, right
    cdef double td
    cdef long long ti
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        right = child + 1
        if right < n and _worse(hd[right], hi[right], hd[child], hi[child]):
            child = right
        if not _worse(hd[child], hi[child], hd[pos], hi[pos]):
            break
        td = hd[pos]; hd[pos] = hd[child]; hd[child] = td
        ti = hi[pos]; hi[pos] = hi[child]; hi[child] = ti
        pos = child


cdef void _sift_up(double* hd, long long* hi, Py_ssize_t pos) noexcept nogil:
    cdef Py_ssize_t parent
    cdef double td
    cdef long long ti
    while pos > 0:
        parent = (pos - 1) // 2
        if not _worse(hd[pos], hi[pos], hd[parent], hi[parent]):
            break
        td = hd[pos]; hd[pos] = hd[parent]; hd[parent] = td
        ti = hi[pos]; hi[pos] = hi[parent]; hi[parent] = ti
        pos = parent


cdef void _scan_task(const double[:, ::1] queries, const double[:, ::1] protos,
                     const long long[::1] ids, Py_ssize_t q, Py_ssize_t start,
                     Py_ssize_t stop, Py_ssize_t k, double* hd,
                     long long* hi) noexcept nogil:
    cdef Py_ssize_t r, j, n = 0, d = queries.shape[1]
    cdef double s, diff, td
    cdef long long ti
    for r in range(start, stop):
        s = 0.0
        for j in range(d):
            diff = protos[r, j] - queries[q, j]
            s = s + diff * diff
        if n < k:
            hd[n] = s
            hi[n] = ids[r]
            _sift_up(hd, hi, n)
            n += 1
        elif _worse(hd[0], hi[0], s, ids[r]):
            hd[0] = s
            hi[0] = ids[r]
            _sift_down(hd, hi, n, 0)
    # heap-sort in place: ascending (distance, id)
    while n > 1:
        n -= 1
        td = hd[0]; hd[0] = hd[n]; hd[n] = td
        ti = hi[0]; hi[0] = hi[n]; hi[n] = ti
        _sift_down(hd, hi, n, 0)


def chunk_topk(const double[:, ::1] queries, const double[:, ::1] protos,
               const long long[::1] ids, Py_ssize_t k, Py_ssize_t chunk_size,
               int num_threads=1):
    """Per-chunk k smallest squared distances for every query.

    Returns ``(dist, idx)`` of shape ``(n_queries, n_chunks, k)``; slots
    beyond a short chunk's size hold ``inf`` and ``-1``.
    """
    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t m = protos.shape[0]
    if protos.shape[1] != queries.shape[1]:
        raise ValueError("dimension mismatch between queries and prototypes")
    if ids.shape[0] != m:
        raise ValueError("ids length must equal number of prototypes")
    if k < 1 or chunk_size < 1:
        raise ValueError("k and chunk_size must be positive")
    cdef Py_ssize_t n_chunks = (m + chunk_size - 1) // chunk_size
    dist = np.full((nq, n_chunks, k), np.inf, dtype=np.float64)
    idx = np.full((nq, n_chunks, k), -1, dtype=np.int64)
    cdef double[:, :, ::1] dv = dist
    cdef long long[:, :, ::1] iv = idx
    cdef Py_ssize_t t, q, c, start, stop
    cdef Py_ssize_t n_tasks = nq * n_chunks
    if n_tasks == 0:
        return dist, idx
    for t in prange(n_tasks, nogil=True, schedule="static", num_threads=max(num_threads, 1)):
        q = t // n_chunks
        c = t % n_chunks
        start = c * chunk_size
        stop = min(start + chunk_size, m)
        _scan_task(queries, protos, ids, q, start, stop, k, &dv[q, c, 0], &iv[q, c, 0])
    return dist, idx
