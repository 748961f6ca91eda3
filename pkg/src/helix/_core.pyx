# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Semantics mirror ``helix._fallback`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()

NO_SHIFT_LIMIT = -(1 << 30)


cdef long[::1] _as_long(seq):
    return np.ascontiguousarray(np.asarray(seq, dtype=np.int_).reshape(-1))


def edit_distance(a, b):
    cdef long[::1] x = _as_long(a)
    cdef long[::1] y = _as_long(b)
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], i, j
    cdef long[::1] tmp
    if n < m:
        tmp = x; x = y; y = tmp
        n, m = m, n
    cdef long[::1] prev = np.arange(m + 1, dtype=np.int_)
    cdef long[::1] cur = np.empty(m + 1, dtype=np.int_)
    cdef long cost, best, v
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            cost = 0 if x[i - 1] == y[j - 1] else 1
            best = prev[j] + 1
            v = cur[j - 1] + 1
            if v < best:
                best = v
            v = prev[j - 1] + cost
            if v < best:
                best = v
            cur[j] = best
        prev, cur = cur, prev
    return int(prev[m])


def longest_match(a, b, long min_shift=NO_SHIFT_LIMIT):
    cdef long[::1] x = _as_long(a)
    cdef long[::1] y = _as_long(b)
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], i, j
    cdef long[::1] prev = np.zeros(m + 1, dtype=np.int_)
    cdef long[::1] cur = np.zeros(m + 1, dtype=np.int_)
    cdef long run, pa, pb, best_len = 0, best_a = 0, best_b = 0
    for i in range(1, n + 1):
        cur[0] = 0
        for j in range(1, m + 1):
            if x[i - 1] == y[j - 1] and (i - j) >= min_shift:
                run = prev[j - 1] + 1
                cur[j] = run
                pa = i - run
                pb = j - run
                if run > best_len or (run == best_len and (pa < best_a or (pa == best_a and pb < best_b))):
                    best_len = run
                    best_a = pa
                    best_b = pb
            else:
                cur[j] = 0
        prev, cur = cur, prev
    return (int(best_len), int(best_a), int(best_b))


def ctc_log_prob(probs, labels, long blank):
    cdef double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef long[::1] lab = _as_long(labels)
    cdef Py_ssize_t T = p.shape[0], L = lab.shape[0], S = 2 * L + 1, s, t, k
    if T == 0:
        return 0.0 if L == 0 else -INFINITY
    cdef long[::1] ext = np.full(S, blank, dtype=np.int_)
    for k in range(L):
        ext[2 * k + 1] = lab[k]
    cdef double[::1] alpha = np.zeros(S, dtype=np.float64)
    cdef double[::1] new = np.zeros(S, dtype=np.float64)
    cdef double c = 0.0, acc, log_scale = 0.0, tail
    alpha[0] = p[0, blank]
    if S > 1:
        alpha[1] = p[0, ext[1]]
    for s in range(S):
        c += alpha[s]
    if c <= 0.0:
        return -INFINITY
    for s in range(S):
        alpha[s] /= c
    log_scale += log(c)
    for t in range(1, T):
        c = 0.0
        for s in range(S):
            acc = alpha[s]
            if s >= 1:
                acc += alpha[s - 1]
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                acc += alpha[s - 2]
            new[s] = acc * p[t, ext[s]]
            c += new[s]
        if c <= 0.0:
            return -INFINITY
        for s in range(S):
            alpha[s] = new[s] / c
        log_scale += log(c)
    tail = alpha[S - 1]
    if S >= 2:
        tail += alpha[S - 2]
    if tail <= 0.0:
        return -INFINITY
    return log_scale + log(tail)


def bitplane_mvm(x_planes, w_planes):
    cdef cnp.uint8_t[:, :, ::1] x = np.ascontiguousarray(x_planes, dtype=np.uint8)
    cdef cnp.uint8_t[:, :, :, ::1] w = np.ascontiguousarray(w_planes, dtype=np.uint8)
    cdef Py_ssize_t B = x.shape[0], P = x.shape[1], R = x.shape[2]
    cdef Py_ssize_t S = w.shape[1], C = w.shape[3]
    if w.shape[0] != B or w.shape[2] != R:
        raise ValueError("bit plane shapes do not line up")
    out_arr = np.zeros((B, P, S, C), dtype=np.int64)
    cdef cnp.int64_t[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, pl, sl, r, col
    with nogil:
        for b in range(B):
            for pl in range(P):
                for r in range(R):
                    if x[b, pl, r] == 0:
                        continue
                    for sl in range(S):
                        for col in range(C):
                            out[b, pl, sl, col] += w[b, sl, r, col]
    return out_arr
