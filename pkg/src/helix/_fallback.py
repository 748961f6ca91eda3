"""Pure-Python/numpy versions of the hot kernels in ``_core.pyx``.

Both modules expose the same functions with the same semantics; ``helix.kernels``
picks one at import time.
"""

from __future__ import annotations

import math

import numpy as np

NO_SHIFT_LIMIT = -(1 << 30)


def edit_distance(a, b) -> int:
    n, m = len(a), len(b)
    if n < m:
        a, b, n, m = b, a, m, n
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[m]


def longest_match(a, b, min_shift: int = NO_SHIFT_LIMIT) -> tuple[int, int, int]:
    """Longest common substring as (length, pos_a, pos_b).

    Only diagonals with ``pos_a - pos_b >= min_shift`` are considered. Ties go
    to the smallest ``(pos_a, pos_b)``.
    """
    n, m = len(a), len(b)
    best = (0, 0, 0)
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1] and (i - j) >= min_shift:
                run = prev[j - 1] + 1
                cur[j] = run
                pa, pb = i - run, j - run
                if run > best[0] or (run == best[0] and (pa, pb) < (best[1], best[2])):
                    best = (run, pa, pb)
        prev = cur
    return best


def ctc_log_prob(probs: np.ndarray, labels, blank: int) -> float:
    """Natural log of the summed probability of every CTC alignment of ``labels``.

    Scaled forward recursion over the blank-interleaved label sequence.
    """
    T = probs.shape[0]
    labels = list(labels)
    S = 2 * len(labels) + 1
    ext = [blank] * S
    for k, lab in enumerate(labels):
        ext[2 * k + 1] = lab
    if T == 0:
        return 0.0 if not labels else -math.inf
    alpha = [0.0] * S
    alpha[0] = float(probs[0, blank])
    if S > 1:
        alpha[1] = float(probs[0, ext[1]])
    log_scale = 0.0
    c = sum(alpha)
    if c <= 0.0:
        return -math.inf
    alpha = [v / c for v in alpha]
    log_scale += math.log(c)
    for t in range(1, T):
        row = probs[t]
        new = [0.0] * S
        for s in range(S):
            acc = alpha[s]
            if s >= 1:
                acc += alpha[s - 1]
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                acc += alpha[s - 2]
            new[s] = acc * float(row[ext[s]])
        c = sum(new)
        if c <= 0.0:
            return -math.inf
        alpha = [v / c for v in new]
        log_scale += math.log(c)
    tail = alpha[S - 1] + (alpha[S - 2] if S >= 2 else 0.0)
    if tail <= 0.0:
        return -math.inf
    return log_scale + math.log(tail)


def bitplane_mvm(x_planes: np.ndarray, w_planes: np.ndarray) -> np.ndarray:
    """Analog column sums for every (input bit plane, weight slice) pair.

    x_planes: (B, P, R) 0/1 inputs; w_planes: (B, S, R, C) cell levels.
    Returns int64 (B, P, S, C) with out[b,p,s,c] = sum_r x[b,p,r] * w[b,s,r,c].
    """
    x = np.asarray(x_planes, dtype=np.float64)
    w = np.asarray(w_planes, dtype=np.float64)
    # float64 holds these integer sums exactly (far below 2**53)
    out = np.matmul(x[:, None, :, :], w)  # (B, S, P, C)
    return np.rint(out).astype(np.int64).transpose(0, 2, 1, 3)
