"""Greedy placement of equal-length source/destination block pairs.

Candidates are processed in order. A candidate is kept when its two blocks
are disjoint from each other and from every block kept so far. Two blocks of
length L starting at x and y overlap iff |x - y| < L.
"""

import bisect

import numpy as np
from numba import njit


def greedy_reference(src, dst, length):
    """Pure-Python placement over arbitrary (big) integers. Returns a list of bools."""
    placed: list[int] = []
    keep = []
    for s, d in zip(src, dst):
        ok = abs(s - d) >= length and not _collides(placed, s, length) \
            and not _collides(placed, d, length)
        if ok:
            bisect.insort(placed, s)
            bisect.insort(placed, d)
        keep.append(ok)
    return keep


def _collides(placed, x, length):
    i = bisect.bisect_left(placed, x)
    if i < len(placed) and placed[i] - x < length:
        return True
    return i > 0 and x - placed[i - 1] < length


@njit(cache=True)
def _near(arr, k, x, length):
    lo, hi = 0, k
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    if lo < k and arr[lo] - x < length:
        return True
    return lo > 0 and x - arr[lo - 1] < length


@njit(cache=True)
def greedy_monotone(src, dst, length):
    """Same placement for strictly increasing int64 ``src`` and ``dst``.

    Kept sources (and kept destinations) then form increasing lists, so a new
    block only has to be tested against the last block of its own kind and,
    by binary search, against the kept blocks of the other kind.
    """
    m = src.shape[0]
    keep = np.zeros(m, np.bool_)
    ks = np.empty(m, np.int64)
    kd = np.empty(m, np.int64)
    k = 0
    for i in range(m):
        s = src[i]
        d = dst[i]
        if abs(s - d) < length:
            continue
        if k > 0:
            if s - ks[k - 1] < length or d - kd[k - 1] < length:
                continue
            if _near(kd, k, s, length) or _near(ks, k, d, length):
                continue
        ks[k] = s
        kd[k] = d
        k += 1
        keep[i] = True
    return keep


def place_blocks(src, dst, length):
    """Dispatch to the compiled path when inputs are int64 arrays increasing in order."""
    if isinstance(src, np.ndarray) and isinstance(dst, np.ndarray) and len(src) > 1 \
            and bool(np.all(np.diff(src) > 0)) and bool(np.all(np.diff(dst) > 0)) \
            and length < 2**62:
        return greedy_monotone(src, dst, np.int64(length))
    return np.asarray(greedy_reference([int(x) for x in src], [int(x) for x in dst], length),
                      dtype=bool)
