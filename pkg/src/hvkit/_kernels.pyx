# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: dimension-sweep hypervolume, exclusive contributions,
non-dominated ranking and Monte-Carlo hit counting.

All routines take points as a C-contiguous ``(N, M)`` float64 array (one
solution per row) in the maximization convention with the reference point at
the origin.  Callers are responsible for clipping to non-negative values.
"""

import numpy as np

from libc.stdlib cimport malloc, free
from libc.string cimport memcpy


cdef enum:
    MAX_DIM = 64


cdef void _sort_rows(double* pts, Py_ssize_t n, Py_ssize_t stride, Py_ssize_t key,
                     double* tmp) noexcept nogil:
    # insertion sort, ascending on column ``key``; stable
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(1, n):
        v = pts[i * stride + key]
        if pts[(i - 1) * stride + key] <= v:
            continue
        memcpy(tmp, pts + i * stride, stride * sizeof(double))
        j = i - 1
        while j >= 0 and pts[j * stride + key] > v:
            memcpy(pts + (j + 1) * stride, pts + j * stride, stride * sizeof(double))
            j -= 1
        memcpy(pts + (j + 1) * stride, tmp, stride * sizeof(double))


cdef double _hv2(double* pts, Py_ssize_t n, Py_ssize_t stride, double* tmp) noexcept nogil:
    cdef Py_ssize_t i
    cdef double vol = 0.0, ymax = 0.0, y
    _sort_rows(pts, n, stride, 0, tmp)
    # sweep from largest first coordinate down
    for i in range(n - 1, -1, -1):
        y = pts[i * stride + 1]
        if y > ymax:
            vol += pts[i * stride] * (y - ymax)
            ymax = y
    return vol


cdef Py_ssize_t _limit(double* src, Py_ssize_t n, Py_ssize_t stride, Py_ssize_t skip,
                       double* p, Py_ssize_t e, double* out) noexcept nogil:
    """Write the non-dominated subset of {min(p, q)} (first ``e`` coords) to
    ``out`` (stride ``e``), skipping source row ``skip``.  Returns its size."""
    cdef Py_ssize_t i, j, k, m = 0
    cdef double cand[MAX_DIM]
    cdef double* q
    cdef double* c
    cdef bint dominated, ge, le
    for i in range(n):
        if i == skip:
            continue
        q = src + i * stride
        for j in range(e):
            cand[j] = p[j] if p[j] < q[j] else q[j]
        dominated = False
        k = 0
        while k < m:
            c = out + k * e
            ge = True
            le = True
            for j in range(e):
                if c[j] < cand[j]:
                    ge = False
                elif c[j] > cand[j]:
                    le = False
            if ge:
                dominated = True
                break
            if le:
                m -= 1
                if k != m:
                    memcpy(c, out + m * e, e * sizeof(double))
                continue
            k += 1
        if not dominated:
            memcpy(out + m * e, cand, e * sizeof(double))
            m += 1
    return m


cdef double _hv(double* pts, Py_ssize_t n, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, m, e
    cdef double vol = 0.0, incl, best
    cdef double* p
    cdef double* buf
    cdef double* tmp
    if n == 0:
        return 0.0
    if d == 1:
        best = pts[0]
        for i in range(1, n):
            if pts[i] > best:
                best = pts[i]
        return best
    if n == 1:
        incl = 1.0
        for j in range(d):
            incl *= pts[j]
        return incl
    tmp = <double*> malloc(d * sizeof(double))
    if d == 2:
        vol = _hv2(pts, n, 2, tmp)
        free(tmp)
        return vol
    e = d - 1
    _sort_rows(pts, n, d, e, tmp)
    free(tmp)
    buf = <double*> malloc(n * e * sizeof(double))
    # later rows have a larger last objective, so each slice is a (d-1)-dim
    # exclusive volume scaled by the row's last coordinate
    for i in range(n):
        p = pts + i * d
        if p[e] <= 0.0:
            continue
        incl = 1.0
        for j in range(e):
            incl *= p[j]
        if incl <= 0.0:
            continue
        m = _limit(pts + (i + 1) * d, n - i - 1, d, -1, p, e, buf)
        vol += p[e] * (incl - _hv(buf, m, e))
    free(buf)
    return vol


def hv_sweep(double[:, ::1] points):
    """Exact hypervolume of ``points`` (N, M) w.r.t. the origin."""
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1]
    cdef double vol
    cdef double* work
    if n == 0 or d == 0:
        return 0.0
    work = <double*> malloc(n * d * sizeof(double))
    memcpy(work, &points[0, 0], n * d * sizeof(double))
    with nogil:
        vol = _hv(work, n, d)
    free(work)
    return vol


def contributions(double[:, ::1] points):
    """Exclusive hypervolume of every row w.r.t. all other rows."""
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], i, j, m
    cdef double incl
    cdef double* src
    cdef double* buf
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] res = out
    if n == 0:
        return out
    src = &points[0, 0]
    buf = <double*> malloc(n * d * sizeof(double))
    with nogil:
        for i in range(n):
            incl = 1.0
            for j in range(d):
                incl *= src[i * d + j]
            if incl <= 0.0:
                res[i] = 0.0
                continue
            m = _limit(src, n, d, i, src + i * d, d, buf)
            res[i] = incl - _hv(buf, m, d)
            if res[i] < 0.0:
                res[i] = 0.0
    free(buf)
    return out


cdef inline bint _dominates(double* q, double* p, Py_ssize_t d) noexcept nogil:
    # q dominates p (maximization); assumes q precedes p lexicographically
    cdef Py_ssize_t k
    cdef bint strict = False
    for k in range(d):
        if q[k] < p[k]:
            return False
        if q[k] > p[k]:
            strict = True
    return strict


def nd_ranks(double[:, ::1] points):
    """Front index of every row (0 = non-dominated), maximization.

    Efficient non-dominated sort with binary search over fronts: rows are
    visited in descending lexicographic order, so only earlier rows can
    dominate the current one.
    """
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1]
    ranks_arr = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return ranks_arr
    keys = tuple(-np.asarray(points)[:, k] for k in range(d - 1, -1, -1))
    order_arr = np.lexsort(keys).astype(np.intp)
    cdef Py_ssize_t[::1] order = order_arr
    cdef long long[::1] ranks = ranks_arr
    cdef double* P = &points[0, 0]
    cdef Py_ssize_t* head = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* link = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t nfronts = 0, t, i, lo, hi, mid, q
    cdef bint hit
    with nogil:
        for t in range(n):
            i = order[t]
            lo = 0
            hi = nfronts
            # first front without a dominator of row i
            while lo < hi:
                mid = (lo + hi) // 2
                hit = False
                q = head[mid]
                while q >= 0:
                    if _dominates(P + q * d, P + i * d, d):
                        hit = True
                        break
                    q = link[q]
                if hit:
                    lo = mid + 1
                else:
                    hi = mid
            if lo == nfronts:
                head[nfronts] = -1
                nfronts += 1
            link[i] = head[lo]
            head[lo] = i
            ranks[i] = lo
    free(head)
    free(link)
    return ranks_arr


def mc_count(double[:, ::1] points, double[:, ::1] samples):
    """Number of sample rows weakly dominated by at least one point row."""
    cdef Py_ssize_t n = points.shape[0], d = points.shape[1], s = samples.shape[0]
    cdef Py_ssize_t i, j, k
    cdef long long hits = 0
    cdef bint inside
    with nogil:
        for i in range(s):
            for j in range(n):
                inside = True
                for k in range(d):
                    if samples[i, k] > points[j, k]:
                        inside = False
                        break
                if inside:
                    hits += 1
                    break
    return hits
