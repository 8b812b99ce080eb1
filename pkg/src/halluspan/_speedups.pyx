# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Ratcliff/Obershelp matching kernels.

Mirrors ``halluspan._pykernels`` exactly, including tie-breaking: the longest
common block with the smallest start in ``a`` wins, then the smallest start
in ``b``.
"""
from cpython.mem cimport PyMem_Free, PyMem_Malloc
from libc.string cimport memset


cdef extern from "Python.h":
    Py_UCS4* PyUnicode_AsUCS4Copy(object u) except NULL


cdef Py_ssize_t _matched(const Py_UCS4* a, Py_ssize_t alo, Py_ssize_t ahi,
                         const Py_UCS4* b, Py_ssize_t blo, Py_ssize_t bhi,
                         int* prev, int* cur) noexcept nogil:
    cdef Py_ssize_t i, j, k, best = 0, besti = alo, bestj = blo
    cdef int* tmp
    if alo >= ahi or blo >= bhi:
        return 0
    memset(prev + blo, 0, (bhi - blo + 1) * sizeof(int))
    for i in range(alo, ahi):
        cur[blo] = 0
        for j in range(blo, bhi):
            if a[i] == b[j]:
                k = prev[j] + 1
                cur[j + 1] = <int>k
                if k > best:
                    best = k
                    besti = i - k + 1
                    bestj = j - k + 1
            else:
                cur[j + 1] = 0
        tmp = prev
        prev = cur
        cur = tmp
    if best == 0:
        return 0
    return (best
            + _matched(a, alo, besti, b, blo, bestj, prev, cur)
            + _matched(a, besti + best, ahi, b, bestj + best, bhi, prev, cur))


cdef Py_ssize_t _matched_pair(const Py_UCS4* a, Py_ssize_t la,
                              const Py_UCS4* b, Py_ssize_t lb) except -1:
    cdef int* rows
    cdef Py_ssize_t total
    if la == 0 or lb == 0:
        return 0
    rows = <int*>PyMem_Malloc(2 * (lb + 1) * sizeof(int))
    if rows == NULL:
        raise MemoryError()
    with nogil:
        total = _matched(a, 0, la, b, 0, lb, rows, rows + lb + 1)
    PyMem_Free(rows)
    return total


def matched_size(str a, str b):
    """Total length of the Ratcliff/Obershelp matching blocks of ``a`` and ``b``."""
    cdef Py_UCS4* ab = PyUnicode_AsUCS4Copy(a)
    cdef Py_UCS4* bb
    try:
        bb = PyUnicode_AsUCS4Copy(b)
        try:
            return _matched_pair(ab, len(a), bb, len(b))
        finally:
            PyMem_Free(bb)
    finally:
        PyMem_Free(ab)


def matched_sizes(str a, list bs):
    """``matched_size(a, b)`` for every ``b`` in ``bs``."""
    cdef Py_UCS4* ab = PyUnicode_AsUCS4Copy(a)
    cdef Py_UCS4* bb
    cdef Py_ssize_t la = len(a)
    cdef list out = []
    cdef str b
    try:
        for b in bs:
            bb = PyUnicode_AsUCS4Copy(b)
            try:
                out.append(_matched_pair(ab, la, bb, len(b)))
            finally:
                PyMem_Free(bb)
    finally:
        PyMem_Free(ab)
    return out


def ratio(str a, str b):
    cdef Py_ssize_t total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * matched_size(a, b) / total


def ratios(str a, list bs):
    """Ratcliff/Obershelp ratio of ``a`` against each string in ``bs``."""
    cdef list sizes = matched_sizes(a, bs)
    cdef Py_ssize_t la = len(a), total, idx
    cdef list out = []
    for idx in range(len(bs)):
        total = la + len(<str>bs[idx])
        if total == 0:
            out.append(1.0)
        else:
            out.append(2.0 * <Py_ssize_t>sizes[idx] / total)
    return out
