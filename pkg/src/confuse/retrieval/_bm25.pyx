# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled BM25 score accumulation.

One call per query term: adds that term's contribution to the running
per-document score array. Mirrors confuse.retrieval.kernel.accumulate_py
exactly (same IEEE double operations in the same order).
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def accumulate(cnp.float64_t[::1] scores,
               cnp.int64_t[::1] ordinals,
               cnp.float64_t[::1] tfs,
               double idf,
               double k1,
               cnp.float64_t[::1] norms):
    cdef Py_ssize_t i, n = ordinals.shape[0]
    cdef cnp.int64_t o
    cdef double tf
    for i in range(n):
        o = ordinals[i]
        tf = tfs[i]
        scores[o] += idf * (tf * (k1 + 1.0)) / (tf + norms[o])
