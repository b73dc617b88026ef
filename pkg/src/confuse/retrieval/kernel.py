"""BM25 scoring kernel selection.

The compiled Cython kernel is preferred; the pure-Python version is the
fallback when the extension was not built. Both implement the identical
per-term score accumulation, so search results do not depend on which one
is active. ``benchmarks/bench_bm25.py`` compares the two.
"""

from __future__ import annotations

import numpy as np


def accumulate_py(scores: np.ndarray, ordinals: np.ndarray, tfs: np.ndarray,
                  idf: float, k1: float, norms: np.ndarray) -> None:
    """Add one query term's BM25 contribution to the score array."""
    for i in range(ordinals.shape[0]):
        o = ordinals[i]
        tf = tfs[i]
        scores[o] += idf * (tf * (k1 + 1.0)) / (tf + norms[o])


try:
    from confuse.retrieval._bm25 import accumulate as accumulate_c
    HAVE_COMPILED_KERNEL = True
except ImportError:
    accumulate_c = None
    HAVE_COMPILED_KERNEL = False

accumulate = accumulate_c if HAVE_COMPILED_KERNEL else accumulate_py
