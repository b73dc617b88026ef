"""Compare the compiled BM25 accumulation kernel against the pure-Python
fallback on synthetic postings lists.

Usage: python3 benchmarks/bench_bm25.py [--docs N] [--terms T] [--repeats R]
"""

import argparse
import time

import numpy as np

from confuse.retrieval import BM25_K1
from confuse.retrieval import kernel


def make_postings(rng, n_docs, n_terms):
    per_term = []
    for _ in range(n_terms):
        n_hits = rng.integers(1, max(2, n_docs // 2))
        ordinals = np.sort(rng.choice(n_docs, size=n_hits, replace=False))
        tfs = rng.integers(1, 12, size=n_hits).astype(np.float64)
        idf = float(rng.uniform(0.1, 4.0))
        per_term.append((ordinals.astype(np.int64), tfs, idf))
    norms = rng.uniform(0.4, 2.5, size=n_docs)
    return per_term, norms


def run(accumulate, per_term, norms, n_docs, repeats):
    best = float("inf")
    scores = None
    for _ in range(repeats):
        scores = np.zeros(n_docs)
        start = time.perf_counter()
        for ordinals, tfs, idf in per_term:
            accumulate(scores, ordinals, tfs, idf, BM25_K1, norms)
        best = min(best, time.perf_counter() - start)
    return best, scores


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=50_000)
    parser.add_argument("--terms", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    per_term, norms = make_postings(rng, args.docs, args.terms)

    py_time, py_scores = run(kernel.accumulate_py, per_term, norms,
                             args.docs, args.repeats)
    print(f"pure python : {py_time * 1e3:9.3f} ms "
          f"({args.terms} terms x {args.docs} docs)")

    if not kernel.HAVE_COMPILED_KERNEL:
        print("compiled kernel not available; install with the C extension "
              "built to compare")
        return

    c_time, c_scores = run(kernel.accumulate_c, per_term, norms,
                           args.docs, args.repeats)
    print(f"compiled    : {c_time * 1e3:9.3f} ms")
    print(f"speedup     : {py_time / c_time:9.2f}x")
    identical = np.array_equal(py_scores, c_scores)
    print(f"bit-identical scores: {identical}")
    if not identical:
        raise SystemExit("kernel mismatch")


if __name__ == "__main__":
    main()
