"""Compare the compiled and pure-Python string-matching kernels.

Runs the workload the matcher produces: one answer window against every
window of 20 sampled answers, repeated for each answer window.

    python benchmarks/bench_kernels.py [--repeat 5] [--samples 20]
"""
import argparse
import random
import statistics
import time

from halluspan import kernels
from halluspan.segmenter import enumerate_windows, tokenize

WORDS = (
    "the bridge was designed by engineer john bradfield and opened to traffic in spring "
    "of 1932 after years work harbour sydney steel arch city council railway"
).split()


def make_text(rng, n_words):
    return " ".join(rng.choice(WORDS) for _ in range(n_words))


def workload(n_samples, seed=0, w=5, t=3):
    rng = random.Random(seed)
    answer = make_text(rng, 40)
    queries = [win.text.casefold() for win in enumerate_windows(tokenize(answer, "en"), w, t)]
    pool = []
    for _ in range(n_samples):
        pool += [win.text.casefold() for win in enumerate_windows(tokenize(make_text(rng, 40), "en"), w, t)]
    return queries, pool


def time_backend(mod, queries, pool, repeat):
    runs = []
    for _ in range(repeat):
        start = time.perf_counter()
        for q in queries:
            mod.ratios(q, pool)
        runs.append(time.perf_counter() - start)
    return runs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--samples", type=int, default=20)
    args = ap.parse_args(argv)

    queries, pool = workload(args.samples)
    pairs = len(queries) * len(pool)
    backends = kernels.available_backends()
    reference = None
    results = {}
    for name, mod in sorted(backends.items()):
        out = [mod.ratios(q, pool) for q in queries]
        if reference is None:
            reference = out
        elif out != reference:
            raise SystemExit(f"backend {name} disagrees with the others")
        results[name] = statistics.median(time_backend(mod, queries, pool, args.repeat))

    print(f"{pairs} window pairs per run, median of {args.repeat} runs (default backend: {kernels.BACKEND})")
    for name, secs in sorted(results.items()):
        print(f"  {name:<8} {secs * 1e3:9.1f} ms  {secs / pairs * 1e6:7.2f} us/pair")
    if "cython" in results and "python" in results:
        print(f"  speedup  {results['python'] / results['cython']:.1f}x")


if __name__ == "__main__":
    main()
