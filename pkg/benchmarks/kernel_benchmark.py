"""Compare the compiled metrics kernels against the pure-Python fallback.

Times the LCS and tree-edit-distance kernels on identical random workloads,
verifies that both backends return identical values on every instance, and
prints per-size timings with the speedup factor.

Run from the repository root after installing the package:

    python benchmarks/kernel_benchmark.py
    python benchmarks/kernel_benchmark.py --trials 50 --seed 1
"""

import argparse
import sys
import time

import numpy as np

from textbridge.metrics import ConstituencyTree, _kernels_py, _postorder

try:
    from textbridge.metrics import _kernels_c
except ImportError:
    _kernels_c = None

LCS_LENGTHS = (64, 256, 1024)
TREE_SIZES = (16, 64, 256)
TREE_LABELS = ("S", "NP", "VP", "DT", "NN", "JJ")


def random_sequence(rng, length, alphabet=16):
    return [int(x) for x in rng.integers(0, alphabet, size=length)]


def random_tree(rng, nodes):
    """Uniform random recursive attachment, random labels."""
    children = [[] for _ in range(nodes)]
    for node in range(1, nodes):
        children[int(rng.integers(0, node))].append(node)

    def build(idx):
        label = TREE_LABELS[int(rng.integers(len(TREE_LABELS)))]
        return ConstituencyTree(label, tuple(build(c) for c in children[idx]))

    return build(0)


def time_calls(fn, calls):
    start = time.perf_counter()
    results = [fn(*args) for args in calls]
    return time.perf_counter() - start, results


def bench_lcs(rng, trials):
    rows = []
    for length in LCS_LENGTHS:
        pairs = [
            (random_sequence(rng, length), random_sequence(rng, length))
            for _ in range(trials)
        ]
        pure_calls = [(a, b) for a, b in pairs]
        pure_s, pure_vals = time_calls(_kernels_py.lcs_kernel, pure_calls)
        row = {"kernel": "lcs", "size": length, "pure_s": pure_s, "compiled_s": None}
        if _kernels_c is not None:
            compiled_calls = [
                (np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))
                for a, b in pairs
            ]
            compiled_s, compiled_vals = time_calls(
                _kernels_c.lcs_kernel, compiled_calls
            )
            if [int(v) for v in compiled_vals] != [int(v) for v in pure_vals]:
                raise SystemExit("backend disagreement in lcs_kernel")
            row["compiled_s"] = compiled_s
        rows.append(row)
    return rows


def bench_ted(rng, trials):
    rows = []
    for nodes in TREE_SIZES:
        pairs = [(random_tree(rng, nodes), random_tree(rng, nodes)) for _ in range(trials)]
        arg_lists = []
        for t1, t2 in pairs:
            table = {}
            arg_lists.append(_postorder(t1, table) + _postorder(t2, table))
        pure_s, pure_vals = time_calls(_kernels_py.ted_kernel, arg_lists)
        row = {"kernel": "ted", "size": nodes, "pure_s": pure_s, "compiled_s": None}
        if _kernels_c is not None:
            compiled_calls = [
                tuple(np.asarray(part, dtype=np.int64) for part in args)
                for args in arg_lists
            ]
            compiled_s, compiled_vals = time_calls(
                _kernels_c.ted_kernel, compiled_calls
            )
            if [int(v) for v in compiled_vals] != [int(v) for v in pure_vals]:
                raise SystemExit("backend disagreement in ted_kernel")
            row["compiled_s"] = compiled_s
        rows.append(row)
    return rows


def print_table(rows, trials):
    header = "%-6s %6s %12s %12s %9s" % (
        "kernel",
        "size",
        "pure_ms",
        "compiled_ms",
        "speedup",
    )
    print(header)
    print("-" * len(header))
    for row in rows:
        pure_ms = 1000.0 * row["pure_s"] / trials
        if row["compiled_s"] is None:
            print("%-6s %6d %12.3f %12s %9s" % (row["kernel"], row["size"], pure_ms, "-", "-"))
        else:
            compiled_ms = 1000.0 * row["compiled_s"] / trials
            speedup = row["pure_s"] / row["compiled_s"]
            print(
                "%-6s %6d %12.3f %12.3f %8.1fx"
                % (row["kernel"], row["size"], pure_ms, compiled_ms, speedup)
            )


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Benchmark compiled vs pure-Python metric kernels."
    )
    parser.add_argument("--trials", type=int, default=20, help="instances per size")
    parser.add_argument("--seed", type=int, default=0, help="workload RNG seed")
    args = parser.parse_args(argv)
    if args.trials < 1:
        parser.error("--trials must be >= 1")

    if _kernels_c is None:
        print("compiled kernels unavailable; timing the pure backend only",
              file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    rows = bench_lcs(rng, args.trials) + bench_ted(rng, args.trials)
    print_table(rows, args.trials)
    if _kernels_c is not None:
        print("\nall %d instances agree across backends"
              % (len(rows) * args.trials))
    return 0


if __name__ == "__main__":
    sys.exit(main())
