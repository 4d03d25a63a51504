"""Time the hot kernels under both backends.

Each backend runs in its own interpreter because the backend is fixed at
import time. Usage::

    python3 benchmarks/bench_kernels.py [--n 6000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from nutriclass import BACKEND
from nutriclass.schema import preprocess
from nutriclass.synthetic import generate_synthetic
from nutriclass import trees, svm

n, repeat = int(sys.argv[1]), int(sys.argv[2])
data = preprocess(generate_synthetic(n=n, seed=7))
X, y = data.matrix, data.labels
yb = np.where(y == 1, 1.0, -1.0)
Z = (X - X.mean(0)) / np.where(X.std(0) > 0, X.std(0), 1.0)


def best(fn):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


t_tree, tree = best(lambda: trees.fit_tree(data))
t_rf, _ = best(lambda: trees.fit_forest(data, trees.ForestParams(n_trees=10)))
t_pred, _ = best(lambda: trees.predict_tree(tree, X))
t_smo, m = best(lambda: svm.fit_binary(Z, yb, svm.RbfParams(sigma=svm.default_sigma(Z.shape[1]))))
print(json.dumps({"backend": BACKEND, "fit_tree": t_tree, "predict_tree": t_pred, "fit_forest_10": t_rf, "smo": t_smo,
                  "tree_nodes": tree.node_count, "smo_iter": m.n_iter,
                  "n_support": m.n_support}))
"""


def run(backend, n, repeat):
    env = dict(os.environ, NUTRICLASS_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", WORKER, str(n), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rows = [run(b, args.n, args.repeat) for b in ("numba", "numpy")]
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<14}{'numba s':>10}{'numpy s':>10}{'speedup':>10}")
    for k in ("fit_tree", "fit_forest_10", "predict_tree", "smo"):
        a, b = rows[0][k], rows[1][k]
        print(f"{k:<14}{a:>10.4f}{b:>10.4f}{b / a:>9.1f}x")
    same = all(rows[0][k] == rows[1][k] for k in ("tree_nodes", "smo_iter", "n_support"))
    print("structural agreement (tree nodes, SMO iterations, support vectors):", same)
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
