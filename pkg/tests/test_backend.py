"""Both kernel backends must agree; each runs in its own interpreter."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from nutriclass import _backend

PROBE = r"""
import json
import numpy as np
from nutriclass import BACKEND, svm, trees
from nutriclass.numeric import Rng
from nutriclass.schema import preprocess, split_train_test
from nutriclass.synthetic import generate_synthetic

data = preprocess(generate_synthetic(n=900, seed=12))
train, test = split_train_test(data, 0.2, seed=3)
tree = trees.fit_tree(train)
forest = trees.fit_forest(train, trees.ForestParams(n_trees=6), Rng(4))
Z = (train.matrix - train.matrix.mean(0)) / np.where(train.matrix.std(0) > 0, train.matrix.std(0), 1)
y = np.where(train.labels == 2, 1.0, -1.0)
m = svm.fit_binary(Z, y, svm.RbfParams(sigma=3.0), svm.SolverParams(cache_rows=50))
print(json.dumps({
    "backend": BACKEND,
    "tree": [tree.feature.tolist(), tree.threshold.tolist(), tree.gain.tolist()],
    "tree_pred": trees.predict_tree(tree, test.matrix).tolist(),
    "forest_pred": trees.predict_forest(forest, test.matrix).tolist(),
    "oob": [e for _, e in forest.oob_curve],
    "alpha": m.alpha.tolist(), "bias": m.bias, "n_iter": m.n_iter,
}))
"""


def _probe(backend):
    env = dict(os.environ, NUTRICLASS_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


@pytest.mark.skipif(not _backend.HAS_NUMBA, reason="numba not installed")
def test_backends_agree():
    a, b = _probe("numba"), _probe("numpy")
    assert (a["backend"], b["backend"]) == ("numba", "numpy")
    assert a["tree"][0] == b["tree"][0]
    assert a["tree"][1] == b["tree"][1]
    np.testing.assert_allclose(a["tree"][2], b["tree"][2], rtol=1e-12)
    assert a["tree_pred"] == b["tree_pred"]
    assert a["forest_pred"] == b["forest_pred"]
    assert a["oob"] == b["oob"]
    assert a["n_iter"] == b["n_iter"]
    np.testing.assert_allclose(a["alpha"], b["alpha"], atol=1e-10)
    assert a["bias"] == pytest.approx(b["bias"], abs=1e-10)


def test_invalid_backend_value():
    env = dict(os.environ, NUTRICLASS_BACKEND="fortran")
    res = subprocess.run([sys.executable, "-c", "import nutriclass"], env=env, capture_output=True, text=True)
    assert res.returncode != 0 and "NUTRICLASS_BACKEND" in res.stderr
