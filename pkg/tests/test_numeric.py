import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nutriclass.errors import DomainError
from nutriclass.numeric import Rng, covariance, derive_seed, mean_center, symmetric_eigen

GOLDEN = Path(__file__).parent / "data" / "rng_golden.json"
MASK = (1 << 64) - 1


def _splitmix_reference(seed, count):
    """Pure-integer SplitMix64 written independently of the package."""
    out = []
    for i in range(1, count + 1):
        z = (seed + i * 0x9E3779B97F4A7C15) & MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_rng_golden_values():
    golden = json.loads(GOLDEN.read_text())["uniforms"]
    for seed, expected in golden.items():
        got = Rng(int(seed)).uniform(10)
        assert got.tolist() == [float(v) for v in expected]


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 5])
def test_rng_matches_integer_reference(seed):
    assert Rng(seed).next_u64(25).tolist() == _splitmix_reference(seed, 25)


def test_rng_blocks_equal_single_draws():
    a = Rng(9)
    b = Rng(9)
    whole = a.uniform(12)
    parts = np.concatenate([b.uniform(5), b.uniform(7)])
    np.testing.assert_array_equal(whole, parts)


def test_uniform_range_and_moments():
    u = Rng(3).uniform(200000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005
    assert abs(u.var() - 1 / 12) < 0.002


def test_normal_moments():
    z = Rng(5).normal(200000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    assert Rng(5).normal((3, 4)).shape == (3, 4)


def test_fork_is_labelled_and_stable():
    r = Rng(7)
    assert r.fork("a").seed == r.fork("a").seed == derive_seed(7, "a")
    assert r.fork("a").seed != r.fork("b").seed
    # forking does not consume the parent stream
    before = Rng(7).uniform(3)
    r.fork("x")
    np.testing.assert_array_equal(r.uniform(3), before)


@given(st.integers(1, 300), st.integers(0, 2**32))
def test_shuffle_is_permutation(n, seed):
    p = Rng(seed).shuffle(n)
    assert sorted(p.tolist()) == list(range(n))


def test_choice_and_bootstrap():
    c = Rng(1).choice(10, 4)
    assert len(set(c.tolist())) == 4 and c.max() < 10
    b = Rng(1).sample_with_replacement(50, 1000)
    assert b.min() >= 0 and b.max() <= 49
    with pytest.raises(DomainError):
        Rng(1).choice(3, 4)


# --------------------------------------------------------------------------
# covariance / eigen

def test_mean_center_and_covariance(rng):
    x = rng.normal(size=(200, 5)) * [1, 2, 3, 4, 5] + 10
    c, mu = mean_center(x)
    np.testing.assert_allclose(mu, x.mean(0))
    np.testing.assert_allclose(covariance(c), np.cov(x, rowvar=False, bias=True), atol=1e-12)
    with pytest.raises(DomainError):
        covariance(x)


def test_eigen_small_example():
    eig = symmetric_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(eig.values, [3.0, 1.0], atol=1e-12)
    v = eig.vectors
    np.testing.assert_allclose(np.abs(v), np.full((2, 2), 2 ** -0.5), atol=1e-12)


def test_eigen_diagonal_and_identity():
    eig = symmetric_eigen(np.diag([1.0, 5.0, 3.0]))
    np.testing.assert_allclose(eig.values, [5.0, 3.0, 1.0])
    eig = symmetric_eigen(np.eye(4))
    np.testing.assert_allclose(eig.values, np.ones(4))
    np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(4), atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 13, 20])
def test_eigen_matches_lapack(rng, d):
    a = rng.normal(size=(d, d))
    a = a + a.T
    eig = symmetric_eigen(a)
    ref_vals, ref_vecs = np.linalg.eigh(a)
    np.testing.assert_allclose(eig.values, ref_vals[::-1], atol=1e-10)
    # compare up to sign: |<v, v_ref>| = 1
    dots = np.abs(np.sum(eig.vectors * ref_vecs[:, ::-1], axis=0))
    np.testing.assert_allclose(dots, 1.0, atol=1e-8)


def test_eigen_sign_convention(rng):
    a = np.cov(rng.normal(size=(50, 6)), rowvar=False)
    v = symmetric_eigen(a).vectors
    for j in range(v.shape[1]):
        assert v[np.argmax(np.abs(v[:, j])), j] >= 0


@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)))
def test_eigen_reconstructs(m):
    a = (m + m.T) / 2
    eig = symmetric_eigen(a)
    scale = max(1.0, np.abs(a).max())
    rebuilt = eig.vectors @ np.diag(eig.values) @ eig.vectors.T
    assert np.max(np.abs(rebuilt - a)) <= 1e-9 * scale
    assert np.all(np.diff(eig.values) <= 1e-12 * scale)
    assert np.max(np.abs(eig.vectors.T @ eig.vectors - np.eye(6))) < 1e-10


def test_eigen_rejects_bad_input():
    with pytest.raises(DomainError):
        symmetric_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        symmetric_eigen(np.ones((2, 3)))
