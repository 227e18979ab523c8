import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from realcocycle.errors import SeparationError
from realcocycle.spectral import (adaptive_separation, decouple_blocks, gamma_clusters,
                                  separate_spectrum, to_single_eigenvalue_blocks)


def components_oracle(vals, gamma):
    """Union-find over all pairs, returned as a set of frozensets."""
    parent = list(range(len(vals)))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            if abs(vals[i] - vals[j]) <= gamma:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(len(vals)):
        groups.setdefault(find(i), set()).add(i)
    return {frozenset(g) for g in groups.values()}


def test_cluster_examples():
    assert len(gamma_clusters([0, 3], 1.0)) == 2
    assert len(gamma_clusters([0, 0.5, 1.0], 0.6)) == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=8), st.floats(0.05, 3))
def test_clusters_match_union_find(vals, gamma):
    P = gamma_clusters(vals, gamma)
    assert {frozenset(c) for c in P.clusters} == components_oracle(vals, gamma)


def test_decouple_examples():
    T = np.array([[1, 1], [0, 3]], dtype=complex)
    R = decouple_blocks(T, 1, 1.0)
    assert np.allclose(R, [[0.5]])
    M = np.array([[1, 0.5], [0, 1]])
    assert np.allclose(np.linalg.inv(M) @ T @ M, np.diag([1, 3]))
    T = np.array([[1, 0], [0, 3]], dtype=complex)
    assert np.allclose(decouple_blocks(T, 1, 1.0), 0)


def test_separate_examples():
    dec = separate_spectrum(np.diag([1.0, 5.0]), 1.0)
    assert np.allclose(dec.M.conj().T @ dec.M, np.eye(2))
    assert np.allclose(np.sort(np.diag(dec.D).real), [1, 5]) and np.allclose(dec.D, np.diag(np.diag(dec.D)))
    dec = separate_spectrum(np.array([[1.0, 1.0], [0, 3.0]]), 1.0)
    assert np.allclose(dec.D, np.diag(np.diag(dec.D)), atol=1e-14)
    assert np.allclose(sorted(np.diag(dec.D).real), [1, 3])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 6))
def test_separation_is_similarity(seed, n):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    gamma = 0.2
    dec = separate_spectrum(B, gamma)
    nB = np.linalg.norm(B, 2)
    assert np.abs(dec.M_inv @ B @ dec.M - dec.D).max() < 1e-10 * max(nB, 1e-300)
    # off-block part of D vanishes, blocks are clusters
    mask = np.ones((n, n), dtype=bool)
    for a, b in dec.blocks:
        mask[a:b, a:b] = False
    assert np.abs(dec.D[mask]).max(initial=0) == 0
    assert len(dec.blocks) == len(gamma_clusters(np.linalg.eigvals(B), gamma))
    assert dec.certificate.passed
    stated = {x.name: x for x in dec.diagnostics}
    assert stated["bound-M"].passed == (np.log(np.linalg.norm(dec.M, 2)) <= dec.log_bound_M)


def test_small_matrix_misses_closed_form_bound_without_failing():
    # ||B|| much smaller than Gamma^2 puts the closed-form bound below 1
    B = 1e-3 * np.array([[0.0, 1.0], [0.0, 5.0]])
    dec = separate_spectrum(B, 0.1)
    assert dec.certificate.passed
    assert not {x.name: x for x in dec.diagnostics}["bound-M"].passed


def test_adaptive_examples():
    A = 2.0 * np.eye(3) + np.triu(np.ones((3, 3)), 1)
    res = adaptive_separation(A, [1.0, 0.5, 0.25])
    assert res.d0 == 1 and len(res.decoupling.blocks) == 1
    res = adaptive_separation(np.diag([0.0, 1.0]), [2.0, 0.5, 0.25])
    assert res.d0 == 2 and len(res.decoupling.blocks) == 2


def test_adaptive_validation():
    with pytest.raises(ValueError):
        adaptive_separation(np.eye(2), [0.5, 1.0])
    # the cluster {0, 0.3} splits at every step, so the sequence runs out
    vals = np.array([0, 0.3, 0.9, 1.5])
    with pytest.raises(SeparationError):
        adaptive_separation(np.diag(vals), [0.35, 0.25])


def test_single_eigenvalue_examples():
    B, F = to_single_eigenvalue_blocks(np.eye(2), [(0, 2)], 1e-6)
    assert np.abs(F).max() == 0
    D = np.array([[1.0, 1.0], [0, 1.0 + 1e-6]], dtype=complex)
    B, F = to_single_eigenvalue_blocks(D, [(0, 2)], 1e-6)
    assert np.allclose(np.diag(F), [-5e-7, 5e-7], atol=1e-18)
    assert np.allclose(B + F, D, atol=0)
    with pytest.raises(SeparationError):
        to_single_eigenvalue_blocks(np.diag([0.0, 1.0]), [(0, 2)], 1e-3)
