import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from realcocycle.errors import EchelonError, ScheduleError, StructureMismatchError
from realcocycle.jordan import (DeltaSchedule, block_sizes_from_ranks, column_echelon,
                                echelonize_iterate, is_jordan_form, jordan_blocks,
                                jordan_structure, nilpotent_jnf, realify_jordan,
                                reduced_to_jordan, same_structure, scale_pivots)


def J(*sizes, lam=0.0):
    n = sum(sizes)
    M = lam * np.eye(n, dtype=complex)
    off = 0
    for s in sizes:
        for i in range(s - 1):
            M[off + i, off + i + 1] = 1.0
        off += s
    return M


def rank_oracle(M, tol=1e-8):
    """Ranks of powers by exact integer arithmetic on 0/1 Jordan matrices."""
    n = M.shape[0]
    A = np.rint(M.real).astype(np.int64)
    P = np.eye(n, dtype=np.int64)
    out = []
    for _ in range(n):
        P = P @ A
        out.append(int(np.linalg.matrix_rank(P.astype(float))))
    return tuple(out)


def partitions():
    return st.lists(st.integers(1, 3), min_size=1, max_size=3)


# --------------------------------------------------------------------------
# column echelon

def test_echelon_of_jordan_block_is_itself():
    E = column_echelon(J(3))
    assert np.allclose(np.abs(E.echelon), J(3).real, atol=1e-12)
    assert np.allclose(np.abs(E.basis), np.eye(3), atol=1e-12)
    assert E.block_dims == (1, 1, 1)


def test_echelon_two_by_two_pivot():
    E = column_echelon(np.array([[0, 2.0], [0, 0]]))
    assert len(E.pivots) == 1
    r, c, val = E.pivots[0]
    assert (r, c) == (0, 1) and abs(val) == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(partitions(), st.integers(0, 2**31 - 1))
def test_echelon_invariants(sizes, seed):
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    N = Q @ J(*sizes) @ Q.conj().T
    E = column_echelon(N)
    U = E.basis
    assert np.abs(U.conj().T @ U - np.eye(n)).max() < 1e-12
    assert list(E.block_dims) == sorted(E.block_dims, reverse=True)
    assert np.abs(U.conj().T @ N @ U - E.echelon - E.dropped).max() < 1e-12
    for r, c, val in E.pivots:
        assert E.echelon[r, c] == val
        assert np.abs(E.echelon[r + 1:, c]).max(initial=0) < 1e-12


def test_scale_pivots_unit_pivots():
    S, red = scale_pivots(column_echelon(J(3)), 0.5)
    d = np.abs(np.diag(S))
    assert np.allclose(d, d[0])
    for r, c, _ in column_echelon(J(3)).pivots:
        assert red[r, c] == 1


def test_scale_pivots_rejects_small_pivot():
    E = column_echelon(np.array([[0, 1e-6], [0, 0]]))
    with pytest.raises(EchelonError):
        scale_pivots(E, 1e-3)


# --------------------------------------------------------------------------
# thresholded iteration

def test_iterate_on_reduced_matrix_is_one_step():
    it = echelonize_iterate(J(2, 1), epsilon=1e-3, schedule=DeltaSchedule.custom([0.5], 3))
    assert it.k_used == 1
    assert np.abs(it.F).max() < 1e-15


def test_iterate_thresholds_tiny_pivot():
    eps = 1e-3
    N = np.array([[0, eps**2], [0, 0]])
    sched = DeltaSchedule.custom([0.5, 0.25], 2)
    it = echelonize_iterate(N, epsilon=eps, schedule=sched)
    assert np.abs(it.A_prime).max() == 0
    assert np.linalg.norm(it.F, 2) <= eps ** 0.5
    assert np.abs(it.S_inv @ N @ it.S - it.A_prime - it.F).max() < 1e-15


def test_custom_schedule_validation():
    with pytest.raises(ScheduleError):
        DeltaSchedule.custom([0.5, 0.7], 2)


@settings(max_examples=30, deadline=None)
@given(partitions(), st.integers(0, 2**31 - 1))
def test_iterate_never_shrinks_kernels(sizes, seed):
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    T = np.triu(rng.standard_normal((n, n)), 1) * 1e-4
    N = J(*sizes) * rng.uniform(0.5, 2) + T * (J(*sizes) != 0)
    it = echelonize_iterate(N, log_epsilon=math.log(1e-8) / DeltaSchedule.default(n).delta(1))
    rN, rA = jordan_structure(N), jordan_structure(it.A_prime)
    assert all(a <= b for a, b in zip(rA, rN))


# --------------------------------------------------------------------------
# reduced echelon to Jordan

def test_reduced_to_jordan_examples():
    S, Jf = reduced_to_jordan(J(2))
    assert np.allclose(S, np.eye(2)) and np.allclose(Jf, J(2))
    A = np.array([[0, 1, 1], [0, 0, 1], [0, 0, 0]], dtype=complex)
    S, Jf, Si = reduced_to_jordan(A, return_inverse=True)
    assert np.allclose(Jf, J(3))
    assert np.abs(Si @ A @ S - Jf).max() < 1e-15


# --------------------------------------------------------------------------
# certified nilpotent Jordan form

def test_jnf_examples():
    c = nilpotent_jnf(J(3))
    assert np.allclose(c.J, J(3)) and np.abs(c.F_residual).max() == 0 and c.passed
    assert max(np.linalg.norm(c.S, 2), np.linalg.norm(c.S_inv, 2)) <= c.bound_S
    # small-epsilon regime: first threshold 1e-8, so the pivot 0.5 survives
    c = nilpotent_jnf(0.5 * J(2), log_epsilon=math.log(1e-8) / DeltaSchedule.default(2).delta(1))
    assert np.allclose(c.J, J(2)) and np.abs(c.F_residual).max() < 1e-16 and c.passed


def test_jnf_zero_matrix():
    c = nilpotent_jnf(np.zeros((3, 3)))
    assert np.allclose(c.S, np.eye(3)) and c.passed


@settings(max_examples=40, deadline=None)
@given(partitions(), st.integers(0, 2**31 - 1))
def test_jnf_recovers_structure(sizes, seed):
    rng = np.random.default_rng(seed)
    n = sum(sizes)
    P = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    P += 3 * np.eye(n)
    N = P @ J(*sizes) @ np.linalg.inv(P)
    c = nilpotent_jnf(N, log_epsilon=math.log(1e-8) / DeltaSchedule.default(n).delta(1))
    assert is_jordan_form(c.J)
    assert jordan_structure(c.J) == rank_oracle(J(*sizes))
    assert np.abs(c.S_inv @ N @ c.S - c.J - c.F_residual).max() <= 1e-10 * np.linalg.norm(N, 2)


# --------------------------------------------------------------------------
# structure

def test_jordan_structure_examples():
    assert jordan_structure(J(3)) == (2, 1, 0)
    assert jordan_structure(J(2, 2)) == (2, 0, 0, 0)


@settings(max_examples=50, deadline=None)
@given(partitions())
def test_block_sizes_from_ranks_inverts(sizes):
    n = sum(sizes)
    assert block_sizes_from_ranks(rank_oracle(J(*sizes)), n) == sorted(sizes, reverse=True)


def test_same_structure_examples():
    v = same_structure(J(2), J(2), np.eye(2), 1.0)
    assert v.guaranteed and v.epsilon == 0
    v = same_structure(J(2), np.zeros((2, 2)), np.eye(2), 1.0)
    assert not v.guaranteed and not v.ranks_equal
    rng = np.random.default_rng(0)
    C = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
    s = np.linalg.svd(C, compute_uv=False)
    xi = max(s[0], 1 / s[-1])
    assert xi <= 2
    # A C - C B has size about 1e-9 once A is perturbed
    A = C @ J(3) @ np.linalg.inv(C) + 1e-9 * np.eye(3)
    v = same_structure(A, J(3), C, xi)
    assert v.epsilon < 1e-8
    assert v.threshold == pytest.approx(1 / (3 * 6 * xi**3))
    assert v.guaranteed


# --------------------------------------------------------------------------
# real Jordan form

def test_realify_examples():
    P, R = realify_jordan(np.diag([1j, -1j]))
    assert np.allclose(R, [[0, 1], [-1, 0]])
    Jr = J(2, lam=3.0)
    P, R = realify_jordan(Jr)
    assert np.allclose(P, np.eye(2)) and np.allclose(R, Jr)
    a = 1 + 2j
    Jc = np.zeros((4, 4), dtype=complex)
    Jc[:2, :2] = J(2, lam=a)
    Jc[2:, 2:] = J(2, lam=a.conjugate())
    P, R = realify_jordan(Jc)
    rot = np.array([[1, 2], [-2, 1]])
    assert np.allclose(R[:2, :2], rot) and np.allclose(R[2:, 2:], rot)
    assert np.allclose(R[:2, 2:], np.eye(2)) and np.allclose(R[2:, :2], 0)


def test_realify_rejects_unpaired():
    with pytest.raises(StructureMismatchError):
        realify_jordan(np.diag([1j, 2.0]))
    Jc = np.zeros((3, 3), dtype=complex)
    Jc[:2, :2] = J(2, lam=1j)
    Jc[2, 2] = -1j
    with pytest.raises(StructureMismatchError):
        realify_jordan(Jc)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 2), st.floats(-2, 2), st.floats(0.1, 2)),
                min_size=1, max_size=3), st.lists(st.floats(-2, 2), max_size=2))
def test_realify_property(pairs, reals):
    blocks = []
    for size, re, im in pairs:
        blocks += [J(size, lam=complex(re, im)), J(size, lam=complex(re, -im))]
    blocks += [J(1, lam=r) for r in reals]
    n = sum(b.shape[0] for b in blocks)
    Jm = np.zeros((n, n), dtype=complex)
    off = 0
    for b in blocks:
        s = b.shape[0]
        Jm[off:off + s, off:off + s] = b
        off += s
    P, R = realify_jordan(Jm)
    assert np.abs(P.conj().T @ P - np.eye(n)).max() < 1e-12
    assert np.isrealobj(R) or np.abs(np.imag(R)).max() == 0
    assert np.abs(P.conj().T @ Jm @ P - R).max() <= 1e-12 * (1 + np.linalg.norm(Jm, 2))


def test_jordan_blocks_parsing():
    Jm = J(2, 1, lam=1.0)
    assert jordan_blocks(Jm) == [(0, 2, 1.0), (2, 1, 1.0)]
    bad = J(2)
    bad[0, 1] = 0.5
    assert not is_jordan_form(bad)
