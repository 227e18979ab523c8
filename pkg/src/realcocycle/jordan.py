"""
Jordan normal form of nilpotent matrices with explicit conjugation bounds.

The pipeline is

1. :func:`column_echelon` -- unitary change of basis to column echelon form,
   built from the kernel filtration ``ker N subset ker N^2 subset ...``;
2. :func:`echelonize_iterate` -- pivots below a threshold are moved into a
   remainder ``F`` and the rest is re-echelonized, with thresholds taken
   from a :class:`DeltaSchedule`;
3. :func:`scale_pivots` -- diagonal scaling making every pivot equal to one;
4. :func:`reduced_to_jordan` -- transvections clearing the entries above
   the pivots, then a permutation to Jordan form.

:func:`nilpotent_jnf` chains these steps and evaluates the growth bounds of
the conjugation and of the remainder in log-space.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .certificates import Certificate, log_cn, log_factorial, safe_log
from .errors import EchelonError, NotNilpotentError, ScheduleError, StructureMismatchError

__all__ = [
    "EchelonForm", "DeltaSchedule", "IterationResult", "JordanCertificate", "StructureVerdict",
    "column_echelon", "scale_pivots", "echelonize_iterate", "reduced_to_jordan",
    "nilpotent_jnf", "jordan_structure", "same_structure", "realify_jordan",
    "jordan_blocks", "is_jordan_form", "block_sizes_from_ranks",
]


def _norm(M):
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def _fix_phase(v):
    """Rotate ``v`` so that its largest-magnitude entry is real positive."""
    i = int(np.argmax(np.abs(v)))
    if v[i] == 0:
        return v
    return v * (abs(v[i]) / v[i])


def _orth_complement(Q, n):
    if Q.shape[1] == 0:
        return np.eye(n, dtype=complex)
    return scipy.linalg.null_space(Q.conj().T)


# --------------------------------------------------------------------------
# column echelon form
# --------------------------------------------------------------------------

@dataclass
class EchelonForm:
    """Unitary basis in which a nilpotent matrix is in column echelon form.

    Attributes
    ----------
    basis : ndarray
        Unitary matrix ``U``.
    echelon : ndarray
        ``U* N U`` with structural zeros enforced.
    block_dims : tuple of int
        ``r_j = dim ker N^j - dim ker N^(j-1)``.
    pivots : list of (row, col, value)
        Last nonzero entry of each nonzero column (0-based indices).
    dropped : ndarray
        ``U* N U - echelon``; rounding noise on the structural zeros.
    """

    basis: np.ndarray
    echelon: np.ndarray
    block_dims: tuple
    pivots: list
    dropped: np.ndarray

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.block_dims)]).astype(int)


def _echelon_mask(block_dims):
    n = int(sum(block_dims))
    off = np.concatenate([[0], np.cumsum(block_dims)]).astype(int)
    mask = np.zeros((n, n), dtype=bool)
    for i in range(len(block_dims)):
        for j in range(i + 1, len(block_dims)):
            mask[off[i]:off[i + 1], off[j]:off[j + 1]] = True
        if i + 1 < len(block_dims):
            # the block just above the diagonal is upper triangular
            r_rows, r_cols = block_dims[i], block_dims[i + 1]
            sub = np.triu(np.ones((r_rows, r_cols), dtype=bool))
            mask[off[i]:off[i + 1], off[i + 1]:off[i + 2]] = sub
    return mask


def _pivot_list(echelon, block_dims):
    off = np.concatenate([[0], np.cumsum(block_dims)]).astype(int)
    piv = []
    for j in range(1, len(block_dims)):
        for l in range(block_dims[j]):
            r, c = off[j - 1] + l, off[j] + l
            piv.append((int(r), int(c), complex(echelon[r, c])))
    return piv


def column_echelon(N, rank_tol: float = 1e-9) -> EchelonForm:
    """Column echelon form of a nilpotent matrix.

    The kernels ``K_j = ker N^j`` are computed incrementally as
    ``K_j = {x : N x in K_(j-1)}`` so the filtration is nested by
    construction.  Bases of the layers ``U_j = K_j minus K_(j-1)`` are then
    rebuilt from the top layer down: the images ``N u`` of layer ``j`` are
    projected onto layer ``j - 1`` and orthonormalised by a QR factorisation,
    whose diagonal gives the pivots.

    Parameters
    ----------
    N : array_like, shape (n, n)
        Nilpotent matrix.
    rank_tol : float
        Singular values below ``rank_tol * ||N||`` count as zero.

    Raises
    ------
    NotNilpotentError
        If ``||N^n|| > rank_tol ||N||^n`` or the filtration stalls.
    """
    N = np.asarray(N, dtype=complex)
    n = N.shape[0]
    normN = _norm(N)
    if normN == 0.0:
        return EchelonForm(np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex),
                           (n,), [], np.zeros((n, n), dtype=complex))
    power = _norm(np.linalg.matrix_power(N / normN, n))
    if power > rank_tol:
        raise NotNilpotentError(f"||N^n|| / ||N||^n = {power:.3e} exceeds {rank_tol:.1e}")
    tol = rank_tol * normN
    layers = []
    Q = np.zeros((n, 0), dtype=complex)
    while Q.shape[1] < n:
        C = _orth_complement(Q, n)
        M = N @ C - Q @ (Q.conj().T @ (N @ C))
        _, s, Vh = np.linalg.svd(M)
        rank = int(np.sum(s > tol))
        Y = Vh[rank:].conj().T
        if Y.shape[1] == 0:
            raise NotNilpotentError("kernel filtration stalled before reaching C^n")
        layer = C @ Y
        layers.append(layer)
        Q = np.hstack([Q, layer])
    m = len(layers)
    dims = tuple(L.shape[1] for L in layers)
    new = [None] * m
    new[-1] = np.column_stack([_fix_phase(v) for v in layers[-1].T])
    for j in range(m - 1, 0, -1):
        V = layers[j - 1].conj().T @ (N @ new[j])
        Qf, R = scipy.linalg.qr(V)
        Qf = Qf.astype(complex)
        for k in range(Qf.shape[1]):
            if k < min(R.shape) and R[k, k] != 0:
                Qf[:, k] *= R[k, k] / abs(R[k, k])
        basis_j = layers[j - 1] @ Qf
        for k in range(dims[j], dims[j - 1]):
            basis_j[:, k] = _fix_phase(basis_j[:, k])
        new[j - 1] = basis_j
    U = np.hstack(new)
    full = U.conj().T @ N @ U
    mask = _echelon_mask(dims)
    ech = np.where(mask, full, 0)
    return EchelonForm(U, ech, dims, _pivot_list(ech, dims), full - ech)


def scaling_bound(norm_B: float, delta: float, n: int) -> float:
    """Log of ``sqrt(max(1, delta^-n) max(1, ||B||^n))``, the balanced-scaling bound."""
    return 0.5 * n * (max(0.0, -safe_log(delta)) + max(0.0, safe_log(norm_B)))


def scale_pivots(E: EchelonForm, delta: float):
    """Diagonal scaling that turns every pivot into one.

    Returns
    -------
    S : ndarray
        Diagonal matrix, balanced so that ``||S|| = ||S^{-1}||``.
    reduced : ndarray
        ``S^{-1} E.echelon S`` with pivots set exactly to one.

    Raises
    ------
    EchelonError
        If some pivot has modulus below ``delta``.
    """
    B = E.echelon
    n = B.shape[0]
    s = np.ones(n, dtype=complex)
    for r, c, val in sorted(E.pivots, key=lambda p: p[1]):
        if abs(val) < delta:
            raise EchelonError(f"pivot {val} at ({r}, {c}) below delta={delta}", pivot=(r, c, val))
        s[c] = s[r] / val
    scale = math.sqrt(np.max(1.0 / np.abs(s)) / np.max(np.abs(s)))
    s = s * scale
    reduced = (B / s[:, None]) * s[None, :]
    for r, c, _ in E.pivots:
        reduced[r, c] = 1.0
    return np.diag(s), reduced


# --------------------------------------------------------------------------
# threshold schedule and iteration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaSchedule:
    """Decreasing exponents ``delta_0 = 1 > delta_1 > ...`` stored as logs.

    The default schedule is ``delta_(k-1) = 2 (m + 2) c_n delta_k`` with
    ``c_n = 2 (n + 1) (2n)! + n``; the threshold at step ``k`` is
    ``epsilon^delta_k``.
    """

    log_delta: tuple
    n: int
    m: int
    log_c: float

    @classmethod
    def default(cls, n: int, m: int = 1, length: int | None = None):
        lc = log_cn(n)
        step = math.log(2.0 * (m + 2)) + lc
        length = n * n + 1 if length is None else length
        return cls(tuple(-k * step for k in range(length + 1)), n, m, lc)

    @classmethod
    def custom(cls, deltas, n: int, m: int = 1):
        deltas = [float(x) for x in deltas]
        if deltas[0] != 1.0:
            deltas = [1.0] + deltas
        if any(b >= a for a, b in zip(deltas, deltas[1:])) or min(deltas) <= 0:
            raise ScheduleError("deltas must be positive and strictly decreasing")
        return cls(tuple(math.log(x) for x in deltas), n, m, log_cn(n))

    def __len__(self):
        return len(self.log_delta)

    def delta(self, k):
        return math.exp(self.log_delta[k])

    def log_threshold(self, k, log_eps):
        """``log(epsilon^delta_k) = delta_k log(epsilon)``."""
        if k >= len(self.log_delta):
            raise ScheduleError(f"schedule has no entry for step {k}")
        return math.exp(self.log_delta[k]) * log_eps

    def condition_holds(self, log_eps, k_max):
        """Check ``sum_(i<=k) eps^delta_i <= 2 eps^delta_k`` for ``k <= k_max``."""
        terms = [self.log_threshold(i, log_eps) for i in range(1, k_max + 1)]
        for k in range(1, k_max + 1):
            lhs = np.logaddexp.reduce(terms[:k])
            if lhs > math.log(2.0) + terms[k - 1] + 1e-12:
                return False, k
        return True, k_max


@dataclass
class IterationResult:
    """Outcome of the thresholded echelonization ``S^{-1} N S = A' + F``."""

    S: np.ndarray
    S_inv: np.ndarray
    A_prime: np.ndarray
    F: np.ndarray
    k_used: int
    log_threshold: float
    block_sizes: tuple
    removed: list = field(default_factory=list)
    schedule_ok: bool = True


def _blocks(block_sizes, n):
    if block_sizes is None:
        block_sizes = (n,)
    if sum(block_sizes) != n:
        raise ValueError("block sizes do not add up to the matrix size")
    off = np.concatenate([[0], np.cumsum(block_sizes)]).astype(int)
    return tuple(int(b) for b in block_sizes), [slice(off[i], off[i + 1]) for i in range(len(block_sizes))]


def _log_eps(epsilon, log_epsilon):
    if log_epsilon is not None:
        if not log_epsilon < 0:
            raise ValueError("log_epsilon must be negative")
        return float(log_epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.log(epsilon)


def echelonize_iterate(N, epsilon: float = 1e-3, schedule: DeltaSchedule | None = None, *,
                       m: int = 1, block_sizes=None, log_epsilon: float | None = None,
                       rank_tol: float = 1e-9) -> IterationResult:
    """Echelonize with pivot thresholding until every pivot exceeds ``epsilon^delta_k``.

    At step ``k`` the pivots of modulus at most ``epsilon^delta_k`` are moved
    into the remainder and the rest is re-echelonized by a unitary change of
    basis.  Kernel dimensions of every power grow strictly at each step, so
    the loop ends after at most ``n^2`` steps.
    """
    N = np.asarray(N, dtype=complex)
    n = N.shape[0]
    log_eps = _log_eps(epsilon, log_epsilon)
    sched = schedule if schedule is not None else DeltaSchedule.default(n, m)
    sizes, slices = _blocks(block_sizes, n)
    forms, U_tot, Fp = [], [], []
    for sl in slices:
        E = column_echelon(N[sl, sl], rank_tol)
        forms.append(E)
        U_tot.append(E.basis)
        Fp.append(E.dropped)
    removed = []
    k = 1
    while True:
        if k > n * n:
            raise AssertionError("thresholded echelonization did not terminate within n^2 steps")
        log_thr = sched.log_threshold(k, log_eps)
        hit = False
        for b, E in enumerate(forms):
            small = [p for p in E.pivots if safe_log(abs(p[2])) <= log_thr]
            if not small:
                continue
            hit = True
            Fk = np.zeros_like(E.echelon)
            for r, c, val in small:
                Fk[r, c] = val
                removed.append((k, b, r, c, val))
            E2 = column_echelon(E.echelon - Fk, rank_tol)
            U = E2.basis
            Fp[b] = U.conj().T @ (Fp[b] + Fk) @ U + E2.dropped
            U_tot[b] = U_tot[b] @ U
            forms[b] = E2
        if not hit:
            break
        k += 1
    # step k found nothing to remove, so k - 1 thresholding steps were taken
    if k - 1 > n * n / 2:
        warnings.warn(f"thresholded echelonization used {k - 1} steps (> n^2/2 = {n * n / 2})",
                      RuntimeWarning, stacklevel=2)
    ok, k_bad = sched.condition_holds(log_eps, k)
    if not ok:
        if schedule is not None:
            raise ScheduleError(f"summability of epsilon^delta_i fails at step {k_bad}")
        # the default schedule is only summable for extremely small epsilon;
        # the sum of at most k thresholds is then absorbed in the constant
        warnings.warn(f"default schedule is not summable at step {k_bad} for this epsilon",
                      RuntimeWarning, stacklevel=2)
    S = np.zeros((n, n), dtype=complex)
    S_inv = np.zeros((n, n), dtype=complex)
    A = np.zeros((n, n), dtype=complex)
    F = np.zeros((n, n), dtype=complex)
    delta = math.exp(log_thr)
    for b, sl in enumerate(slices):
        E = forms[b]
        Sb, red = scale_pivots(E, delta) if E.pivots else (np.eye(sizes[b], dtype=complex), E.echelon.copy())
        sb = np.diag(Sb)
        Sb_inv = np.diag(1.0 / sb)
        S[sl, sl] = U_tot[b] @ Sb
        S_inv[sl, sl] = Sb_inv @ U_tot[b].conj().T
        A[sl, sl] = red
        # remainder: transported thresholded parts plus pivot rounding
        F[sl, sl] = Sb_inv @ Fp[b] @ Sb + (Sb_inv @ E.echelon @ Sb - red)
    return IterationResult(S, S_inv, A, F, k, log_thr, sizes, removed, ok)


# --------------------------------------------------------------------------
# from reduced echelon form to Jordan form
# --------------------------------------------------------------------------

def _column_pivots(A):
    """Row index of the last nonzero entry of each column (or -1)."""
    n = A.shape[0]
    out = np.full(n, -1)
    for j in range(n):
        nz = np.nonzero(A[:, j])[0]
        if len(nz):
            out[j] = nz[-1]
    return out


def _check_reduced_echelon(A, tol):
    piv = _column_pivots(A)
    lengths = piv + 1
    nonzero = np.nonzero(lengths)[0]
    if len(nonzero):
        first = nonzero[0]
        tail = lengths[first:]
        if np.any(tail == 0) or np.any(np.diff(tail) <= 0):
            raise EchelonError("column lengths are not strictly increasing")
    for j in nonzero:
        if abs(A[piv[j], j] - 1.0) > tol:
            raise EchelonError(f"pivot {A[piv[j], j]} at ({piv[j]}, {j}) is not 1",
                               pivot=(int(piv[j]), int(j), complex(A[piv[j], j])))
    return piv


def _block_to_jordan(A, tol):
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    piv = _check_reduced_echelon(A, tol)
    for j in _nonzero_cols(piv):
        A[piv[j], j] = 1.0
    S = np.eye(n, dtype=complex)
    S_inv = np.eye(n, dtype=complex)
    log_growth = 0.0
    for j0 in range(n - 1, -1, -1):
        i0 = piv[j0]
        if i0 < 0:
            continue
        for k0 in range(i0 - 1, -1, -1):
            a = A[k0, j0]
            if a == 0:
                continue
            # B = (I - a M) A (I + a M) with M = E_{k0, i0}
            A[:, i0] += a * A[:, k0]
            A[k0, :] -= a * A[i0, :]
            A[k0, j0] = 0.0
            S[:, i0] += a * S[:, k0]
            S_inv[k0, :] -= a * S_inv[i0, :]
            log_growth += math.log1p(abs(a))
    # A is now a 0/1 matrix; order the chains e_head <- e_j <- ... as Jordan blocks
    col_of_row = {int(piv[j]): j for j in range(n) if piv[j] >= 0}
    heads = [j for j in range(n) if piv[j] < 0]
    chains = []
    for h in heads:
        chain = [h]
        while chain[-1] in col_of_row:
            chain.append(col_of_row[chain[-1]])
        chains.append(chain)
    chains.sort(key=lambda c: (-len(c), c[0]))
    order = [j for c in chains for j in c]
    Pm = np.eye(n)[:, order]
    J = Pm.T @ A.real @ Pm
    return S @ Pm, Pm.T @ S_inv, np.round(J), log_growth


def _nonzero_cols(piv):
    return [j for j in range(len(piv)) if piv[j] >= 0]


def reduced_to_jordan(A, block_sizes=None, *, tol: float = 1e-12, return_inverse: bool = False):
    """Conjugate a block-wise reduced column echelon matrix to Jordan form.

    Columns are processed from right to left; inside a column the entries
    above the pivot are cleared bottom-up by transvections ``I + a M``,
    ``M = E_(k0, i0)``.  The resulting 0/1 matrix is permuted into Jordan
    blocks (largest first).

    Returns
    -------
    S, J : ndarray
        ``S^{-1} A S = J``; with ``return_inverse`` also ``S^{-1}``.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    sizes, slices = _blocks(block_sizes, n)
    S = np.zeros((n, n), dtype=complex)
    S_inv = np.zeros((n, n), dtype=complex)
    J = np.zeros((n, n))
    for sl in slices:
        Sb, Sb_inv, Jb, _ = _block_to_jordan(A[sl, sl], tol)
        S[sl, sl] = Sb
        S_inv[sl, sl] = Sb_inv
        J[sl, sl] = Jb
    if return_inverse:
        return S, J, S_inv
    return S, J


# --------------------------------------------------------------------------
# full nilpotent Jordan form with certificate
# --------------------------------------------------------------------------

@dataclass
class JordanCertificate:
    """Result of :func:`nilpotent_jnf`: ``S^{-1} N S = J + F_residual``.

    ``log_bound_S`` and ``log_bound_F`` are the natural logarithms of the
    evaluated right-hand sides of the conjugation and remainder estimates.
    """

    S: np.ndarray
    S_inv: np.ndarray
    J: np.ndarray
    F_residual: np.ndarray
    log_bound_S: float
    log_bound_F: float
    epsilon: float
    log_epsilon: float
    m: int
    k_used: int
    C: float
    certificate: Certificate

    @property
    def bound_S(self):
        return math.exp(min(self.log_bound_S, 700.0))

    @property
    def bound_F(self):
        return math.exp(min(self.log_bound_F, 700.0))

    @property
    def passed(self):
        return self.certificate.passed

    def to_dict(self):
        from .serialization import matrix_to_dict
        return {"S": matrix_to_dict(self.S), "J": matrix_to_dict(self.J),
                "F_residual": matrix_to_dict(self.F_residual),
                "log_bound_S": self.log_bound_S, "log_bound_F": self.log_bound_F,
                "epsilon": self.epsilon, "log_epsilon": self.log_epsilon, "m": self.m,
                "k_used": self.k_used, "C": self.C,
                "inequalities": self.certificate.to_list()}


def nilpotent_jnf(N, epsilon: float = 1e-3, m: int = 1, *, schedule: DeltaSchedule | None = None,
                  block_sizes=None, log_epsilon: float | None = None, C: float = 1.0,
                  rank_tol: float = 1e-9) -> JordanCertificate:
    """Jordan form of a nilpotent matrix up to a controlled remainder.

    Returns ``S, J, F`` with ``S^{-1} N S = J + F`` and checks

    * ``||S^{+-1}|| <= C (||N|| + 1)^{c_n} epsilon^{-1/(2(m+2))}``,
    * ``||S^{+-1}||^m ||F|| <= (C (||N|| + 1)^{c_n})^{m+1} epsilon^{(m+1) c_n delta_k}``,

    all compared through logarithms.

    Parameters
    ----------
    N : array_like
        Nilpotent (block-diagonal) matrix.
    epsilon : float
        Working scale in (0, 1); ignored when ``log_epsilon`` is given.
    m : int
        Exponent in the remainder estimate (and in the default schedule).
    C : float
        Constant in front of both estimates (recorded in the certificate).
    """
    N = np.asarray(N, dtype=complex)
    n = N.shape[0]
    log_eps = _log_eps(epsilon, log_epsilon)
    sched = schedule if schedule is not None else DeltaSchedule.default(n, m)
    normN = _norm(N)
    cert = Certificate()
    if normN == 0.0:
        S = np.eye(n, dtype=complex)
        J = np.zeros((n, n))
        F = np.zeros((n, n), dtype=complex)
        k_used = 1
    else:
        it = echelonize_iterate(N, schedule=schedule, m=m, block_sizes=block_sizes,
                                log_epsilon=log_eps, rank_tol=rank_tol)
        S2, J, S2_inv = reduced_to_jordan(it.A_prime, it.block_sizes, return_inverse=True)
        S = it.S @ S2
        S_inv = S2_inv @ it.S_inv
        F = S2_inv @ it.F @ S2
        k_used = it.k_used
    if normN == 0.0:
        S_inv = S.copy()
    lc = log_cn(n)
    base = math.log(C) + math.exp(lc) * math.log1p(normN)
    log_bound_S = base - log_eps / (2.0 * (m + 2))
    log_c_prime = math.log(m + 1) + lc + sched.log_delta[k_used]
    log_bound_F = (m + 1) * base + math.exp(log_c_prime) * log_eps
    resid = _norm(S_inv @ N @ S - J - F)
    cert.check("jnf-identity", resid, 1e-10 * max(normN, 1e-300),
               note="||S^-1 N S - J - F|| <= 1e-10 ||N||")
    nS, nSi, nF = _norm(S), _norm(S_inv), _norm(F)
    # a remainder at rounding level carries no information about the estimate
    noise = 1e-12 * normN * nS * nSi
    lS, lSi = safe_log(nS), safe_log(nSi)
    lF = safe_log(nF) if nF > noise else -math.inf
    fnote = f"C={C}; ||F|| = {nF:.3e} counted as 0 below {noise:.3e}"
    cert.check("estim-S", lS, log_bound_S, log_space=True, note=f"C={C}")
    cert.check("estim-S-inverse", lSi, log_bound_S, log_space=True, note=f"C={C}")
    cert.check("estim-F", m * lS + lF, log_bound_F, log_space=True, note=fnote)
    cert.check("estim-F-inverse", m * lSi + lF, log_bound_F, log_space=True, note=fnote)
    return JordanCertificate(S, S_inv, J, F, log_bound_S, log_bound_F, math.exp(log_eps),
                             log_eps, m, k_used, C, cert)


# --------------------------------------------------------------------------
# Jordan structure and its stability
# --------------------------------------------------------------------------

def jordan_structure(A, tol: float = 1e-9) -> tuple:
    """``(rank A, rank A^2, ..., rank A^n)``.

    Singular values below ``tol * ||A||^k`` are treated as zero for the
    ``k``-th power, so the threshold scales consistently across powers.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    normA = _norm(A)
    ranks = []
    P = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        P = P @ A
        if normA == 0.0:
            ranks.append(0)
            continue
        s = np.linalg.svd(P, compute_uv=False)
        ranks.append(int(np.sum(s > tol * normA**k)))
    return tuple(ranks)


def block_sizes_from_ranks(ranks, n):
    """Multiset of nilpotent Jordan block sizes from ``rank A^k``, largest first."""
    r = [n] + list(ranks) + [0]
    # number of blocks of size >= k is r_{k-1} - r_k
    at_least = [r[k - 1] - r[k] for k in range(1, len(r))]
    sizes = []
    for k in range(1, len(at_least) + 1):
        exact = at_least[k - 1] - (at_least[k] if k < len(at_least) else 0)
        sizes += [k] * exact
    return sorted(sizes, reverse=True)


@dataclass(frozen=True)
class StructureVerdict:
    verdict: str
    epsilon: float
    threshold: float
    log_threshold: float
    ranks_A: tuple
    ranks_B: tuple

    @property
    def guaranteed(self):
        return self.verdict == "guaranteed-equal"

    @property
    def ranks_equal(self):
        return self.ranks_A == self.ranks_B


def same_structure(A, B, C, xi: float, *, tol: float = 1e-9) -> StructureVerdict:
    """Compare Jordan structures of ``A`` and ``B`` linked by ``A C ~ C B``.

    With ``eps = ||A C - C B||``, the verdict is ``"guaranteed-equal"`` when
    ``eps < 1 / (n n! xi^n)`` and ``"inconclusive"`` otherwise; in both
    cases the rank sequences of the powers are reported.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    C = np.asarray(C, dtype=complex)
    n = A.shape[0]
    s = np.linalg.svd(C, compute_uv=False)
    if s[-1] <= 1e-14 * max(s[0], 1e-300):
        raise np.linalg.LinAlgError("C is singular")
    if max(s[0], 1.0 / s[-1]) > xi * (1 + 1e-12):
        raise ValueError(f"||C|| or ||C^-1|| exceeds xi = {xi}")
    eps = _norm(A @ C - C @ B)
    log_thr = -(math.log(n) + log_factorial(n) + n * math.log(xi))
    verdict = "guaranteed-equal" if safe_log(eps) < log_thr else "inconclusive"
    return StructureVerdict(verdict, eps, math.exp(log_thr), log_thr,
                            jordan_structure(A, tol), jordan_structure(B, tol))


# --------------------------------------------------------------------------
# Jordan blocks and real Jordan form
# --------------------------------------------------------------------------

def jordan_blocks(J, tol: float = 1e-9):
    """Split a Jordan matrix into blocks ``(start, size, eigenvalue)``.

    Raises ``ValueError`` when ``J`` has entries outside the Jordan pattern.
    """
    J = np.asarray(J, dtype=complex)
    n = J.shape[0]
    scale = max(1.0, float(np.abs(J).max()) if n else 1.0)
    off = J.copy()
    off[np.diag_indices(n)] = 0
    for i in range(n - 1):
        off[i, i + 1] = 0
    if n and np.abs(off).max() > tol * scale:
        raise ValueError("matrix is not bidiagonal")
    blocks = []
    start = 0
    for i in range(n):
        last = i == n - 1
        if not last:
            s = J[i, i + 1]
            linked = abs(s - 1.0) <= tol * scale and abs(J[i + 1, i + 1] - J[i, i]) <= tol * scale
            if not linked and abs(s) > tol * scale:
                raise ValueError(f"superdiagonal entry {s} at ({i}, {i + 1}) is neither 0 nor 1")
        if last or not linked:
            blocks.append((start, i + 1 - start, complex(J[start:i + 1, start:i + 1].diagonal().mean())))
            start = i + 1
    return blocks


def is_jordan_form(J, tol: float = 1e-9) -> bool:
    try:
        jordan_blocks(J, tol)
    except ValueError:
        return False
    return True


def realify_jordan(J, tol: float = 1e-9):
    """Real Jordan form of a Jordan matrix with conjugation-stable spectrum.

    Each block of ``alpha`` (``Im alpha > 0``) is paired with a block of the
    same size for ``conj(alpha)``; the pair is interleaved and rotated by
    ``C = [[1, -i], [1, i]] / sqrt(2)`` on every 2x2 slot, giving diagonal
    blocks ``[[Re a, Im a], [-Im a, Re a]]`` with ``I_2`` above them.

    Returns
    -------
    P : ndarray
        Unitary matrix.
    R : ndarray
        Real matrix with ``P* J P = R``.
    """
    J = np.asarray(J, dtype=complex)
    n = J.shape[0]
    blocks = jordan_blocks(J, tol)
    scale = max(1.0, float(np.abs(J).max()) if n else 1.0)
    lower = [b for b in blocks if b[2].imag < -tol * scale]
    used = [False] * len(lower)
    cols = []
    h = 1.0 / math.sqrt(2.0)
    for start, size, lam in blocks:
        if abs(lam.imag) <= tol * scale:
            for t in range(size):
                v = np.zeros(n, dtype=complex)
                v[start + t] = 1.0
                cols.append(v)
            continue
        if lam.imag < 0:
            continue
        match = None
        for i, (s2, z2, l2) in enumerate(lower):
            if not used[i] and z2 == size and abs(l2 - lam.conjugate()) <= tol * scale:
                match = i
                break
        if match is None:
            if any(abs(l2 - lam.conjugate()) <= tol * scale for _, _, l2 in lower):
                raise StructureMismatchError(f"no block of size {size} for conj({lam})")
            raise StructureMismatchError(f"spectrum is not conjugation-stable at {lam}")
        used[match] = True
        s2 = lower[match][0]
        for t in range(size):
            v1 = np.zeros(n, dtype=complex)
            v2 = np.zeros(n, dtype=complex)
            v1[start + t], v1[s2 + t] = h, h
            v2[start + t], v2[s2 + t] = -1j * h, 1j * h
            cols += [v1, v2]
    if not all(used):
        raise StructureMismatchError("unpaired blocks with negative imaginary part")
    P = np.column_stack(cols) if cols else np.zeros((0, 0), dtype=complex)
    R = P.conj().T @ J @ P
    if n and np.abs(R.imag).max() > 1e-12 * (1 + _norm(J)):
        raise AssertionError("realification produced a non-real matrix")
    return P, R.real.copy()
