"""
Matrix-valued trigonometric polynomials on the torus T^d.

A :class:`TrigPoly` is a finite map ``k -> P_hat(k)`` from lattice modes
``k in Z^d`` to complex ``n x n`` matrices, representing

    P(theta) = sum_k P_hat(k) exp(2 i pi <k, theta>).

The module provides the calculus needed by the reduction pipeline: the
derivative along a frequency vector, products, C^r norms, truncation,
pointwise inversion through a uniform grid and the two small-divisor
solvers.  ``|k|`` always denotes the l1 norm.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import DimensionError, NearResonanceError, SingularGridError

DIVISOR_FLOOR = 1e-14
_DIRECT_PRODUCT_LIMIT = 2_000_000


# --------------------------------------------------------------------------
# frequency vectors and lattice enumeration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyVector:
    """Frequency vector ``omega`` with Diophantine parameters ``(kappa, tau)``.

    Parameters
    ----------
    omega : array_like, shape (d,)
        Rationally independent real frequencies.
    kappa : float
        Positive Diophantine constant.
    tau : float
        Diophantine exponent, ``tau > d - 1``.
    """

    omega: np.ndarray
    kappa: float = 0.1
    tau: float = 1.5

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.omega, dtype=float)).copy()
        if w.ndim != 1 or w.size == 0:
            raise ValueError("omega must be a non-empty vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("omega has non-finite entries")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.tau > w.size - 1:
            raise ValueError(f"tau must exceed d - 1 = {w.size - 1}")
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def d(self):
        return self.omega.size

    def halved(self):
        """Frequency ``omega / 2``; the Diophantine constant halves as well."""
        return FrequencyVector(self.omega / 2.0, self.kappa / 2.0, self.tau)

    def to_dict(self):
        return {"omega": [float(x) for x in self.omega], "kappa": self.kappa, "tau": self.tau}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["omega"], dtype=float), data["kappa"], data["tau"])


def _as_omega(omega):
    if isinstance(omega, FrequencyVector):
        return omega.omega
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if w.ndim != 1 or w.size == 0:
        raise ValueError("omega must be a non-empty vector")
    return w


@functools.lru_cache(maxsize=64)
def _lattice_ball(N, d):
    axes = np.arange(-N, N + 1)
    grids = np.meshgrid(*([axes] * d), indexing="ij")
    K = np.stack([g.ravel() for g in grids], axis=1)
    norms = np.abs(K).sum(axis=1)
    keep = norms <= N
    K, norms = K[keep], norms[keep]
    # lexicographic order from the C-ordered meshgrid survives a stable sort
    K = K[np.argsort(norms, kind="stable")]
    K.setflags(write=False)
    return K


def lattice_ball(N: int, d: int) -> np.ndarray:
    """All ``k in Z^d`` with ``|k|_1 <= N``.

    Rows are ordered by ``|k|_1`` and lexicographically within one shell,
    so ``k = 0`` comes first.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    return _lattice_ball(int(N), int(d))


def _first_nonzero_positive(K):
    out = np.zeros(len(K), dtype=bool)
    decided = np.zeros(len(K), dtype=bool)
    for j in range(K.shape[1]):
        col = K[:, j]
        out |= ~decided & (col > 0)
        decided |= col != 0
    return out


@dataclass(frozen=True)
class DiophantineReport:
    worst_k: tuple
    worst_ratio: float
    passed: bool
    K_check: int


def check_diophantine(omega, kappa: float, tau: float, K_check: int) -> DiophantineReport:
    """Scan ``0 < |k|_1 <= K_check`` for the smallest ``|<k,omega>| |k|^tau``.

    Only one of ``k`` and ``-k`` is scanned (the one whose first nonzero
    entry is positive); ties go to the smaller norm, then lexicographic order.
    """
    w = _as_omega(omega)
    if K_check < 1:
        raise ValueError("K_check must be at least 1")
    K = lattice_ball(K_check, w.size)[1:]
    K = K[_first_nonzero_positive(K)]
    norms = np.abs(K).sum(axis=1).astype(float)
    ratio = np.abs(K @ w) * norms**tau
    i = int(np.argmin(ratio))
    worst = float(ratio[i])
    return DiophantineReport(tuple(int(x) for x in K[i]), worst, bool(worst >= kappa), int(K_check))


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------

def default_grid(degree: int) -> int:
    """Grid points per dimension: ``4 * degree + 1``, at least 16."""
    return max(16, 4 * int(degree) + 1)


def grid_points(G: int, d: int) -> np.ndarray:
    """Uniform grid ``theta = j / G`` on T^d as an array of shape (G**d, d)."""
    axes = np.arange(G) / G
    grids = np.meshgrid(*([axes] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _frequency_index(G):
    idx = np.arange(G)
    return np.where(idx <= G // 2, idx, idx - G)


# --------------------------------------------------------------------------
# trigonometric polynomials
# --------------------------------------------------------------------------

def _key(k):
    return tuple(int(x) for x in k)


class TrigPoly:
    """Matrix-valued trigonometric polynomial on T^d.

    Parameters
    ----------
    modes : mapping
        Map from lattice vectors (tuples of length ``d``) to ``n x n`` arrays.
        Exactly-zero coefficients are dropped.
    d, n : int
        Torus dimension and matrix size.

    Notes
    -----
    Instances are immutable: coefficient arrays are stored read-only and
    every operation returns a new polynomial.
    """

    __slots__ = ("_modes", "d", "n", "_arrays")
    # let ndarray operands defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, modes: Mapping, d: int, n: int):
        self.d = int(d)
        self.n = int(n)
        if self.d < 1 or self.n < 1:
            raise DimensionError("d and n must be positive")
        store = {}
        shape = (self.n, self.n)
        for k, c in modes.items():
            key = _key(k)
            if len(key) != self.d:
                raise DimensionError(f"mode {key} has length {len(key)}, expected {self.d}")
            arr = np.array(c, dtype=complex)
            if arr.shape != shape:
                if arr.ndim == 0 and self.n == 1:
                    arr = arr.reshape(1, 1)
                else:
                    raise DimensionError(f"coefficient at {key} has shape {arr.shape}")
            if not arr.any():
                continue
            arr.setflags(write=False)
            store[key] = arr
        self._modes = dict(sorted(store.items()))
        self._arrays = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def zeros(cls, d, n):
        return cls({}, d, n)

    @classmethod
    def constant(cls, M, d):
        M = np.atleast_2d(np.asarray(M, dtype=complex))
        return cls({(0,) * d: M}, d, M.shape[0])

    @classmethod
    def identity(cls, d, n):
        return cls.constant(np.eye(n), d)

    @classmethod
    def single_mode(cls, k, M):
        M = np.atleast_2d(np.asarray(M, dtype=complex))
        k = _key(k)
        return cls({k: M}, len(k), M.shape[0])

    @classmethod
    def from_arrays(cls, K, C, d, n):
        """Build from a mode array ``K`` (M, d) and coefficients ``C`` (M, n, n).

        Repeated modes are summed.
        """
        K = np.asarray(K, dtype=np.int64).reshape(-1, d)
        C = np.asarray(C, dtype=complex).reshape(-1, n, n)
        if len(K) == 0:
            return cls.zeros(d, n)
        # linear index of each mode in the bounding box, then a 1-d unique
        lo = K.min(axis=0)
        span = K.max(axis=0) - lo + 1
        lin = np.ravel_multi_index(tuple((K - lo).T), tuple(span))
        uniq, inv = np.unique(lin, return_inverse=True)
        inv = np.asarray(inv).ravel()
        if len(uniq) == len(K):
            acc = np.empty((len(uniq), n, n), dtype=complex)
            acc[inv] = C
        else:
            acc = np.zeros((len(uniq), n, n), dtype=complex)
            np.add.at(acc, inv, C)
        keep = np.any(acc.reshape(len(uniq), -1) != 0, axis=1)
        modes = np.stack(np.unravel_index(uniq[keep], tuple(span)), axis=1) + lo
        acc = acc[keep]
        acc.setflags(write=False)
        return cls._trusted({tuple(k): c for k, c in zip(modes.tolist(), acc)}, d, n)

    @classmethod
    def _trusted(cls, store, d, n):
        """Wrap an already validated, nonzero, read-only mode dict."""
        obj = cls.__new__(cls)
        obj.d, obj.n = int(d), int(n)
        obj._modes = dict(sorted(store.items()))
        obj._arrays = None
        return obj

    @classmethod
    def from_grid(cls, values, out_degree=None):
        """Discrete Fourier interpolation of samples on the uniform grid.

        Parameters
        ----------
        values : ndarray, shape (G,)*d + (n, n)
            Samples at ``theta = j / G``.
        out_degree : int, optional
            Keep modes with ``|k|_1 <= out_degree``. By default every mode in
            the symmetric box ``|k_j| <= G // 2`` is kept.
        """
        values = np.asarray(values, dtype=complex)
        n = values.shape[-1]
        d = values.ndim - 2
        G = values.shape[0]
        coef = np.fft.fftn(values, axes=tuple(range(d))) / G**d
        freqs = _frequency_index(G)
        grids = np.meshgrid(*([freqs] * d), indexing="ij")
        K = np.stack([g.ravel() for g in grids], axis=1)
        C = coef.reshape(-1, n, n)
        if out_degree is not None:
            keep = np.abs(K).sum(axis=1) <= out_degree
            K, C = K[keep], C[keep]
        return cls.from_arrays(K, C, d, n)

    @classmethod
    def from_function(cls, func, d, n, out_degree, grid=None):
        """Sample ``func`` (theta array (P, d) -> (P, n, n)) and interpolate."""
        G = grid if grid is not None else 2 * out_degree + 1
        pts = grid_points(G, d)
        vals = np.asarray(func(pts), dtype=complex).reshape((G,) * d + (n, n))
        return cls.from_grid(vals, out_degree)

    # -- basic accessors ----------------------------------------------------
    @property
    def modes(self):
        return dict(self._modes)

    def keys(self):
        return list(self._modes.keys())

    def __len__(self):
        return len(self._modes)

    def coefficient(self, k):
        c = self._modes.get(_key(k))
        if c is None:
            return np.zeros((self.n, self.n), dtype=complex)
        return c.copy()

    def arrays(self):
        """Modes and coefficients as arrays ``K`` (M, d) and ``C`` (M, n, n)."""
        if self._arrays is None:
            if self._modes:
                K = np.array(list(self._modes.keys()), dtype=np.int64).reshape(-1, self.d)
                C = np.stack(list(self._modes.values()))
            else:
                K = np.zeros((0, self.d), dtype=np.int64)
                C = np.zeros((0, self.n, self.n), dtype=complex)
            K.setflags(write=False)
            C.setflags(write=False)
            self._arrays = (K, C)
        return self._arrays

    @property
    def degree(self):
        K, _ = self.arrays()
        return int(np.abs(K).sum(axis=1).max()) if len(K) else 0

    @property
    def box_degree(self):
        """Largest ``|k_j|`` over stored modes (the l-infinity degree)."""
        K, _ = self.arrays()
        return int(np.abs(K).max()) if len(K) else 0

    def mean(self):
        """Constant Fourier coefficient, i.e. the average over the torus."""
        return self.coefficient((0,) * self.d)

    def is_zero(self):
        return not self._modes

    def max_abs(self):
        _, C = self.arrays()
        return float(np.abs(C).max()) if len(C) else 0.0

    # -- evaluation ---------------------------------------------------------
    def evaluate(self, theta):
        """Values at arbitrary points; ``theta`` has shape (d,) or (P, d)."""
        theta = np.asarray(theta, dtype=float)
        single = theta.ndim == 1
        pts = theta.reshape(-1, self.d)
        K, C = self.arrays()
        if len(K) == 0:
            out = np.zeros((len(pts), self.n, self.n), dtype=complex)
        else:
            phase = np.exp(2j * np.pi * (pts @ K.T))
            out = np.einsum("pm,mij->pij", phase, C)
        return out[0] if single else out

    __call__ = evaluate

    def on_grid(self, G):
        """Values on the uniform grid, shape (G,)*d + (n, n).

        Coefficients are folded modulo ``G`` before an inverse FFT, which is
        exact for evaluation at ``theta = j / G`` whatever the degree.
        """
        K, C = self.arrays()
        box = np.zeros((G,) * self.d + (self.n, self.n), dtype=complex)
        if len(K):
            idx = tuple((K % G).T)
            np.add.at(box, idx, C)
        return np.fft.ifftn(box, axes=tuple(range(self.d))) * G**self.d

    # -- algebra ------------------------------------------------------------
    def _check_same(self, other):
        if self.d != other.d or self.n != other.n:
            raise DimensionError(f"(d, n) = ({self.d}, {self.n}) vs ({other.d}, {other.n})")

    def _coerce(self, other):
        if isinstance(other, TrigPoly):
            self._check_same(other)
            return other
        arr = np.asarray(other, dtype=complex)
        if arr.ndim == 0:
            arr = arr * np.eye(self.n)
        return TrigPoly.constant(arr, self.d)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._modes)
        for k, c in other._modes.items():
            out[k] = out[k] + c if k in out else c
        return TrigPoly(out, self.d, self.n)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly({k: -c for k, c in self._modes.items()}, self.d, self.n)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, scalar):
        if isinstance(scalar, TrigPoly):
            return NotImplemented
        s = complex(scalar)
        return TrigPoly({k: s * c for k, c in self._modes.items()}, self.d, self.n)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / complex(scalar))

    def __matmul__(self, other):
        if isinstance(other, TrigPoly):
            return multiply(self, other)
        M = np.asarray(other, dtype=complex)
        return TrigPoly({k: c @ M for k, c in self._modes.items()}, self.d, M.shape[1])

    def __rmatmul__(self, other):
        M = np.asarray(other, dtype=complex)
        return TrigPoly({k: M @ c for k, c in self._modes.items()}, self.d, M.shape[0])

    def scale_modes(self, factor):
        """Multiply each coefficient by ``factor(k)`` (scalar per mode)."""
        return TrigPoly({k: factor(k) * c for k, c in self._modes.items()}, self.d, self.n)

    def map_coefficients(self, func, n=None):
        return TrigPoly({k: func(c) for k, c in self._modes.items()}, self.d,
                        self.n if n is None else n)

    # -- reality ------------------------------------------------------------
    def conj(self):
        """The pointwise complex conjugate function ``theta -> conj(P(theta))``."""
        return TrigPoly({tuple(-x for x in k): c.conj() for k, c in self._modes.items()},
                        self.d, self.n)

    def conj_transpose(self):
        return TrigPoly({tuple(-x for x in k): c.conj().T for k, c in self._modes.items()},
                        self.d, self.n)

    def transpose(self):
        return TrigPoly({k: c.T for k, c in self._modes.items()}, self.d, self.n)

    def _paired_keys(self):
        keys = set(self._modes)
        keys |= {tuple(-x for x in k) for k in keys}
        return sorted(keys)

    def real_part(self):
        """``(P + conj P) / 2``; the result satisfies :meth:`is_real` bit-exactly."""
        zero = np.zeros((self.n, self.n), dtype=complex)
        out = {}
        for k in self._paired_keys():
            a = self._modes.get(k, zero)
            b = self._modes.get(tuple(-x for x in k), zero)
            out[k] = (a + b.conj()) * 0.5
        return TrigPoly(out, self.d, self.n)

    def imag_part(self):
        """``(P - conj P) / (2i)``; real-valued bit-exactly."""
        zero = np.zeros((self.n, self.n), dtype=complex)
        out = {}
        for k in self._paired_keys():
            a = self._modes.get(k, zero)
            b = self._modes.get(tuple(-x for x in k), zero)
            out[k] = (a - b.conj()) * (-0.5j)
        return TrigPoly(out, self.d, self.n)

    def is_real(self, tol=0.0):
        """True iff ``P_hat(-k) == conj(P_hat(k))`` for every mode (within ``tol``)."""
        zero = np.zeros((self.n, self.n), dtype=complex)
        for k, c in self._modes.items():
            other = self._modes.get(tuple(-x for x in k), zero)
            if tol == 0.0:
                if not np.array_equal(other, c.conj()):
                    return False
            elif np.abs(other - c.conj()).max() > tol:
                return False
        return True

    def real_combination(self, lam):
        """``Re P + lam Im P`` built mode by mode (exactly real-valued)."""
        lam = float(lam)
        zero = np.zeros((self.n, self.n), dtype=complex)
        out = {}
        for k in self._paired_keys():
            a = self._modes.get(k, zero)
            b = self._modes.get(tuple(-x for x in k), zero).conj()
            out[k] = (a + b) * 0.5 + ((a - b) * (-0.5j)) * lam
        return TrigPoly(out, self.d, self.n)

    # -- misc ---------------------------------------------------------------
    def trace(self):
        return TrigPoly({k: np.array([[np.trace(c)]]) for k, c in self._modes.items()}, self.d, 1)

    def scalar_times_identity(self, n):
        """Scalar polynomial (n == 1) promoted to ``p(theta) * I_n``."""
        if self.n != 1:
            raise DimensionError("expected a scalar polynomial")
        eye = np.eye(n)
        return TrigPoly({k: c[0, 0] * eye for k, c in self._modes.items()}, self.d, n)

    def block(self, rows, cols):
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        if len(rows) != len(cols):
            raise DimensionError("only square blocks are supported")
        return TrigPoly({k: c[np.ix_(rows, cols)] for k, c in self._modes.items()}, self.d, len(rows))

    def allclose(self, other, atol=1e-12):
        other = self._coerce(other)
        diff = self - other
        return diff.max_abs() <= atol

    def equals(self, other):
        if not isinstance(other, TrigPoly) or (self.d, self.n) != (other.d, other.n):
            return False
        if self._modes.keys() != other._modes.keys():
            return False
        return all(np.array_equal(c, other._modes[k]) for k, c in self._modes.items())

    def __repr__(self):
        return f"TrigPoly(d={self.d}, n={self.n}, modes={len(self)}, degree={self.degree})"

    # -- serialization ------------------------------------------------------
    def to_dict(self, omega=None):
        out = {"d": self.d, "n": self.n,
               "omega": None if omega is None else [float(x) for x in _as_omega(omega)],
               "modes": []}
        for k, c in self._modes.items():
            out["modes"].append({"k": list(k), "re": c.real.tolist(), "im": c.imag.tolist()})
        return out

    @classmethod
    def from_dict(cls, data):
        d = int(data["d"])
        n = int(data["n"])
        modes = {}
        for m in data["modes"]:
            k = _key(m["k"])
            c = np.asarray(m["re"], dtype=float) + 1j * np.asarray(m["im"], dtype=float)
            modes[k] = modes[k] + c if k in modes else c
        return cls(modes, d, n)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def directional_derivative(P: TrigPoly, omega) -> TrigPoly:
    """Derivative along ``omega``: mode ``k`` is multiplied by ``2 i pi <k, omega>``."""
    w = _as_omega(omega)
    if w.size != P.d:
        raise DimensionError(f"omega has dimension {w.size}, polynomial lives on T^{P.d}")
    return P.scale_modes(lambda k: 2j * np.pi * float(np.dot(k, w)))


def multiply(P: TrigPoly, Q: TrigPoly) -> TrigPoly:
    """Product ``P(theta) Q(theta)`` as a Fourier convolution.

    Small operands are convolved directly; large ones go through an
    alias-free grid, which is exact up to rounding.
    """
    if P.d != Q.d or P.n != Q.n:
        raise DimensionError(f"(d, n) = ({P.d}, {P.n}) vs ({Q.d}, {Q.n})")
    if P.is_zero() or Q.is_zero():
        return TrigPoly.zeros(P.d, P.n)
    K1, C1 = P.arrays()
    K2, C2 = Q.arrays()
    n = P.n
    if len(K1) * len(K2) * n * n <= _DIRECT_PRODUCT_LIMIT:
        K = (K1[:, None, :] + K2[None, :, :]).reshape(-1, P.d)
        C = np.einsum("aij,bjk->abik", C1, C2).reshape(-1, n, n)
        return TrigPoly.from_arrays(K, C, P.d, n)
    G = 2 * (P.box_degree + Q.box_degree) + 1
    vals = P.on_grid(G) @ Q.on_grid(G)
    return TrigPoly.from_grid(vals, P.degree + Q.degree)


def _multi_indices(d, r):
    return [a for a in itertools.product(range(r + 1), repeat=d) if sum(a) <= r]


def cr_norm(P: TrigPoly, r: int, method: str = "fourier-bound", grid: int | None = None) -> float:
    """C^r norm of ``P``.

    Parameters
    ----------
    r : int
        Order of differentiation.
    method : {"fourier-bound", "grid-sup"}
        ``grid-sup`` is the maximum over grid points of ``||d^a P(theta)||``
        for ``|a| <= r`` (operator norm). ``fourier-bound`` is
        ``sum_k max(1, (2 pi |k|)^r) ||P_hat(k)||``, an upper bound for it.
    grid : int, optional
        Points per dimension for ``grid-sup``; default ``max(16, 4 deg + 1)``.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    if P.is_zero():
        return 0.0
    K, C = P.arrays()
    if method == "fourier-bound":
        norms = np.linalg.norm(C, ord=2, axis=(1, 2))
        weight = np.maximum(1.0, (2 * np.pi * np.abs(K).sum(axis=1)) ** r)
        return float(np.sum(weight * norms))
    if method != "grid-sup":
        raise ValueError(f"unknown method {method!r}")
    G = grid if grid is not None else default_grid(P.degree)
    best = 0.0
    for alpha in _multi_indices(P.d, r):
        factor = np.prod((2j * np.pi * K) ** np.asarray(alpha), axis=1)
        D = TrigPoly.from_arrays(K, C * factor[:, None, None], P.d, P.n)
        vals = D.on_grid(G).reshape(-1, P.n, P.n)
        if len(vals):
            best = max(best, float(np.linalg.norm(vals, ord=2, axis=(1, 2)).max()))
    return best


@dataclass(frozen=True)
class NormReport:
    c0: float
    cr: dict = field(default_factory=dict)
    method: str = "fourier-bound"


def norm_report(P: TrigPoly, r_max: int, method: str = "fourier-bound", grid=None) -> NormReport:
    cr = {r: cr_norm(P, r, method, grid) for r in range(r_max + 1)}
    return NormReport(cr[0], cr, method)


def sup_norm(P: TrigPoly, grid=None) -> float:
    """C^0 grid-sup norm (operator norm)."""
    return cr_norm(P, 0, "grid-sup", grid)


def truncate(P: TrigPoly, N: int) -> TrigPoly:
    """Drop modes with ``|k|_1 > N``; kept coefficients are untouched."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    return TrigPoly({k: c for k, c in P._modes.items() if sum(abs(x) for x in k) <= N}, P.d, P.n)


def tail_norm(P: TrigPoly, N: int) -> float:
    """``sum_{|k| > N} ||P_hat(k)||``, a bound for ``||P - truncate(P, N)||_{C^0}``."""
    return sum(float(np.linalg.norm(c, 2)) for k, c in P._modes.items()
               if sum(abs(x) for x in k) > N)


def double_angle(P: TrigPoly) -> TrigPoly:
    """``theta -> P(2 theta)``: mode ``k`` moves to ``2k``."""
    return TrigPoly({tuple(2 * x for x in k): c for k, c in P._modes.items()}, P.d, P.n)


def shift_modes(P: TrigPoly, m) -> TrigPoly:
    """Multiply by the scalar phase ``exp(2 i pi <m, theta>)``."""
    m = _key(m)
    return TrigPoly({tuple(a + b for a, b in zip(k, m)): c for k, c in P._modes.items()}, P.d, P.n)


def invert_on_grid(P: TrigPoly, grid_per_dim: int | None = None, out_degree: int | None = None,
                   *, det_tol: float = 1e-12, return_error: bool = False):
    """Approximate inverse of ``P`` by interpolating ``theta -> P(theta)^{-1}``.

    Parameters
    ----------
    grid_per_dim : int, optional
        Grid points per dimension; default ``2 (deg P + out_degree) + 1``.
    out_degree : int, optional
        Truncation degree of the result; default ``max(4 deg P, 8)``.
    det_tol : float
        Minimal admissible ``|det P(theta)|`` on the grid.
    return_error : bool
        Also return ``max ||P(theta) Q(theta) - I||`` over the grid.

    Raises
    ------
    SingularGridError
        If ``|det P|`` drops below ``det_tol`` at some grid point.
    """
    deg = P.degree
    if out_degree is None:
        out_degree = max(4 * deg, 8) if deg else 0
    if grid_per_dim is None:
        grid_per_dim = max(2 * (deg + out_degree) + 1, 3)
    G = int(grid_per_dim)
    if G < 2 * (deg + out_degree) + 1:
        warnings.warn(f"grid of {G} points per dimension may alias degree "
                      f"{deg} + {out_degree} products", RuntimeWarning, stacklevel=2)
    vals = P.on_grid(G)
    flat = vals.reshape(-1, P.n, P.n)
    dets = np.abs(np.linalg.det(flat))
    i = int(np.argmin(dets))
    if dets[i] < det_tol:
        raise SingularGridError(grid_points(G, P.d)[i], dets[i])
    inv = np.linalg.inv(flat).reshape(vals.shape)
    Q = TrigPoly.from_grid(inv, out_degree)
    if not return_error:
        return Q
    err = np.linalg.norm(flat @ Q.on_grid(G).reshape(flat.shape) - np.eye(P.n), ord=2, axis=(1, 2))
    return Q, float(err.max())


def det_poly(P: TrigPoly) -> TrigPoly:
    """``theta -> det P(theta)`` as a scalar polynomial (exact up to rounding)."""
    L = P.box_degree
    G = 2 * P.n * L + 1
    vals = np.linalg.det(P.on_grid(G).reshape(-1, P.n, P.n)).reshape((G,) * P.d + (1, 1))
    return TrigPoly.from_grid(vals, P.n * P.degree)


def mean_det(P: TrigPoly) -> complex:
    """Average of ``det P`` over the torus, by exact grid quadrature."""
    G = P.n * P.box_degree + 1
    vals = np.linalg.det(P.on_grid(G).reshape(-1, P.n, P.n))
    return complex(vals.mean())


def exp_on_grid(P: TrigPoly, out_degree: int, grid: int | None = None) -> TrigPoly:
    """Interpolated pointwise matrix exponential ``theta -> exp(P(theta))``."""
    G = grid if grid is not None else 2 * out_degree + 1
    vals = P.on_grid(G)
    if P.n == 1:
        out = np.exp(vals)
    else:
        out = scipy.linalg.expm(vals.reshape(-1, P.n, P.n)).reshape(vals.shape)
    return TrigPoly.from_grid(out, out_degree)


def _check_dc_modes(P: TrigPoly, omega):
    if not isinstance(omega, FrequencyVector):
        return
    K, _ = P.arrays()
    nz = np.abs(K).sum(axis=1) > 0
    if not np.any(nz):
        return
    K = K[nz]
    ratio = np.abs(K @ omega.omega) * np.abs(K).sum(axis=1) ** omega.tau
    if np.any(ratio < omega.kappa):
        i = int(np.argmin(ratio))
        warnings.warn(f"mode {tuple(K[i])} violates the Diophantine condition "
                      f"(ratio {ratio[i]:.3e} < kappa {omega.kappa:.3e}); bound not certified",
                      RuntimeWarning, stacklevel=3)


def solve_small_divisor(f: TrigPoly, omega, *, floor: float = DIVISOR_FLOOR) -> TrigPoly:
    """Zero-mean solution ``g`` of ``d_omega g = f - f_hat(0)``.

    ``g_hat(k) = f_hat(k) / (2 i pi <k, omega>)`` for ``k != 0``.

    Raises
    ------
    NearResonanceError
        If ``|2 pi <k, omega>|`` is below ``floor`` for a mode present in ``f``.
    """
    w = _as_omega(omega)
    if w.size != f.d:
        raise DimensionError("dimension mismatch between f and omega")
    _check_dc_modes(f, omega)
    out = {}
    for k, c in f._modes.items():
        if not any(k):
            continue
        div = 2j * np.pi * float(np.dot(k, w))
        if abs(div) < floor:
            raise NearResonanceError(k, abs(div), floor)
        out[k] = c / div
    return TrigPoly(out, f.d, f.n)


def small_divisor_bound(f: TrigPoly, omega: FrequencyVector) -> float:
    """``(1 / (2 pi kappa)) sum_{k != 0} |k|^tau ||f_hat(k)||``."""
    total = 0.0
    for k, c in f._modes.items():
        if any(k):
            total += sum(abs(x) for x in k) ** omega.tau * float(np.linalg.norm(c, 2))
    return total / (2 * np.pi * omega.kappa)


def solve_shifted(f: TrigPoly, alpha: complex, omega, N: int, rho: float, *,
                  floor: float = DIVISOR_FLOOR) -> TrigPoly:
    """Solution of ``d_omega u - alpha u = f`` for ``f`` of degree at most ``N``.

    ``u_hat(k) = f_hat(k) / (2 i pi <k, omega> - alpha)``.  Every divisor
    with ``|k| <= N`` must be at least ``rho`` in modulus.
    """
    w = _as_omega(omega)
    if w.size != f.d:
        raise DimensionError("dimension mismatch between f and omega")
    if f.degree > N:
        raise ValueError(f"f has degree {f.degree} > N = {N}")
    K = lattice_ball(N, f.d)
    div = 2j * np.pi * (K @ w) - complex(alpha)
    mags = np.abs(div)
    i = int(np.argmin(mags))
    if mags[i] < max(rho, floor):
        raise NearResonanceError(K[i], mags[i], max(rho, floor))
    out = {}
    for k, c in f._modes.items():
        out[k] = c / (2j * np.pi * float(np.dot(k, w)) - complex(alpha))
    return TrigPoly(out, f.d, f.n)


def shifted_bound(f: TrigPoly, N: int, rho: float) -> float:
    """Hoelder-type bound ``rho^{-1} #{|k| <= N}^{1/2} (sum ||f_hat(k)||^2)^{1/2}``."""
    count = len(lattice_ball(N, f.d))
    l2 = math.sqrt(sum(float(np.linalg.norm(c, 2)) ** 2 for c in f._modes.values()))
    return math.sqrt(count) * l2 / rho
