"""
Cocycle-level reduction pipeline.

A conjugation triple ``(Z, B, F)`` for the cocycle ``(omega, A)`` satisfies

    d_omega Z = A Z - Z (B + F)

up to a residual.  The functions here transform such triples: trace and
determinant normalisation, realification of a complex conjugation
(``W = Re Z + lambda Im Z``), block/Jordan normal forms of ``B``, the
period-doubling construction of a diagonal phase conjugation ``W`` that
makes the constant part real, and the end-to-end pipeline producing real
triples for ``(omega / 2, A(2 theta))``.

Every step records checked inequalities.  Quantitative hypotheses whose
constants are not explicit are evaluated with user-supplied constants and
reported separately from the algebraic certificates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .certificates import Certificate, safe_log
from .errors import (CertificateError, DimensionError, HypothesisError, ReductionError,
                     StructureMismatchError)
from .harmonics import (FrequencyVector, TrigPoly, check_diophantine, cr_norm, default_grid,
                        det_poly, directional_derivative, double_angle, exp_on_grid,
                        invert_on_grid, solve_small_divisor, sup_norm, truncate)
from .jordan import (is_jordan_form, jordan_blocks, jordan_structure, nilpotent_jnf,
                     realify_jordan)
from .resonance import CASE_ODD, CASE_S1, ClassReport, analyze_classes, build_graph
from .serialization import matrix_from_dict, matrix_to_dict
from .spectral import adaptive_separation, to_single_eigenvalue_blocks

__all__ = [
    "Cocycle", "ConjugationTriple", "DoublingResult", "StepReport", "NormalFormPolicy",
    "PipelineParams", "PipelineResult", "LambdaChoice", "TransportReport", "DiagonalSelection",
    "residual", "residual_norm", "make_triple", "normalize_trace", "det_transport_check",
    "choose_lambda", "realify_step", "doubling_conjugation", "almost_real_step",
    "normal_form_steps", "full_pipeline", "select_diagonal", "default_C1", "default_Cd",
]

MODES = ("strict", "diagnostic")


def default_C1(n: int, d: int) -> float:
    """Default for the unspecified constant of the almost-real step."""
    return 16.0 * n * n * 3.0**d


def default_Cd(d: int) -> float:
    """Default for the truncation constant (depends on ``d`` only)."""
    return 16.0 * 3.0**d


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Cocycle:
    """Quasi-periodic cocycle ``(omega, A)``."""

    omega: FrequencyVector
    A: TrigPoly

    def __post_init__(self):
        if not isinstance(self.omega, FrequencyVector):
            object.__setattr__(self, "omega", FrequencyVector(np.asarray(self.omega, dtype=float)))
        if self.A.d != self.omega.d:
            raise DimensionError(f"A lives on T^{self.A.d} but omega has length {self.omega.d}")

    @property
    def n(self):
        return self.A.n

    @property
    def d(self):
        return self.A.d

    @property
    def real_flag(self):
        return self.A.is_real()

    def halved(self):
        """The cocycle ``(omega / 2, A(2 theta))``."""
        return Cocycle(self.omega.halved(), double_angle(self.A))

    def to_dict(self):
        return {"omega": self.omega.to_dict(), "A": self.A.to_dict(), "real": self.real_flag}

    @classmethod
    def from_dict(cls, data):
        return cls(FrequencyVector.from_dict(data["omega"]), TrigPoly.from_dict(data["A"]))


@dataclass
class ConjugationTriple:
    """``(Z, Z_inv, B, F)`` with ``d_omega Z = A Z - Z (B + F)`` up to ``residual_norm``."""

    Z: TrigPoly
    Z_inv: TrigPoly
    B: np.ndarray
    F: TrigPoly
    residual_norm: float = math.nan
    certificate: Certificate = field(default_factory=Certificate)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.B = np.asarray(self.B)
        n = self.Z.n
        if self.B.shape != (n, n) or self.F.n != n or self.Z_inv.n != n:
            raise DimensionError("Z, Z_inv, B and F must all be n x n")

    @property
    def n(self):
        return self.Z.n

    def inverse_error(self, grid=None):
        """``||Z Z_inv - I||_{C^0}`` on the grid."""
        return sup_norm(self.Z @ self.Z_inv - np.eye(self.n), grid)

    def to_dict(self):
        return {"Z": self.Z.to_dict(), "Z_inv": self.Z_inv.to_dict(), "B": matrix_to_dict(self.B),
                "F": self.F.to_dict(), "residual_norm": float(self.residual_norm)}

    @classmethod
    def from_dict(cls, data):
        return cls(TrigPoly.from_dict(data["Z"]), TrigPoly.from_dict(data["Z_inv"]),
                   matrix_from_dict(data["B"]), TrigPoly.from_dict(data["F"]),
                   float(data.get("residual_norm", math.nan)))


@dataclass
class DoublingResult:
    """``d_{omega/2} W = B W - W (B' + B'')`` with ``B'`` real.

    ``W = W_diag P`` where ``W_diag`` is diagonal with one Fourier mode per
    entry and ``P`` is the constant unitary bringing ``B'`` to real Jordan
    form.  ``W_diag`` commutes with ``B``.
    """

    W: TrigPoly
    W_inv: TrigPoly
    B_prime: np.ndarray
    B_dprime: np.ndarray
    W_diag: TrigPoly
    P: np.ndarray
    modes: list
    bounds: dict
    certificate: Certificate = field(default_factory=Certificate)
    hypotheses: Certificate = field(default_factory=Certificate)
    diagnostics: Certificate = field(default_factory=Certificate)
    report: ClassReport | None = None
    info: dict = field(default_factory=dict)


@dataclass
class StepReport:
    """One pipeline step: checked inequalities and residuals around it."""

    step: int
    op: str
    certificate: Certificate = field(default_factory=Certificate)
    hypotheses: Certificate = field(default_factory=Certificate)
    diagnostics: Certificate = field(default_factory=Certificate)
    residual_before: float = math.nan
    residual_after: float = math.nan
    triple: int = 0

    @property
    def passed(self):
        return self.certificate.passed

    def to_dict(self):
        ineqs = self.certificate.to_list()
        ineqs += [dict(x, kind="hypothesis") for x in self.hypotheses.to_list()]
        ineqs += [dict(x, kind="diagnostic") for x in self.diagnostics.to_list()]
        return {"step": self.step, "op": self.op, "triple": self.triple, "inequalities": ineqs,
                "residual_before": self.residual_before, "residual_after": self.residual_after}


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")


def _hyp(cert, mode, name, lhs, rhs, *, log_space=False, note="", step=None):
    ineq = cert.check(name, lhs, rhs, log_space=log_space, note=note)
    if mode == "strict" and not ineq.passed:
        raise HypothesisError(name, ineq.lhs, ineq.rhs, step)
    return ineq


def _prune(P: TrigPoly, atol: float) -> TrigPoly:
    return TrigPoly({k: c for k, c in P.modes.items() if np.abs(c).max() > atol}, P.d, P.n)


# --------------------------------------------------------------------------
# residuals and normalisations
# --------------------------------------------------------------------------

def residual(C: Cocycle, T: ConjugationTriple) -> TrigPoly:
    """``d_omega Z - A Z + Z (B + F)``."""
    if T.Z.d != C.d or T.n != C.n:
        raise DimensionError("triple and cocycle dimensions differ")
    return directional_derivative(T.Z, C.omega) - C.A @ T.Z + T.Z @ (T.F + T.B)


def residual_norm(C: Cocycle, T: ConjugationTriple, grid=None) -> float:
    """C^0 grid-sup norm of :func:`residual`."""
    return sup_norm(residual(C, T), grid)


def make_triple(C: Cocycle, Z: TrigPoly, B, F: TrigPoly | None = None, Z_inv: TrigPoly | None = None,
                *, inverse_degree: int | None = None) -> ConjugationTriple:
    """Assemble a triple, inverting ``Z`` on a grid when no inverse is given."""
    B = np.asarray(B)
    if F is None:
        F = TrigPoly.zeros(Z.d, Z.n)
    if Z_inv is None:
        Z_inv = invert_on_grid(Z, out_degree=inverse_degree)
    T = ConjugationTriple(Z, Z_inv, B, F)
    T.residual_norm = residual_norm(C, T)
    return T


def _exp_scalar(g: TrigPoly, tol: float = 1e-15, max_degree: int = 256):
    """Truncated ``exp(g)`` for a scalar polynomial with its discarded tail estimate."""
    deg = g.degree
    if deg == 0:
        return TrigPoly.constant(np.exp(g.mean()), g.d), 0.0
    L = max(8, 4 * deg)
    while True:
        E = exp_on_grid(g, L + deg, grid=2 * (L + deg) + 1)
        tail = sum(float(abs(c[0, 0])) for k, c in E.modes.items() if sum(map(abs, k)) > L)
        if tail <= tol * max(1.0, E.max_abs()) or L >= max_degree:
            return truncate(E, L), tail
        L *= 2


def normalize_trace(C: Cocycle, *, return_info: bool = False):
    """Conjugate ``A`` to a cocycle of constant trace.

    With ``f = Tr A - mean(Tr A)`` and ``d_omega g = f / n``, the scalar
    conjugation ``Z = exp(g) I`` gives ``d_omega Z = A Z - Z B`` for
    ``B = A - (f / n) I``, whose trace is the constant ``mean(Tr A)``.

    Returns
    -------
    Z, B : TrigPoly
        ``Z`` is ``exp(g)`` truncated once its tail is below ``1e-15``.
    info : dict, optional
        ``g`` and the discarded tail, when ``return_info``.
    """
    n = C.n
    f = C.A.trace()
    f = f - f.mean()
    g = solve_small_divisor(f / n, C.omega)
    E, tail = _exp_scalar(g)
    Z = E.scalar_times_identity(n)
    B = C.A - (f / n).scalar_times_identity(n)
    if return_info:
        return Z, B, {"g": g, "truncation_error": tail}
    return Z, B


class TransportReport(NamedTuple):
    """Determinant transport along the cocycle.

    ``max_defect`` is the grid maximum of
    ``|d det Z - Tr(A - B - F) det Z|``, which vanishes for an exact triple;
    ``identity_defect`` also subtracts ``Tr(R adj Z)`` for the residual
    ``R`` and vanishes for every triple.
    """

    max_defect: float
    identity_defect: float
    scale: float
    grid: int


def det_transport_check(C: Cocycle, T: ConjugationTriple, grid: int | None = None) -> TransportReport:
    """Check ``d_omega det Z = Tr(A - B) det Z + Tr(F_L adj Z)`` on a grid.

    Here ``F_L = -Z F + R`` collects the remainder of the triple written as
    ``d_omega Z = A Z - Z B + F_L``.
    """
    n = T.n
    D = det_poly(T.Z)
    dD = directional_derivative(D, C.omega)
    R = residual(C, T)
    deg = max(D.degree, C.A.degree, T.F.degree, R.degree, 1)
    G = grid if grid is not None else default_grid(deg)
    Zv = T.Z.on_grid(G).reshape(-1, n, n)
    det = np.linalg.det(Zv)
    lhs = dD.on_grid(G).reshape(-1)
    trA = np.trace(C.A.on_grid(G).reshape(-1, n, n), axis1=1, axis2=2)
    trF = np.trace(T.F.on_grid(G).reshape(-1, n, n), axis1=1, axis2=2)
    rhs = (trA - np.trace(T.B) - trF) * det
    defect = np.abs(lhs - rhs)
    adj = det[:, None, None] * np.linalg.inv(Zv)
    trR = np.trace(R.on_grid(G).reshape(-1, n, n) @ adj, axis1=1, axis2=2)
    scale = float(max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-300))
    return TransportReport(float(defect.max()), float(np.abs(lhs - rhs - trR).max()), scale, G)


# --------------------------------------------------------------------------
# realification
# --------------------------------------------------------------------------

class LambdaChoice(NamedTuple):
    lambda0: float
    value: complex
    bound: float


def _det_mean(values, lam):
    M = values.real + lam * values.imag
    return complex(np.linalg.det(M).mean())


def choose_lambda(Z, *, grid: int | None = None, check_tol: float = 1e-8) -> LambdaChoice:
    """Real ``lambda_0`` in ``[-1, 1]`` keeping ``mean det(Re Z + lambda Im Z)`` away from 0.

    ``P(lambda)`` is a polynomial of degree ``n``, interpolated at ``n + 1``
    Chebyshev nodes.  Among the ``n + 1`` slots
    ``(-1 + 2k / (n + 1), -1 + 2(k + 1) / (n + 1))`` one contains no real
    part of a root; its midpoint satisfies
    ``|P(lambda_0)| >= (4 (n + 1))^(-n)`` when ``|mean det Z| = 1``.  When
    several slots are free the one with the largest ``|P|`` is used.

    Parameters
    ----------
    Z : TrigPoly or ndarray
        A polynomial, or its samples on a uniform grid with shape
        ``(G,)*d + (n, n)`` (or ``(P, n, n)``).
    grid : int, optional
        Quadrature grid for a polynomial input; default exact for ``det``.

    Raises
    ------
    HypothesisError
        ``|mean det Z|`` differs from 1 by more than ``check_tol``.
    """
    if isinstance(Z, TrigPoly):
        n = Z.n
        G = grid if grid is not None else n * max(Z.box_degree, 0) + 1
        values = Z.on_grid(G).reshape(-1, n, n)
    else:
        values = np.asarray(Z, dtype=complex)
        n = values.shape[-1]
        values = values.reshape(-1, n, n)
    mean_det = complex(np.linalg.det(values).mean())
    if abs(abs(mean_det) - 1.0) > check_tol:
        raise HypothesisError("det-normalization", abs(mean_det), 1.0)
    nodes = np.cos(np.pi * (2 * np.arange(n + 1) + 1) / (2 * (n + 1)))
    vals = np.array([_det_mean(values, x) for x in nodes])
    coef = np.polynomial.chebyshev.chebfit(nodes, vals, n)
    big = np.abs(coef).max()
    while len(coef) > 1 and abs(coef[-1]) <= 1e-13 * big:
        coef = coef[:-1]
    roots = np.polynomial.chebyshev.chebroots(coef) if len(coef) > 1 else np.array([])
    re = np.real(roots)
    best = None
    for k in range(n + 1):
        lo, hi = -1 + 2 * k / (n + 1), -1 + 2 * (k + 1) / (n + 1)
        if np.any((re > lo) & (re < hi)):
            continue
        lam = -1 + (2 * k + 1) / (n + 1)
        v = _det_mean(values, lam)
        if best is None or abs(v) > abs(best[1]):
            best = (lam, v)
    if best is None:
        raise ReductionError("no root-free slot found")
    return LambdaChoice(float(best[0]), best[1], float((4.0 * (n + 1)) ** (-n)))


def _realify_grid(Z: TrigPoly, g: TrigPoly) -> int:
    deg = Z.box_degree * Z.n + 8 * max(g.box_degree, 0)
    return max(32, 2 * deg + 1)


def realify_step(C: Cocycle, T: ConjugationTriple, *, mode: str = "diagnostic",
                 inverse_degree: int | None = None, step: int | None = None) -> ConjugationTriple:
    """Real conjugation ``W = Re(Z / a) + lambda Im(Z / a)`` for a real cocycle.

    The sequence is: trace normalisation of ``A`` by ``exp(g) I``; scalar
    rescaling by ``a = (mean det(exp(-g) Z))^(1/n)`` (principal branch);
    recentring ``B += Re(s) I``, ``F -= Re(s) I`` with
    ``s = (1/n) mean(Tr F det(exp(-g) Z / a))``; ``lambda`` from
    :func:`choose_lambda`; and ``G = W^{-1} (Re(Z F / a) + lambda Im(Z F / a))``.
    Since ``exp(g)`` is a real scalar the returned conjugation of ``A`` is
    directly ``W``.

    Raises
    ------
    HypothesisError
        ``A`` is not real.
    CertificateError
        ``|det W|`` drops below half its mean somewhere on the grid (the
        triple is too far from exact for this step).
    """
    _check_mode(mode)
    if not C.real_flag:
        raise HypothesisError("real-cocycle", step=step)
    n, d = C.n, C.d
    cert = Certificate()
    diag = Certificate()
    B = np.asarray(T.B, dtype=complex)
    F = T.F
    if np.any(B.imag != 0):
        # keep B + F unchanged and B real
        F = F + 1j * B.imag
        B = B.real.astype(complex)
    f = C.A.trace()
    f = f - f.mean()
    g = solve_small_divisor(f / n, C.omega)
    G = _realify_grid(T.Z, g)
    Zv = T.Z.on_grid(G).reshape(-1, n, n)
    gv = g.on_grid(G).reshape(-1).real
    Z1 = np.exp(-gv)[:, None, None] * Zv
    mu = complex(np.linalg.det(Z1).mean())
    if abs(mu) <= 1e-12 * max(1.0, float(np.abs(np.linalg.det(Z1)).max())):
        raise HypothesisError("mean-det-nonzero", abs(mu), 0.0, step)
    a = abs(mu) ** (1.0 / n) * np.exp(1j * np.angle(mu) / n)
    Z1 = Z1 / a
    s = complex((np.trace(F.on_grid(G).reshape(-1, n, n), axis1=1, axis2=2)
                 * np.linalg.det(Z1)).mean()) / n
    B = (B + s.real * np.eye(n)).real
    F = F - s.real * np.eye(n)
    choice = choose_lambda(Z1)
    lam = choice.lambda0
    cert.check("lambda-pigeonhole", -abs(choice.value), -choice.bound,
               note="|P(lambda_0)| >= (4(n+1))^-n")
    Zs = T.Z / a
    W = Zs.real_combination(lam)
    cert.check("W-real", 0.0 if W.is_real() else 1.0, 0.0, note="exact mode symmetry")
    Wv = W.on_grid(G).reshape(-1, n, n)
    detW2 = np.linalg.det(np.exp(-gv)[:, None, None] * Wv)
    mean_detW2 = complex(detW2.mean())
    ineq = cert.check("det-lower-bound", -float(np.abs(detW2).min()), -0.5 * abs(mean_detW2),
                      note="|det W''| >= |mean det W''| / 2 on the grid")
    if not ineq.passed:
        raise CertificateError("det-lower-bound", ineq.lhs, ineq.rhs)
    # small-divisor control of det W'' - mean: d_omega(det W'') = H
    Dg = np.fft.fftn(detW2.reshape((G,) * d), axes=tuple(range(d))) / G**d
    freqs = np.fft.fftfreq(G, 1.0 / G).astype(int)
    K = np.stack([x.ravel() for x in np.meshgrid(*([freqs] * d), indexing="ij")], axis=1)
    Dc = Dg.reshape(-1)
    keep = (np.abs(K).sum(axis=1) > 0) & (np.abs(Dc) > 1e-15 * max(abs(mean_detW2), 1e-300))
    Kk, Dk = K[keep], Dc[keep]
    H = 2 * np.pi * np.abs(Kk @ C.omega.omega) * np.abs(Dk)
    bound = float(np.sum(np.abs(Kk).sum(axis=1) ** C.omega.tau * H) / (2 * np.pi * C.omega.kappa))
    diag.check("det-oscillation", float(np.abs(detW2 - mean_detW2).max()), bound + 1e-15,
               note="||det W'' - mean||_C0 <= (2 pi kappa)^-1 sum |k|^tau |H_hat(k)|")
    W_inv, inv_err = invert_on_grid(W, out_degree=inverse_degree, return_error=True)
    W_inv = W_inv.real_part()
    cert.check("inverse-identity", inv_err, 1e-8, note="||W W_inv - I|| on the inversion grid")
    X = (Zs @ F).real_combination(lam)
    Gnew = (W_inv @ X).real_part()
    Gnew = _prune(Gnew, 1e-18 * max(1.0, Gnew.max_abs()))
    out = ConjugationTriple(W, W_inv, B, Gnew)
    out.residual_norm = residual_norm(C, out)
    cert.check("B-real", float(np.abs(np.imag(out.B)).max()), 0.0)
    diag.check("residual-growth", out.residual_norm,
               10 * max(T.residual_norm, 1e-300) if math.isfinite(T.residual_norm) else math.inf,
               note="residual after <= 10 x residual before")
    out.certificate = cert
    out.info = {"lambda": lam, "a": a, "s": s, "P_lambda": choice.value, "grid": G,
                "diagnostics": diag}
    return out


# --------------------------------------------------------------------------
# period doubling
# --------------------------------------------------------------------------

def _spectrum_nodes(B, tol=1e-9):
    """Distinct eigenvalues of a Jordan matrix with multiplicities, sorted by (Re, Im)."""
    blocks = jordan_blocks(B, tol)
    scale = max(1.0, float(np.abs(B).max()))
    vals, mult = [], []
    for _, size, eig in blocks:
        for i, v in enumerate(vals):
            if abs(v - eig) <= tol * scale:
                mult[i] += size
                break
        else:
            vals.append(eig)
            mult.append(size)
    order = sorted(range(len(vals)), key=lambda i: (vals[i].real, vals[i].imag))
    return np.array([vals[i] for i in order]), [mult[i] for i in order], blocks


def doubling_conjugation(B, report: ClassReport, omega, N: int, rho: float, r_max: int = 3, *,
                         bdprime_limit: float | None = None, tol: float = 1e-9) -> DoublingResult:
    """Diagonal phase conjugation turning a Jordan matrix into a real one.

    For each Jordan block of ``B`` with eigenvalue ``alpha_i`` and composed
    witness ``k_i`` from ``report``:

    * odd-loop class: ``w = exp(2 i pi <k_i, theta>)``,
      ``B'_ii = Re alpha_i``, ``B''_ii = (alpha_i - conj(alpha_i) - 2 i pi <k_i, omega>) / 2``;
    * bipartite class with anchor ``alpha_0``: ``w = exp(4 i pi <k_i, theta>)``,
      ``B'_ii = alpha_0`` (first part) or ``conj(alpha_0)`` (second part),
      ``B''_ii`` the remaining defect.

    ``B'`` keeps the off-diagonal part of ``B`` and is brought to real
    Jordan form by a unitary ``P``; ``W = W_diag P``.  In exact mode
    (``report`` built with ``rho = 0``) ``B''`` is set to zero.

    Raises
    ------
    StructureMismatchError
        Blocks of the two parts of a bipartite class have different Jordan
        structures.
    ReductionError
        Some eigenvalue of ``B`` is not a node of the report.
    """
    B = np.asarray(B, dtype=complex)
    n = B.shape[0]
    om = omega if isinstance(omega, FrequencyVector) else FrequencyVector(omega)
    d = om.d
    G = report.graph
    exact = G.exact
    limit = 2 * n * rho if bdprime_limit is None else bdprime_limit
    blocks = jordan_blocks(B, tol)
    scale = max(1.0, float(np.abs(B).max()))
    pos_node = []
    for start, size, eig in blocks:
        dist = np.abs(G.nodes - eig)
        i = int(dist.argmin())
        if dist[i] > 1e-8 * scale:
            raise ReductionError(f"eigenvalue {eig} has no witness in the class report")
        pos_node += [i] * size
    Bp = B.copy()
    Bpp = np.zeros((n, n), dtype=complex)
    modes = []
    for j in range(n):
        i = pos_node[j]
        w, tag = report.node_witness(i)
        k = np.asarray(w.k, dtype=np.int64)
        alpha = complex(B[j, j])
        phase = 2j * np.pi * float(k @ om.omega)
        if tag == CASE_ODD:
            modes.append(tuple(int(x) for x in k))
            Bp[j, j] = alpha.real
            Bpp[j, j] = 0.5 * (alpha - alpha.conjugate() - phase)
        else:
            info = report.classes[report.class_of(i)]
            a0 = complex(G.nodes[info.anchor])
            target = a0 if tag == CASE_S1 else a0.conjugate()
            modes.append(tuple(int(2 * x) for x in k))
            Bp[j, j] = target
            Bpp[j, j] = alpha - target - phase
    if exact:
        Bpp[:] = 0.0
    # conjugate parts of bipartite classes must carry the same Jordan structure
    for info in report.classes:
        if info.odd_loop or abs(complex(G.nodes[info.anchor]).imag) <= tol * scale:
            continue
        parts = []
        for part in (info.sigma1, info.sigma2):
            idx = [j for j in range(n) if pos_node[j] in part]
            Nsub = B[np.ix_(idx, idx)] - np.diag(np.diag(B)[idx])
            parts.append((len(idx), jordan_structure(Nsub)))
        if parts[0] != parts[1]:
            raise StructureMismatchError(f"class {info.nodes}: structures {parts[0]} and {parts[1]}")
    W_diag = TrigPoly({}, d, n)
    for j, k in enumerate(modes):
        E = np.zeros((n, n))
        E[j, j] = 1.0
        W_diag = W_diag + TrigPoly.single_mode(k, E)
    P, R = realify_jordan(Bp, tol)
    PH = P.conj().T
    W = W_diag @ P
    W_inv = PH @ W_diag.conj()
    B_prime = np.real(R).astype(float)
    B_dprime = PH @ Bpp @ P
    cert = Certificate()
    diag = Certificate()
    cert.check("realify-identity", float(np.linalg.norm(P @ B_prime @ PH - Bp, 2)),
               1e-12 * scale, note="P B' P* = B' before realification")
    ident = directional_derivative(W, om.halved()) - B @ W + W @ (B_prime + B_dprime)
    cert.check("doubling-identity", ident.max_abs(), 1e-11 * scale,
               note="d_{omega/2} W - B W + W (B' + B'') = 0 coefficient-wise")
    cert.check("B-dprime-bound", float(np.linalg.norm(B_dprime, 2)), limit + 1e-15 * scale,
               note="||B''|| <= bound")
    kmax = max((sum(map(abs, k)) for k in modes), default=0)
    bounds = {"W_norm_base": 4 * n * math.pi * N, "B_dprime_norm": float(np.linalg.norm(B_dprime, 2)),
              "max_mode": kmax}
    for r in range(r_max + 1):
        rhs = max(1.0, (4 * n * math.pi * N) ** r)
        for name, X in (("W", W), ("W-inverse", W_inv)):
            cert.check(f"{name}-C{r}", cr_norm(X, r, "grid-sup"), rhs * (1 + 1e-12),
                       note="||W^{+-1}||_{C^r} <= (4 n pi N)^r")
    thetas = np.random.default_rng(0).random((8, d))
    Wd = W_diag.evaluate(thetas)
    comm = 0.0
    for M in (B, np.diag(np.diag(Bp)), np.diag(np.diag(Bpp))):
        comm = max(comm, float(np.abs(Wd @ M - M @ Wd).max()))
    cert.check("W-commutes", comm, 1e-11 * scale, note="W_diag commutes with B, B', B'' at 8 points")
    diag.check("B-prime-size", float(np.linalg.norm(B_prime, 2)),
               2 * float(np.linalg.norm(B, 2)) + 1e-300, note="||B'|| <= C ||B||, C = 2")
    return DoublingResult(W, W_inv, B_prime, B_dprime, W_diag, P, modes, bounds, cert,
                          Certificate(), diag, report)


def _grid_inverse_gap(V: TrigPoly, grid: int | None = None) -> tuple:
    """``(max ||V^-1 - conj(V)||, max ||V||)`` over a grid."""
    n = V.n
    G = grid if grid is not None else default_grid(max(V.degree, 1))
    vals = V.on_grid(G).reshape(-1, n, n)
    dets = np.abs(np.linalg.det(vals))
    if dets.min() < 1e-14:
        return math.inf, float(np.linalg.norm(vals, 2, axis=(1, 2)).max())
    gap = np.linalg.norm(np.linalg.inv(vals) - vals.conj(), 2, axis=(1, 2)).max()
    return float(gap), float(np.linalg.norm(vals, 2, axis=(1, 2)).max())


def almost_real_step(U: TrigPoly, B, omega, N: int, rho: float, kappa: float | None = None,
                     tau: float | None = None, *, mode: str = "diagnostic", C1: float | None = None,
                     Cd: float | None = None, r_max: int = 3, step: int | None = None,
                     certified_graph: bool = False) -> DoublingResult:
    """Doubling conjugation built from ``U`` with ``U^{-1} = conj(U)``.

    ``G = d_omega U - B U + U conj(B)``; ``V`` and ``F`` are the truncations
    of ``U`` and ``G`` at degree ``N``.  The three quantitative hypotheses
    are evaluated with the constant ``C1`` and reported under the names
    ``taille-sigman-prop``, ``smallness-prop`` and ``kappagrand``; the
    smallness condition in its stronger proof form is only logged.  The
    truncation inequality ``||V^-1 - conj V|| <= ||V|| / 4`` is certified
    whenever ``Cd ||U||_{C^{d+1}} ||U||_{C^0} <= N``.
    """
    _check_mode(mode)
    B = np.asarray(B, dtype=complex)
    n = B.shape[0]
    om = omega if isinstance(omega, FrequencyVector) else FrequencyVector(omega)
    d = om.d
    kappa = om.kappa if kappa is None else kappa
    tau = om.tau if tau is None else tau
    C1 = default_C1(n, d) if C1 is None else C1
    Cd = default_Cd(d) if Cd is None else Cd
    if not is_jordan_form(B):
        raise ValueError("B must be in Jordan normal form")
    hyp = Certificate()
    cert = Certificate()
    diag = Certificate()
    unit_err = sup_norm(U @ U.conj() - np.eye(n))
    _hyp(hyp, mode, "conj-inverse", unit_err, 1e-8, note="||U conj(U) - I||_C0", step=step)
    xi = sup_norm(U)
    Ud1 = cr_norm(U, d + 1, "fourier-bound")
    G = directional_derivative(U, om) - B @ U + U @ B.conj()
    Gd1 = cr_norm(G, d + 1, "fourier-bound")
    logN = safe_log(max(N, 1))
    _hyp(hyp, mode, "taille-sigman-prop", math.log(C1) + safe_log(Ud1) + safe_log(xi), logN,
         log_space=True, note=f"C1 ||U||_C^(d+1) ||U||_C0 <= N, C1={C1:g}", step=step)
    rhs_small = -math.log(C1) + (2 * n - 1) * safe_log(rho) - (d - 1) * logN - n * safe_log(xi)
    _hyp(hyp, mode, "smallness-prop", safe_log(Gd1), rhs_small, log_space=True,
         note=f"||G||_C^(d+1) <= C1^-1 rho^(2n-1) N^-(d-1) ||U||^-n, C1={C1:g}", step=step)
    rhs_proof = -math.log(C1) + (2 * n - 1) * safe_log(rho) - d * n * n * (logN + safe_log(xi))
    diag.check("smallness-prop-proof-form", safe_log(Gd1), rhs_proof, log_space=True,
               note="rho^(2n-1) (N ||U||)^(-d n^2) variant")
    rhs_kappa = -math.log(C1) + min(-d * logN - (n + 1) * safe_log(xi),
                                    math.log(kappa) - tau * logN)
    _hyp(hyp, mode, "kappagrand", safe_log(rho), rhs_kappa, log_space=True,
         note=f"rho <= C1^-1 min(N^-d ||U||^-(n+1), kappa N^-tau), C1={C1:g}", step=step)
    V = truncate(U, N)
    F = truncate(G, N)
    nF = sup_norm(F)
    gap, nV = _grid_inverse_gap(V)
    holds = math.log(Cd) + safe_log(Ud1) + safe_log(xi) <= logN
    target = cert if holds else diag
    target.check("truncation-conj-inverse", gap, 0.25 * nV,
                 note=f"||V^-1 - conj V||_C0 <= ||V||_C0 / 4, Cd={Cd:g}, hypothesis "
                      + ("holds" if holds else "fails"))
    nodes, mult, blocks = _spectrum_nodes(B)
    graph = build_graph(nodes, om, N, rho, multiplicities=mult, certified=certified_graph)
    report = analyze_classes(graph)
    # Fourier modes of V away from resonance are controlled by F
    pos = []
    for start, size, eig in blocks:
        i = int(np.abs(nodes - eig).argmin())
        pos += [i] * size
    pos = np.array(pos)
    worst = -math.inf
    bound56 = (2 * n - 1) * (math.log(2) - safe_log(rho)) + safe_log(nF) if rho > 0 else math.inf
    for k, c in V.modes.items():
        phase = 2j * np.pi * float(np.dot(k, om.omega))
        for i in range(len(nodes)):
            for j in range(len(nodes)):
                if rho > 0 and abs(phase - (nodes[i] - nodes[j].conjugate())) < rho:
                    continue
                sub = c[np.ix_(pos == i, pos == j)]
                worst = max(worst, safe_log(np.linalg.norm(sub, 2)))
    diag.check("fourier-mode-bound", worst, bound56, log_space=True,
               note="||V_i^j(k)|| <= (2/rho)^(2n-1) ||F||_C0 off resonance")
    for info in report.classes:
        if info.odd_loop:
            continue
        rows = np.isin(pos, info.sigma1)
        cols = np.isin(pos, info.sigma2)
        if rows.sum() != cols.sum():
            continue
        Gg = default_grid(max(V.degree, 1))
        vals = V.on_grid(Gg).reshape(-1, n, n)[:, rows][:, :, cols]
        smin = float(np.linalg.svd(vals, compute_uv=False)[:, -1].min())
        diag.check(f"sigma-block-inverse[{info.anchor}]", -safe_log(smin), math.log(2 * xi),
                   log_space=True, note="||(V_S1^S2)^-1||_C0 <= 2 ||U||_C0")
    res = doubling_conjugation(B, report, om, N, rho, r_max, bdprime_limit=2 * n * n * rho)
    res.certificate.extend(cert)
    res.hypotheses = hyp
    res.diagnostics.extend(diag)
    res.info.update({"V": V, "F": F, "xi": xi, "U_Cd1": Ud1, "G_Cd1": Gd1, "C1": C1, "Cd": Cd})
    return res


# --------------------------------------------------------------------------
# normal forms
# --------------------------------------------------------------------------

@dataclass
class NormalFormPolicy:
    """Parameters of :func:`normal_form_steps`.

    Attributes
    ----------
    epsilon : float, optional
        Working scale; default ``||F||_{C^m}`` (Fourier bound).
    gammas : sequence of float, optional
        Explicit decreasing separation scales ``Gamma_0 > Gamma_1 > ...``.
        Default ``Gamma_i = epsilon^gamma_i`` with
        ``gamma_1 = 1 / (4 (16 m n^3)^n)`` and ``gamma_{i+1} = 16 m n^3 gamma_i``.
    m : int
        Exponent in the estimates.
    jnf_epsilon : float, optional
        Scale handed to :func:`nilpotent_jnf`; default ``epsilon``.
    jnf_C : float
        Constant recorded in the Jordan-form estimates.
    """

    epsilon: float | None = None
    gammas: list | None = None
    m: int = 1
    jnf_epsilon: float | None = None
    jnf_C: float = 1.0

    def log_epsilon(self, F: TrigPoly):
        if self.epsilon is not None:
            return math.log(self.epsilon)
        e = cr_norm(F, self.m, "fourier-bound")
        return math.log(e) if e > 0 else math.log(1e-300)

    def gamma_values(self, n: int, log_eps: float):
        if self.gammas is not None:
            return [float(g) for g in self.gammas]
        c = 16.0 * self.m * n**3
        g = 1.0 / (4.0 * c**n)
        out = []
        for _ in range(n + 2):
            v = math.exp(g * log_eps)
            # for a tiny epsilon the later scales underflow; keep the usable prefix
            if v <= 0 or (out and v >= out[-1]):
                break
            out.append(v)
            g *= c
        return out


def normal_form_steps(C: Cocycle, T: ConjugationTriple, policy: NormalFormPolicy | None = None, *,
                      mode: str = "diagnostic", step: int | None = None) -> ConjugationTriple:
    """Conjugate ``B`` to Jordan normal form, moving small parts into ``F``.

    Stage one separates the spectrum of ``B`` along the scales ``Gamma_i``
    and replaces each block's diagonal by its mean.  Stage two brings every
    block's nilpotent part to Jordan form with :func:`nilpotent_jnf`.  The
    returned remainder is ``F' = S^-1 (B + F) S - B'`` exactly, so the
    residual transports as ``R' = R S``.
    """
    _check_mode(mode)
    policy = policy or NormalFormPolicy()
    n = T.n
    B = np.asarray(T.B, dtype=complex)
    log_eps = policy.log_epsilon(T.F)
    hyp = Certificate()
    cert = Certificate()
    beta = 1.0 / (4 * n**3)
    if log_eps < 0:
        _hyp(hyp, mode, "B-size", safe_log(np.linalg.norm(B, 2)), -beta * log_eps, log_space=True,
             note="||B|| <= ||F||^-beta, beta = 1/(4n^3)", step=step)
    else:
        _hyp(hyp, mode, "epsilon-small", log_eps, 0.0, log_space=True, note="epsilon < 1", step=step)
    gammas = policy.gamma_values(n, log_eps)
    sep = adaptive_separation(B, gammas)
    dec = sep.decoupling
    cert.extend(dec.certificate)
    threshold = gammas[sep.d0]
    B_hat, _ = to_single_eigenvalue_blocks(sep.B, dec.blocks, threshold)
    jeps = policy.jnf_epsilon
    log_jeps = math.log(jeps) if jeps is not None else min(log_eps, math.log(0.5))
    S2 = np.zeros((n, n), dtype=complex)
    S2_inv = np.zeros((n, n), dtype=complex)
    B_new = np.zeros((n, n), dtype=complex)
    for a, b in dec.blocks:
        mu = B_hat[a, a]
        Nb = np.triu(B_hat[a:b, a:b] - mu * np.eye(b - a), 1)
        jnf = nilpotent_jnf(Nb, m=policy.m, log_epsilon=log_jeps, C=policy.jnf_C)
        for ineq in jnf.certificate:
            cert.add(type(ineq)(f"{ineq.name}[{a}:{b}]", ineq.lhs, ineq.rhs, ineq.passed,
                                ineq.log_space, ineq.note))
        S2[a:b, a:b] = jnf.S
        S2_inv[a:b, a:b] = jnf.S_inv
        B_new[a:b, a:b] = mu * np.eye(b - a) + jnf.J
    S = sep.S @ S2
    S_inv = S2_inv @ sep.S_inv
    Fc = S_inv @ B @ S - B_new
    F_new = S_inv @ T.F @ S + Fc
    Z_new = T.Z @ S
    Z_inv_new = S_inv @ T.Z_inv
    out = ConjugationTriple(Z_new, Z_inv_new, B_new, F_new)
    out.residual_norm = residual_norm(C, out)
    cert.check("jordan-form", 0.0 if is_jordan_form(B_new) else 1.0, 0.0)
    R_old = residual(C, T) @ S
    R_new = residual(C, out)
    scale = max(T.Z.max_abs(), 1.0) * max(1.0, float(np.linalg.norm(B, 2))) * float(np.linalg.norm(S, 2))
    cert.check("residual-transport", (R_new - R_old).max_abs(), 1e-10 * scale,
               note="R' = R S coefficient-wise")
    out.certificate = cert
    out.info = {"hypotheses": hyp, "d0": sep.d0, "gammas": gammas, "blocks": dec.blocks,
                "S": S, "S_inv": S_inv, "log_epsilon": log_eps}
    return out


# --------------------------------------------------------------------------
# full pipeline
# --------------------------------------------------------------------------

@dataclass
class PipelineParams:
    """Parameters of :func:`full_pipeline`.

    ``N``, ``rho`` and ``gammas`` override the schedule formulas, whose
    constants are far beyond reach for small examples.  ``C1``, ``Cd`` and
    ``Cr`` are the constants used in the hypotheses and are recorded in
    every report.
    """

    N: int | None = None
    rho: float | None = None
    gammas: list | None = None
    epsilon: float | None = None
    m: int = 1
    r_max: int = 3
    mode: str = "diagnostic"
    C1: float | None = None
    Cd: float | None = None
    Cr: float = 1.0
    jnf_C: float = 1.0
    diophantine_K: int = 20

    def to_dict(self):
        return {k: getattr(self, k) for k in ("N", "rho", "gammas", "epsilon", "m", "r_max", "mode",
                                              "C1", "Cd", "Cr", "jnf_C", "diophantine_K")}

    @classmethod
    def from_dict(cls, data):
        known = {k: data[k] for k in cls().to_dict() if k in data}
        return cls(**known)


@dataclass
class PipelineResult:
    cocycle: Cocycle
    triples: list
    reports: list

    @property
    def passed(self):
        return all(r.passed for r in self.reports)

    @property
    def hypotheses_passed(self):
        return all(r.hypotheses.passed for r in self.reports)

    def to_dict(self):
        return {"cocycle": self.cocycle.to_dict(),
                "triples": [t.to_dict() for t in self.triples],
                "steps": [r.to_dict() for r in self.reports]}


def _finish(report, mode):
    if mode == "strict":
        bad = report.certificate.failures()
        if bad:
            raise CertificateError(bad[0].name, bad[0].lhs, bad[0].rhs)
    else:
        bad = report.certificate.failures() + report.hypotheses.failures()
        if bad:
            names = ", ".join(x.name for x in bad[:6])
            warnings.warn(f"step {report.step} ({report.op}): {len(bad)} failed inequalities: {names}",
                          RuntimeWarning, stacklevel=3)


def full_pipeline(C: Cocycle, triples, params: PipelineParams | None = None) -> PipelineResult:
    """Real triples for ``(omega / 2, A(2 theta))`` from complex triples for ``(omega, A)``.

    Per input triple: Jordan normal form of ``B``; ``U = Z^-1 conj(Z)``;
    scales ``rho = eps'^(1/(2 n^3))`` and ``N = C1 ||U||_C^(d+1) ||U||_C0``
    unless overridden; the almost-real doubling step; composition
    ``Z'(theta) = Z(2 theta) W(theta)``, ``F' = B'' + W^-1 F(2 theta) W``;
    and a final :func:`realify_step`.

    In strict mode the first failed hypothesis raises
    :class:`HypothesisError` naming the inequality and the step, and a failed
    certificate raises :class:`CertificateError`.  Diagnostic mode computes
    the same values and only warns.
    """
    params = params or PipelineParams()
    mode = params.mode
    _check_mode(mode)
    n, d = C.n, C.d
    C1 = default_C1(n, d) if params.C1 is None else params.C1
    Cd = default_Cd(d) if params.Cd is None else params.Cd
    C2 = C.halved()
    reports = []
    out = []
    counter = 0

    def new_report(op, j, before):
        nonlocal counter
        counter += 1
        return StepReport(counter, op, residual_before=before, triple=j)

    pre = new_report("preconditions", -1, math.nan)
    _hyp(pre.hypotheses, mode, "real-cocycle", 0.0 if C.real_flag else 1.0, 0.0, step=pre.step)
    dio = check_diophantine(C.omega.omega, C.omega.kappa, C.omega.tau, params.diophantine_K)
    _hyp(pre.hypotheses, mode, "diophantine", -dio.worst_ratio, -C.omega.kappa,
         note=f"|<k,omega>| |k|^tau >= kappa for |k| <= {params.diophantine_K}", step=pre.step)
    res = [T.residual_norm if math.isfinite(T.residual_norm) else residual_norm(C, T) for T in triples]
    pre.diagnostics.check("triples-sorted", float(np.sum(np.diff(res) > 0)), 0.0,
                          note="residuals non-increasing")
    reports.append(pre)
    _finish(pre, mode)
    for j, T in enumerate(triples):
        r0 = res[j]
        # (1) Jordan normal form
        rep = new_report("normal_form_steps", j, r0)
        policy = NormalFormPolicy(params.epsilon, params.gammas, params.m, jnf_C=params.jnf_C)
        try:
            T1 = normal_form_steps(C, T, policy, mode=mode, step=rep.step)
        except HypothesisError as exc:
            exc.step = rep.step
            raise
        rep.certificate.extend(T1.certificate)
        rep.hypotheses.extend(T1.info["hypotheses"])
        rep.residual_after = T1.residual_norm
        reports.append(rep)
        _finish(rep, mode)
        # (2) U = Z^-1 conj(Z)
        rep = new_report("conjugate-ratio", j, T1.residual_norm)
        U = T1.Z_inv @ T1.Z.conj()
        rep.diagnostics.check("Z-inverse", T1.inverse_error(), 1e-8, note="||Z Z_inv - I||_C0")
        # (3) scales
        r = d + 1
        eps = cr_norm(T1.F, r, "fourier-bound")
        eps_p = 2 * params.Cr * cr_norm(U, r, "fourier-bound") * eps
        rho = params.rho if params.rho is not None else (eps_p ** (1.0 / (2 * n**3)) if eps_p > 0 else 0.0)
        if params.N is not None:
            N = int(params.N)
        else:
            logN = math.log(C1) + safe_log(cr_norm(U, d + 1, "fourier-bound")) + safe_log(sup_norm(U))
            N = int(math.ceil(math.exp(min(logN, 30.0))))
        rep.diagnostics.check("scale-N", float(N), float(N), note=f"N used, C1={C1:g}")
        rep.diagnostics.check("scale-rho", float(rho), float(rho), note=f"rho used, eps'={eps_p:.3e}")
        rep.residual_after = T1.residual_norm
        reports.append(rep)
        _finish(rep, mode)
        # (4) almost-real doubling step
        rep = new_report("almost_real_step", j, T1.residual_norm)
        try:
            D = almost_real_step(U, T1.B, C.omega, N, rho, mode=mode, C1=C1, Cd=Cd,
                                 r_max=params.r_max, step=rep.step)
        except HypothesisError as exc:
            exc.step = rep.step
            raise
        rep.certificate.extend(D.certificate)
        rep.hypotheses.extend(D.hypotheses)
        rep.diagnostics.extend(D.diagnostics)
        reports.append(rep)
        _finish(rep, mode)
        # (5) composition on the doubled torus
        rep = new_report("compose", j, T1.residual_norm)
        Z2 = double_angle(T1.Z) @ D.W
        F2 = D.W_inv @ double_angle(T1.F) @ D.W + D.B_dprime
        Z2_inv = D.W_inv @ double_angle(T1.Z_inv)
        T2 = ConjugationTriple(Z2, Z2_inv, D.B_prime, F2)
        R2 = residual(C2, T2)
        T2.residual_norm = sup_norm(R2)
        expect = double_angle(residual(C, T1)) @ D.W
        scale = max(1.0, Z2.max_abs()) * max(1.0, float(np.linalg.norm(T1.B, 2)))
        rep.certificate.check("composition-residual", (R2 - expect).max_abs(), 1e-10 * scale,
                              note="R'(theta) = R(2 theta) W(theta)")
        rep.residual_after = T2.residual_norm
        reports.append(rep)
        _finish(rep, mode)
        # (6) realification on (omega/2, A_2)
        rep = new_report("realify_step", j, T2.residual_norm)
        T3 = realify_step(C2, T2, mode=mode, step=rep.step)
        rep.certificate.extend(T3.certificate)
        rep.diagnostics.extend(T3.info["diagnostics"])
        rep.certificate.check("final-residual", T3.residual_norm, max(1e-7, 10 * r0),
                              note="final residual <= max(1e-7, 10 x input residual)")
        rep.residual_after = T3.residual_norm
        reports.append(rep)
        _finish(rep, mode)
        out.append(T3)
    return PipelineResult(C2, out, reports)


# --------------------------------------------------------------------------
# diagonal extraction
# --------------------------------------------------------------------------

class DiagonalSelection(NamedTuple):
    """Indices ``j_1 < j_2 < ...`` with ``value(j_m, m) <= 1/m``.

    ``m_of_j`` maps every ``j`` in ``[j_m, j_{m+1})`` to ``m``.
    """

    indices: list
    m_of_j: dict
    truncated: bool


def select_diagonal(table) -> DiagonalSelection:
    """Greedy diagonal extraction from a table ``(j, m) -> value``.

    For ``m = 1, 2, ...`` the smallest ``j`` larger than the previous pick
    with ``value(j, m) <= 1/m`` is chosen.  The scan stops at the first
    ``m`` without an admissible ``j`` (``truncated`` is then true) or when
    the table has no row ``m``.
    """
    if isinstance(table, np.ndarray):
        arr = table
        table = {(j, m + 1): float(arr[j, m]) for j in range(arr.shape[0]) for m in range(arr.shape[1])}
    table = dict(table)
    ms = sorted({m for _, m in table})
    js = sorted({j for j, _ in table})
    indices = []
    truncated = False
    prev = None
    for m in range(1, (ms[-1] if ms else 0) + 1):
        cand = [j for j in js if (prev is None or j > prev) and (j, m) in table
                and table[(j, m)] <= 1.0 / m]
        if not cand:
            truncated = True
            break
        prev = cand[0]
        indices.append(prev)
    m_of_j = {}
    for i, j in enumerate(indices):
        stop = indices[i + 1] if i + 1 < len(indices) else (js[-1] + 1 if js else j + 1)
        for jj in js:
            if j <= jj < stop:
                m_of_j[jj] = i + 1
    return DiagonalSelection(indices, m_of_j, truncated)
