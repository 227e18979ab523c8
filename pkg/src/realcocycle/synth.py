"""
Case files and synthetic fixtures.

A :class:`CaseFile` bundles a cocycle, a list of conjugation triples and the
pipeline parameters.  :func:`synth_case` builds one from a known real
reduction ``(Z_r, B_0)`` hidden behind a complex gauge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedInputError, ReductionError
from .harmonics import (FrequencyVector, TrigPoly, directional_derivative, exp_on_grid,
                        invert_on_grid, shift_modes)
from .reduction import Cocycle, ConjugationTriple, PipelineParams, residual_norm
from .serialization import dumps, loads

__all__ = ["CaseFile", "synth_case", "default_frequencies"]

_IRRATIONALS = [1.0, (1 + math.sqrt(5)) / 2, math.sqrt(2), math.sqrt(3), math.sqrt(5), math.sqrt(7)]


def default_frequencies(d: int, kappa: float = 0.1, tau: float | None = None) -> FrequencyVector:
    """``(1, phi, sqrt 2, sqrt 3, ...)`` truncated to length ``d``."""
    if not 1 <= d <= len(_IRRATIONALS):
        raise ValueError(f"d must lie in [1, {len(_IRRATIONALS)}]")
    tau = (1.5 if d <= 2 else float(d)) if tau is None else tau
    return FrequencyVector(np.array(_IRRATIONALS[:d]), kappa, tau)


@dataclass
class CaseFile:
    """Cocycle, triples and pipeline parameters."""

    cocycle: Cocycle
    triples: list
    params: dict = field(default_factory=dict)

    def pipeline_params(self, **overrides) -> PipelineParams:
        data = dict(self.params)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineParams.from_dict(data)

    def to_dict(self):
        return {"cocycle": self.cocycle.to_dict(), "triples": [t.to_dict() for t in self.triples],
                "params": self.params}

    @classmethod
    def from_dict(cls, data):
        try:
            C = Cocycle.from_dict(data["cocycle"])
            triples = [ConjugationTriple.from_dict(t) for t in data.get("triples", [])]
            params = dict(data.get("params", {}))
        except MalformedInputError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise MalformedInputError(f"bad case file: {exc}") from exc
        for T in triples:
            if T.n != C.n or T.Z.d != C.d:
                raise MalformedInputError("triple dimensions do not match the cocycle")
        mode = params.get("mode", "diagnostic")
        if mode not in ("strict", "diagnostic"):
            raise MalformedInputError(f"unknown mode {mode!r}")
        return cls(C, triples, params)

    def dumps(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "CaseFile":
        return cls.from_dict(loads(text))


def _random_real_poly(rng, d, n, degree, amplitude):
    """Random real trig polynomial with modes in the box ``|k_i| <= degree``."""
    P = TrigPoly.zeros(d, n)
    if degree == 0 or amplitude == 0:
        return P
    grid = np.stack(np.meshgrid(*([np.arange(-degree, degree + 1)] * d), indexing="ij"), -1).reshape(-1, d)
    for k in grid:
        if not any(k) or tuple(-k) < tuple(k):
            continue
        c = amplitude * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / (1 + np.abs(k).sum())
        P = P + TrigPoly.single_mode(tuple(k), c) + TrigPoly.single_mode(tuple(-k), c.conj())
    return P.real_part()


def _prune(P, tol, absolute=False):
    """Drop modes whose largest entry is below ``tol`` (relative unless ``absolute``)."""
    cut = tol if absolute else tol * P.max_abs()
    return TrigPoly({k: c for k, c in P.modes.items() if np.abs(c).max() > cut}, P.d, P.n)


def _random_B0(rng, n, min_gap=0.3):
    for _ in range(1000):
        B0 = rng.standard_normal((n, n))
        ev = np.linalg.eigvals(B0)
        gaps = np.abs(ev[:, None] - ev[None, :]) + np.eye(n) * 1e9
        if gaps.min() > min_gap and np.abs(ev).max() < 3:
            return B0
    raise RuntimeError("could not draw a well-separated B_0")


def synth_case(n: int = 2, d: int = 2, degree: int = 1, gauge_complexity: int = 1, seed: int = 0,
               amplitude: float = 0.02, tol: float = 1e-14) -> CaseFile:
    """Synthetic real cocycle with a complex conjugation triple.

    ``Z_r = exp(P)`` for a random real polynomial ``P`` of amplitude
    ``amplitude``, a real ``B_0`` with well separated eigenvalues, and
    ``A = (d Z_r + Z_r B_0) Z_r^-1`` interpolated to real coefficients.  The
    emitted triple is ``Z_0 = exp(2 i pi <m, theta>) Z_r Q`` with a complex
    constant ``Q`` (``gauge_complexity >= 1``) and phase ``m = e_1``
    (``gauge_complexity >= 2``); ``B = Q^-1 B_0 Q - 2 i pi <m, omega> I`` and
    ``F_0`` the interpolated transport defect.  ``A`` and ``F_0`` are
    computed at a generous degree and pruned of modes below ``tol`` relative
    to their largest coefficient.

    Raises
    ------
    SingularGridError
        The generated ``Z_0`` is singular on the inversion grid.
    ReductionError
        The emitted residual is not finite.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.default_rng(seed)
    omega = default_frequencies(d)
    B0 = _random_B0(rng, n)
    P = _random_real_poly(rng, d, n, degree, amplitude)
    L = 3 * degree
    Zr = exp_on_grid(P, L).real_part() if degree and amplitude else TrigPoly.identity(d, n)
    Q = np.eye(n, dtype=complex)
    if gauge_complexity >= 1:
        Q = Q + 0.5 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(n)
    m = np.zeros(d, dtype=int)
    if gauge_complexity >= 2:
        m[0] = 1
    DA = 12 * degree + 4 if degree else 0
    G = 2 * (DA + L) + 1 if degree else 3
    dZr = directional_derivative(Zr, omega)
    zv, dzv = Zr.on_grid(G), dZr.on_grid(G)
    if DA:
        izv = np.linalg.inv(zv.reshape(-1, n, n)).reshape(zv.shape)
        A = _prune(TrigPoly.from_grid((dzv + zv @ B0) @ izv, DA).real_part(), tol)
    else:
        A = TrigPoly.constant(B0, d)
    Z0 = shift_modes(Zr @ Q, tuple(m))
    phase = 2j * math.pi * float(m @ omega.omega)
    B = np.linalg.solve(Q, B0 @ Q) - phase * np.eye(n)
    Z0_inv = invert_on_grid(Z0, grid_per_dim=max(G, 2 * (Z0.degree + max(4 * Z0.degree, 8)) + 1))
    C = Cocycle(omega, A)
    # transport defect of Z_0 on the grid
    G2 = 2 * (DA + Z0.degree + max(DA, 1)) + 1
    z0 = Z0.on_grid(G2).reshape(-1, n, n)
    dz0 = directional_derivative(Z0, omega).on_grid(G2).reshape(-1, n, n)
    av = A.on_grid(G2).reshape(-1, n, n)
    F0v = np.linalg.solve(z0, av @ z0 - dz0) - B
    F0 = TrigPoly.from_grid(F0v.reshape((G2,) * d + (n, n)), max(DA, 0))
    F0 = _prune(F0, tol * max(1.0, float(np.abs(B).max())), absolute=True)
    T = ConjugationTriple(Z0, Z0_inv, B, F0)
    T.residual_norm = residual_norm(C, T)
    if not math.isfinite(T.residual_norm):
        raise ReductionError("non-finite residual; lower the amplitude")
    params = {"N": 4, "rho": 1e-6, "gammas": [10.0 ** (-3 - i) for i in range(n + 2)],
              "m": 1, "r_max": 3, "mode": "diagnostic",
              "seeds": {"seed": int(seed), "degree": int(degree), "gauge_complexity": int(gauge_complexity),
                        "amplitude": float(amplitude)}}
    return CaseFile(C, [T], params)
