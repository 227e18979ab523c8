"""Checked inequalities and log-space helpers shared by all modules."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .errors import CertificateError


@dataclass(frozen=True)
class Inequality:
    """One evaluated inequality ``lhs <= rhs``.

    When ``log_space`` is true both sides are natural logarithms of the
    quantities being compared.
    """

    name: str
    lhs: float
    rhs: float
    passed: bool
    log_space: bool = False
    note: str = ""

    def to_dict(self):
        out = {"name": self.name, "lhs": float(self.lhs), "rhs": float(self.rhs),
               "pass": bool(self.passed)}
        if self.log_space:
            out["log_space"] = True
        if self.note:
            out["note"] = self.note
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(data["name"], float(data["lhs"]), float(data["rhs"]), bool(data["pass"]),
                   bool(data.get("log_space", False)), str(data.get("note", "")))


def check(name, lhs, rhs, *, log_space=False, strict=False, note=""):
    """Evaluate ``lhs <= rhs`` and wrap it in an :class:`Inequality`."""
    lhs = float(lhs)
    rhs = float(rhs)
    passed = bool(lhs <= rhs)
    ineq = Inequality(name, lhs, rhs, passed, log_space, note)
    if strict and not passed:
        raise CertificateError(name, lhs, rhs)
    return ineq


@dataclass
class Certificate:
    """Ordered collection of evaluated inequalities."""

    inequalities: list = field(default_factory=list)

    def add(self, ineq):
        self.inequalities.append(ineq)
        return ineq

    def extend(self, other):
        items = other.inequalities if isinstance(other, Certificate) else other
        self.inequalities.extend(items)

    def check(self, name, lhs, rhs, **kwargs):
        return self.add(check(name, lhs, rhs, **kwargs))

    @property
    def passed(self):
        return all(q.passed for q in self.inequalities)

    def failures(self):
        return [q for q in self.inequalities if not q.passed]

    def __getitem__(self, name):
        for q in self.inequalities:
            if q.name == name:
                return q
        raise KeyError(name)

    def __contains__(self, name):
        return any(q.name == name for q in self.inequalities)

    def __iter__(self):
        return iter(self.inequalities)

    def __len__(self):
        return len(self.inequalities)

    def to_list(self):
        return [q.to_dict() for q in self.inequalities]

    @classmethod
    def from_list(cls, items):
        return cls([Inequality.from_dict(x) for x in items])


def warn_failures(cert, context=""):
    """Emit a ``RuntimeWarning`` for every failed inequality of ``cert``."""
    for q in cert.failures():
        prefix = f"{context}: " if context else ""
        warnings.warn(f"{prefix}{q.name} failed (lhs={q.lhs:.6g}, rhs={q.rhs:.6g})",
                      RuntimeWarning, stacklevel=3)


def log_factorial(n):
    return math.lgamma(n + 1.0)


def safe_log(x):
    """Natural log that maps 0 to -inf instead of raising."""
    x = float(x)
    if x <= 0.0:
        return -math.inf
    return math.log(x)


def log_cn(n):
    """Logarithm of ``c_n = 2(n+1)(2n)! + n``."""
    a = math.log(2.0 * (n + 1)) + log_factorial(2 * n)
    # log(e^a + n) without overflow
    return a + math.log1p(n * math.exp(-a))
