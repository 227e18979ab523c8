"""
Certified Jordan form of a conjugated nilpotent matrix.

Run with ``python3 demos/jordan_forms.py``.
"""

import math

import numpy as np

from realcocycle.jordan import (DeltaSchedule, jordan_structure, nilpotent_jnf, realify_jordan,
                                same_structure)


def jordan(*sizes):
    n = sum(sizes)
    J = np.zeros((n, n))
    off = 0
    for s in sizes:
        J[off:off + s - 1, off + 1:off + s] += np.eye(s - 1)
        off += s
    return J


def main():
    rng = np.random.default_rng(1)
    J0 = jordan(3, 2, 1)
    P = np.eye(6) + 0.4 * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    N = P @ J0 @ np.linalg.inv(P)
    # the first threshold eps^delta_1 is 1e-8
    log_eps = math.log(1e-8) / DeltaSchedule.default(6).delta(1)
    cert = nilpotent_jnf(N, log_epsilon=log_eps)
    print("rank sequence of N :", jordan_structure(N))
    print("rank sequence of J :", jordan_structure(cert.J))
    print("||S^-1 N S - J - F|| =",
          f"{np.linalg.norm(cert.S_inv @ N @ cert.S - cert.J - cert.F_residual, 2):.2e}")
    for ineq in cert.certificate:
        print(f"  {ineq.name:18s} {'ok' if ineq.passed else 'FAIL'}  lhs={ineq.lhs:.3g} rhs={ineq.rhs:.3g}")

    v = same_structure(J0, cert.J, np.eye(6), 1.0)
    print("structure comparison:", v.verdict)

    a = 1 + 2j
    Jc = np.zeros((4, 4), dtype=complex)
    Jc[:2, :2] = a * np.eye(2) + jordan(2)
    Jc[2:, 2:] = np.conj(a) * np.eye(2) + jordan(2)
    _, R = realify_jordan(Jc)
    print("real Jordan form of diag(J_2(1+2i), J_2(1-2i)):")
    print(np.real(R))


if __name__ == "__main__":
    main()
