"""
Period doubling turns a Jordan matrix with a resonant spectrum into a real one.

Run with ``python3 demos/period_doubling.py``.
"""

import numpy as np

from realcocycle.harmonics import FrequencyVector, directional_derivative
from realcocycle.resonance import analyze_classes, build_graph
from realcocycle.reduction import doubling_conjugation

PHI = (1 + np.sqrt(5)) / 2


def main():
    omega = FrequencyVector(np.array([1.0, PHI]), 0.1, 1.5)
    B = np.diag([0.5 + 1j * np.pi, 0.5 - 1j * np.pi, -0.2])
    report = analyze_classes(build_graph(np.diag(B), omega, 2, 0.0))
    res = doubling_conjugation(B, report, omega, 2, 0.0)
    print("B' =")
    print(np.real_if_close(res.B_prime) + 0.0)
    defect = directional_derivative(res.W, omega.halved()) - B @ res.W + res.W @ res.B_prime
    print(f"||d_(omega/2) W - B W + W B'|| = {defect.max_abs():.2e}")
    for ineq in res.certificate:
        print(f"  {ineq.name:22s} {'ok' if ineq.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
