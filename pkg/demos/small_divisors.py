"""
Solve the cohomological equation on T^2 and compare against the exact answer.

Run with ``python3 demos/small_divisors.py``.
"""

import numpy as np

from realcocycle.harmonics import (FrequencyVector, TrigPoly, check_diophantine, cr_norm,
                                   directional_derivative, small_divisor_bound,
                                   solve_small_divisor, sup_norm)

PHI = (1 + np.sqrt(5)) / 2


def main():
    omega = FrequencyVector(np.array([1.0, PHI]), kappa=0.2, tau=1.2)
    rep = check_diophantine(omega.omega, omega.kappa, omega.tau, 50)
    print(f"diophantine scan |k|<=50: pass={rep.passed}, worst k={rep.worst_k}, "
          f"ratio={rep.worst_ratio:.4f}")

    rng = np.random.default_rng(0)
    f = TrigPoly.zeros(2, 1)
    for k in [(1, 0), (0, 1), (2, -1), (-3, 2)]:
        c = rng.standard_normal() + 1j * rng.standard_normal()
        f = f + TrigPoly.single_mode(k, [[c]])
    g = solve_small_divisor(f, omega)
    err = sup_norm(directional_derivative(g, omega) - f)
    print(f"||d_omega g - f||_C0 = {err:.2e}")
    print(f"||g||_C0 = {sup_norm(g):.4f} <= bound {small_divisor_bound(f, omega):.4f}")
    print(f"||g||_C1 grid = {cr_norm(g, 1, 'grid-sup'):.4f}, "
          f"fourier bound = {cr_norm(g, 1, 'fourier-bound'):.4f}")

    # exact answer for a single mode
    e = TrigPoly.single_mode((1, 0), [[1.0]])
    g1 = solve_small_divisor(e, omega)
    print("e^{2 i pi theta_1} -> coefficient", g1.coefficient((1, 0))[0, 0],
          "expected", 1 / (2j * np.pi))


if __name__ == "__main__":
    main()
