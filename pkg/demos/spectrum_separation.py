"""
Split a matrix into blocks along clusters of its spectrum.

Run with ``python3 demos/spectrum_separation.py``.
"""

import numpy as np

from realcocycle.spectral import adaptive_separation, gamma_clusters, separate_spectrum


def main():
    rng = np.random.default_rng(2)
    centres = [0.0, 2.0, 1.0 + 2.0j]
    vals = np.concatenate([c + 0.02 * rng.standard_normal(2) for c in centres])
    T = np.diag(vals) + np.triu(0.3 * rng.standard_normal((6, 6)), 1)
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    B = Q @ T @ Q.T

    print("clusters at Gamma = 0.5:", [list(c) for c in gamma_clusters(vals, 0.5).clusters])
    dec = separate_spectrum(B, 0.5)
    print("blocks:", dec.blocks)
    print(f"||M^-1 B M - D|| = {np.linalg.norm(dec.M_inv @ B @ dec.M - dec.D, 2):.2e}, "
          f"||M|| = {np.linalg.norm(dec.M, 2):.3f} <= {dec.bound_M:.3g}")

    res = adaptive_separation(B, [1.0, 0.5, 0.25, 0.1])
    print("adaptive separation settles at d0 =", res.d0,
          "with", len(res.decoupling.blocks), "blocks")


if __name__ == "__main__":
    main()
