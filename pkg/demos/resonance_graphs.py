"""
Resonance graph of a spectrum and the composed witnesses of its classes.

Run with ``python3 demos/resonance_graphs.py``.
"""

import numpy as np

from realcocycle.harmonics import FrequencyVector
from realcocycle.resonance import analyze_classes, build_graph

PHI = (1 + np.sqrt(5)) / 2


def main():
    omega = FrequencyVector(np.array([1.0, PHI]), 0.1, 1.5)
    a = 0.4 + 1j * np.pi * PHI          # self-linked through k = (0, 1)
    b = 0.4 - 1j * np.pi * PHI          # conjugate partner
    c = -0.7 + 0.3j                     # linked to d only
    d = -0.7 + 1j * (2 * np.pi - 0.3)
    spectrum = [a, b, c, d, 1.1]
    G = build_graph(spectrum, omega, N=3, rho=1e-6)
    print("edges:")
    for i, j, w in G.edge_list():
        print(f"  {i} - {j}  k={w.k}  defect={w.defect:.1e}")
    rep = analyze_classes(G)
    for info in rep.classes:
        kind = "odd loop" if info.odd_loop else f"bipartite {info.sigma1} | {info.sigma2}"
        print(f"class {info.nodes}: {kind}")
        for i in info.nodes:
            w, tag = rep.node_witness(i)
            print(f"  node {i}: {tag:13s} k={w.k}")


if __name__ == "__main__":
    main()
