"""Acceptance criteria, one test per criterion.

Each test records a one-line verdict that is printed in the pytest terminal
summary (and directly when this file is run as a script).
"""

import itertools
import math
import warnings

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from conftest import ACCEPTANCE_LINES, PHI, random_poly
from realcocycle.harmonics import (FrequencyVector, TrigPoly, cr_norm, directional_derivative,
                                   exp_on_grid, mean_det, small_divisor_bound, solve_small_divisor,
                                   sup_norm, truncate)
from realcocycle.jordan import (DeltaSchedule, jordan_structure, nilpotent_jnf, realify_jordan,
                                same_structure)
from realcocycle.reduction import (choose_lambda, default_Cd, doubling_conjugation, full_pipeline)
from realcocycle.resonance import (analyze_classes, build_graph, link_classes,
                                   shortest_odd_closed_walk)
from realcocycle.spectral import separate_spectrum
from realcocycle.synth import synth_case

pytestmark = pytest.mark.acceptance

OMEGA = FrequencyVector(np.array([1.0, PHI]), 0.1, 1.5)


def record(number, title, passed, detail):
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def nilpotent_jordan(sizes):
    n = sum(sizes)
    J = np.zeros((n, n))
    p = 0
    for s in sizes:
        for i in range(s - 1):
            J[p + i, p + i + 1] = 1.0
        p += s
    return J


def random_partition(rng, n):
    parts = []
    rest = n
    while rest:
        s = int(rng.integers(1, rest + 1))
        parts.append(s)
        rest -= s
    return sorted(parts, reverse=True)


def well_conditioned(rng, n, lo=0.3, hi=3.0, complex_=True):
    Z = rng.standard_normal((n, n)) + (1j * rng.standard_normal((n, n)) if complex_ else 0)
    Q1, _ = np.linalg.qr(Z)
    Q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q1 @ np.diag(rng.uniform(lo, hi, n)) @ Q2


# --------------------------------------------------------------------------

def test_criterion_1_small_divisor_exactness():
    rng = np.random.default_rng(1)
    worst_res, bound_fail = 0.0, 0
    for trial in range(100):
        d = int(rng.integers(1, 3))
        omega = OMEGA if d == 2 else FrequencyVector(np.array([1.0]), 0.1, 1.5)
        degree = int(rng.integers(1, 9))
        f = random_poly(rng, d, 1, degree, zero_mean=True)
        g = solve_small_divisor(f, omega)
        worst_res = max(worst_res, sup_norm(directional_derivative(g, omega) - f))
        if sup_norm(g) > small_divisor_bound(f, omega) * (1 + 1e-12):
            bound_fail += 1
    ok = worst_res < 1e-12 and bound_fail == 0
    record(1, "small-divisor exactness", ok,
           f"max residual {worst_res:.2e} (< 1e-12), bound violations {bound_fail}/100")
    assert ok


def test_criterion_2_lambda_pigeonhole():
    rng = np.random.default_rng(2)
    failures, worst_ratio = 0, math.inf
    for trial in range(100):
        n = int(rng.integers(1, 4))
        d = int(rng.integers(1, 3))
        Z = random_poly(rng, d, n, int(rng.integers(0, 3))) + TrigPoly.identity(d, n)
        mu = mean_det(Z)
        Z = Z / (abs(mu) ** (1.0 / n) * np.exp(1j * np.angle(mu) / n))
        choice = choose_lambda(Z)
        worst_ratio = min(worst_ratio, abs(choice.value) / choice.bound)
        if abs(choice.value) < choice.bound or not -1 <= choice.lambda0 <= 1:
            failures += 1
    ok = failures == 0
    record(2, "lambda pigeonhole", ok,
           f"failures {failures}/100, min |P(lambda0)| / (4(n+1))^-n = {worst_ratio:.3g}")
    assert ok


def test_criterion_3_jordan_with_estimates():
    rng = np.random.default_rng(3)
    worst, est_fail, rank_fail = 0.0, 0, 0
    for trial in range(200):
        n = int(rng.integers(1, 6))
        parts = random_partition(rng, n)
        J0 = nilpotent_jordan(parts)
        S = well_conditioned(rng, n)
        N = rng.uniform(0.2, 5.0) * S @ J0 @ np.linalg.inv(S)
        # epsilon small enough that the first threshold epsilon^delta_1 is 1e-8
        log_eps = math.log(1e-8) / DeltaSchedule.default(n, 1).delta(1)
        res = nilpotent_jnf(N, log_epsilon=log_eps)
        normN = np.linalg.norm(N, 2)
        ident = np.linalg.norm(res.S_inv @ N @ res.S - res.J - res.F_residual, 2)
        if normN > 0:
            worst = max(worst, ident / normN)
        est = [res.certificate[k] for k in ("estim-S", "estim-S-inverse", "estim-F", "estim-F-inverse")]
        est_fail += not all(q.passed for q in est)
        # oracle: rank of J0^k counted directly from the block sizes
        oracle = tuple(sum(max(s - k, 0) for s in parts) for k in range(1, n + 1))
        rank_fail += jordan_structure(res.J) != oracle
    ok = worst < 1e-10 and est_fail == 0 and rank_fail == 0
    record(3, "JNF with estimates", ok,
           f"max identity residual {worst:.2e}||N||, estimate failures {est_fail}/200, "
           f"rank mismatches {rank_fail}/200")
    assert ok


def test_criterion_4_spectrum_separation():
    rng = np.random.default_rng(4)
    worst_off, worst_eig = 0.0, 0.0
    for trial in range(200):
        n = int(rng.integers(2, 7))
        gamma = 0.1
        n1 = int(rng.integers(1, n))
        # centres far enough apart that the cluster gap exceeds 2 gamma
        c1, c2 = 0.0, (3 * gamma + rng.uniform(0.05, 2.0)) * np.exp(2j * np.pi * rng.random())
        # clusters of diameter below gamma, far from defective
        spread = gamma / 2

        def cluster(c, m):
            return c + spread * (rng.random(m) - 0.5 + 1j * (rng.random(m) - 0.5))

        ev = np.concatenate([cluster(c1, n1), cluster(c2, n - n1)])
        T = np.triu(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)), 1) * 0.3
        T[np.diag_indices(n)] = ev
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        B = Q @ T @ Q.conj().T
        dec = separate_spectrum(B, gamma)
        off = dec.M_inv @ B @ dec.M
        for a, b in dec.blocks:
            off[a:b, a:b] = 0
        worst_off = max(worst_off, np.linalg.norm(off, 2) / np.linalg.norm(B, 2))
        got = np.diag(dec.D)
        r, c = linear_sum_assignment(np.abs(got[:, None] - ev[None, :]))
        worst_eig = max(worst_eig, float(np.abs(got[r] - ev[c]).max()))
    ok = worst_off < 1e-10 and worst_eig < 1e-9
    record(4, "spectrum separation", ok,
           f"max off-diagonal {worst_off:.2e}||B||, max eigenvalue drift {worst_eig:.2e}")
    assert ok


def test_criterion_5_structure_stability():
    rng = np.random.default_rng(5)
    small_ok, big_ok, big_total = 0, 0, 0
    for trial in range(100):
        n = int(rng.integers(2, 6))
        xi = 2.0
        C = well_conditioned(rng, n, 1 / xi, xi)
        thr = 1.0 / (n * math.factorial(n) * xi**n)
        J = nilpotent_jordan(random_partition(rng, n))
        E = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        E *= 0.5 * thr / xi / np.linalg.norm(E, 2)
        B = np.linalg.solve(C, J @ C) + E
        small_ok += same_structure(J, B, C, xi).guaranteed
        # a genuinely different structure at distance far above the threshold
        parts2 = random_partition(rng, n)
        while nilpotent_jordan(parts2).tolist() == J.tolist():
            parts2 = random_partition(rng, n)
        B2 = np.linalg.solve(C, nilpotent_jordan(parts2) @ C)
        if np.linalg.norm(B2 - np.linalg.solve(C, J @ C), 2) > 10 * thr:
            big_total += 1
            v = same_structure(J, B2, C, xi)
            big_ok += (not v.guaranteed) and v.ranks_A != v.ranks_B
    ok = small_ok == 100 and big_ok == big_total and big_total > 0
    record(5, "structure stability", ok,
           f"guaranteed-equal {small_ok}/100 below threshold, "
           f"rank test detects {big_ok}/{big_total} different structures")
    assert ok


def _odd_walk_oracle(adj_batch):
    """Per node: length of the shortest odd closed walk (0 if none), by matrix powers."""
    b, m, _ = adj_batch.shape
    A = adj_batch.astype(np.int64)
    out = np.zeros((b, m), dtype=np.int64)
    P = A.copy()
    A2 = np.minimum(A @ A, 1)
    for L in range(1, 2 * m, 2):
        diag = np.diagonal(P, axis1=1, axis2=2) > 0
        out[(out == 0) & diag] = L
        P = np.minimum(P @ A2, 1)
    return out


def _all_graphs(m, loops):
    pairs = list(itertools.combinations(range(m), 2)) + ([(i, i) for i in range(m)] if loops else [])
    total = 1 << len(pairs)
    bits = ((np.arange(total)[:, None] >> np.arange(len(pairs))[None, :]) & 1).astype(bool)
    adj = np.zeros((total, m, m), dtype=bool)
    for e, (i, j) in enumerate(pairs):
        adj[:, i, j] = bits[:, e]
        adj[:, j, i] = bits[:, e]
    return adj


def test_criterion_6_resonance_combinatorics():
    mismatches, graphs, walk_bad = 0, 0, 0
    for m in range(1, 7):
        adj = _all_graphs(m, loops=True)
        oracle = _odd_walk_oracle(adj)
        graphs += len(adj)
        for g in range(len(adj)):
            flags = np.zeros(m, dtype=bool)
            for nodes, odd, _ in link_classes(adj[g]):
                flags[list(nodes)] = odd
            if not np.array_equal(flags, oracle[g] > 0):
                mismatches += 1
            if m <= 4:
                for s in range(m):
                    w = shortest_odd_closed_walk(adj[g], s)
                    L = 0 if w is None else len(w) - 1
                    if L != oracle[g, s]:
                        walk_bad += 1
    # planted exact resonances
    rng = np.random.default_rng(6)
    recovered, planted_total = 0, 0
    for trial in range(50):
        n_pairs = int(rng.integers(1, 4))
        nodes, planted = [], []
        re = rng.permutation(np.linspace(-3, 3, 2 * n_pairs + 1))[: n_pairs]
        for p in range(n_pairs):
            k = tuple(int(x) for x in rng.integers(-2, 3, 2))
            a = re[p] + 1j * rng.uniform(0.3, 3.0)
            b = np.conj(a) + 2j * np.pi * float(np.dot(k, OMEGA.omega))
            planted.append((len(nodes), len(nodes) + 1, k))
            nodes += [a, b]
        G = build_graph(np.array(nodes), OMEGA, 4, 1e-9)
        for i, j, k in planted:
            planted_total += 1
            w = G.witness(i, j)
            recovered += w is not None and tuple(w.k) == k and w.defect < 1e-12
    ok = mismatches == 0 and walk_bad == 0 and recovered == planted_total
    record(6, "resonance combinatorics", ok,
           f"{graphs} graphs (<= 6 nodes, loops included): {mismatches} odd-loop mismatches, "
           f"{walk_bad} shortest-walk mismatches; planted edges {recovered}/{planted_total}")
    assert ok


def _planted_jordan(rng, exact):
    """Jordan matrix with planted resonance classes and its (N, rho)."""
    N, rho = 4, (0.0 if exact else 1e-6)
    jitter = 0.0 if exact else rho / 20
    w = OMEGA.omega
    eigs, sizes = [], []
    budget = int(rng.integers(2, 7))
    re_slots = list(rng.permutation(np.linspace(-2.5, 2.5, 12)))

    def k_():
        return rng.integers(-1, 2, 2)

    while sum(sizes) < budget:
        kind = rng.integers(0, 3)
        re = re_slots.pop()
        s = int(rng.integers(1, 3)) if budget - sum(sizes) >= 2 else 1
        if kind == 0 or budget - sum(sizes) < 2 * s:
            # odd loop: Im alpha = pi <k, omega>
            eigs.append(re + 1j * np.pi * float(k_() @ w) + jitter * (1 + 1j) * rng.random())
            sizes.append(s)
        elif kind == 1:
            a = re + 1j * rng.uniform(0.2, 1.5)
            b = np.conj(a) + 2j * np.pi * float(k_() @ w)
            eigs += [a, b + jitter * rng.random()]
            sizes += [s, s]
        else:
            # balanced bipartite class {a, c} / {b, e}
            if sum(sizes) + 4 > 6:
                continue
            a = re + 1j * rng.uniform(0.2, 1.5)
            k1, k2, k3 = k_(), k_(), k_()
            b = np.conj(a) + 2j * np.pi * float(k1 @ w)
            c = a + 2j * np.pi * float(k2 @ w)
            e = np.conj(a) + 2j * np.pi * float(k3 @ w)
            eigs += [a, b, c, e]
            sizes += [1, 1, 1, 1]
    n = sum(sizes)
    B = np.zeros((n, n), dtype=complex)
    p = 0
    for e, s in zip(eigs, sizes):
        for i in range(s):
            B[p + i, p + i] = e
            if i < s - 1:
                B[p + i, p + i + 1] = 1.0
        p += s
    return B, eigs, sizes, N, rho


def test_criterion_7_doubling_identity():
    rng = np.random.default_rng(7)
    done, fails = 0, {"identity": 0, "B''": 0, "C^r": 0, "real": 0}
    worst_id = 0.0
    while done < 50:
        exact = done % 2 == 0
        B, eigs, sizes, N, rho = _planted_jordan(rng, exact)
        vals = np.array(eigs)
        order = np.lexsort((vals.imag, vals.real))
        G = build_graph(vals[order], OMEGA, N, rho, multiplicities=[sizes[i] for i in order])
        if not G.star_ok or len(set(np.round(vals, 8))) < len(vals):
            continue
        rep = analyze_classes(G)
        n = B.shape[0]
        D = doubling_conjugation(B, rep, OMEGA, N, rho, 3)
        ident = directional_derivative(D.W, OMEGA.halved()) - B @ D.W + D.W @ (D.B_prime + D.B_dprime)
        worst_id = max(worst_id, ident.max_abs())
        fails["identity"] += ident.max_abs() >= 1e-11
        fails["B''"] += np.linalg.norm(D.B_dprime, 2) > 2 * n * rho * (1 + 1e-9) + 1e-300
        for r in range(4):
            lim = max(1.0, (4 * n * np.pi * N) ** r) * (1 + 1e-12)
            if cr_norm(D.W, r, "grid-sup") > lim or cr_norm(D.W_inv, r, "grid-sup") > lim:
                fails["C^r"] += 1
        # realification is a unitary change of basis to an entrywise real matrix
        Bp_complex = D.P @ D.B_prime @ D.P.conj().T
        _, R = realify_jordan(Bp_complex)
        fails["real"] += bool(np.any(np.imag(D.B_prime) != 0)) or np.abs(np.imag(R)).max() > 1e-12
        done += 1
    ok = not any(fails.values())
    record(7, "doubling identity", ok,
           f"50 planted Jordan matrices (25 exact, 25 near-resonant): max identity defect "
           f"{worst_id:.2e}, failures {({k: int(v) for k, v in fails.items()})}")
    assert ok


def test_criterion_8_end_to_end():
    bad = []
    worst = 0.0
    for seed in range(20):
        case = synth_case(2, 2, 1 + seed % 2, 1 + seed % 2, seed)
        T = case.triples[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = full_pipeline(case.cocycle, case.triples, case.pipeline_params(mode="diagnostic"))
        out = res.triples[0]
        C2 = res.cocycle
        limit = max(1e-7, 10 * T.residual_norm)
        worst = max(worst, out.residual_norm)
        real_triple = C2.real_flag and out.Z.is_real() and out.Z_inv.is_real() and out.F.is_real()
        b_real = np.isrealobj(out.B) or not np.any(np.imag(out.B))
        halved = np.allclose(C2.omega.omega, case.cocycle.omega.omega / 2)
        if not (real_triple and b_real and halved and out.residual_norm <= limit):
            bad.append(seed)
    ok = not bad
    record(8, "end-to-end", ok,
           f"20 synthetic cases, max final residual {worst:.2e}, failing seeds {bad}")
    assert ok


def test_criterion_9_truncation():
    rng = np.random.default_rng(9)
    fails, worst = 0, 0.0
    for trial in range(50):
        n = int(rng.integers(1, 4))
        d = 2
        if trial % 2:
            # U = exp(i H) with H real: conj(U) = exp(-i H) = U^-1
            H = random_poly(rng, d, n, 1, scale=0.1)
            H = (H + H.conj_transpose()).real_part() * 0.5
            U = exp_on_grid(H * 1j, 24)
        else:
            # U = M^-1 D^-2 conj(M) with a diagonal phase D
            M = well_conditioned(rng, n, 0.5, 2.0)
            ks = rng.integers(-2, 3, (n, d))
            U = TrigPoly.zeros(d, n)
            for i in range(n):
                E = np.zeros((n, n))
                E[i, i] = 1
                U = U + TrigPoly.single_mode(tuple(-2 * ks[i]), E)
            U = np.linalg.inv(M) @ U @ M.conj()
        Cd = default_Cd(d)
        N = int(math.ceil(Cd * cr_norm(U, d + 1) * sup_norm(U)))
        V = truncate(U, N)
        G = 64
        vals = V.on_grid(G).reshape(-1, n, n)
        gap = np.linalg.norm(np.linalg.inv(vals) - vals.conj(), 2, axis=(1, 2)).max()
        nV = np.linalg.norm(vals, 2, axis=(1, 2)).max()
        worst = max(worst, gap / nV)
        fails += gap > 0.25 * nV
    ok = fails == 0
    record(9, "truncation", ok, f"50 constructed U, max ||V^-1 - conj V|| / ||V|| = {worst:.2e} (<= 0.25)")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
