import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PHI
from realcocycle.errors import DuplicateWitnessError, HypothesisError
from realcocycle.harmonics import FrequencyVector, lattice_ball
from realcocycle.resonance import (ResonanceWitness, analyze_classes, best_witness, build_graph,
                                   compose_chain, link_classes, link_defect,
                                   shortest_odd_closed_walk, shortest_path)

OM = FrequencyVector(np.array([1.0, PHI]), 0.1, 1.5)
finite = dict(allow_nan=False, allow_infinity=False)


def brute_witness(alpha, beta, N):
    K = lattice_ball(N, 2)
    D = np.abs(2j * np.pi * (K @ OM.omega) - (alpha - np.conj(beta)))
    return D.min()


# --------------------------------------------------------------------------
# witnesses

def test_real_pair_has_zero_witness():
    w = best_witness(1.5, 1.5, OM, 3)
    assert w.k == (0, 0) and w.defect == 0


@settings(max_examples=50, deadline=None)
@given(st.complex_numbers(max_magnitude=10, **finite), st.complex_numbers(max_magnitude=10, **finite),
       st.integers(0, 4))
def test_best_witness_is_optimal_and_symmetric(a, b, N):
    w = best_witness(a, b, OM, N)
    assert w.defect == pytest.approx(brute_witness(a, b, N), abs=1e-12)
    assert w.defect == pytest.approx(link_defect(a, b, w.k, OM), abs=1e-12)
    assert best_witness(b, a, OM, N).defect == pytest.approx(w.defect, abs=1e-12)
    assert w.norm <= N


def test_witness_round_trip():
    w = ResonanceWitness((1, -2), 0.25, 3)
    assert ResonanceWitness.from_dict(w.to_dict()) == w


# --------------------------------------------------------------------------
# graphs

def test_graph_examples():
    G = build_graph([0.0], OM, 2, 0.1)
    assert G.witness(0, 0).k == (0, 0)
    G = build_graph([1j * np.pi, -1j * np.pi], OM, 2, 0.1)
    assert G.witness(0, 1).k == (0, 0) and G.witness(0, 1).defect == 0
    assert G.witness(0, 0).k == (1, 0)
    assert G.witness(1, 1).k == (-1, 0)
    assert G.star_ok


def test_graph_certified_mode():
    with pytest.raises(HypothesisError):
        build_graph([0.0], OM, 4, 0.5, certified=True)
    G = build_graph([1j * np.pi], OM, 2, 1e-4, certified=True)
    assert G.certificate.passed
    # omega with a rational relation gives two witnesses at the same defect
    om = FrequencyVector(np.array([1.0, 2.0]), 1e-9, 1.5)
    with pytest.raises(DuplicateWitnessError):
        build_graph([2j * np.pi], om, 3, 1e-12, certified=True)


def test_graph_validation():
    with pytest.raises(ValueError):
        build_graph([0.0], OM, 2, -1)
    with pytest.raises(ValueError):
        build_graph([0.0, 1.0], OM, 2, 0.1, multiplicities=[1])


# --------------------------------------------------------------------------
# combinatorics

def random_adjacency(rng, m, p):
    A = rng.random((m, m)) < p
    A = np.triu(A)
    return A | A.T


def odd_walk_oracle(adj, s):
    """Length of the shortest odd closed walk through boolean powers."""
    m = len(adj)
    A = adj.astype(np.int64)
    P = A.copy()
    for L in range(1, 2 * m, 2):
        if P[s, s]:
            return L
        P = np.minimum(P @ A @ A, 1)
    return None


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 7), st.floats(0.1, 0.7))
def test_walks_and_classes_against_oracles(seed, m, p):
    rng = np.random.default_rng(seed)
    adj = random_adjacency(rng, m, p)
    classes = link_classes(adj)
    assert sorted(i for c in classes for i in c[0]) == list(range(m))
    for nodes, odd, colour in classes:
        walk = shortest_odd_closed_walk(adj, nodes[0])
        L = odd_walk_oracle(adj, nodes[0])
        assert odd == (L is not None)
        if odd:
            assert walk[0] == walk[-1] == nodes[0] and len(walk) - 1 == L
            assert all(adj[a, b] for a, b in zip(walk, walk[1:]))
        else:
            assert colour[nodes[0]] == 0
            assert all(colour[a] != colour[b] for a in nodes for b in nodes if adj[a, b])
        for t in nodes:
            path = shortest_path(adj, nodes[0], t)
            assert path[0] == nodes[0] and path[-1] == t
            assert all(adj[a, b] for a, b in zip(path, path[1:]))


def test_compose_examples():
    w = ResonanceWitness((1, 2), 0.1, 3)
    assert compose_chain([w]) == w
    w2 = ResonanceWitness((0, 1), 0.2, 3)
    c = compose_chain([w, w2])
    assert c.k == (1, 1) and c.defect <= 0.3 + 1e-15
    with pytest.raises(ValueError):
        compose_chain([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=3),
       st.complex_numbers(max_magnitude=3, **finite))
def test_exact_chain_composes_exactly(ks, a0):
    # build a_(j+1) from a_j so that every link is exact: a_j - conj(a_(j+1)) = 2 i pi <k_j, omega>
    vals = [complex(a0)]
    for k in ks:
        vals.append((vals[-1] - 2j * np.pi * float(np.dot(k, OM.omega))).conjugate())
    ws = [ResonanceWitness(k, link_defect(vals[j], vals[j + 1], k, OM), 2) for j, k in enumerate(ks)]
    assert all(w.defect < 1e-12 for w in ws)
    c = compose_chain(ws, values=vals, omega=OM)
    assert c.defect < 1e-12


# --------------------------------------------------------------------------
# classes

def test_single_self_linked_node():
    G = build_graph([1j * np.pi], OM, 2, 0.1)
    rep = analyze_classes(G)
    assert len(rep.classes) == 1 and rep.classes[0].odd_loop
    w, tag = rep.node_witness(0)
    assert w.k == G.witness(0, 0).k and tag == "odd-loop"
    assert abs(rep.target(0) - 2j * np.pi * float(np.dot(w.k, OM.omega))) < 1e-12


def test_two_node_bipartite_class():
    s = 0.3
    spec = [1 + 1j * s, 1 + 1j * (2 * np.pi - s)]
    G = build_graph(spec, OM, 2, 0.1)
    assert G.witness(0, 0) is None and G.witness(1, 1) is None and G.witness(0, 1) is not None
    rep = analyze_classes(G)
    (c,) = rep.classes
    assert not c.odd_loop and c.sigma1 == (0,) and c.sigma2 == (1,)
    d = rep.to_dict()
    tags = {w["case"] for cl in d["classes"] for w in cl["witnesses"]}
    assert tags == {"bipartite-S1", "bipartite-S2"}
