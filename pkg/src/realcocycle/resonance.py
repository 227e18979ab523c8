"""
Resonances between eigenvalues.

Two eigenvalues ``alpha, beta`` are (N, rho)-linked when some ``k`` with
``|k|_1 <= N`` gives ``|2 i pi <k, omega> - (alpha - conj(beta))| < rho``.
The link relation defines a graph on the spectrum.  Its connected
components are the chain classes; a class contains an odd loop exactly
when its graph is not bipartite.  Chains of links compose into a single
link whose lattice vector is the alternating sum of the link vectors.

When ``rho = 0`` the graph is built in exact mode: a link requires a defect
below ``exact_tol`` (default ``1e-12``).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .certificates import Certificate
from .errors import DuplicateWitnessError, HypothesisError, StarPropertyError
from .harmonics import FrequencyVector, lattice_ball

__all__ = [
    "ResonanceWitness", "ResonanceGraph", "ClassInfo", "ClassReport",
    "link_defect", "best_witness", "build_graph", "link_classes", "shortest_odd_closed_walk",
    "shortest_path", "analyze_classes", "compose_chain",
    "CASE_ODD", "CASE_S1", "CASE_S2",
]

CASE_ODD = "odd-loop"
CASE_S1 = "bipartite-S1"
CASE_S2 = "bipartite-S2"

EXACT_TOL = 1e-12


def _omega_vector(omega):
    if isinstance(omega, FrequencyVector):
        return omega
    return FrequencyVector(np.asarray(omega, dtype=float))


@dataclass(frozen=True)
class ResonanceWitness:
    """Lattice vector ``k`` realising a link, with its defect."""

    k: tuple
    defect: float
    N_used: int

    @property
    def norm(self):
        return int(sum(abs(x) for x in self.k))

    def to_dict(self):
        return {"k": [int(x) for x in self.k], "defect": float(self.defect), "N_used": int(self.N_used)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(int(x) for x in data["k"]), float(data["defect"]), int(data["N_used"]))


def link_defect(alpha, beta, k, omega) -> float:
    """``|2 i pi <k, omega> - (alpha - conj(beta))|``."""
    w = _omega_vector(omega).omega
    return float(abs(2j * np.pi * float(np.dot(k, w)) - (complex(alpha) - complex(beta).conjugate())))


def _lex_rank(K):
    order = np.lexsort(K.T[::-1])
    rank = np.empty(len(K), dtype=np.int64)
    rank[order] = np.arange(len(K))
    return rank


def _scan(targets, omega, N):
    """Best and second-best defects for ``2 i pi <k, omega> - target`` over the ball."""
    K = lattice_ball(N, omega.d)
    phases = 2j * np.pi * (K @ omega.omega)
    D = np.abs(phases[None, :] - np.asarray(targets, dtype=complex)[:, None])
    dmin = D.min(axis=1)
    rank = _lex_rank(K)
    tied = np.where(D == dmin[:, None], rank[None, :], np.iinfo(np.int64).max)
    best = tied.argmin(axis=1)
    if D.shape[1] > 1:
        D2 = D.copy()
        D2[np.arange(len(best)), best] = np.inf
        second = D2.min(axis=1)
    else:
        second = np.full(len(best), np.inf)
    return K, best, dmin, second


def best_witness(alpha, beta, omega, N: int) -> ResonanceWitness:
    """Minimise ``|2 i pi <k, omega> - (alpha - conj(beta))|`` over ``|k|_1 <= N``.

    The scan is exhaustive.  Exact ties go to the lexicographically
    smallest ``k``.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    om = _omega_vector(omega)
    target = complex(alpha) - complex(beta).conjugate()
    K, best, dmin, _ = _scan([target], om, N)
    return ResonanceWitness(tuple(int(x) for x in K[best[0]]), float(dmin[0]), int(N))


@dataclass
class ResonanceGraph:
    """Link graph on a spectrum.

    ``edges`` maps ordered pairs ``(i, j)`` with ``i <= j`` to their
    witness.  The reversed pair ``(j, i)`` is linked by the same ``k`` with
    the same defect, so it is not stored separately.
    """

    nodes: np.ndarray
    omega: FrequencyVector
    N: int
    rho: float
    edges: dict
    multiplicities: tuple
    exact: bool = False
    exact_tol: float = EXACT_TOL
    certificate: Certificate = field(default_factory=Certificate)

    def __len__(self):
        return len(self.nodes)

    @property
    def dimension(self):
        return int(sum(self.multiplicities))

    def witness(self, i, j):
        """Witness of the link between nodes ``i`` and ``j``, or ``None``."""
        return self.edges.get((min(i, j), max(i, j)))

    def adjacency(self):
        m = len(self.nodes)
        adj = np.zeros((m, m), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def uncovered(self):
        adj = self.adjacency()
        return [i for i in range(len(self.nodes)) if not adj[i].any()]

    @property
    def star_ok(self):
        return not self.uncovered()

    def edge_list(self):
        return [(i, j, w) for (i, j), w in sorted(self.edges.items())]

    def to_dict(self):
        return {
            "nodes": [[float(z.real), float(z.imag)] for z in self.nodes],
            "multiplicities": list(self.multiplicities),
            "omega": self.omega.to_dict(), "N": int(self.N), "rho": float(self.rho),
            "exact": bool(self.exact),
            "edges": [{"i": i, "j": j, **w.to_dict()} for i, j, w in self.edge_list()],
            "star": self.star_ok,
        }


def build_graph(spectrum, omega, N: int, rho: float, *, multiplicities=None,
                certified: bool = False, exact_tol: float = EXACT_TOL) -> ResonanceGraph:
    """All-pairs link graph, self-pairs included.

    Parameters
    ----------
    spectrum : sequence of complex
        Graph nodes, in the order given.
    omega : FrequencyVector
    N : int
        Lattice radius.
    rho : float
        Link threshold.  ``rho = 0`` selects exact mode.
    multiplicities : sequence of int, optional
        Algebraic multiplicities riding on the nodes (default all 1).
    certified : bool
        Check ``rho < kappa (2N)^(-tau)`` and the uniqueness of every
        witness within ``rho``.

    Raises
    ------
    HypothesisError
        Certified mode with ``rho`` too large for uniqueness.
    DuplicateWitnessError
        Certified mode and two lattice vectors both link a pair.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if N < 0:
        raise ValueError("N must be nonnegative")
    om = _omega_vector(omega)
    nodes = np.asarray(spectrum, dtype=complex).ravel()
    m = len(nodes)
    mult = tuple(int(x) for x in (multiplicities if multiplicities is not None else [1] * m))
    if len(mult) != m or any(x < 1 for x in mult):
        raise ValueError("multiplicities must be positive, one per node")
    exact = rho == 0
    cert = Certificate()
    if certified and not exact:
        bound = om.kappa * (2 * N) ** (-om.tau) if N > 0 else math.inf
        ineq = cert.check("witness-uniqueness-rho", rho, bound, note="rho < kappa (2N)^-tau")
        if not ineq.passed:
            raise HypothesisError("witness-uniqueness-rho", rho, bound)
    iu, ju = np.triu_indices(m)
    targets = nodes[iu] - nodes[ju].conj()
    K, best, dmin, second = _scan(targets, om, N)
    edges = {}
    for p in range(len(iu)):
        linked = dmin[p] <= exact_tol if exact else dmin[p] < rho
        if not linked:
            continue
        w = ResonanceWitness(tuple(int(x) for x in K[best[p]]), float(dmin[p]), int(N))
        if certified:
            dup = second[p] <= exact_tol if exact else second[p] < rho
            if dup:
                D = np.abs(2j * np.pi * (K @ om.omega) - targets[p])
                D[best[p]] = np.inf
                raise DuplicateWitnessError((int(iu[p]), int(ju[p])), w.k, K[int(D.argmin())])
        edges[(int(iu[p]), int(ju[p]))] = w
    if certified and edges:
        gap = min(second[p] for p in range(len(iu)) if (int(iu[p]), int(ju[p])) in edges)
        cert.check("second-best-defect", -gap, -(exact_tol if exact else rho),
                   note="every linked pair has a unique witness")
    return ResonanceGraph(nodes, om, int(N), float(rho), edges, mult, exact, exact_tol, cert)


# --------------------------------------------------------------------------
# graph combinatorics on boolean adjacency matrices
# --------------------------------------------------------------------------

def link_classes(adjacency):
    """Connected components with a 2-colouring attempt.

    Returns a list of ``(nodes, odd_loop, colour)`` where ``nodes`` is
    sorted, ``colour`` maps node -> 0/1 (a proper colouring when
    ``odd_loop`` is false) and the lowest node has colour 0.  Self-loops
    count as odd loops.
    """
    adj = np.asarray(adjacency, dtype=bool)
    m = adj.shape[0]
    seen = np.zeros(m, dtype=bool)
    out = []
    for s in range(m):
        if seen[s]:
            continue
        colour = {s: 0}
        odd = False
        queue = deque([s])
        seen[s] = True
        while queue:
            u = queue.popleft()
            for v in np.nonzero(adj[u])[0]:
                v = int(v)
                if v not in colour:
                    colour[v] = 1 - colour[u]
                    seen[v] = True
                    queue.append(v)
                elif colour[v] == colour[u]:
                    odd = True
        out.append((tuple(sorted(colour)), odd, colour))
    return out


def shortest_odd_closed_walk(adjacency, start: int):
    """Shortest closed walk from ``start`` with an odd number of edges, or ``None``.

    Breadth-first search over ``(node, parity)`` states.
    """
    adj = np.asarray(adjacency, dtype=bool)
    prev = {(start, 0): None}
    queue = deque([(start, 0)])
    while queue:
        u, p = queue.popleft()
        for v in np.nonzero(adj[u])[0]:
            state = (int(v), 1 - p)
            if state in prev:
                continue
            prev[state] = (u, p)
            if state == (start, 1):
                walk = [start]
                cur = (u, p)
                while cur is not None:
                    walk.append(cur[0])
                    cur = prev[cur]
                return walk[::-1]
            queue.append(state)
    return None


def shortest_path(adjacency, source: int, target: int):
    """Shortest path ``[source, ..., target]`` or ``None``."""
    adj = np.asarray(adjacency, dtype=bool)
    prev = {source: None}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u == target:
            path = []
            while u is not None:
                path.append(u)
                u = prev[u]
            return path[::-1]
        for v in np.nonzero(adj[u])[0]:
            v = int(v)
            if v not in prev:
                prev[v] = u
                queue.append(v)
    return None


# --------------------------------------------------------------------------
# chain composition and class analysis
# --------------------------------------------------------------------------

def compose_chain(witnesses, parities=None, *, values=None, omega=None, max_length=None,
                  return_bound: bool = False):
    """Compose a chain of links into one link.

    For a chain ``a_1 - a_2 - ... - a_(r+1)`` with witnesses ``k_1 .. k_r``
    the composed vector is ``k = sum_odd k_j - sum_even k_j``.  It links
    ``a_1`` to ``a_(r+1)`` when ``r`` is odd and ``a_1`` to
    ``conj(a_(r+1))`` when ``r`` is even, with defect at most the sum of the
    individual defects.

    Parameters
    ----------
    witnesses : sequence of ResonanceWitness
    parities : sequence of +1/-1, optional
        Signs of the summands; default alternates starting with +1.
    values : sequence of complex, optional
        The ``r + 1`` chain values.  With ``omega``, the returned defect is
        the actual defect of the composed link instead of the bound.
    max_length : int, optional
        Reject longer chains.

    Returns
    -------
    ResonanceWitness, or ``(witness, bound)`` when ``return_bound``.
    """
    ws = list(witnesses)
    r = len(ws)
    if r == 0:
        raise ValueError("empty chain")
    if max_length is not None and r > max_length:
        raise ValueError(f"chain of length {r} exceeds {max_length}")
    signs = [1 if j % 2 == 0 else -1 for j in range(r)] if parities is None else \
        [1 if (p is True or (not isinstance(p, bool) and p > 0)) else -1 for p in parities]
    if len(signs) != r:
        raise ValueError("one parity per witness")
    d = len(ws[0].k)
    k = np.zeros(d, dtype=np.int64)
    for s, w in zip(signs, ws):
        k += s * np.asarray(w.k, dtype=np.int64)
    bound = float(sum(w.defect for w in ws))
    defect = bound
    if values is not None:
        vals = [complex(v) for v in values]
        if len(vals) != r + 1:
            raise ValueError("values must have one entry more than witnesses")
        if omega is None:
            raise ValueError("omega is required with values")
        end = vals[-1] if r % 2 == 0 else vals[-1].conjugate()
        # link_defect(a, b) uses a - conj(b); pass conj(end) so the target is a_1 - end
        defect = link_defect(vals[0], end.conjugate(), k, omega)
    out = ResonanceWitness(tuple(int(x) for x in k), defect, int(sum(w.N_used for w in ws)))
    return (out, bound) if return_bound else out


@dataclass
class ClassInfo:
    """One chain class of a resonance graph."""

    nodes: tuple
    odd_loop: bool
    sigma1: tuple = ()
    sigma2: tuple = ()
    anchor: int | None = None
    witnesses: dict = field(default_factory=dict)
    tags: dict = field(default_factory=dict)
    intra_links: list = field(default_factory=list)

    def to_dict(self):
        return {
            "nodes": list(self.nodes), "odd_loop": self.odd_loop,
            "sigma1": list(self.sigma1), "sigma2": list(self.sigma2), "anchor": self.anchor,
            "witnesses": [{"node": i, "case": self.tags[i], **self.witnesses[i].to_dict()}
                          for i in self.nodes],
            "intra_links": [{"i": i, "j": j, **w.to_dict()} for i, j, w in self.intra_links],
        }


@dataclass
class ClassReport:
    """Chain classes of a resonance graph with per-node composed witnesses.

    For an odd-loop class, node ``i`` carries ``k_i`` linking ``alpha_i``
    to itself.  For a bipartite class with anchor ``alpha_0`` (lowest node
    of ``sigma1``), nodes of ``sigma1`` carry ``k_i`` with
    ``2 i pi <k_i, omega> ~ alpha_i - alpha_0`` and nodes of ``sigma2``
    carry ``k_i`` with ``2 i pi <k_i, omega> ~ alpha_i - conj(alpha_0)``.
    """

    graph: ResonanceGraph
    classes: list
    certificate: Certificate = field(default_factory=Certificate)

    def class_of(self, i):
        for c, info in enumerate(self.classes):
            if i in info.nodes:
                return c
        raise KeyError(i)

    def node_witness(self, i):
        info = self.classes[self.class_of(i)]
        return info.witnesses[i], info.tags[i]

    def target(self, i):
        """The value ``2 i pi <k_i, omega>`` approximates for node ``i``."""
        info = self.classes[self.class_of(i)]
        a = self.graph.nodes[i]
        tag = info.tags[i]
        if tag == CASE_ODD:
            return a - a.conjugate()
        a0 = self.graph.nodes[info.anchor]
        return a - a0 if tag == CASE_S1 else a - a0.conjugate()

    def to_dict(self):
        return {"graph": self.graph.to_dict(),
                "classes": [c.to_dict() for c in self.classes],
                "inequalities": self.certificate.to_list()}


def _refine(witness, alpha, omega, N_big, limit, exact_tol):
    if witness.norm <= N_big and witness.defect <= limit:
        return witness
    alt = best_witness(alpha, alpha, omega, N_big)
    return alt if alt.defect < witness.defect or witness.norm > N_big else witness


def analyze_classes(G: ResonanceGraph) -> ClassReport:
    """Chain classes, odd loops, bipartitions and composed per-node witnesses.

    Raises
    ------
    StarPropertyError
        Some node has no link at all.
    """
    if not G.star_ok:
        raise StarPropertyError(G.uncovered())
    adj = G.adjacency()
    n = G.dimension
    om = G.omega
    tol = G.exact_tol if G.exact else 0.0
    N_big = n * G.N
    limit = n * G.rho + n * tol
    cert = Certificate()
    classes = []
    for nodes, odd, colour in link_classes(adj):
        info = ClassInfo(nodes, odd)
        sub = np.zeros_like(adj)
        idx = list(nodes)
        sub[np.ix_(idx, idx)] = adj[np.ix_(idx, idx)]
        if odd:
            for i in nodes:
                walk = shortest_odd_closed_walk(sub, i)
                ws = [G.witness(a, b) for a, b in zip(walk, walk[1:])]
                w = compose_chain(ws, values=G.nodes[walk], omega=om)
                info.witnesses[i] = _refine(w, G.nodes[i], om, N_big, limit, tol)
                info.tags[i] = CASE_ODD
        else:
            info.sigma1 = tuple(i for i in nodes if colour[i] == 0)
            info.sigma2 = tuple(i for i in nodes if colour[i] == 1)
            a0 = nodes[0]
            info.anchor = a0
            for i in nodes:
                if i == a0:
                    w = ResonanceWitness((0,) * om.d, 0.0, 0)
                else:
                    path = shortest_path(sub, i, a0)
                    ws = [G.witness(a, b) for a, b in zip(path, path[1:])]
                    w = compose_chain(ws, values=G.nodes[path], omega=om)
                info.witnesses[i] = w
                info.tags[i] = CASE_S1 if colour[i] == 0 else CASE_S2
            for part in (info.sigma1, info.sigma2):
                for a, i in enumerate(part):
                    for j in part[a + 1:]:
                        k = tuple(x - y for x, y in zip(info.witnesses[i].k, info.witnesses[j].k))
                        dfc = float(abs(2j * np.pi * float(np.dot(k, om.omega))
                                        - (G.nodes[i] - G.nodes[j])))
                        info.intra_links.append((i, j, ResonanceWitness(k, dfc, N_big)))
        for i in nodes:
            w = info.witnesses[i]
            cert.check(f"witness-norm[{i}]", w.norm, N_big, note="|k_i| <= nN")
            cert.check(f"witness-defect[{i}]", w.defect, limit, note="defect <= n rho")
        classes.append(info)
    return ClassReport(G, classes, cert)
