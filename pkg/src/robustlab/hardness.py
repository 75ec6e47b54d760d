"""Reduction from maximum distance-3 independent set to optimal robust classification.

A graph on k vertices becomes k support points (rows of ``points``) with
label i at point i. Adjacent vertices end up exactly epsilon apart, others
strictly further. The robust-optimal value is searched over labelings of the
support points; the distance-3 independent set is searched over vertex
subsets. The two exhaustive solvers never share code, so each checks the other.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

MAX_MIS_NODES = 24
MAX_LABEL_NODES = 12
DIST_TOL = 1e-9


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside 0..{self.n - 1}")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        return cls(n, frozenset(map(tuple, edges)))

    def neighbors(self) -> list[set[int]]:
        nb = [set() for _ in range(self.n)]
        for u, v in self.edges:
            nb[u].add(v)
            nb[v].add(u)
        return nb

    def distances(self) -> np.ndarray:
        """All-pairs shortest path lengths (inf when disconnected)."""
        nb = self.neighbors()
        dist = np.full((self.n, self.n), math.inf)
        for s in range(self.n):
            dist[s, s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for w in nb[u]:
                    if dist[s, w] == math.inf:
                        dist[s, w] = dist[s, u] + 1
                        q.append(w)
        return dist


def read_graph(path) -> Graph:
    """Edge list, one ``u v`` pair per line, 0-indexed. A ``nodes N`` line fixes the
    vertex count (needed for isolated vertices); ``#`` starts a comment."""
    n = None
    edges = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "nodes":
            n = int(parts[1])
            continue
        if len(parts) != 2:
            raise ValueError(f"bad edge line: {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return Graph.from_edges(n, edges)


def write_graph(g: Graph, path):
    lines = [f"nodes {g.n}"] + [f"{u} {v}" for u, v in sorted(g.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


# --- distance-3 independent set ---------------------------------------------

def distance3_mis(g: Graph) -> tuple[int, list[int]]:
    """Largest vertex set with pairwise graph distance >= 3 (exact branch and bound)."""
    if g.n > MAX_MIS_NODES:
        raise ValueError(f"exact search limited to {MAX_MIS_NODES} nodes")
    if g.n == 0:
        return 0, []
    dist = g.distances()
    # conflict[u]: vertices too close to share the set with u
    conflict = [sum(1 << v for v in range(g.n) if v != u and dist[u, v] <= 2) for u in range(g.n)]
    best = [0, 0]

    def search(cand: int, chosen: int, size: int):
        if size + bin(cand).count("1") <= best[0]:
            return
        if cand == 0:
            best[0], best[1] = size, chosen
            return
        v = (cand & -cand).bit_length() - 1
        search(cand & ~(1 << v) & ~conflict[v], chosen | (1 << v), size + 1)
        search(cand & ~(1 << v), chosen, size)

    search((1 << g.n) - 1, 0, 0)
    return best[0], [v for v in range(g.n) if best[1] >> v & 1]


def is_distance3_independent(g: Graph, vertices) -> bool:
    dist = g.distances()
    return all(dist[u, v] >= 3 for u, v in combinations(vertices, 2))


# --- reduction --------------------------------------------------------------

@dataclass
class ReductionInstance:
    points: np.ndarray
    labels: np.ndarray
    p: float
    epsilon: float
    lam: float | None
    certificate: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    def distribution(self) -> list[tuple[int, int, float]]:
        """Support of D as (point index, label, mass)."""
        return [(i, int(self.labels[i]), 1.0 / self.k) for i in range(self.k)]

    def as_dict(self) -> dict:
        return {
            "k": self.k, "d": int(self.points.shape[1]), "p": _p_name(self.p), "epsilon": self.epsilon,
            "lambda": self.lam, "points": self.points.tolist(), "labels": self.labels.tolist(),
            "distribution": [{"point": i, "label": y, "mass": m} for i, y, m in self.distribution()],
            "certificate": self.certificate,
        }


def _p_name(p):
    return "inf" if p == math.inf else p


def lp_distance(a: np.ndarray, b: np.ndarray, p: float) -> float:
    diff = np.abs(a - b)
    if p == 0:
        return float(np.count_nonzero(diff))
    if p == math.inf:
        return float(diff.max(initial=0.0))
    return float(np.sum(diff ** p) ** (1.0 / p))


def edge_order(k: int) -> list[tuple[int, int]]:
    return list(combinations(range(k), 2))


def build_reduction(g: Graph, p: float, epsilon: float | None = None) -> ReductionInstance:
    """Support points whose epsilon-adjacency reproduces the graph.

    For p = 0 the budget is fixed by the construction to d - 1 with
    d = C(k, 2); any other ``epsilon`` is rejected.
    """
    k = g.n
    order = edge_order(k)
    d = len(order)
    if p == 0:
        if k < 2:
            raise ValueError("p=0 construction needs k >= 2")
        if epsilon is not None and epsilon != d - 1:
            raise ValueError(f"p=0 construction fixes epsilon = d - 1 = {d - 1}")
        epsilon, lam = float(d - 1), None
        m = np.arange(k)[:, None] * d + np.arange(d)[None, :] + 1.0
        mp = m.copy()
        for j, (a, b) in enumerate(order):
            if (a, b) in g.edges:
                mp[a, j] = mp[b, j] = min(m[a, j], m[b, j])
    else:
        if epsilon is None or epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if p <= 0:
            raise ValueError("p must be 0, positive, or inf")
        if k < 3:
            # with two points the only coordinate is the shared edge one
            raise ValueError("construction needs k >= 3 for p > 0")
        lam = epsilon if p == math.inf else epsilon / (2 * k - 4) ** (1.0 / p)
        m = np.zeros((k, d))
        for j, (a, b) in enumerate(order):
            # the higher-indexed endpoint gets +lambda, the lower one -lambda
            m[b, j] = lam
            m[a, j] = -lam
        mp = m.copy()
        for j, (a, b) in enumerate(order):
            if (a, b) in g.edges:
                mp[a, j], mp[b, j] = abs(m[a, j]), abs(m[b, j])
    inst = ReductionInstance(mp, np.arange(1, k + 1), p, float(epsilon), lam)
    inst.certificate = certify(inst, g)
    return inst


def certify(inst: ReductionInstance, g: Graph) -> dict:
    """Check edge pairs sit at exactly epsilon and non-edge pairs strictly beyond it."""
    eps = inst.epsilon
    edge_d, other_d = [], []
    for a, b in combinations(range(inst.k), 2):
        dist = lp_distance(inst.points[a], inst.points[b], inst.p)
        (edge_d if (a, b) in g.edges else other_d).append(dist)
    tol = DIST_TOL * max(1.0, eps)
    edges_ok = all(abs(x - eps) <= tol for x in edge_d)
    others_ok = all(x > eps * (1 + DIST_TOL) for x in other_d)
    return {
        "edge_distances_ok": edges_ok,
        "non_edge_distances_ok": others_ok,
        "ok": edges_ok and others_ok,
        "edge_distance_range": [min(edge_d), max(edge_d)] if edge_d else None,
        "non_edge_distance_range": [min(other_d), max(other_d)] if other_d else None,
    }


def support_adjacency(inst: ReductionInstance) -> list[set[int]]:
    """Support points within epsilon of each other (closed ball, small tolerance)."""
    tol = DIST_TOL * max(1.0, inst.epsilon)
    nb = [set() for _ in range(inst.k)]
    for a, b in combinations(range(inst.k), 2):
        if lp_distance(inst.points[a], inst.points[b], inst.p) <= inst.epsilon + tol:
            nb[a].add(b)
            nb[b].add(a)
    return nb


def safe_count(nb: list[set[int]], labeling) -> int:
    """Points i labelled i whose every epsilon-neighbour is also labelled i (labels 0-based)."""
    return sum(1 for i in range(len(nb)) if labeling[i] == i and all(labeling[u] == i for u in nb[i]))


def optimal_robust_value(inst: ReductionInstance) -> tuple[int, list[int]]:
    """Maximum number of robustly-correct support points over labelings h: points -> {1..k}.

    Branch and bound over vertices. A vertex only matters through labels of its
    closed neighbourhood; all other labels are interchangeable, so one
    representative (the smallest such label) stands in for them. Returns the
    count and the lexicographically smallest optimal labeling (1-based labels).
    """
    k = inst.k
    if k > MAX_LABEL_NODES:
        raise ValueError(f"labeling search limited to {MAX_LABEL_NODES} points")
    nb = support_adjacency(inst)
    closed = [nb[v] | {v} for v in range(k)]
    choices = []
    for v in range(k):
        useful = sorted(closed[v])
        spare = next((lab for lab in range(k) if lab not in closed[v]), None)
        choices.append(sorted(useful + ([spare] if spare is not None else [])))
    # watchers[v]: terms i whose safety depends on v's label
    watchers = closed

    labeling = [0] * k
    alive = [True] * k
    best = {"count": -1, "labeling": None}

    def assign(v: int):
        if v == k:
            count = sum(alive)
            if count > best["count"]:
                best["count"], best["labeling"] = count, labeling.copy()
            return
        if sum(alive) <= best["count"]:
            return
        for lab in choices[v]:
            killed = [i for i in watchers[v] if alive[i] and lab != i]
            for i in killed:
                alive[i] = False
            labeling[v] = lab
            assign(v + 1)
            for i in killed:
                alive[i] = True

    assign(0)
    return best["count"], [lab + 1 for lab in best["labeling"]]


def min_adversarial_error(inst: ReductionInstance) -> float:
    count, _ = optimal_robust_value(inst)
    return 1.0 - count / inst.k


def verify_reduction(g: Graph, p: float, epsilon: float | None = None) -> dict:
    mis_size, mis_set = distance3_mis(g)
    inst = build_reduction(g, p, epsilon)
    count, labeling = optimal_robust_value(inst)
    nb = support_adjacency(inst)
    safe = [i for i in range(g.n) if labeling[i] == i + 1 and all(labeling[u] == i + 1 for u in nb[i])]
    return {
        "n": g.n,
        "edges": sorted(g.edges),
        "p": _p_name(p),
        "epsilon": inst.epsilon,
        "mis_size": mis_size,
        "mis_witness": mis_set,
        "robust_safe_count": count,
        "robust_labeling": labeling,
        "min_adversarial_error": 1.0 - count / g.n if g.n else 0.0,
        "certificate_ok": inst.certificate["ok"],
        "safe_set_is_distance3": is_distance3_independent(g, safe),
        "equal": mis_size == count,
    }
