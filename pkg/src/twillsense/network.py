"""Resistor-network model of a knitted sensor.

Every conductive loop of a :class:`~twillsense.knit.KnitProgram` becomes a
node. Consecutive loops of one course are joined by yarn-segment resistors,
vertically intermeshing loops by Holm contact resistors whose value depends
on the local contact pressure. The sensor is read out between the bottom and
the top connector course.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .knit import Bed, Kind, KnitProgram, Role

DENSE_LIMIT = 2000


class OpenCircuitError(RuntimeError):
    """The terminals are not connected through closed contacts."""


class ContactOpen(OpenCircuitError):
    """A single contact carries no pressure above its closing threshold."""


class EdgeKind(enum.Enum):
    YARN = "yarn"
    CONTACT = "contact"


@dataclass(frozen=True)
class ContactParams:
    """Holm contact constants. ``rho`` in ohm metre, pressures in pascal.

    The defaults are placeholders: resistivity, hardness and spot count of
    the yarn contacts are not published, only the law itself.
    """

    rho: float = 1000.0
    hardness: float = 1e8
    spot_count: int = 1
    pressure: float = 1e4
    open_threshold: float = 0.0

    def __post_init__(self):
        if self.rho <= 0 or self.hardness <= 0:
            raise ValueError("rho and hardness must be positive")
        if self.spot_count < 1:
            raise ValueError("spot_count must be >= 1")
        if self.pressure < 0 or self.open_threshold < 0:
            raise ValueError("pressures must be non-negative")


def contact_resistance(p: ContactParams) -> float:
    """Holm constriction resistance ``rho/2 * sqrt(pi H / (n P))``."""
    if p.pressure <= p.open_threshold or p.pressure == 0:
        raise ContactOpen(f"contact open at P={p.pressure} Pa (threshold {p.open_threshold} Pa)")
    return 0.5 * p.rho * math.sqrt(math.pi * p.hardness / (p.spot_count * p.pressure))


@dataclass(frozen=True)
class LoadState:
    """Applied force and how it becomes per-contact pressure.

    ``shared``: the force is divided over all closed contacts,
    ``P = F / (n_closed * contact_area)``.
    ``local``: every contact sees the full force, ``P = F / contact_area``;
    pressure is then independent of the mesh size.
    """

    total_force: float
    distribution: str = "shared"
    contact_area: float = 1e-6

    def __post_init__(self):
        if self.total_force < 0:
            raise ValueError("total_force must be >= 0")
        if self.distribution not in ("shared", "local"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.contact_area <= 0:
            raise ValueError("contact_area must be positive")

    def pressure(self, n_contacts: int) -> float:
        if self.distribution == "local":
            return self.total_force / self.contact_area
        return self.total_force / (max(n_contacts, 1) * self.contact_area)


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    resistance: float
    kind: EdgeKind


@dataclass(frozen=True)
class ResistorGraph:
    node_count: int
    edges: tuple[Edge, ...]
    terminal_top: frozenset[int]
    terminal_bottom: frozenset[int]

    def __post_init__(self):
        for e in self.edges:
            if e.a == e.b:
                raise ValueError(f"self-loop at node {e.a}")
            if not (0 <= e.a < self.node_count and 0 <= e.b < self.node_count):
                raise ValueError("edge references unknown node")
            if not (0 < e.resistance < math.inf):
                raise ValueError(f"edge resistance must be finite and positive, got {e.resistance}")
        if not self.terminal_top or not self.terminal_bottom:
            raise ValueError("terminal sets must be nonempty")
        if self.terminal_top & self.terminal_bottom:
            raise ValueError("terminal sets must be disjoint")

    def count(self, kind: EdgeKind) -> int:
        return sum(1 for e in self.edges if e.kind is kind)

    def scaled(self, c: float) -> "ResistorGraph":
        return replace(self, edges=tuple(replace(e, resistance=e.resistance * c) for e in self.edges))

    def without_edge(self, index: int) -> "ResistorGraph":
        return replace(self, edges=self.edges[:index] + self.edges[index + 1:])


def simple_graph(
    n: int,
    edges: Iterable[tuple[int, int, float]],
    top: Iterable[int] = (0,),
    bottom: Iterable[int] | None = None,
) -> ResistorGraph:
    """Convenience constructor for hand-built circuits."""
    bottom = (n - 1,) if bottom is None else bottom
    return ResistorGraph(
        n,
        tuple(Edge(a, b, r, EdgeKind.YARN) for a, b, r in edges),
        frozenset(top),
        frozenset(bottom),
    )


class _UnionFind:
    def __init__(self):
        self.parent: list[int] = []

    def add(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int):
        self.parent[self.find(b)] = self.find(a)


def compile_graph(
    program: KnitProgram,
    contact: ContactParams,
    load: LoadState,
    *,
    segment_length: float = 3.5e-3,
    bus_threshold: float = 10.0,
    ideal_buses: bool | None = None,
) -> ResistorGraph:
    """Build the resistor network of ``program`` under ``load``.

    ``segment_length`` is the yarn length per needle pitch (metres).
    Connector courses whose per-pitch segment resistance is below
    ``bus_threshold`` ohm collapse into one ideal node; ``ideal_buses``
    forces the choice either way. With finite buses the clip sits on the
    leftmost loop of each connector course.
    """
    connectors = program.courses_of(Role.CONNECTOR)
    if len(connectors) < 2:
        raise ValueError("program needs a connector course at the top and the bottom")
    bottom_ci, top_ci = connectors[0], connectors[-1]

    uf = _UnionFind()
    node_course: list[int] = []
    yarn_edges: list[tuple[int, int, float]] = []
    contact_pairs: list[tuple[int, int]] = []
    held: dict[tuple[Bed, int], int | None] = {}
    tucks: dict[tuple[Bed, int], list[int]] = {}
    course_nodes: dict[int, list[int]] = {}

    for ci, course in enumerate(program.courses):
        yarn = course.yarn
        prev: tuple[int, int] | None = None
        nodes_here: list[int] = []
        for needle, op in course.actions:
            if op.kind is Kind.FLOAT:
                continue
            key = (op.bed, needle)
            if not yarn.conductive:
                if op.kind is Kind.KNIT:
                    held[key] = None
                    tucks[key] = []
                continue
            node = uf.add()
            node_course.append(ci)
            nodes_here.append(node)
            below = held.get(key)
            if below is not None:
                contact_pairs.append((node, below))
            if op.kind is Kind.KNIT:
                for t in tucks.get(key, []):
                    contact_pairs.append((node, t))
                held[key] = node
                tucks[key] = []
            else:
                tucks.setdefault(key, []).append(node)
            if prev is not None:
                length = segment_length * (needle - prev[1])
                yarn_edges.append((prev[0], node, yarn.linear_resistance * length))
            prev = (node, needle)
        course_nodes[ci] = nodes_here

    for ci in (bottom_ci, top_ci):
        if not course_nodes[ci]:
            raise ValueError(f"connector course {ci} has no conductive loops")
    merge = ideal_buses
    for ci in connectors:
        r_seg = program.courses[ci].yarn.linear_resistance * segment_length
        if (merge if merge is not None else r_seg < bus_threshold):
            nodes = course_nodes[ci]
            for n in nodes[1:]:
                uf.union(nodes[0], n)

    # closed contacts share the force; with a uniform rule either all close or none
    pressure = load.pressure(len(contact_pairs))
    edges: list[tuple[int, int, float, EdgeKind]] = [(a, b, r, EdgeKind.YARN) for a, b, r in yarn_edges]
    try:
        r_contact = contact_resistance(replace(contact, pressure=pressure))
    except ContactOpen:
        r_contact = None
    if r_contact is not None:
        edges += [(a, b, r_contact, EdgeKind.CONTACT) for a, b in contact_pairs]
    elif contact_pairs:
        raise OpenCircuitError(
            f"all {len(contact_pairs)} contacts open at F={load.total_force} N (P={pressure:.4g} Pa)"
        )

    # relabel merged nodes densely
    roots: dict[int, int] = {}
    for n in range(len(uf.parent)):
        roots.setdefault(uf.find(n), len(roots))
    label = [roots[uf.find(n)] for n in range(len(uf.parent))]
    out = tuple(
        Edge(label[a], label[b], r, kind) for a, b, r, kind in edges if label[a] != label[b]
    )
    top = frozenset({label[course_nodes[top_ci][0]]})
    bottom = frozenset({label[course_nodes[bottom_ci][0]]})
    return ResistorGraph(len(roots), out, top, bottom)


def _reduced_system(graph: ResistorGraph):
    """Merge each terminal set into one node and keep the top's component."""
    n = graph.node_count
    idx = np.arange(n)
    top_id, bot_id = min(graph.terminal_top), min(graph.terminal_bottom)
    idx[list(graph.terminal_top)] = top_id
    idx[list(graph.terminal_bottom)] = bot_id
    a = np.array([idx[e.a] for e in graph.edges], dtype=int)
    b = np.array([idx[e.b] for e in graph.edges], dtype=int)
    g = np.array([1.0 / e.resistance for e in graph.edges])
    keep = a != b
    a, b, g = a[keep], b[keep], g[keep]
    adj = sp.coo_matrix((np.ones(len(a)), (a, b)), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    if comp[top_id] != comp[bot_id]:
        raise OpenCircuitError("terminals are not connected")
    live = np.flatnonzero(comp == comp[top_id])
    pos = -np.ones(n, dtype=int)
    pos[live] = np.arange(len(live))
    m = np.isin(a, live)
    return pos[a[m]], pos[b[m]], g[m], len(live), pos[top_id], pos[bot_id]


def effective_resistance(graph: ResistorGraph) -> float:
    """Two-terminal resistance from the grounded node-voltage system.

    A unit current enters at the top terminal and leaves at the (grounded)
    bottom terminal; the top node voltage is the resistance.
    """
    a, b, g, n, top, bot = _reduced_system(graph)
    lap = sp.coo_matrix(
        (np.concatenate([g, g, -g, -g]), (np.concatenate([a, b, a, b]), np.concatenate([a, b, b, a]))),
        shape=(n, n),
    ).tocsr()
    keep = np.delete(np.arange(n), bot)
    red = lap[keep][:, keep]
    rhs = np.zeros(n - 1)
    t = top if top < bot else top - 1
    rhs[t] = 1.0
    if n <= DENSE_LIMIT:
        try:
            v = np.linalg.solve(red.toarray(), rhs)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("singular grounded Laplacian") from exc
    else:
        diag = red.diagonal()
        pre = sp.diags(1.0 / diag)
        v, info = spla.cg(red, rhs, rtol=1e-10, atol=0.0, M=pre, maxiter=20 * n)
        if info != 0:
            raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    r = float(v[t])
    if not (0 < r < math.inf):
        raise RuntimeError(f"non-physical resistance {r}")
    return r


def sweep_force(
    program: KnitProgram,
    contact: ContactParams,
    forces: Sequence[float],
    load: LoadState | None = None,
    **compile_kw,
) -> list[tuple[float, float]]:
    """Effective resistance per force; open circuits are reported as ``inf``."""
    load = LoadState(0.0) if load is None else load
    forces = list(forces)
    if any(f < 0 for f in forces):
        raise ValueError("forces must be non-negative")
    if any(b < a for a, b in zip(forces, forces[1:])):
        raise ValueError("forces must be ascending")
    out = []
    for f in forces:
        try:
            graph = compile_graph(program, contact, replace(load, total_force=f), **compile_kw)
            out.append((f, effective_resistance(graph)))
        except OpenCircuitError:
            out.append((f, math.inf))
    return out


def write_edge_list(graph: ResistorGraph) -> str:
    lines = [f"{e.a} {e.b} {e.resistance!r} {e.kind.value}" for e in graph.edges]
    lines.append("top " + " ".join(map(str, sorted(graph.terminal_top))))
    lines.append("bottom " + " ".join(map(str, sorted(graph.terminal_bottom))))
    return "\n".join(lines) + "\n"


def read_edge_list(text: str) -> ResistorGraph:
    edges, top, bottom = [], None, None
    n = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] in ("top", "bottom"):
            nodes = frozenset(int(p) for p in parts[1:])
            if parts[0] == "top":
                top = nodes
            else:
                bottom = nodes
            n = max([n, *(x + 1 for x in nodes)])
            continue
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'a b resistance kind'")
        a, b = int(parts[0]), int(parts[1])
        edges.append(Edge(a, b, float(parts[2]), EdgeKind(parts[3])))
        n = max(n, a + 1, b + 1)
    if top is None or bottom is None:
        raise ValueError("edge list lacks terminal lines")
    return ResistorGraph(n, tuple(edges), top, bottom)


def write_sweep_csv(rows: Sequence[tuple[float, float]]) -> str:
    lines = ["force_N,resistance_ohm"]
    lines += [f"{f!r},{r!r}" for f, r in rows]
    return "\n".join(lines) + "\n"
