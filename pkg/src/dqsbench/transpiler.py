"""SWAP routing onto a coupling graph and native-basis optimization."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .circuit import (
    Circuit,
    CircuitError,
    Gate,
    GateKind,
    decompose_to_basis,
    simplify,
    synthesize_1q,
)

# Heavy-hex style connectivity of the emulated 7-qubit device.
DEFAULT_EDGES: tuple[tuple[int, int], ...] = ((0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6))


class DisconnectedGraphError(CircuitError):
    pass


@dataclass(frozen=True)
class CouplingGraph:
    num_qubits: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        seen = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b or not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise CircuitError(f"invalid edge ({a}, {b}) for {self.num_qubits} qubits")
            e = (min(a, b), max(a, b))
            if e not in seen:
                seen.append(e)
        object.__setattr__(self, "edges", tuple(seen))

    @classmethod
    def default(cls) -> CouplingGraph:
        return cls(7, DEFAULT_EDGES)

    @classmethod
    def line(cls, n: int) -> CouplingGraph:
        return cls(n, tuple((i, i + 1) for i in range(n - 1)))

    @cached_property
    def _adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[set[int]] = [set() for _ in range(self.num_qubits)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return tuple(tuple(sorted(s)) for s in adj)

    def neighbors(self, q: int) -> tuple[int, ...]:
        return self._adjacency[q]

    def degree(self, q: int) -> int:
        return len(self._adjacency[q])

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def is_connected(self) -> bool:
        if self.num_qubits == 1:
            return True
        return len(self._bfs(0)) == self.num_qubits

    def _bfs(self, src: int) -> dict[int, int]:
        parent = {src: -1}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in self._adjacency[u]:
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        return parent

    def shortest_path(self, a: int, b: int) -> list[int]:
        parent = self._bfs(a)
        if b not in parent:
            raise DisconnectedGraphError(f"no path between {a} and {b}")
        path = [b]
        while path[-1] != a:
            path.append(parent[path[-1]])
        return path[::-1]

    def subgraph(self, physical: list[int] | tuple[int, ...]) -> CouplingGraph:
        """Induced subgraph on ``physical``, relabelled so ``physical[i]`` becomes ``i``."""
        index = {p: i for i, p in enumerate(physical)}
        edges = tuple(
            (index[a], index[b]) for a, b in self.edges if a in index and b in index
        )
        return CouplingGraph(len(physical), edges)


@dataclass(frozen=True)
class TranspileReport:
    input_depth: int
    output_depth: int
    swaps_inserted: int
    initial_layout: tuple[int, ...]
    final_layout: tuple[int, ...]


def _full_layout(layout: list[int] | tuple[int, ...] | None, n_logical: int, n_physical: int) -> list[int]:
    if layout is None:
        layout = list(range(n_logical))
    layout = [int(p) for p in layout]
    if len(layout) < n_logical:
        raise CircuitError("initial layout shorter than circuit width")
    if len(set(layout)) != len(layout) or any(not 0 <= p < n_physical for p in layout):
        raise CircuitError(f"invalid layout {layout}")
    spare = [p for p in range(n_physical) if p not in layout]
    return layout + spare[: n_physical - len(layout)]


def route(
    c: Circuit,
    g: CouplingGraph,
    initial_layout: list[int] | tuple[int, ...] | None = None,
) -> tuple[Circuit, TranspileReport]:
    """Greedy shortest-path SWAP insertion, gates taken in program order.

    Returns the circuit on ``g.num_qubits`` physical qubits. The report's
    ``final_layout[i]`` is the physical qubit holding logical qubit ``i``.
    """
    if c.num_qubits > g.num_qubits:
        raise CircuitError(f"circuit needs {c.num_qubits} qubits, graph has {g.num_qubits}")
    if not g.is_connected():
        raise DisconnectedGraphError("coupling graph is disconnected")
    l2p = _full_layout(initial_layout, c.num_qubits, g.num_qubits)
    p2l = {p: l for l, p in enumerate(l2p)}
    start = tuple(l2p[: c.num_qubits])
    out: list[Gate] = []
    swaps = 0
    for gate in c.gates:
        if len(gate.qubits) == 2:
            a, b = gate.qubits
            pa, pb = l2p[a], l2p[b]
            if not g.has_edge(pa, pb):
                path = g.shortest_path(pa, pb)
                for u, v in zip(path[:-2], path[1:-1]):
                    out.append(Gate(GateKind.SWAP, (u, v)))
                    swaps += 1
                    lu, lv = p2l[u], p2l[v]
                    l2p[lu], l2p[lv] = v, u
                    p2l[u], p2l[v] = lv, lu
        out.append(gate.remap(l2p))
    routed = Circuit(g.num_qubits, tuple(out))
    report = TranspileReport(c.depth(), routed.depth(), swaps, start, tuple(l2p[: c.num_qubits]))
    return routed, report


# -- native-level optimization --------------------------------------------------

_COMMUTES_ON_CONTROL = frozenset({GateKind.RZ, GateKind.I})
_COMMUTES_ON_TARGET = frozenset({GateKind.X, GateKind.SX, GateKind.I})


def cancel_cnot_pairs(c: Circuit) -> Circuit:
    """Cancel CNOT pairs separated only by gates commuting with them.

    Rz on the control and X/SqrtX on the target commute with a CNOT.
    """
    gates = list(c.gates)
    removed = [False] * len(gates)
    for i, g in enumerate(gates):
        if removed[i] or g.kind is not GateKind.CNOT:
            continue
        ctl, tgt = g.qubits
        for j in range(i + 1, len(gates)):
            h = gates[j]
            if removed[j] or not set(h.qubits) & {ctl, tgt}:
                continue
            if h.kind is GateKind.CNOT and h.qubits == (ctl, tgt):
                removed[i] = removed[j] = True
                break
            if len(h.qubits) == 2:
                break
            allowed = _COMMUTES_ON_CONTROL if h.qubits[0] == ctl else _COMMUTES_ON_TARGET
            if h.kind not in allowed:
                break
    return Circuit(c.num_qubits, tuple(g for g, r in zip(gates, removed) if not r))


def fuse_single_qubit_runs(c: Circuit) -> Circuit:
    """Resynthesize runs of single-qubit gates when it shortens them."""
    pending: list[list[Gate]] = [[] for _ in range(c.num_qubits)]
    out: list[Gate] = []

    def flush(q: int) -> None:
        run = pending[q]
        if len(run) >= 2 or (run and run[0].kind is GateKind.I):
            m = np.eye(2, dtype=complex)
            for g in run:
                m = g.matrix() @ m
            fused = synthesize_1q(m, q)
            if len(fused) < len(run):
                run = fused
        out.extend(run)
        pending[q] = []

    for g in c.gates:
        if len(g.qubits) == 1:
            pending[g.qubits[0]].append(g)
            continue
        for q in g.qubits:
            flush(q)
        out.append(g)
    for q in range(c.num_qubits):
        flush(q)
    return Circuit(c.num_qubits, tuple(out))


def optimize(c: Circuit, theta_th: float = 0.0) -> Circuit:
    """Iterate peephole passes until the gate count stops decreasing."""
    while True:
        new = fuse_single_qubit_runs(cancel_cnot_pairs(simplify(c, theta_th)))
        if len(new) >= len(c):
            return new if len(new) == len(c) else c
        c = new


def transpile(
    c: Circuit,
    g: CouplingGraph,
    initial_layout: list[int] | tuple[int, ...] | None = None,
    theta_th: float = 0.0,
) -> tuple[Circuit, TranspileReport]:
    """route -> decompose_to_basis -> optimize to a fixed point."""
    routed, rep = route(c, g, initial_layout)
    native = optimize(decompose_to_basis(routed), theta_th)
    report = TranspileReport(rep.input_depth, native.depth(), rep.swaps_inserted, rep.initial_layout, rep.final_layout)
    return native, report
