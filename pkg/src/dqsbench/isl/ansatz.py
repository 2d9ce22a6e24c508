"""Dressed-CNOT layers and the layered ansatz built by the recompiler.

The ansatz is stored in its *cost-side* orientation: the circuit ``W`` that is
appended after ``T V_prev`` in the cost circuit. The recompiled step circuit
is ``V = W^dagger``. Within one layer the time order is::

    slot 0 on control, slot 1 on target, CNOT(control, target),
    slot 2 on control, slot 3 on target

A slot holds ``(axis, angle)`` or ``None`` once simplification removed it.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

from ..circuit import AXIS_ROTATION, Circuit, Gate, GateKind, adjoint
from ..transpiler import CouplingGraph

Slot = tuple[str, float] | None
SLOT_QUBIT_ROLE = (0, 1, 0, 1)  # 0 = control, 1 = target


@dataclass
class DressedCnotLayer:
    control: int
    target: int
    slots: list[Slot] = field(default_factory=lambda: [("z", 0.0)] * 4)
    cnot: bool = True

    def __post_init__(self) -> None:
        if self.control == self.target:
            raise ValueError("dressed CNOT needs two distinct qubits")
        if len(self.slots) != 4:
            raise ValueError("a dressed CNOT layer has exactly four rotation slots")
        for s in self.slots:
            if s is not None and (s[0] not in AXIS_ROTATION or not math.isfinite(s[1])):
                raise ValueError(f"invalid rotation slot {s}")
        self.slots = list(self.slots)

    def slot_qubit(self, i: int) -> int:
        return (self.control, self.target)[SLOT_QUBIT_ROLE[i]]

    def gates(self) -> list[Gate]:
        out = []
        for i in (0, 1):
            out += _slot_gate(self.slots[i], self.slot_qubit(i))
        if self.cnot:
            out.append(Gate(GateKind.CNOT, (self.control, self.target)))
        for i in (2, 3):
            out += _slot_gate(self.slots[i], self.slot_qubit(i))
        return out


def _slot_gate(slot: Slot, q: int) -> list[Gate]:
    if slot is None:
        return []
    return [Gate(AXIS_ROTATION[slot[0]], (q,), slot[1])]


@dataclass
class Ansatz:
    num_qubits: int
    layers: list[DressedCnotLayer] = field(default_factory=list)

    def copy(self) -> Ansatz:
        return copy.deepcopy(self)

    def append(self, control: int, target: int, graph: CouplingGraph | None = None) -> DressedCnotLayer:
        if graph is not None and not graph.has_edge(control, target):
            raise ValueError(f"({control}, {target}) is not a coupling-graph edge")
        if not (0 <= control < self.num_qubits and 0 <= target < self.num_qubits):
            raise ValueError("layer qubits outside the ansatz")
        layer = DressedCnotLayer(control, target)
        self.layers.append(layer)
        return layer

    def slot_positions(self) -> list[tuple[int, int]]:
        """All occupied ``(layer, slot)`` positions in time order."""
        return [(li, si) for li, L in enumerate(self.layers) for si in range(4) if L.slots[si] is not None]

    def cost_circuit(self) -> Circuit:
        """The cost-side circuit ``W`` in logical rotations plus CNOTs."""
        gates: list[Gate] = []
        for layer in self.layers:
            gates += layer.gates()
        return Circuit(self.num_qubits, tuple(gates))

    def circuit(self) -> Circuit:
        """The recompiled step circuit ``V = W^dagger``."""
        return adjoint(self.cost_circuit())

    def respects(self, graph: CouplingGraph) -> bool:
        return all(graph.has_edge(L.control, L.target) for L in self.layers if L.cnot)


def _wire_sequence(a: Ansatz, q: int) -> list[tuple[str, int, int]]:
    """Time-ordered events on wire ``q``: ("slot", layer, slot) or ("cnot", layer, -1)."""
    seq = []
    for li, L in enumerate(a.layers):
        if q not in (L.control, L.target):
            continue
        pre = 0 if q == L.control else 1
        post = pre + 2
        if L.slots[pre] is not None:
            seq.append(("slot", li, pre))
        if L.cnot:
            seq.append(("cnot", li, -1))
        if L.slots[post] is not None:
            seq.append(("slot", li, post))
    return seq


def isl_simplify(a: Ansatz, theta_th: float = 1e-3) -> Ansatz:
    """Shrink the ansatz while keeping its layer structure.

    Removes rotations with magnitude below ``theta_th``, merges consecutive
    same-axis rotations on one wire, and cancels back-to-back CNOT layers on the
    same pair whose rotations in between have all been removed.
    """
    a = a.copy()
    changed = True
    while changed:
        changed = False
        for L in a.layers:
            for i, s in enumerate(L.slots):
                if s is not None and abs(math.remainder(s[1], 2.0 * math.pi)) < theta_th:
                    L.slots[i] = None
                    changed = True
        for q in range(a.num_qubits):
            seq = _wire_sequence(a, q)
            for (k1, l1, s1), (k2, l2, s2) in zip(seq, seq[1:]):
                if k1 == k2 == "slot":
                    r1, r2 = a.layers[l1].slots[s1], a.layers[l2].slots[s2]
                    if r1 is not None and r2 is not None and r1[0] == r2[0]:
                        a.layers[l1].slots[s1] = (r1[0], r1[1] + r2[1])
                        a.layers[l2].slots[s2] = None
                        changed = True
                        break
        for i in range(len(a.layers) - 1):
            L1, L2 = a.layers[i], a.layers[i + 1]
            if (
                L1.cnot
                and L2.cnot
                and (L1.control, L1.target) == (L2.control, L2.target)
                and L1.slots[2] is None
                and L1.slots[3] is None
                and L2.slots[0] is None
                and L2.slots[1] is None
            ):
                L1.cnot = False
                L1.slots[2], L1.slots[3] = L2.slots[2], L2.slots[3]
                del a.layers[i + 1]
                changed = True
                break
        kept = [L for L in a.layers if L.cnot or any(s is not None for s in L.slots)]
        if len(kept) != len(a.layers):
            a.layers = kept
            changed = True
    return a


def ansatz_to_text(a: Ansatz) -> str:
    return a.circuit().to_text()
