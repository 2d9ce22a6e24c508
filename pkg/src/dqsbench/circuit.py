"""Gate-level circuit IR.

Circuits are immutable: every transformation returns a new :class:`Circuit`.
Global phase is never tracked, so equivalence checks are phase-insensitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .kernels import apply_local


class GateKind(str, Enum):
    I = "I"
    X = "X"
    SX = "SqrtX"
    RX = "Rx"
    RY = "Ry"
    RZ = "Rz"
    H = "H"
    CNOT = "CNOT"
    SWAP = "SWAP"
    RXX = "Rxx"
    RYY = "Ryy"
    RZZ = "Rzz"


ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RXX, GateKind.RYY, GateKind.RZZ})
TWO_QUBIT = frozenset({GateKind.CNOT, GateKind.SWAP, GateKind.RXX, GateKind.RYY, GateKind.RZZ})
SELF_INVERSE = frozenset({GateKind.I, GateKind.X, GateKind.H, GateKind.CNOT, GateKind.SWAP})
SYMMETRIC = frozenset({GateKind.SWAP, GateKind.RXX, GateKind.RYY, GateKind.RZZ})
NATIVE_BASIS = frozenset({GateKind.I, GateKind.RZ, GateKind.SX, GateKind.X, GateKind.CNOT})

AXIS_ROTATION = {"x": GateKind.RX, "y": GateKind.RY, "z": GateKind.RZ}
ROTATION_AXIS = {v: k for k, v in AXIS_ROTATION.items()}


class CircuitError(ValueError):
    pass


def normalize_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    t = math.remainder(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    return t


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@lru_cache(maxsize=65536)
def _gate_matrix(kind: GateKind, angle: float | None) -> np.ndarray:
    if kind is GateKind.I:
        m = np.eye(2, dtype=complex)
    elif kind is GateKind.X:
        m = _PAULI["X"].copy()
    elif kind is GateKind.SX:
        m = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
    elif kind is GateKind.H:
        m = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
    elif kind is GateKind.CNOT:
        m = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    elif kind is GateKind.SWAP:
        m = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
    else:
        c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
        if kind is GateKind.RZ:
            m = np.diag([complex(c, -s), complex(c, s)])
        elif kind in (GateKind.RX, GateKind.RY):
            p = _PAULI["X" if kind is GateKind.RX else "Y"]
            m = c * np.eye(2) - 1j * s * p
        else:
            p = _PAULI[kind.value[1].upper()]
            m = c * np.eye(4) - 1j * s * np.kron(p, p)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self) -> None:
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        arity = 2 if kind in TWO_QUBIT else 1
        if len(qubits) != arity:
            raise CircuitError(f"{kind.value} acts on {arity} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits) or min(qubits) < 0:
            raise CircuitError(f"invalid qubit indices {qubits} for {kind.value}")
        if kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise CircuitError(f"{kind.value} needs one finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise CircuitError(f"{kind.value} takes no angle")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    def matrix(self) -> np.ndarray:
        return _gate_matrix(self.kind, self.angle)

    def inverse(self) -> Gate:
        if self.kind in ROTATIONS:
            return Gate(self.kind, self.qubits, -self.angle)
        if self.kind is GateKind.SX:
            return Gate(GateKind.RX, self.qubits, -math.pi / 2.0)
        return self

    def remap(self, mapping: dict[int, int] | list[int]) -> Gate:
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.angle)

    def to_text(self) -> str:
        parts = [str(q) for q in self.qubits]
        if self.angle is not None:
            parts.append(f"{self.angle:.17g}")
        return f"{self.kind.value} {','.join(parts)}"


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if int(self.num_qubits) < 1:
            raise CircuitError("a circuit needs at least one qubit")
        gates = tuple(self.gates)
        for g in gates:
            if max(g.qubits) >= self.num_qubits:
                raise CircuitError(f"gate {g.to_text()} exceeds width {self.num_qubits}")
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def __add__(self, other: Circuit) -> Circuit:
        return compose(self, other)

    def extend(self, gates: Iterable[Gate]) -> Circuit:
        return Circuit(self.num_qubits, self.gates + tuple(gates))

    def count(self, kind: GateKind) -> int:
        return sum(1 for g in self.gates if g.kind is kind)

    def depth(self) -> int:
        return depth(self)

    def unitary(self) -> np.ndarray:
        n = self.num_qubits
        t = np.eye(2**n, dtype=complex).reshape((2,) * n + (2**n,))
        for g in self.gates:
            t = apply_local(t, g.matrix(), g.qubits)
        return t.reshape(2**n, 2**n)

    def to_text(self) -> str:
        lines = [f"qubits {self.num_qubits}"]
        lines.extend(g.to_text() for g in self.gates)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Circuit:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines or not lines[0].startswith("qubits "):
            raise CircuitError("missing 'qubits N' header")
        n = int(lines[0].split()[1])
        gates = []
        for lineno, ln in enumerate(lines[1:], start=2):
            try:
                name, args = ln.split(maxsplit=1)
                kind = GateKind(name)
                fields = args.split(",")
                arity = 2 if kind in TWO_QUBIT else 1
                qubits = tuple(int(f) for f in fields[:arity])
                angle = float(fields[arity]) if kind in ROTATIONS else None
                if len(fields) != arity + (kind in ROTATIONS):
                    raise CircuitError("wrong field count")
            except (ValueError, IndexError) as exc:
                raise CircuitError(f"line {lineno}: cannot parse {ln!r}: {exc}") from exc
            gates.append(Gate(kind, qubits, angle))
        return cls(n, tuple(gates))


@dataclass(frozen=True)
class PauliString:
    num_qubits: int
    factors: str
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        if len(self.factors) != self.num_qubits or set(self.factors) - set("IXYZ"):
            raise CircuitError(f"bad Pauli factors {self.factors!r} for {self.num_qubits} qubits")

    @classmethod
    def from_sparse(cls, num_qubits: int, ops: dict[int, str], coefficient: float) -> PauliString:
        chars = ["I"] * num_qubits
        for q, p in ops.items():
            chars[q] = p
        return cls(num_qubits, "".join(chars), float(coefficient))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.factors) if f != "I")

    def matrix(self) -> np.ndarray:
        m = np.array([[1.0 + 0j]])
        for f in self.factors:
            m = np.kron(m, _PAULI[f])
        return self.coefficient * m


# -- operations ---------------------------------------------------------------


def compose(a: Circuit, b: Circuit) -> Circuit:
    """Apply ``a`` then ``b``."""
    if a.num_qubits != b.num_qubits:
        raise CircuitError(f"width mismatch: {a.num_qubits} vs {b.num_qubits}")
    return Circuit(a.num_qubits, a.gates + b.gates)


def adjoint(c: Circuit) -> Circuit:
    return Circuit(c.num_qubits, tuple(g.inverse() for g in reversed(c.gates)))


def depth(c: Circuit) -> int:
    """Layered (ASAP) depth; every gate, identities included, occupies a layer."""
    level = [0] * c.num_qubits
    for g in c.gates:
        d = 1 + max(level[q] for q in g.qubits)
        for q in g.qubits:
            level[q] = d
    return max(level, default=0)


def unitary_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Spectral-norm distance after aligning the global phase of ``v`` to ``u``."""
    overlap = np.trace(v.conj().T @ u)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.linalg.norm(u - phase * v, 2))


def equivalence(u: np.ndarray, v: np.ndarray) -> float:
    """``|tr(U^dagger V)| / d``; equals 1 iff equal up to global phase."""
    return float(abs(np.trace(u.conj().T @ v)) / u.shape[0])


# -- basis decomposition --------------------------------------------------------

_HALF_PI = math.pi / 2.0


def _rz(q: int, theta: float) -> Gate:
    return Gate(GateKind.RZ, (q,), normalize_angle(theta))


def synthesize_1q(u: np.ndarray, qubit: int, atol: float = 1e-12) -> list[Gate]:
    """Shortest native {Rz, SqrtX, X} sequence for a 2x2 unitary, up to phase."""
    v = u / np.sqrt(np.linalg.det(u))
    a, b = v[0, 0], v[1, 0]
    if abs(b) < atol:
        lam = normalize_angle(-2.0 * np.angle(a))
        out = [] if abs(lam) < atol else [_rz(qubit, lam)]
    elif abs(a) < atol:
        c = normalize_angle(float(np.angle(-np.conj(b) / b)))
        out = ([] if abs(c) < atol else [_rz(qubit, c)]) + [Gate(GateKind.X, (qubit,))]
    else:
        theta = 2.0 * math.atan2(abs(b), abs(a))
        plus = -2.0 * float(np.angle(a))
        minus = 2.0 * float(np.angle(b))
        phi, lam = (plus + minus) / 2.0, (plus - minus) / 2.0
        sx = Gate(GateKind.SX, (qubit,))
        if abs(theta - _HALF_PI) < atol:
            out = [_rz(qubit, lam - _HALF_PI), sx, _rz(qubit, phi + _HALF_PI)]
        else:
            out = [_rz(qubit, lam), sx, _rz(qubit, theta + math.pi), sx, _rz(qubit, phi + math.pi)]
        out = [g for g in out if g.kind is not GateKind.RZ or abs(g.angle) >= atol]
    check = np.eye(2, dtype=complex)
    for g in out:
        check = g.matrix() @ check
    if equivalence(check, u) < 1.0 - 1e-9:
        raise AssertionError("single-qubit synthesis failed")
    return out


def _rx_native(q: int, theta: float) -> list[Gate]:
    # H Rz(theta) H with H = Rz(pi/2) SX Rz(pi/2); fixed five-gate structure for any angle.
    sx = Gate(GateKind.SX, (q,))
    return [_rz(q, _HALF_PI), sx, _rz(q, theta + math.pi), sx, _rz(q, _HALF_PI)]


def _ry_native(q: int, theta: float) -> list[Gate]:
    sx = Gate(GateKind.SX, (q,))
    return [sx, _rz(q, theta + math.pi), sx, _rz(q, math.pi)]


_H2 = _gate_matrix(GateKind.H, None)
_TO_Z_FROM_Y = _gate_matrix(GateKind.RX, _HALF_PI)


def _decompose_gate(g: Gate) -> list[Gate]:
    k = g.kind
    if k in NATIVE_BASIS:
        return [g]
    if k is GateKind.RX:
        return _rx_native(g.qubits[0], g.angle)
    if k is GateKind.RY:
        return _ry_native(g.qubits[0], g.angle)
    if k is GateKind.H:
        return synthesize_1q(g.matrix(), g.qubits[0])
    a, b = g.qubits
    if k is GateKind.SWAP:
        return [Gate(GateKind.CNOT, (a, b)), Gate(GateKind.CNOT, (b, a)), Gate(GateKind.CNOT, (a, b))]
    zz = [Gate(GateKind.CNOT, (a, b)), _rz(b, g.angle), Gate(GateKind.CNOT, (a, b))]
    if k is GateKind.RZZ:
        return zz
    change = _H2 if k is GateKind.RXX else _TO_Z_FROM_Y
    pre = synthesize_1q(change, a) + synthesize_1q(change, b)
    post = synthesize_1q(change.conj().T, a) + synthesize_1q(change.conj().T, b)
    return pre + zz + post


def decompose_to_basis(c: Circuit, basis: frozenset[GateKind] = NATIVE_BASIS) -> Circuit:
    """Rewrite every gate over the native basis {I, Rz, SqrtX, X, CNOT}.

    Rotations keep a fixed gate structure regardless of angle, so noise attached
    per native gate does not depend on the rotation angle.
    """
    if not NATIVE_BASIS <= set(basis):
        unsupported = sorted(k.value for k in NATIVE_BASIS - set(basis))
        raise CircuitError(f"basis must contain the native set; missing {unsupported}")
    out: list[Gate] = []
    for g in c.gates:
        out.extend(_decompose_gate(g))
    return Circuit(c.num_qubits, tuple(out))


# -- peephole simplification -----------------------------------------------------


def _same_support(p: Gate, g: Gate) -> bool:
    if g.kind in SYMMETRIC:
        return set(p.qubits) == set(g.qubits)
    return p.qubits == g.qubits


def _negligible(g: Gate, theta_th: float) -> bool:
    return g.is_rotation and (g.angle == 0.0 or abs(g.angle) < theta_th)


def _simplify_pass(gates: tuple[Gate, ...], n: int, theta_th: float) -> tuple[list[Gate], bool]:
    out: list[Gate | None] = []
    stacks: list[list[int]] = [[] for _ in range(n)]
    changed = False

    def pop(idx: int) -> None:
        for q in out[idx].qubits:
            stacks[q].pop()
        out[idx] = None

    for g in gates:
        if _negligible(g, theta_th):
            changed = True
            continue
        tops = {stacks[q][-1] if stacks[q] else None for q in g.qubits}
        prev_idx = tops.pop() if len(tops) == 1 else None
        prev = out[prev_idx] if prev_idx is not None else None
        if prev is not None and prev.kind is g.kind and _same_support(prev, g):
            if g.is_rotation:
                merged = Gate(g.kind, prev.qubits, normalize_angle(prev.angle + g.angle))
                pop(prev_idx)
                changed = True
                if _negligible(merged, theta_th):
                    continue
                g = merged
            elif g.kind in SELF_INVERSE and g.kind is not GateKind.I:
                pop(prev_idx)
                changed = True
                continue
        out.append(g)
        for q in g.qubits:
            stacks[q].append(len(out) - 1)
    return [g for g in out if g is not None], changed


def simplify(c: Circuit, theta_th: float = 0.0) -> Circuit:
    """Peephole rewrite to a fixed point.

    Merges wire-adjacent rotations of the same kind and support (angle
    normalized into (-pi, pi]), cancels adjacent identical self-inverse
    gates, and drops rotations with ``|angle| < theta_th`` or exactly zero.
    """
    if theta_th < 0:
        raise CircuitError("theta_th must be non-negative")
    gates = c.gates
    while True:
        new, changed = _simplify_pass(gates, c.num_qubits, theta_th)
        if not changed:
            return Circuit(c.num_qubits, tuple(new))
        gates = tuple(new)
