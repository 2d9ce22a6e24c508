"""Statevector and density-matrix simulation with per-gate depolarizing noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .circuit import NATIVE_BASIS, Circuit, CircuitError, Gate, GateKind
from .kernels import apply_to_density, apply_to_state, depolarize


class NonNativeGateError(CircuitError):
    pass


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 2**self.num_qubits:
            raise ValueError("amplitude vector length must be 2^num_qubits")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalized (norm {norm})")

    @classmethod
    def zero(cls, n: int) -> StateVector:
        return cls.basis("0" * n)

    @classmethod
    def basis(cls, bits: str) -> StateVector:
        amp = np.zeros(2 ** len(bits), dtype=complex)
        amp[int(bits, 2)] = 1.0
        return cls(len(bits), amp)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def projector(self) -> DensityMatrix:
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass
class DensityMatrix:
    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = 2**self.num_qubits
        if self.matrix.shape != (d, d):
            raise ValueError(f"density matrix must be {d}x{d}")

    @classmethod
    def zero(cls, n: int) -> DensityMatrix:
        return StateVector.zero(n).projector()

    @classmethod
    def maximally_mixed(cls, n: int) -> DensityMatrix:
        return cls(n, np.eye(2**n, dtype=complex) / 2**n)

    def probabilities(self) -> np.ndarray:
        return np.clip(self.matrix.diagonal().real, 0.0, None)

    def check(self, atol: float = 1e-10) -> None:
        """Raise if the matrix is not a valid state (Hermitian, unit trace, PSD to -1e-8)."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > atol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > atol:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(m).min() < -1e-8:
            raise ValueError("density matrix has a negative eigenvalue")


State = Union[StateVector, DensityMatrix]


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 5e-4
    p2: float = 1e-2
    readout_flip: float = 2e-2
    enabled: bool = True

    def __post_init__(self) -> None:
        for name in ("p1", "p2", "readout_flip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")

    @classmethod
    def noiseless(cls) -> NoiseModel:
        return cls(0.0, 0.0, 0.0, enabled=False)

    def gate_error(self, gate: Gate) -> float:
        if not self.enabled or gate.kind is GateKind.I:
            return 0.0
        return self.p2 if len(gate.qubits) == 2 else self.p1

    @property
    def flip(self) -> float:
        return self.readout_flip if self.enabled else 0.0


@dataclass
class ShotResult:
    counts: dict[str, int]
    shots: int

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")


@dataclass
class ExecutionCounter:
    """Running total of circuit executions (shots) requested from a backend."""

    total: int = 0
    history: list[int] = field(default_factory=list)

    def add(self, shots: int) -> None:
        self.total += int(shots)

    def mark(self) -> int:
        self.history.append(self.total)
        return self.total


def make_rng(seed: int | Sequence[int] | np.random.SeedSequence) -> np.random.Generator:
    """Independent seeded stream; tuples such as ``(master, index)`` derive sub-streams."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (int, np.integer)):
        return np.random.default_rng(int(seed))
    return np.random.default_rng(np.random.SeedSequence([int(s) for s in seed]))


def is_executable(gate: Gate) -> bool:
    """Native gates plus the inverse SqrtX pulse, Rx(-pi/2), that folding emits."""
    if gate.kind in NATIVE_BASIS:
        return True
    return gate.kind is GateKind.RX and math.isclose(abs(gate.angle), math.pi / 2.0, abs_tol=1e-12)


def run_statevector(c: Circuit, initial: StateVector | None = None) -> StateVector:
    n = c.num_qubits
    if initial is None:
        initial = StateVector.zero(n)
    if initial.num_qubits != n:
        raise CircuitError(f"width mismatch: circuit {n}, state {initial.num_qubits}")
    psi = initial.amplitudes
    for g in c.gates:
        psi = apply_to_state(psi, g.matrix(), g.qubits, n)
    return StateVector(n, psi)


def run_density(
    c: Circuit,
    initial: DensityMatrix | None = None,
    noise: NoiseModel | None = None,
    check_native: bool = True,
) -> DensityMatrix:
    """Each gate: unitary, then depolarizing on its qubits (p1 for 1q, p2 for CNOT)."""
    n = c.num_qubits
    noise = noise if noise is not None else NoiseModel.noiseless()
    if initial is None:
        initial = DensityMatrix.zero(n)
    if initial.num_qubits != n:
        raise CircuitError(f"width mismatch: circuit {n}, state {initial.num_qubits}")
    rho = initial.matrix
    for g in c.gates:
        if check_native and not is_executable(g):
            raise NonNativeGateError(f"non-native gate {g.to_text()}; transpile first")
        rho = apply_to_density(rho, g.matrix(), g.qubits, n)
        p = noise.gate_error(g)
        if p:
            rho = depolarize(rho, p, g.qubits, n)
    return DensityMatrix(n, rho)


def readout_distribution(probs: np.ndarray, flip: float, n: int) -> np.ndarray:
    """Push a Born distribution through independent per-bit flips."""
    if flip == 0.0:
        return probs
    confusion = np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])
    t = probs.reshape((2,) * n)
    for q in range(n):
        t = np.moveaxis(np.tensordot(confusion, t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def sample_shots(
    state: State,
    k: int,
    noise: NoiseModel | None = None,
    rng_seed: int | Sequence[int] = 0,
    counter: ExecutionCounter | None = None,
) -> ShotResult:
    """Draw ``k`` computational-basis shots, then flip each bit with ``readout_flip``.

    Sampling the flipped distribution directly is equivalent to flipping each
    sampled bit independently.
    """
    if k < 1:
        raise ValueError("shot count must be at least 1")
    noise = noise if noise is not None else NoiseModel.noiseless()
    n = state.num_qubits
    probs = readout_distribution(state.probabilities(), noise.flip, n)
    probs = probs / probs.sum()
    draws = make_rng(rng_seed).multinomial(int(k), probs)
    counts = {format(i, f"0{n}b"): int(c) for i, c in enumerate(draws) if c}
    if counter is not None:
        counter.add(k)
    return ShotResult(counts, int(k))


def overlap_probability(shots: ShotResult, target: str) -> float:
    some = next(iter(shots.counts), None)
    if some is not None and len(some) != len(target):
        raise ValueError("target bitstring width mismatch")
    return shots.counts.get(target, 0) / shots.shots


def fidelity(rho: DensityMatrix, phi: StateVector) -> float:
    """Fidelity ``<phi|rho|phi>`` of a mixed state to a pure reference."""
    if rho.num_qubits != phi.num_qubits:
        raise CircuitError("width mismatch")
    v = phi.amplitudes
    f = complex(v.conj() @ rho.matrix @ v)
    if abs(f.imag) > 1e-9:
        raise ValueError(f"fidelity has imaginary part {f.imag}")
    return min(1.0, max(0.0, f.real))
