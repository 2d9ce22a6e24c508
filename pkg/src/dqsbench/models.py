"""Qubit-encoded Tavis-Cummings and Heisenberg-chain Hamiltonians and Trotter steps.

Both models start from the all-ones bitstring: the TCM field qubit 0 holds
one photon and every atom is in its ground state (encoded as ``|1>``); the
HSC starts fully spin-down, also encoded as ``|1>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, GateKind, PauliString
from .simulator import StateVector

_AXES = "xyz"
_ROT1 = {"x": GateKind.RX, "y": GateKind.RY, "z": GateKind.RZ}
_ROT2 = {"x": GateKind.RXX, "y": GateKind.RYY, "z": GateKind.RZZ}


@dataclass(frozen=True)
class TcmParams:
    N: int = 1
    omega: float = 1.0
    g: float = 10.0
    dt: float = 0.01
    n_steps: int = 40

    def __post_init__(self) -> None:
        if self.N < 1 or self.dt <= 0 or self.n_steps < 1:
            raise ValueError(f"invalid TCM parameters {self}")

    @property
    def num_qubits(self) -> int:
        return self.N + 1


@dataclass(frozen=True)
class HscParams:
    L: int = 2
    J: tuple[float, float, float] = (-10.0, 10.0, 0.0)
    h: tuple[float, float, float] = (0.0, 0.0, -2.0)
    dt: float = 0.01
    n_steps: int = 40

    def __post_init__(self) -> None:
        if self.L < 2 or self.dt <= 0 or self.n_steps < 1:
            raise ValueError(f"invalid HSC parameters {self}")
        object.__setattr__(self, "J", tuple(float(x) for x in self.J))
        object.__setattr__(self, "h", tuple(float(x) for x in self.h))

    @property
    def num_qubits(self) -> int:
        return self.L

    @property
    def bonds(self) -> list[tuple[int, int]]:
        # Periodic: for L=2 this yields both (0,1) and (1,0).
        return [(j, (j + 1) % self.L) for j in range(self.L)]


@dataclass(frozen=True)
class HamiltonianTerms:
    num_qubits: int
    terms: tuple[PauliString, ...]

    def __post_init__(self) -> None:
        if any(t.num_qubits != self.num_qubits for t in self.terms):
            raise ValueError("term width does not match Hamiltonian width")

    def matrix(self) -> np.ndarray:
        d = 2**self.num_qubits
        h = np.zeros((d, d), dtype=complex)
        for t in self.terms:
            h += t.matrix()
        return h


def tcm_terms(p: TcmParams) -> HamiltonianTerms:
    n = p.num_qubits
    w, g = p.omega, p.g
    terms = [
        PauliString(n, "I" * n, w / 2.0),
        PauliString.from_sparse(n, {0: "Z"}, -w / 2.0),
    ]
    terms += [PauliString.from_sparse(n, {i: "Z"}, w / 2.0) for i in range(1, n)]
    if g != 0.0:
        for i in range(1, n):
            terms.append(PauliString.from_sparse(n, {0: "X", i: "X"}, g / 2.0))
            terms.append(PauliString.from_sparse(n, {0: "Y", i: "Y"}, -g / 2.0))
    return HamiltonianTerms(n, tuple(terms))


def tcm_trotter_step(p: TcmParams) -> Circuit:
    """One first-order step; the global phase of the constant term is dropped."""
    n = p.num_qubits
    a, b = p.omega * p.dt, p.g * p.dt
    gates = [Gate(GateKind.RZ, (0,), -a)]
    gates += [Gate(GateKind.RZ, (j,), a) for j in range(1, n)]
    for j in range(1, n):
        gates.append(Gate(GateKind.RXX, (0, j), b))
        gates.append(Gate(GateKind.RYY, (0, j), -b))
    return Circuit(n, tuple(gates))


def hsc_terms(p: HscParams) -> HamiltonianTerms:
    """``-1/2 sum_j (J . sigma_j sigma_{j+1} + h . sigma_j)``, periodic."""
    n = p.L
    terms = []
    for a, b in p.bonds:
        for axis, coupling in zip(_AXES, p.J):
            if coupling:
                terms.append(PauliString.from_sparse(n, {a: axis.upper(), b: axis.upper()}, -coupling / 2.0))
    for i in range(n):
        for axis, field in zip(_AXES, p.h):
            if field:
                terms.append(PauliString.from_sparse(n, {i: axis.upper()}, -field / 2.0))
    return HamiltonianTerms(n, tuple(terms))


def hsc_trotter_step(p: HscParams) -> Circuit:
    """Bond rotations grouped by bond (axes x, y, z), then site rotations.

    ``exp(+i J_a dt/2 s_a s_a) = R_aa(-J_a dt)``, consistent with
    :func:`hsc_terms`; zero couplings emit no gate.
    """
    gates = []
    for a, b in p.bonds:
        for axis, coupling in zip(_AXES, p.J):
            if coupling:
                gates.append(Gate(_ROT2[axis], (a, b), -coupling * p.dt))
    for i in range(p.L):
        for axis, field in zip(_AXES, p.h):
            if field:
                gates.append(Gate(_ROT1[axis], (i,), -field * p.dt))
    return Circuit(p.L, tuple(gates))


def state_prep(num_qubits: int) -> Circuit:
    if num_qubits < 1:
        raise ValueError("num_qubits must be positive")
    return Circuit(num_qubits, tuple(Gate(GateKind.X, (q,)) for q in range(num_qubits)))


def initial_bitstring(num_qubits: int) -> str:
    return "1" * num_qubits


def exact_evolution(terms: HamiltonianTerms, t: float, initial: StateVector) -> StateVector:
    """Apply ``exp(-i H t)`` via a Hermitian eigendecomposition."""
    h = terms.matrix()
    evals, evecs = np.linalg.eigh(h)
    psi = evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ initial.amplitudes))
    return StateVector(initial.num_qubits, psi / np.linalg.norm(psi))


def excitation_operator(num_qubits: int) -> np.ndarray:
    """Photon number plus atomic excitations in the TCM encoding (diagonal)."""
    diag = np.zeros(2**num_qubits)
    for idx in range(2**num_qubits):
        bits = format(idx, f"0{num_qubits}b")
        photons = int(bits[0] == "1")
        excited = sum(1 for b in bits[1:] if b == "0")
        diag[idx] = photons + excited
    return np.diag(diag)


# Named parameter presets used by experiment configs.
TCM_PRESETS: dict[str, dict] = {
    "tcm_main": {"g": 10.0, "omega": 1.0},
    "tcm_g1": {"g": 1.0, "omega": 1.0},
    "tcm_g5": {"g": 5.0, "omega": 1.0},
    "tcm_g20": {"g": 20.0, "omega": 1.0},
}

_H_ALT = (-20.0, -20.0, -20.0)
HSC_PRESETS: dict[str, dict] = {
    "hsc_main": {"J": (-10.0, 10.0, 0.0), "h": (0.0, 0.0, -2.0)},
    "hsc_J1": {"J": (-20.0, -20.0, -2.0), "h": _H_ALT},
    "hsc_J2": {"J": (-2.0, -2.0, -20.0), "h": _H_ALT},
    "hsc_J3": {"J": (-20.0, -20.0, -20.0), "h": _H_ALT},
    "hsc_J4": {"J": (-2.0, -20.0, -4.0), "h": _H_ALT},
}


@dataclass(frozen=True)
class Model:
    """A preset instantiated at a qubit count: Hamiltonian, step circuit, prep."""

    family: str
    preset: str
    params: TcmParams | HscParams

    @property
    def num_qubits(self) -> int:
        return self.params.num_qubits

    def terms(self) -> HamiltonianTerms:
        return tcm_terms(self.params) if self.family == "tcm" else hsc_terms(self.params)

    def trotter_step(self) -> Circuit:
        return tcm_trotter_step(self.params) if self.family == "tcm" else hsc_trotter_step(self.params)

    def state_prep(self) -> Circuit:
        return state_prep(self.num_qubits)

    @property
    def target(self) -> str:
        return initial_bitstring(self.num_qubits)


def build_model(preset: str, num_qubits: int, dt: float = 0.01, n_steps: int = 40, **overrides) -> Model:
    if preset in TCM_PRESETS:
        kw = {**TCM_PRESETS[preset], **overrides}
        return Model("tcm", preset, TcmParams(N=num_qubits - 1, dt=dt, n_steps=n_steps, **kw))
    if preset in HSC_PRESETS:
        kw = {**HSC_PRESETS[preset], **overrides}
        return Model("hsc", preset, HscParams(L=num_qubits, dt=dt, n_steps=n_steps, **kw))
    raise KeyError(f"unknown model preset {preset!r}")
