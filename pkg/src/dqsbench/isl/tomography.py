"""Two-qubit Pauli tomography and entanglement measures."""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from ..kernels import reduced_density
from ..simulator import DensityMatrix, ExecutionCounter, StateVector, make_rng, readout_distribution

_PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# Basis changes mapping each Pauli eigenbasis onto the computational basis.
_TO_Z = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0),
    "Y": np.array([[1, -1j], [1, 1j]], dtype=complex) / math.sqrt(2.0),
    "Z": np.eye(2, dtype=complex),
}
SETTINGS: tuple[tuple[str, str], ...] = tuple(itertools.product("XYZ", repeat=2))
_SIGNS = np.array([1.0, -1.0, -1.0, 1.0])  # (-1)^(a+b) over outcomes 00, 01, 10, 11


def _pair_density(state: StateVector | DensityMatrix, pair: tuple[int, int]) -> np.ndarray:
    rho = state.matrix if isinstance(state, DensityMatrix) else np.outer(state.amplitudes, state.amplitudes.conj())
    return reduced_density(rho, tuple(pair), state.num_qubits)


def setting_distribution(rho2: np.ndarray, setting: tuple[str, str], readout_flip: float = 0.0) -> np.ndarray:
    """Outcome probabilities (00, 01, 10, 11) of measuring ``rho2`` in a Pauli setting."""
    u = np.kron(_TO_Z[setting[0]], _TO_Z[setting[1]])
    probs = np.clip(np.real(np.diag(u @ rho2 @ u.conj().T)), 0.0, None)
    probs = readout_distribution(probs / probs.sum(), readout_flip, 2)
    return probs / probs.sum()


def _expectations(freqs: dict[tuple[str, str], np.ndarray]) -> dict[str, float]:
    """All 16 two-qubit Pauli expectations; identity terms average over settings."""
    out = {"II": 1.0}
    marg_a: dict[str, list[float]] = {p: [] for p in "XYZ"}
    marg_b: dict[str, list[float]] = {p: [] for p in "XYZ"}
    for (a, b), f in freqs.items():
        out[a + b] = float(_SIGNS @ f)
        marg_a[a].append(float(f[0] + f[1] - f[2] - f[3]))
        marg_b[b].append(float(f[0] - f[1] + f[2] - f[3]))
    for p in "XYZ":
        out[p + "I"] = float(np.mean(marg_a[p]))
        out["I" + p] = float(np.mean(marg_b[p]))
    return out


def project_to_state(m: np.ndarray) -> np.ndarray:
    """Nearest PSD unit-trace matrix by clipping negative eigenvalues."""
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return np.eye(h.shape[0], dtype=complex) / h.shape[0]
    w = w / w.sum()
    return (v * w) @ v.conj().T


def pairwise_qst(
    state: StateVector | DensityMatrix,
    pair: tuple[int, int],
    k: int | None = None,
    seed: int | Sequence[int] = 0,
    readout_flip: float = 0.0,
    counter: ExecutionCounter | None = None,
) -> DensityMatrix:
    """Linear-inversion estimate of the reduced state of ``pair`` from 9 settings.

    With ``k=None`` the setting distributions are used exactly (infinite shots).
    """
    rho2 = _pair_density(state, pair)
    base = tuple(seed) if not isinstance(seed, (int, np.integer)) else (int(seed),)
    freqs = {}
    for i, setting in enumerate(SETTINGS):
        probs = setting_distribution(rho2, setting, readout_flip)
        if k is not None:
            probs = make_rng(base + (i,)).multinomial(int(k), probs) / k
        freqs[setting] = probs
        if counter is not None and k is not None:
            counter.add(k)
    exp = _expectations(freqs)
    est = np.zeros((4, 4), dtype=complex)
    for a, b in itertools.product("IXYZ", repeat=2):
        est += exp[a + b] * np.kron(_PAULIS[a], _PAULIS[b])
    return DensityMatrix(2, project_to_state(est / 4.0))


def concurrence(rho: DensityMatrix | np.ndarray) -> float:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    yy = np.kron(_PAULIS["Y"], _PAULIS["Y"])
    flipped = yy @ m.conj() @ yy
    ev = np.linalg.eigvals(m @ flipped)
    lam = np.sort(np.sqrt(np.clip(ev.real, 0.0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def _binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def entanglement_of_formation(rho: DensityMatrix | np.ndarray) -> float:
    c = min(1.0, concurrence(rho))
    return min(1.0, max(0.0, _binary_entropy((1.0 + math.sqrt(1.0 - c * c)) / 2.0)))
