"""Dense tensor kernels shared by the circuit IR and the simulators.

Qubit 0 is the most significant bit of every basis index, so the bitstring
``"q0 q1 ... q(n-1)"`` reads left to right.
"""

from __future__ import annotations

import numpy as np


def apply_local(tensor: np.ndarray, mat: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """Contract a ``2^m x 2^m`` matrix into ``tensor`` along ``axes``.

    ``tensor`` has one length-2 axis per qubit plus arbitrary trailing axes;
    ``axes`` lists the tensor axes the matrix acts on, most significant first.
    """
    m = len(axes)
    op = mat.reshape((2,) * (2 * m))
    out = np.tensordot(op, tensor, axes=(list(range(m, 2 * m)), list(axes)))
    return np.moveaxis(out, list(range(m)), list(axes))


def apply_to_state(psi: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    return apply_local(t, mat, qubits).reshape(-1)


def apply_to_density(rho: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Return ``U rho U^dagger`` for a local unitary ``U``."""
    t = rho.reshape((2,) * (2 * n))
    t = apply_local(t, mat, qubits)
    t = apply_local(t, mat.conj(), tuple(q + n for q in qubits))
    return t.reshape(2**n, 2**n)


def depolarize(rho: np.ndarray, p: float, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Depolarizing channel on ``qubits``: ``(1-p) rho + p (I/2^m) x tr_q(rho)``."""
    if p == 0.0:
        return rho
    m = len(qubits)
    dim = 2**m
    t = rho.reshape((2,) * (2 * n))
    rows = list(qubits)
    cols = [q + n for q in qubits]
    t = np.moveaxis(t, rows + cols, list(range(2 * m)))
    shape = t.shape
    block = t.reshape(dim, dim, -1)
    reduced = np.einsum("aax->x", block)
    mixed = np.einsum("ab,x->abx", np.eye(dim) / dim, reduced)
    block = (1.0 - p) * block + p * mixed
    t = np.moveaxis(block.reshape(shape), list(range(2 * m)), rows + cols)
    return t.reshape(2**n, 2**n)


def reduced_density(rho: np.ndarray, keep: tuple[int, ...], n: int) -> np.ndarray:
    """Partial trace of ``rho`` onto ``keep`` (result ordered as ``keep``)."""
    m = len(keep)
    t = rho.reshape((2,) * (2 * n))
    rows = list(keep)
    cols = [q + n for q in keep]
    t = np.moveaxis(t, rows + cols, list(range(2 * m)))
    t = t.reshape(2**m, 2**m, 2 ** (n - m), 2 ** (n - m))
    return np.einsum("abxx->ab", t)


def permute_qubits(vec: np.ndarray, perm: list[int] | tuple[int, ...], n: int) -> np.ndarray:
    """Move qubit ``i`` of the state to position ``perm[i]``."""
    t = vec.reshape((2,) * n)
    return np.moveaxis(t, list(range(n)), list(perm)).reshape(-1)
