"""Cost evaluation and coordinate sweeps for the recompiler.

The cost of a cost-side ansatz ``W`` is ``1 - P(0...0)`` after running
``V_prev``, ``T`` and then ``W``. Two backends are available:

* exact: statevectors and logical rotations, no shot noise;
* sampled: density matrices with depolarizing noise, each rotation slot
  executed through a fixed native template, readout-aware all-zeros
  probability, and a binomial draw of ``k`` shots per evaluation.

A sweep visits rotation slots in time order. Before it starts, the effect of
everything after each block is propagated backwards once; the sweep then
carries the forward state, so a full sweep costs one pass over the circuit
instead of one pass per evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..circuit import AXIS_ROTATION, Gate, GateKind, _rx_native, _ry_native, normalize_angle
from ..kernels import apply_to_density, apply_to_state, depolarize
from ..simulator import DensityMatrix, ExecutionCounter, NoiseModel, StateVector, make_rng
from .ansatz import Ansatz

AXES = ("x", "y", "z")
HALF_PI = math.pi / 2.0
_IMPROVE_EPS = 1e-12


def rotosolve_angle(evaluate: Callable[[float], float]) -> tuple[float, float]:
    """Closed-form minimizer of a sinusoidal cost in one angle.

    Returns ``(theta_star, predicted_minimum)`` from evaluations at
    ``0`` and ``+-pi/2``.
    """
    m0, mp, mm = evaluate(0.0), evaluate(HALF_PI), evaluate(-HALF_PI)
    return _fit(m0, mp, mm)


def _fit(m0: float, mp: float, mm: float) -> tuple[float, float]:
    theta = normalize_angle(-HALF_PI - math.atan2(2.0 * m0 - mp - mm, mp - mm))
    centre = 0.5 * (mp + mm)
    radius = math.hypot(m0 - centre, 0.5 * (mp - mm))
    return theta, centre - radius


def _block_gates(axis: str, angle: float, q: int, native: bool) -> list[Gate]:
    if not native or axis == "z":
        return [Gate(AXIS_ROTATION[axis], (q,), angle)]
    return _rx_native(q, angle) if axis == "x" else _ry_native(q, angle)


@dataclass
class CostEvaluator:
    """Evaluates ansatz costs against a fixed input state ``T V_prev |0>``."""

    initial: StateVector | DensityMatrix
    noise: NoiseModel = field(default_factory=NoiseModel.noiseless)
    k: int | None = None
    seed: tuple[int, ...] = (0,)
    counter: ExecutionCounter = field(default_factory=ExecutionCounter)
    n_evaluations: int = 0
    shots_per_evaluation: int = 0

    def __post_init__(self) -> None:
        self.exact = isinstance(self.initial, StateVector)
        self.n = self.initial.num_qubits
        if not self.exact:
            f = self.noise.flip
            e0 = np.array([1.0 - f, f])
            diag = e0
            for _ in range(self.n - 1):
                diag = np.kron(diag, e0)
            self._final_effect = np.diag(diag).astype(complex)
        if self.shots_per_evaluation == 0:
            self.shots_per_evaluation = int(self.k) if self.k else 0

    # -- single-block kernels ------------------------------------------------
    def _forward(self, state: np.ndarray, gates: list[Gate]) -> np.ndarray:
        for g in gates:
            if self.exact:
                state = apply_to_state(state, g.matrix(), g.qubits, self.n)
            else:
                state = apply_to_density(state, g.matrix(), g.qubits, self.n)
                p = self.noise.gate_error(g)
                if p:
                    state = depolarize(state, p, g.qubits, self.n)
        return state

    def _backward(self, effect: np.ndarray, gates: list[Gate]) -> np.ndarray:
        for g in reversed(gates):
            u = g.matrix().conj().T
            if self.exact:
                effect = apply_to_state(effect, u, g.qubits, self.n)
            else:
                p = self.noise.gate_error(g)
                if p:
                    effect = depolarize(effect, p, g.qubits, self.n)
                effect = apply_to_density(effect, u, g.qubits, self.n)
        return effect

    def _start(self) -> np.ndarray:
        return self.initial.amplitudes if self.exact else self.initial.matrix

    def _end_effect(self) -> np.ndarray:
        if self.exact:
            v = np.zeros(2**self.n, dtype=complex)
            v[0] = 1.0
            return v
        return self._final_effect

    def _record(self, p0: float) -> float:
        """Turn an all-zeros probability into a reported cost, counting executions."""
        self.n_evaluations += 1
        self.counter.add(self.shots_per_evaluation)
        p0 = min(1.0, max(0.0, p0))
        if not self.exact and self.k:
            rng = make_rng(self.seed + (self.n_evaluations,))
            p0 = rng.binomial(int(self.k), p0) / self.k
        return 1.0 - p0

    def _p0(self, effect: np.ndarray, state: np.ndarray) -> float:
        if self.exact:
            return float(abs(np.vdot(effect, state)) ** 2)
        return float(np.real(np.sum(effect.T * state)))

    # -- public API -----------------------------------------------------------
    def _blocks(self, a: Ansatz) -> list[tuple[tuple[int, int] | None, list[Gate]]]:
        native = not self.exact
        blocks = []
        for li, L in enumerate(a.layers):
            for si in (0, 1):
                s = L.slots[si]
                if s is not None:
                    blocks.append(((li, si), _block_gates(s[0], s[1], L.slot_qubit(si), native)))
            if L.cnot:
                blocks.append((None, [Gate(GateKind.CNOT, (L.control, L.target))]))
            for si in (2, 3):
                s = L.slots[si]
                if s is not None:
                    blocks.append(((li, si), _block_gates(s[0], s[1], L.slot_qubit(si), native)))
        return blocks

    def cost(self, a: Ansatz) -> float:
        gates = [g for _, gs in self._blocks(a) for g in gs]
        state = self._forward(self._start(), gates)
        return self._record(self._p0(self._end_effect(), state))

    def sweep(
        self,
        a: Ansatz,
        positions: Sequence[tuple[int, int]],
        choose_axis: bool,
    ) -> float:
        """Optimize the given slots in time order, in place.

        With ``choose_axis`` every axis is fitted (Rotoselect); otherwise the
        slot keeps its axis (Rotosolve). Returns the predicted cost after the
        last updated slot, or ``nan`` when nothing was visited.
        """
        wanted = set(positions)
        blocks = self._blocks(a)
        effects = [None] * len(blocks)
        e = self._end_effect()
        for i in range(len(blocks) - 1, -1, -1):
            effects[i] = e
            e = self._backward(e, blocks[i][1])
        state = self._start()
        predicted = float("nan")
        for i, (pos, gates) in enumerate(blocks):
            if pos is not None and pos in wanted:
                li, si = pos
                layer = a.layers[li]
                q = layer.slot_qubit(si)
                axis_now, angle_now = layer.slots[si]
                eff = effects[i]
                cache: dict[tuple[str, float], float] = {}

                def evaluate(axis: str, theta: float) -> float:
                    key = ("z" if self.exact and theta == 0.0 else axis, theta)
                    if key not in cache:
                        out = self._forward(state, _block_gates(axis, theta, q, not self.exact))
                        cache[key] = self._record(self._p0(eff, out))
                    return cache[key]

                fits = {}
                for axis in (AXES if choose_axis else (axis_now,)):
                    fits[axis] = _fit(evaluate(axis, 0.0), evaluate(axis, HALF_PI), evaluate(axis, -HALF_PI))
                best_axis = axis_now if axis_now in fits else min(fits, key=lambda ax: fits[ax][1])
                for axis, (_, low) in fits.items():
                    if low < fits[best_axis][1] - _IMPROVE_EPS:
                        best_axis = axis
                theta, predicted = fits[best_axis]
                layer.slots[si] = (best_axis, theta)
                gates = _block_gates(best_axis, theta, q, not self.exact)
            state = self._forward(state, gates)
        return predicted


