"""Layer-by-layer recompilation of Trotter steps into shallow dressed-CNOT circuits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..circuit import Circuit
from ..simulator import (
    DensityMatrix,
    ExecutionCounter,
    NoiseModel,
    StateVector,
    overlap_probability,
    run_density,
    run_statevector,
    sample_shots,
)
from ..transpiler import CouplingGraph, transpile
from .ansatz import Ansatz, isl_simplify
from .engine import CostEvaluator
from .tomography import entanglement_of_formation, pairwise_qst

VARIANTS = ("noisy", "mixed", "noiseless")


@dataclass(frozen=True)
class IslConfig:
    cost_threshold: float = 1e-2
    theta_th: float = 1e-3
    max_layers: int = 30
    stall_layers: int = 3
    stall_delta: float = 1e-4
    k: int = 16384
    tabu_tenure: int = 2
    tabu_delta: float = 1e-3
    variant: str = "noisy"
    rotoselect_tol: float = 1e-4
    rotoselect_max_sweeps: int = 5

    def __post_init__(self) -> None:
        if not self.cost_threshold > 0:
            raise ValueError("cost_threshold must be positive")
        if self.max_layers < 1:
            raise ValueError("max_layers must be at least 1")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @property
    def exact_optimization(self) -> bool:
        return self.variant in ("mixed", "noiseless")


@dataclass
class CostRecord:
    """End-of-layer costs of one recompiled time step."""

    step: int
    layer_costs: list[float] = field(default_factory=list)
    initial_cost: float = 1.0
    final_cost: float = 1.0
    cost_evaluations: int = 0
    qst_pairs: int = 0
    pairs: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n_layers(self) -> int:
        return len(self.layer_costs)


@dataclass
class StepResult:
    ansatz: Ansatz
    record: CostRecord
    executions: int


def cost(
    v: Ansatz,
    t: Circuit,
    v_prev: Circuit,
    exact: bool = True,
    k: int | None = None,
    seed: int | Sequence[int] = 0,
    noise: NoiseModel | None = None,
) -> float:
    """``1 - P(0...0)`` of ``V_prev``, then ``T``, then the inverse of ``V``."""
    if not (v.num_qubits == t.num_qubits == v_prev.num_qubits):
        raise ValueError("width mismatch between ansatz, step and previous circuit")
    ev = _evaluator(v_prev + t, exact, noise, k, _seed_tuple(seed), ExecutionCounter())
    return ev.cost(v)


def _seed_tuple(seed: int | Sequence[int]) -> tuple[int, ...]:
    return (int(seed),) if isinstance(seed, (int, np.integer)) else tuple(int(s) for s in seed)


def _evaluator(
    prefix: Circuit,
    exact: bool,
    noise: NoiseModel | None,
    k: int | None,
    seed: tuple[int, ...],
    counter: ExecutionCounter,
) -> CostEvaluator:
    noise = noise or NoiseModel.noiseless()
    if exact:
        init: StateVector | DensityMatrix = run_statevector(prefix)
        return CostEvaluator(init, NoiseModel.noiseless(), None, seed, counter, shots_per_evaluation=k or 0)
    init = run_density(prefix, None, noise, check_native=False)
    return CostEvaluator(init, noise, k, seed, counter)


def _current_state(ev: CostEvaluator, a: Ansatz) -> StateVector | DensityMatrix:
    gates = [g for _, gs in ev._blocks(a) for g in gs]
    out = ev._forward(ev._start(), gates)
    if ev.exact:
        return StateVector(ev.n, out / np.linalg.norm(out))
    return DensityMatrix(ev.n, out)


def select_pair(
    state: StateVector | DensityMatrix,
    graph: CouplingGraph,
    tabu: dict[tuple[int, int], int] | None = None,
    k: int | None = None,
    seed: int | Sequence[int] = 0,
    readout_flip: float = 0.0,
    counter: ExecutionCounter | None = None,
) -> tuple[tuple[int, int], int]:
    """Most entangled non-tabu edge by tomography; returns ``(edge, n_measured)``.

    If every measured entanglement is below 1e-6 the edge whose qubits deviate
    most from ``|0>`` wins. Ties go to the lowest edge index. When every edge
    is tabu the tabu list is cleared first.
    """
    tabu = tabu if tabu is not None else {}
    edges = [e for e in graph.edges if tabu.get(e, 0) <= 0]
    if not edges:
        tabu.clear()
        edges = list(graph.edges)
    base = _seed_tuple(seed)
    scores, deviation = [], []
    for i, e in enumerate(edges):
        rho = pairwise_qst(state, e, k, base + (i,), readout_flip, counter)
        scores.append(entanglement_of_formation(rho))
        p = np.real(np.diag(rho.matrix))
        deviation.append((p[2] + p[3]) + (p[1] + p[3]))
    if max(scores) < 1e-6:
        return edges[int(np.argmax(deviation))], len(edges)
    return edges[int(np.argmax(scores))], len(edges)


def rotoselect_layer(a: Ansatz, index: int, ev: CostEvaluator, tol: float = 1e-4, max_sweeps: int = 5) -> Ansatz:
    """Choose axes and angles of one layer's slots, repeating sweeps until they stall."""
    if not 0 <= index < len(a.layers):
        raise IndexError("layer does not exist")
    positions = [(index, s) for s in range(4) if a.layers[index].slots[s] is not None]
    last = math.inf
    for _ in range(max_sweeps):
        now = ev.sweep(a, positions, choose_axis=True)
        if not math.isfinite(now) or last - now < tol:
            break
        last = now
    return a


def rotosolve_all(a: Ansatz, ev: CostEvaluator) -> Ansatz:
    """One angle-only sweep over every remaining slot."""
    positions = a.slot_positions()
    if positions:
        ev.sweep(a, positions, choose_axis=False)
    return a


def recompile_step(
    t: Circuit,
    v_prev: Circuit,
    cfg: IslConfig,
    graph: CouplingGraph,
    noise: NoiseModel | None = None,
    seed: int | Sequence[int] = 0,
    step: int = 1,
    counter: ExecutionCounter | None = None,
) -> StepResult:
    """Grow an ansatz whose inverse reproduces ``T V_prev |0>``.

    At least one layer is always placed: convergence is judged after a layer
    has been optimized. The lowest-cost ansatz seen is kept.
    """
    if not (t.num_qubits == v_prev.num_qubits == graph.num_qubits):
        raise ValueError("circuits and graph must share a width")
    noise = noise or NoiseModel()
    counter = counter if counter is not None else ExecutionCounter()
    start = counter.total
    base = _seed_tuple(seed)
    exact = cfg.exact_optimization
    ev = _evaluator(v_prev + t, exact, noise, cfg.k, base + (0,), counter)
    qst_k = None if exact else cfg.k
    flip = 0.0 if exact else noise.flip

    a = Ansatz(t.num_qubits)
    rec = CostRecord(step)
    c_now = ev.cost(a)
    rec.initial_cost = c_now
    best, best_cost = a.copy(), c_now
    tabu: dict[tuple[int, int], int] = {}
    stall = 0
    for li in range(cfg.max_layers):
        state = _current_state(ev, a)
        pair, measured = select_pair(state, graph, tabu, qst_k, base + (1, li), flip, counter)
        if exact:
            counter.add(9 * cfg.k * measured)
        rec.qst_pairs += measured
        rec.pairs.append(pair)
        for e in list(tabu):
            tabu[e] -= 1
        a.append(*pair, graph=graph)
        rotoselect_layer(a, len(a.layers) - 1, ev, cfg.rotoselect_tol, cfg.rotoselect_max_sweeps)
        rotosolve_all(a, ev)
        a = isl_simplify(a, cfg.theta_th)
        c_new = ev.cost(a)
        rec.layer_costs.append(min(1.0, max(0.0, c_new)))
        if c_now - c_new < cfg.tabu_delta:
            tabu[pair] = cfg.tabu_tenure
        if c_new < best_cost - cfg.stall_delta:
            stall = 0
        else:
            stall += 1
        if c_new < best_cost:
            best, best_cost = a.copy(), c_new
        c_now = c_new
        if c_new < cfg.cost_threshold or stall >= cfg.stall_layers:
            break
    rec.final_cost = min(1.0, max(0.0, best_cost))
    rec.cost_evaluations = ev.n_evaluations
    return StepResult(best, rec, counter.total - start)


@dataclass
class IslEvolution:
    """Per-step outcome of a recursive recompilation run."""

    ansatze: list[Ansatz] = field(default_factory=list)
    circuits: list[Circuit] = field(default_factory=list)
    records: list[CostRecord] = field(default_factory=list)
    probabilities: list[float] = field(default_factory=list)
    states: list[StateVector | DensityMatrix] = field(default_factory=list)
    layouts: list[tuple[int, ...]] = field(default_factory=list)
    depths: list[int] = field(default_factory=list)
    cum_executions: list[int] = field(default_factory=list)


def recompile_evolution(
    step: Circuit,
    state_prep: Circuit,
    n_steps: int,
    cfg: IslConfig,
    graph: CouplingGraph,
    noise: NoiseModel | None = None,
    seed: int | Sequence[int] = 0,
    counter: ExecutionCounter | None = None,
) -> IslEvolution:
    """Run ``V_n |0> ~ T V_{n-1} |0>`` for ``n = 1..n_steps`` starting from ``V_0 = U_st``.

    ``step`` and ``state_prep`` are logical circuits on ``graph.num_qubits``
    qubits. Routing swaps inside ``T`` move logical qubits around; the layout
    is carried from one step to the next and reported per step.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    noise = noise or NoiseModel()
    counter = counter if counter is not None else ExecutionCounter()
    base = _seed_tuple(seed)
    n = graph.num_qubits
    target = "1" * n
    layout: tuple[int, ...] = tuple(range(n))
    v_prev, _ = transpile(state_prep, graph)
    out = IslEvolution()
    for idx in range(1, n_steps + 1):
        t_native, rep = transpile(step, graph, initial_layout=layout)
        layout = rep.final_layout
        res = recompile_step(t_native, v_prev, cfg, graph, noise, base + (idx,), idx, counter)
        executed, _ = transpile(res.ansatz.circuit(), graph)
        if cfg.variant == "noiseless":
            state: StateVector | DensityMatrix = run_statevector(executed)
            p = float(state.probabilities()[int(target, 2)])
            counter.add(cfg.k)
        else:
            state = run_density(executed, None, noise)
            shots = sample_shots(state, cfg.k, noise, base + (idx, 2), counter)
            p = overlap_probability(shots, target)
        out.ansatze.append(res.ansatz)
        out.circuits.append(executed)
        out.records.append(res.record)
        out.probabilities.append(p)
        out.states.append(state)
        out.layouts.append(layout)
        out.depths.append(executed.depth())
        out.cum_executions.append(counter.total)
        v_prev = executed
    return out
