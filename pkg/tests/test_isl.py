import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqsbench.circuit import Circuit, Gate, GateKind, compose, equivalence
from dqsbench.isl import (
    Ansatz,
    CostEvaluator,
    DressedCnotLayer,
    IslConfig,
    concurrence,
    cost,
    entanglement_of_formation,
    isl_simplify,
    pairwise_qst,
    recompile_evolution,
    recompile_step,
    rotoselect_layer,
    rotosolve_all,
    rotosolve_angle,
    select_pair,
)
from dqsbench.models import build_model
from dqsbench.simulator import DensityMatrix, ExecutionCounter, NoiseModel, StateVector, run_statevector
from dqsbench.transpiler import CouplingGraph, transpile

BELLS = [
    np.array([1, 0, 0, 1]) / math.sqrt(2),
    np.array([1, 0, 0, -1]) / math.sqrt(2),
    np.array([0, 1, 1, 0]) / math.sqrt(2),
    np.array([0, 1, -1, 0]) / math.sqrt(2),
]


def binary_entropy(x):
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def reduced(psi: np.ndarray, pair, n):
    t = psi.reshape((2,) * n)
    keep = list(pair)
    rest = [q for q in range(n) if q not in keep]
    t = np.transpose(t, keep + rest).reshape(4, -1)
    return t @ t.conj().T


def random_ansatz(rng, n_layers, pairs=((0, 1),), n=2):
    a = Ansatz(n)
    for i in range(n_layers):
        c, t = pairs[i % len(pairs)]
        L = a.append(c, t)
        L.slots = [(str(rng.choice(["x", "y", "z"])), float(rng.uniform(-math.pi, math.pi))) for _ in range(4)]
    return a


def exact_evaluator(prefix: Circuit) -> CostEvaluator:
    return CostEvaluator(run_statevector(prefix))


def random_prefix(rng, n=2, length=8):
    gates = []
    for _ in range(length):
        q = int(rng.integers(n))
        gates.append(Gate(GateKind.RY, (q,), float(rng.uniform(-3, 3))))
        gates.append(Gate(GateKind.RZ, (q,), float(rng.uniform(-3, 3))))
        gates.append(Gate(GateKind.CNOT, (q, (q + 1) % n)))
    return Circuit(n, tuple(gates))


class TestEntanglement:
    @pytest.mark.parametrize("i", range(4))
    def test_bell_states(self, i):
        rho = np.outer(BELLS[i], BELLS[i].conj())
        assert concurrence(rho) == pytest.approx(1.0)
        assert entanglement_of_formation(rho) == pytest.approx(1.0)

    @given(st.floats(0, math.pi), st.floats(-math.pi, math.pi), st.floats(0, math.pi), st.floats(-math.pi, math.pi))
    def test_product_states(self, t1, p1, t2, p2):
        a = np.array([math.cos(t1 / 2), np.exp(1j * p1) * math.sin(t1 / 2)])
        b = np.array([math.cos(t2 / 2), np.exp(1j * p2) * math.sin(t2 / 2)])
        psi = np.kron(a, b)
        assert entanglement_of_formation(np.outer(psi, psi.conj())) < 1e-6

    def test_werner(self):
        p = 0.8
        rho = p * np.outer(BELLS[0], BELLS[0]) + (1 - p) * np.eye(4) / 4
        assert concurrence(rho) == pytest.approx(0.7, abs=1e-12)
        assert entanglement_of_formation(rho) == pytest.approx(binary_entropy((1 + math.sqrt(0.51)) / 2), abs=1e-12)

    @given(st.integers(0, 2**31))
    @settings(max_examples=40)
    def test_bounds(self, seed):
        rng = np.random.default_rng(seed)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        assert 0.0 <= entanglement_of_formation(rho) <= 1.0


class TestTomography:
    def test_exact_product(self):
        est = pairwise_qst(StateVector.basis("00"), (0, 1))
        assert np.allclose(est.matrix, np.diag([1, 0, 0, 0]), atol=1e-12)

    def test_bell_sampled(self):
        bell = StateVector(2, BELLS[0])
        counter = ExecutionCounter()
        est = pairwise_qst(bell, (0, 1), k=16384, seed=3, counter=counter)
        assert np.real(BELLS[0].conj() @ est.matrix @ BELLS[0]) > 0.95
        assert counter.total == 9 * 16384

    def test_exact_mode_does_not_count(self):
        counter = ExecutionCounter()
        pairwise_qst(StateVector.basis("00"), (0, 1), counter=counter)
        assert counter.total == 0

    def test_maximally_mixed(self):
        est = pairwise_qst(DensityMatrix.maximally_mixed(2), (0, 1), k=16384, seed=5)
        diff = np.linalg.eigvalsh(est.matrix - np.eye(4) / 4)
        assert 0.5 * np.sum(np.abs(diff)) < 0.05

    def test_reduced_pair_of_larger_state(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        v /= np.linalg.norm(v)
        for pair in [(0, 1), (1, 2), (2, 1)]:
            est = pairwise_qst(StateVector(3, v), pair)
            assert np.allclose(est.matrix, reduced(v, pair, 3), atol=1e-10)

    def test_estimate_is_a_state(self):
        est = pairwise_qst(StateVector(2, BELLS[2]), (0, 1), k=64, seed=1)
        est.check()


class TestSelectPair:
    def test_bell_edge(self):
        psi = np.kron(BELLS[0], [1, 0])
        edge, n = select_pair(StateVector(3, psi), CouplingGraph.line(3))
        assert edge == (0, 1) and n == 2

    def test_all_zeros_falls_back_to_lowest(self):
        edge, _ = select_pair(StateVector.zero(3), CouplingGraph.line(3))
        assert edge == (0, 1)

    def test_fallback_prefers_excited_qubits(self):
        edge, _ = select_pair(StateVector.basis("001"), CouplingGraph.line(3))
        assert edge == (1, 2)

    def test_ghz_like_matches_brute_force(self):
        a, b = math.cos(0.4), math.sin(0.4)
        psi = np.zeros(8, dtype=complex)
        psi[0b000], psi[0b011], psi[0b111] = a * 0.8, a * 0.6, b
        psi /= np.linalg.norm(psi)
        g = CouplingGraph(3, ((0, 1), (1, 2), (0, 2)))
        brute = [entanglement_of_formation(reduced(psi, e, 3)) for e in g.edges]
        edge, _ = select_pair(StateVector(3, psi), g)
        assert edge == g.edges[int(np.argmax(brute))]

    def test_tabu_excludes_and_clears(self):
        psi = StateVector(3, np.kron(BELLS[0], [1, 0]))
        g = CouplingGraph.line(3)
        edge, n = select_pair(psi, g, {(0, 1): 2})
        assert edge == (1, 2) and n == 1
        tabu = {(0, 1): 1, (1, 2): 1}
        edge, n = select_pair(psi, g, tabu)
        assert edge == (0, 1) and n == 2 and tabu == {}


class TestRotosolve:
    def test_cosine(self):
        theta, low = rotosolve_angle(math.cos)
        assert abs(abs(theta) - math.pi) < 1e-12 and low == pytest.approx(-1.0)

    def test_constant(self):
        theta, low = rotosolve_angle(lambda _: 0.4)
        assert math.isfinite(theta) and low == pytest.approx(0.4)

    @given(st.floats(0.1, 2), st.floats(-math.pi, math.pi), st.floats(-1, 1))
    def test_general_sinusoid(self, amp, phase, offset):
        theta, low = rotosolve_angle(lambda x: offset + amp * math.cos(x - phase))
        assert low == pytest.approx(offset - amp, abs=1e-9)
        assert offset + amp * math.cos(theta - phase) == pytest.approx(offset - amp, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_grid_search(self, seed):
        rng = np.random.default_rng(seed)
        ev = exact_evaluator(random_prefix(rng))
        a = random_ansatz(rng, 2)
        pos = (int(rng.integers(2)), int(rng.integers(4)))
        grid = np.arange(-math.pi, math.pi, 1e-3)
        axis = a.layers[pos[0]].slots[pos[1]][0]
        vals = []
        for th in grid:
            b = a.copy()
            b.layers[pos[0]].slots[pos[1]] = (axis, float(th))
            vals.append(ev.cost(b))
        ev.sweep(a, [pos], choose_axis=False)
        theta = a.layers[pos[0]].slots[pos[1]][1]
        best = grid[int(np.argmin(vals))]
        assert abs(math.remainder(theta - best, 2 * math.pi)) <= 1e-3
        assert ev.cost(a) <= min(vals) + 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_coordinate_optimality(self, seed):
        rng = np.random.default_rng(100 + seed)
        ev = exact_evaluator(random_prefix(rng))
        a = random_ansatz(rng, 2)
        pos = (1, 2)
        ev.sweep(a, [pos], choose_axis=False)
        c0 = ev.cost(a)
        axis, theta = a.layers[1].slots[2]
        for delta in (-0.1, 0.1):
            b = a.copy()
            b.layers[1].slots[2] = (axis, theta + delta)
            assert ev.cost(b) >= c0 - 1e-6

    @pytest.mark.parametrize("seed", range(8))
    def test_rotosolve_all_monotone(self, seed):
        rng = np.random.default_rng(200 + seed)
        ev = exact_evaluator(random_prefix(rng))
        a = random_ansatz(rng, 2)
        before = ev.cost(a)
        rotosolve_all(a, ev)
        assert ev.cost(a) <= before + 1e-9

    def test_rotosolve_all_empty(self):
        a = Ansatz(2)
        rotosolve_all(a, exact_evaluator(Circuit(2)))
        assert a.layers == []

    def test_fixed_point(self):
        rng = np.random.default_rng(7)
        ev = exact_evaluator(random_prefix(rng))
        a = random_ansatz(rng, 1)
        a.layers[0].slots = [a.layers[0].slots[0], None, None, None]
        rotosolve_all(a, ev)
        before = a.layers[0].slots[0][1]
        rotosolve_all(a, ev)
        assert abs(a.layers[0].slots[0][1] - before) < 1e-9


class TestRotoselect:
    def test_recovers_single_x_rotation(self):
        t = Circuit(2, (Gate(GateKind.RX, (0,), 0.7),))
        ev = exact_evaluator(t)
        a = Ansatz(2)
        a.append(0, 1)
        rotoselect_layer(a, 0, ev)
        assert ev.cost(a) < 1e-6

    def test_zero_cost_stays_zero(self):
        ev = exact_evaluator(Circuit(2))
        a = Ansatz(2)
        a.append(0, 1)
        rotoselect_layer(a, 0, ev)
        assert ev.cost(a) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_exact_mode_non_increasing(self, seed):
        rng = np.random.default_rng(300 + seed)
        ev = exact_evaluator(random_prefix(rng))
        a = random_ansatz(rng, 2)
        before = ev.cost(a)
        rotoselect_layer(a, 1, ev)
        assert ev.cost(a) <= before + 1e-9

    def test_only_target_layer_changes(self):
        rng = np.random.default_rng(9)
        ev = exact_evaluator(random_prefix(rng))
        a = random_ansatz(rng, 3)
        frozen = [list(a.layers[i].slots) for i in (0, 2)]
        rotoselect_layer(a, 1, ev)
        assert [a.layers[0].slots, a.layers[2].slots] == frozen

    def test_sampled_mode_runs(self):
        rng = np.random.default_rng(4)
        init = DensityMatrix(2, run_statevector(random_prefix(rng)).projector().matrix)
        ev = CostEvaluator(init, NoiseModel(), 1024, (1,))
        a = Ansatz(2)
        a.append(0, 1)
        rotoselect_layer(a, 0, ev)
        assert 0.0 <= ev.cost(a) <= 1.0

    def test_missing_layer(self):
        with pytest.raises(IndexError):
            rotoselect_layer(Ansatz(2), 0, exact_evaluator(Circuit(2)))


class TestCost:
    def test_exact_match_is_zero(self):
        t = Circuit(2, (Gate(GateKind.RY, (0,), 0.4), Gate(GateKind.CNOT, (0, 1))))
        a = Ansatz(2)
        L = a.append(0, 1)
        L.slots = [None, None, ("y", -0.4), None]
        assert cost(a, t, Circuit(2)) < 1e-12

    def test_orthogonal_is_one(self):
        a = Ansatz(2)
        L = a.append(0, 1)
        L.slots = [("x", math.pi), None, None, None]
        L.cnot = False
        assert cost(a, Circuit(2), Circuit(2)) == pytest.approx(1.0)

    def test_empty_ansatz_tcm_step(self):
        m = build_model("tcm_main", 2)
        g = CouplingGraph.line(2)
        v_prev, _ = transpile(m.state_prep(), g)
        t, _ = transpile(m.trotter_step(), g)
        oracle = 1 - abs(m.trotter_step().unitary()[0, 3]) ** 2
        assert cost(Ansatz(2), t, v_prev) == pytest.approx(oracle, abs=1e-12)

    def test_sampled_cost_within_shot_noise(self):
        m = build_model("tcm_main", 2)
        g = CouplingGraph.line(2)
        v_prev, _ = transpile(m.state_prep(), g)
        t, _ = transpile(m.trotter_step(), g)
        exact = cost(Ansatz(2), t, v_prev)
        sampled = cost(Ansatz(2), t, v_prev, exact=False, k=16384, seed=2, noise=NoiseModel.noiseless())
        assert abs(sampled - exact) < 4 * math.sqrt(exact * (1 - exact) / 16384)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            cost(Ansatz(2), Circuit(3), Circuit(2))


class TestAnsatz:
    def test_non_edge_rejected(self):
        with pytest.raises(ValueError):
            Ansatz(3).append(0, 2, CouplingGraph.line(3))

    def test_bad_slots(self):
        with pytest.raises(ValueError):
            DressedCnotLayer(0, 1, [("w", 0.0)] * 4)
        with pytest.raises(ValueError):
            DressedCnotLayer(0, 0)

    def test_new_layer_rotations_are_identity(self):
        a = Ansatz(2)
        L = a.append(0, 1)
        assert L.slots == [("z", 0.0)] * 4
        circuit = a.cost_circuit()
        cnot = Circuit(2, (Gate(GateKind.CNOT, (0, 1)),))
        assert equivalence(circuit.unitary(), cnot.unitary()) == pytest.approx(1.0)

    @given(st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_appending_a_layer_leaves_cost_unchanged(self, seed):
        # the new layer acts last on the cost side as a bare CNOT, which fixes |0...0>
        rng = np.random.default_rng(seed)
        prefix = random_prefix(rng, n=3)
        ev = exact_evaluator(prefix)
        a = random_ansatz(rng, 2, pairs=((0, 1), (1, 2)), n=3)
        before = ev.cost(a)
        a.append(*[(0, 1), (1, 2), (2, 1)][int(rng.integers(3))])
        assert abs(ev.cost(a) - before) < 1e-9

    def test_adjoint_orientation(self):
        rng = np.random.default_rng(3)
        a = random_ansatz(rng, 2)
        prod = a.circuit().unitary() @ a.cost_circuit().unitary()
        assert equivalence(prod, np.eye(4)) == pytest.approx(1.0)


class TestSimplify:
    def test_drops_small_rotations(self):
        a = Ansatz(2)
        L = a.append(0, 1)
        L.slots = [("x", 1e-4), ("y", 0.5), ("z", 0.0), ("x", -2 * math.pi + 1e-5)]
        out = isl_simplify(a, 1e-3)
        assert out.layers[0].slots == [None, ("y", 0.5), None, None]

    def test_merges_same_axis_on_a_wire(self):
        a = Ansatz(3)
        L1 = a.append(0, 1)
        L1.slots = [None, None, None, ("z", 0.2)]
        L2 = a.append(2, 1)
        L2.slots = [None, ("z", 0.3), None, None]
        out = isl_simplify(a, 1e-3)
        assert out.layers[0].slots[3] == ("z", pytest.approx(0.5))
        assert out.layers[1].slots[1] is None
        assert equivalence(out.cost_circuit().unitary(), a.cost_circuit().unitary()) == pytest.approx(1.0)

    def test_cancels_back_to_back_cnots(self):
        a = Ansatz(2)
        for _ in range(2):
            a.append(0, 1)
        out = isl_simplify(a)
        assert out.layers == []

    def test_cancellation_keeps_outer_rotations(self):
        a = Ansatz(2)
        L1, L2 = a.append(0, 1), a.append(0, 1)
        L1.slots = [("x", 0.4), None, None, None]
        L2.slots = [None, None, None, ("y", 0.9)]
        out = isl_simplify(a)
        assert len(out.layers) == 1 and not out.layers[0].cnot
        assert equivalence(out.cost_circuit().unitary(), a.cost_circuit().unitary()) == pytest.approx(1.0)

    @given(st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_semantics_preserved(self, seed):
        rng = np.random.default_rng(seed)
        a = random_ansatz(rng, 4, pairs=((0, 1), (1, 2), (0, 1)), n=3)
        for L in a.layers:
            for i in range(4):
                if rng.random() < 0.4:
                    L.slots[i] = (L.slots[i][0], 0.0)
        out = isl_simplify(a, 1e-12)
        assert equivalence(out.cost_circuit().unitary(), a.cost_circuit().unitary()) > 1 - 1e-9
        assert len(out.cost_circuit()) <= len(a.cost_circuit())


class TestRecompileStep:
    def test_identity_target(self):
        cfg = IslConfig(variant="noiseless")
        res = recompile_step(Circuit(2), Circuit(2), cfg, CouplingGraph.line(2))
        assert res.record.n_layers <= 1 and res.record.final_cost < cfg.cost_threshold

    def test_two_qubit_tcm_converges(self):
        m = build_model("tcm_main", 2)
        g = CouplingGraph.line(2)
        v_prev, _ = transpile(m.state_prep(), g)
        t, _ = transpile(m.trotter_step(), g)
        cfg = IslConfig(variant="noiseless")
        res = recompile_step(t, v_prev, cfg, g)
        assert res.record.final_cost < 1e-2 and res.record.n_layers <= 10
        assert res.ansatz.respects(g)
        # recursion property: the recompiled circuit reproduces T V_prev |0>
        target = run_statevector(compose(v_prev, t)).amplitudes
        got = run_statevector(res.ansatz.circuit()).amplitudes
        assert abs(np.vdot(target, got)) ** 2 >= 1 - cfg.cost_threshold

    @pytest.mark.parametrize("variant", ["noisy", "noiseless"])
    def test_accounting(self, variant):
        m = build_model("tcm_main", 2)
        g = CouplingGraph.line(2)
        v_prev, _ = transpile(m.state_prep(), g)
        t, _ = transpile(m.trotter_step(), g)
        cfg = IslConfig(variant=variant, k=512)
        counter = ExecutionCounter()
        res = recompile_step(t, v_prev, cfg, g, NoiseModel(), seed=4, counter=counter)
        rec = res.record
        assert res.executions == counter.total == cfg.k * (rec.cost_evaluations + 9 * rec.qst_pairs)

    def test_layer_costs_recorded_and_clamped(self):
        m = build_model("hsc_main", 3)
        g = CouplingGraph.line(3)
        v_prev, _ = transpile(m.state_prep(), g)
        t, _ = transpile(m.trotter_step(), g)
        res = recompile_step(t, v_prev, IslConfig(k=1024, max_layers=4), g, NoiseModel(), seed=1)
        assert 1 <= res.record.n_layers <= 4
        assert all(0.0 <= c <= 1.0 for c in res.record.layer_costs)
        assert res.record.final_cost == pytest.approx(min(res.record.layer_costs + [res.record.initial_cost]))

    def test_noisy_four_qubit_hsc_stalls_above_thresholds(self):
        m = build_model("hsc_main", 4)
        g = CouplingGraph.line(4)
        v_prev, _ = transpile(m.state_prep(), g)
        t, _ = transpile(m.trotter_step(), g)
        cfg = IslConfig()
        res = recompile_step(t, v_prev, cfg, g, NoiseModel(), seed=2)
        assert res.record.final_cost > 1e-2
        assert res.record.n_layers < cfg.max_layers

    def test_config_validation(self):
        with pytest.raises(ValueError):
            IslConfig(cost_threshold=0)
        with pytest.raises(ValueError):
            IslConfig(max_layers=0)
        with pytest.raises(ValueError):
            IslConfig(variant="other")


class TestEvolution:
    def test_identity_step(self):
        prep = build_model("tcm_main", 2).state_prep()
        evo = recompile_evolution(Circuit(2), prep, 1, IslConfig(variant="noiseless"), CouplingGraph.line(2))
        assert evo.probabilities[0] == pytest.approx(1.0)

    def test_noiseless_single_atom_tracks_rabi(self):
        m = build_model("tcm_main", 2)
        evo = recompile_evolution(
            m.trotter_step(), m.state_prep(), 15, IslConfig(variant="noiseless"), CouplingGraph.line(2)
        )
        for n, p in enumerate(evo.probabilities, start=1):
            assert abs(p - math.cos(10.0 * 0.01 * n) ** 2) < 0.05

    def test_execution_totals(self):
        m = build_model("tcm_main", 2)
        cfg = IslConfig(variant="mixed", k=256)
        counter = ExecutionCounter()
        evo = recompile_evolution(m.trotter_step(), m.state_prep(), 3, cfg, CouplingGraph.line(2), NoiseModel(), 5, counter)
        per_step = [cfg.k * (1 + r.cost_evaluations + 9 * r.qst_pairs) for r in evo.records]
        assert evo.cum_executions == list(np.cumsum(per_step))
        assert counter.total == sum(per_step)

    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            recompile_evolution(Circuit(2), Circuit(2), 0, IslConfig(), CouplingGraph.line(2))
