import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqsbench.circuit import Circuit, Gate, GateKind, decompose_to_basis
from dqsbench.kernels import depolarize
from dqsbench.models import TcmParams, excitation_operator, tcm_trotter_step
from dqsbench.simulator import (
    DensityMatrix,
    ExecutionCounter,
    NoiseModel,
    NonNativeGateError,
    ShotResult,
    StateVector,
    fidelity,
    overlap_probability,
    readout_distribution,
    run_density,
    run_statevector,
    sample_shots,
)
from test_circuit import random_circuit

NATIVE_1Q = [GateKind.I, GateKind.X, GateKind.SX, GateKind.RZ]
BELL = StateVector(2, np.array([1, 0, 0, 1]) / math.sqrt(2))


def native_random(rng, n, length):
    return random_circuit(rng, n, length, NATIVE_1Q, [GateKind.CNOT])


class TestStatevector:
    def test_xx_on_zero(self):
        c = Circuit(2, (Gate(GateKind.X, (0,)), Gate(GateKind.X, (1,))))
        assert np.allclose(run_statevector(c).amplitudes, StateVector.basis("11").amplitudes)

    def test_empty_circuit(self):
        psi = StateVector.basis("10")
        assert np.array_equal(run_statevector(Circuit(2), psi).amplitudes, psi.amplitudes)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            run_statevector(Circuit(3), StateVector.zero(2))

    def test_norm_checked(self):
        with pytest.raises(ValueError):
            StateVector(1, np.array([1.0, 1.0]))

    def test_qubit_zero_is_most_significant(self):
        psi = run_statevector(Circuit(2, (Gate(GateKind.X, (0,)),)))
        assert psi.probabilities()[0b10] == pytest.approx(1.0)

    def test_tcm_ten_steps_track_rabi(self):
        p = TcmParams(N=1, g=10.0, dt=0.01)
        step = tcm_trotter_step(p)
        psi = StateVector.basis("11")
        for n in range(1, 11):
            psi = run_statevector(step, psi)
            exact = math.cos(p.g * n * p.dt) ** 2
            # first-order error of a few 1e-4 per step at these parameters
            assert abs(psi.probabilities()[3] - exact) < 2e-3 * n


class TestDensity:
    def test_x_noiseless(self):
        rho = run_density(Circuit(1, (Gate(GateKind.X, (0,)),)))
        assert np.allclose(rho.matrix, np.diag([0, 1]))

    def test_rejects_non_native(self):
        with pytest.raises(NonNativeGateError):
            run_density(Circuit(1, (Gate(GateKind.H, (0,)),)))

    def test_accepts_inverse_sqrtx(self):
        c = Circuit(1, (Gate(GateKind.SX, (0,)), Gate(GateKind.RX, (0,), -math.pi / 2)))
        assert np.allclose(run_density(c).matrix, np.diag([1, 0]))

    def test_single_gate_fidelity(self):
        p1 = 0.03
        noise = NoiseModel(p1=p1, p2=0.0, readout_flip=0.0)
        rho = run_density(Circuit(1, (Gate(GateKind.X, (0,)),)), None, noise)
        # Kraus oracle: depolarizing = sum of sqrt(1-3p/4) I, sqrt(p/4) X, Y, Z
        paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
        weights = [1 - 3 * p1 / 4, p1 / 4, p1 / 4, p1 / 4]
        one = np.diag([0, 1]).astype(complex)
        oracle = sum(w * P @ one @ P.conj().T for w, P in zip(weights, paulis))
        assert np.allclose(rho.matrix, oracle)
        assert fidelity(rho, StateVector.basis("1")) == pytest.approx(1 - p1 / 2)

    def test_identity_gate_is_noise_free(self):
        noise = NoiseModel(p1=0.5, p2=0.5)
        rho = run_density(Circuit(1, (Gate(GateKind.I, (0,)),)), None, noise)
        assert np.allclose(rho.matrix, np.diag([1, 0]))

    def test_deep_cnot_circuit_closed_form(self):
        # 200 CNOTs keep |11> <-> |10> cycling; only the depolarizing contraction survives.
        noise = NoiseModel(p1=0.0, p2=0.01, readout_flip=0.0)
        gates = (Gate(GateKind.X, (0,)), Gate(GateKind.X, (1,))) + (Gate(GateKind.CNOT, (0, 1)),) * 200
        rho = run_density(Circuit(2, gates), None, noise)
        assert rho.probabilities()[3] == pytest.approx(0.25 + 0.75 * 0.99**200, abs=1e-12)

    def test_deep_cnot_circuit_reaches_asymptote(self):
        noise = NoiseModel(p1=0.0, p2=0.01, readout_flip=0.0)
        gates = (Gate(GateKind.X, (0,)), Gate(GateKind.X, (1,))) + (Gate(GateKind.CNOT, (0, 1)),) * 400
        rho = run_density(Circuit(2, gates), None, noise)
        assert abs(rho.probabilities()[3] - 0.25) < 0.05

    def test_noiseless_matches_statevector_projector(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            c = native_random(rng, n, 12)
            psi = run_statevector(c).amplitudes
            rho = run_density(c).matrix
            assert np.max(np.abs(rho - np.outer(psi, psi.conj()))) < 1e-10

    @given(st.integers(0, 2**31), st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=30, deadline=None)
    def test_trace_and_validity_under_noise(self, seed, p1, p2):
        rng = np.random.default_rng(seed)
        c = native_random(rng, 3, 15)
        rho = run_density(c, None, NoiseModel(p1=p1, p2=p2))
        assert abs(np.trace(rho.matrix) - 1) < 1e-10
        rho.check()

    def test_tcm_conserves_excitations(self):
        p = TcmParams(N=2)
        step = decompose_to_basis(tcm_trotter_step(p))
        ex = excitation_operator(3)
        rho = DensityMatrix(3, StateVector.basis("111").projector().matrix)
        start = np.trace(ex @ rho.matrix).real
        for _ in range(40):
            rho = run_density(step, rho)
            assert np.trace(ex @ rho.matrix).real == pytest.approx(start, abs=1e-9)

    def test_depolarized_bell_fidelity(self):
        p = 0.2
        rho = depolarize(BELL.projector().matrix, p, (0, 1), 2)
        assert fidelity(DensityMatrix(2, rho), BELL) == pytest.approx((1 - p) + p / 4)

    def test_check_rejects_bad_states(self):
        with pytest.raises(ValueError):
            DensityMatrix(1, np.diag([0.7, 0.7])).check()
        with pytest.raises(ValueError):
            DensityMatrix(1, np.diag([1.2, -0.2])).check()


class TestSampling:
    def test_basis_state_noiseless(self):
        shots = sample_shots(StateVector.basis("11"), 100)
        assert shots.counts == {"11": 100}

    def test_reproducible(self):
        plus = StateVector(1, np.array([1, 1]) / math.sqrt(2))
        a = sample_shots(plus, 1000, rng_seed=(4, 2))
        b = sample_shots(plus, 1000, rng_seed=(4, 2))
        assert a == b

    def test_zero_shots_rejected(self):
        with pytest.raises(ValueError):
            sample_shots(StateVector.zero(1), 0)

    def test_plus_state_binomial_bound(self):
        plus = StateVector(1, np.array([1, 1]) / math.sqrt(2))
        k = 16384
        bound = 3 * math.sqrt(0.25 / k)
        ok = sum(abs(sample_shots(plus, k, rng_seed=s).counts.get("0", 0) / k - 0.5) < bound for s in range(200))
        assert ok >= 0.99 * 200 - 1

    def test_readout_flip_rate(self):
        k = 16384
        shots = sample_shots(StateVector.basis("1"), k, NoiseModel(0, 0, 0.02), rng_seed=9)
        sigma = math.sqrt(0.02 * 0.98 / k)
        assert abs(shots.counts.get("0", 0) / k - 0.02) < 3 * sigma

    def test_readout_distribution_matches_bitwise_flips(self):
        probs = np.array([0.1, 0.2, 0.3, 0.4])
        f = 0.1
        out = readout_distribution(probs, f, 2)
        manual = np.zeros(4)
        for src in range(4):
            for dst in range(4):
                flips = bin(src ^ dst).count("1")
                manual[dst] += probs[src] * f**flips * (1 - f) ** (2 - flips)
        assert np.allclose(out, manual)

    def test_chi_squared_against_born(self):
        from scipy.stats import chisquare

        amps = np.sqrt(np.array([0.1, 0.2, 0.3, 0.4]))
        state = StateVector(2, amps)
        k = 16384
        shots = sample_shots(state, k, rng_seed=123)
        observed = [shots.counts.get(format(i, "02b"), 0) for i in range(4)]
        assert chisquare(observed, k * amps**2).pvalue > 0.001

    def test_counter(self):
        counter = ExecutionCounter()
        sample_shots(StateVector.zero(1), 10, counter=counter)
        sample_shots(StateVector.zero(1), 5, counter=counter)
        assert counter.total == 15

    def test_shot_result_validates(self):
        with pytest.raises(ValueError):
            ShotResult({"0": 3}, 4)


class TestOverlap:
    def test_full(self):
        assert overlap_probability(ShotResult({"11": 100}, 100), "11") == 1.0

    def test_partial(self):
        assert overlap_probability(ShotResult({"11": 25, "00": 75}, 100), "11") == 0.25

    def test_absent(self):
        assert overlap_probability(ShotResult({"00": 10}, 10), "11") == 0.0


class TestFidelity:
    def test_pure(self):
        assert fidelity(BELL.projector(), BELL) == pytest.approx(1.0)

    def test_maximally_mixed(self):
        assert fidelity(DensityMatrix.maximally_mixed(2), BELL) == pytest.approx(0.25)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            fidelity(DensityMatrix.zero(1), BELL)
