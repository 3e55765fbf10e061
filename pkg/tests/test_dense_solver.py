"""
Tests for the dense density-matrix engine

Operators, Lindblad integration, dense entanglement measures, the register
models, trajectory averaging and the Gaussian oracle bridge.
"""

import math

import numpy as np

from tests.test_framework import assert_close, assert_equals, assert_raises, assert_true, run_suite
from src.errors import DimensionError
from src.dense_solver import (
    DenseState,
    HilbertSpec,
    RegisterModel,
    bell_register_example,
    build_operators,
    dense_log_negativity,
    dense_moments,
    dense_partition,
    dense_scenario_timeseries,
    evolve_lindblad,
    lindblad_timeseries,
    oracle_compare,
    pure_log_negativity,
    qudit_feedforward_model,
    reduced_density,
    register_log_negativity_curve,
    sample_sme_ensemble,
    sme_ensemble_log_negativity,
    three_qudit_model,
    top_level_population,
    weighted_sum,
)
from src.protocols import ScenarioParams, build_two_mode_scenario, sample_grid

LN2 = math.log(2.0)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)


def bell_pair() -> DenseState:
    spec = HilbertSpec((2, 2), ("q1", "q2"))
    return DenseState.from_pure(spec, np.array([1.0, 0.0, 0.0, 1.0]))


class TestDenseSolver:
    """Test suite for dense_solver"""

    def test_hilbert_spec(self):
        spec = HilbertSpec((2, 3))
        assert_equals(spec.tags, ("q1", "q2"), "default tags")
        assert_equals(spec.total, 6, "total dimension")
        assert_raises(DimensionError, HilbertSpec, (2, 2), ("a",))
        assert_raises(DimensionError, HilbertSpec, (1, 2))
        assert_raises(DimensionError, HilbertSpec, (64, 64, 2))
        assert_raises(DimensionError, spec.site, "zz")

    def test_operators(self):
        spec = HilbertSpec((2, 2, 3), ("q1", "q2", "c"))
        sigma = weighted_sum(spec, [(0.5, "pauli_x", "q1"), (0.35, "pauli_x", "q2")])
        eig = np.sort(np.linalg.eigvalsh(sigma.toarray()))
        assert_close(np.unique(np.round(eig, 12)), [-0.85, -0.15, 0.15, 0.85], 1e-12, "Σ_x spectrum")
        x = build_operators(HilbertSpec((2,)), "truncated_x", 0)
        assert_close(x.toarray(), SIGMA_X / math.sqrt(2.0), 1e-15, "x at d=2")
        n = build_operators(HilbertSpec((4,)), "number", 0)
        assert_close(np.diag(n.toarray()), [0, 1, 2, 3], 1e-12, "number operator")
        assert_raises(DimensionError, build_operators, spec, "pauli_z", "c")
        assert_raises(DimensionError, build_operators, spec, "spin_flip", "q1")

    def test_lindblad_without_generators_is_identity(self):
        state = bell_pair()
        after = evolve_lindblad(state, None, [], 0.3)
        assert_close(after.rho, state.rho, 1e-14, "no generators, no change")

    def test_lindblad_preserves_trace(self):
        model = qudit_feedforward_model(3, eta=1.0)
        after = evolve_lindblad(model.initial_state(), model.H, model.jumps, 0.5)
        assert_close(after.trace(), 1.0, 1e-8, "trace")
        assert_true(after.min_eigenvalue() > -1e-8, "positive semidefinite")
        assert_true(after.purity() < 1.0, "jump mixes the state")

    def test_bell_pair_negativity(self):
        state = bell_pair()
        assert_close(dense_log_negativity(state, dense_partition(state.spec, ["q1"])), LN2, 1e-12, "ln 2")
        psi = np.array([[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0]])
        values = pure_log_negativity(psi, state.spec, ["q1"])
        assert_close(values, [LN2, 0.0], 1e-12, "Schmidt formula on a batch")
        reduced = reduced_density(state, ["q2"])
        assert_close(reduced.rho, 0.5 * np.eye(2), 1e-12, "maximally mixed marginal")

    def test_bell_register_example(self):
        report = bell_register_example()
        assert_close(report["log_negativity_1_23"], LN2, 1e-10, "E_N(1|23)")
        assert_close(report["log_negativity_12_3"], 0.0, 1e-10, "E_N(12|3)")
        assert_close(report["mutual_information_12_3"], LN2, 1e-10, "classical correlation with the register")
        assert_close(report["bell_pair_entropy"], LN2, 1e-10, "Bell pair entropy")

    def test_three_qudit_reduces_to_qubits(self):
        model = three_qudit_model(2, eta=1.0)
        spec = model.spec
        expected = 0.5 * (
            build_operators(spec, "pauli_x", "a").toarray() + build_operators(spec, "pauli_x", "b").toarray()
        )
        assert_close(model.monitored.toarray(), expected, 1e-12, "z₊ = (σ_x,a + σ_x,b)/2")

    def test_register_curve_builds_entanglement(self):
        times = [0.0, 0.5, 1.0, 2.0]
        curve = register_log_negativity_curve(qudit_feedforward_model(2, eta=1.0), times)
        assert_close(curve[0], 0.0, 1e-12, "ground state is a product")
        assert_true(float(np.max(curve)) > 1e-4, f"entanglement develops: {curve}")
        assert_true(float(np.max(curve)) <= LN2 + 1e-9, "bounded by one qubit")

    def test_short_time_negativity_grows_with_eta(self):
        values = [
            register_log_negativity_curve(qudit_feedforward_model(2, eta=eta), [0.1])[0]
            for eta in (0.5, 1.0, 2.0, 5.0)
        ]
        for k in range(3):
            assert_true(values[k + 1] >= values[k] - 1e-9, f"η ordering at γt=0.1: {values}")

    def test_register_dimension_extends_peak(self):
        times = sample_grid(10.0, 101)
        peaks = []
        for d in (2, 3, 4):
            curve = register_log_negativity_curve(qudit_feedforward_model(d, eta=1.0), times)
            k = int(np.argmax(curve))
            peaks.append((times[k], float(curve[k])))
            if d == 2:
                assert_true(0 < k < len(times) - 1, f"qubit register peaks inside the window (γt={times[k]})")
                assert_true(curve[-1] < 0.9 * curve[k], f"qubit register loses entanglement: {curve[-1]:.4f} vs {curve[k]:.4f}")
        for (t0, e0), (t1, e1) in zip(peaks, peaks[1:]):
            assert_true(t1 >= t0, f"peak time non-decreasing in d: {peaks}")
            assert_true(e1 >= e0 - 1e-9, f"peak height non-decreasing in d: {peaks}")

    def test_monitored_marginal_drops_register(self):
        model = qudit_feedforward_model(3, eta=1.0)
        spec, monitored, psi0 = model.monitored_marginal()
        assert_equals(spec.dims, (2, 2), "register factor removed")
        assert_equals(spec.tags, ("q1", "q2"), "pair tags kept")
        seeds = [3, 4, 5]
        _, reduced = sme_ensemble_log_negativity(psi0, spec, None, monitored, 1.0, model.side_a, [0.5, 1.0], seeds, 1e-3)
        _, full = sme_ensemble_log_negativity(
            model.initial_amplitudes(), model.spec, None, model.monitored, 1.0, model.side_a, [0.5, 1.0], seeds, 1e-3
        )
        assert_close(reduced, full, 1e-10, "idle register leaves trajectory entanglement unchanged")
        assert_equals(three_qudit_model(2, eta=1.0).monitored_marginal()[0].dims, (2, 2), "z₊ ignores the register")
        spec3 = HilbertSpec((2, 2, 2), ("q1", "q2", "c"))
        readout = weighted_sum(spec3, [(0.5, "pauli_x", "q1"), (0.5, "pauli_x", "c")])
        coupled = RegisterModel(spec3, readout, [readout], readout, ("q1",))
        assert_equals(coupled.monitored_marginal()[0].dims, (2, 2, 2), "readout touching the register keeps it")

    def test_sme_average_over_desk_ensemble(self):
        spec, monitored, psi0 = qudit_feedforward_model(2, eta=1.0).monitored_marginal()
        times = [1.0, 2.0, 3.0, 4.0, 5.0]
        _, values = sme_ensemble_log_negativity(psi0, spec, None, monitored, 1.0, ("q1",), times, range(1000, 1200), 1e-3)
        assert_true(bool(np.all(values <= LN2 + 1e-9)), f"E_N ≤ ln 2: {values}")
        assert_true(bool(np.all(values[2:] > 0.1)), f"conditional entanglement persists from γt=3: {values}")

    def test_sme_average_is_bounded(self):
        model = qudit_feedforward_model(2, eta=1.0)
        args = (model.initial_amplitudes(), model.spec, model.H, model.monitored, 1.0, model.side_a, [0.5, 1.0])
        times, values = sme_ensemble_log_negativity(*args, seeds=range(8), dt=1e-3)
        assert_close(times, [0.5, 1.0], 1e-12, "sample times")
        assert_true(bool(np.all(values <= LN2 + 1e-9)), f"E_N ≤ ln 2: {values}")
        assert_true(values[-1] > 0.0, "measurement entangles")
        _, again = sme_ensemble_log_negativity(*args, seeds=range(8), dt=1e-3)
        assert_close(again, values, 0, "seeded runs repeat exactly")

    def test_sme_average_matches_master_equation(self):
        spec = HilbertSpec((2, 2), ("q1", "q2"))
        sigma = weighted_sum(spec, [(0.5, "pauli_x", "q1"), (0.35, "pauli_x", "q2")])
        psi0 = np.array([1.0, 0.0, 0.0, 0.0])
        seeds = list(range(400))
        result = sample_sme_ensemble(psi0, spec, None, sigma, 1.0, 0.5, seeds, dt=1e-3, keep_states=True)
        final = result.psi[:, -1, :]
        averaged = np.einsum("ki,kj->ij", final, final.conj()) / len(seeds)
        exact = evolve_lindblad(DenseState.from_pure(spec, psi0), None, [sigma], 0.5)
        distance = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(averaged - exact.rho))))
        assert_true(distance < 3.0 / math.sqrt(len(seeds)), f"trace distance {distance:.3f}")

    def test_hermitian_jumps_only_lose_purity(self):
        spec = HilbertSpec((2, 2), ("q1", "q2"))
        sigma = weighted_sum(spec, [(0.5, "pauli_x", "q1"), (0.35, "pauli_x", "q2")])
        start = DenseState.from_pure(spec, np.array([1.0, 0.0, 0.0, 0.0]))
        purities = [s.purity() for s in lindblad_timeseries(start, None, [sigma], [0.0, 0.2, 0.4, 0.8])]
        for k in range(3):
            assert_true(purities[k + 1] <= purities[k] + 1e-12, f"purity history {purities}")

    def test_scenario_timeseries_guards(self):
        conditional = build_two_mode_scenario(ScenarioParams(variant="conditional", t_f=0.1))
        assert_raises(DimensionError, dense_scenario_timeseries, conditional, 4, [0.1])
        dephasing = build_two_mode_scenario(ScenarioParams(variant="dephasing", t_f=0.1))
        assert_raises(DimensionError, dense_scenario_timeseries, dephasing, 4, [0.2])
        spec, states = dense_scenario_timeseries(dephasing, 4, [0.0, 0.1])
        assert_equals(spec.tags, ("a", "b"), "mode tags")
        mean, cov = dense_moments(states[0])
        assert_close(cov, np.eye(4), 1e-12, "vacuum moments")
        assert_close(mean, np.zeros(4), 1e-12, "vacuum mean")
        assert_close(max(top_level_population(states[0]).values()), 0.0, 1e-15, "empty top level")

    def test_oracle_dephasing(self):
        report = oracle_compare(ScenarioParams(variant="dephasing"), 10, 0.2, [0.1, 0.2])
        assert_true(report.max_moment_deviation < 1e-4, f"moment deviation {report.max_moment_deviation:.2e}")
        assert_true(report.passed(2e-2), f"ΔE_N {report.max_delta_log_negativity:.2e}")
        assert_true(not report.truncation_leak, "no truncation leak")

    def test_moments_of_top_fock_level(self):
        spec = HilbertSpec((4,), ("a",))
        state = DenseState.from_pure(spec, np.array([0.0, 0.0, 0.0, 1.0]))
        mean, cov = dense_moments(state)
        assert_close(cov, 7.0 * np.eye(2), 1e-12, "⟨{x,x}⟩ = ⟨{p,p}⟩ = 2n+1 at n=3")
        assert_close(mean, np.zeros(2), 1e-12, "Fock states are centred")

    def test_oracle_feedforward(self):
        report = oracle_compare(ScenarioParams(variant="feedforward", eta=1.0), 10, 0.3, [0.1, 0.3])
        assert_true(report.max_moment_deviation < 1e-4, f"moment deviation {report.max_moment_deviation:.2e}")
        assert_true(report.passed(2e-2), f"ΔE_N {report.max_delta_log_negativity:.2e}")
        assert_equals(report.times, [0.1, 0.3], "sample times")

    def run_all_tests(self):
        """Run all dense_solver tests"""
        return run_suite(self, "Dense_Solver_Tests", "Dense Solver")


def main():
    """Main test execution"""
    framework = TestDenseSolver().run_all_tests()
    return framework.passed()


if __name__ == "__main__":
    success = main()
    exit(0 if success else 1)
