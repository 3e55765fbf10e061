"""
Tests for Gaussian state algebra

Covers layouts, physicality diagnostics, reductions and the entanglement
measures on closed-form states.
"""

import math

import numpy as np

from tests.test_framework import assert_close, assert_equals, assert_raises, assert_true, run_suite
from src.errors import DimensionError, UnphysicalStateError, UnsupportedStateError
from src.gaussian_state import (
    GaussianState,
    ModeLayout,
    Partition,
    apply_symplectic,
    check_physical,
    entanglement_entropy,
    entanglement_report,
    eof_symmetric_two_mode,
    log_negativity,
    pairing_correlators,
    partial_transpose,
    purity,
    reduce_state,
    symplectic_form,
    symplectic_spectrum,
    two_mode_squeezed_state,
    vacuum_state,
    validate_state,
)


def conditional_state(gt: float) -> GaussianState:
    """Two-mode state after monitoring x₊ for time t from vacuum"""
    x_plus, p_plus = 1.0 / (1.0 + 2.0 * gt), 1.0 + 2.0 * gt
    cov = np.array([
        [(x_plus + 1) / 2, 0.0, (x_plus - 1) / 2, 0.0],
        [0.0, (p_plus + 1) / 2, 0.0, (p_plus - 1) / 2],
        [(x_plus - 1) / 2, 0.0, (x_plus + 1) / 2, 0.0],
        [0.0, (p_plus - 1) / 2, 0.0, (p_plus + 1) / 2],
    ])
    return GaussianState(ModeLayout(("a", "b")), np.zeros(4), cov)


def local_symplectic(rng: np.random.Generator, n_modes: int) -> np.ndarray:
    """Block-diagonal product of a phase rotation and a squeezer on every mode"""
    S = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        theta, r = rng.uniform(0.0, 2 * math.pi), rng.uniform(-0.8, 0.8)
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        S[2 * k:2 * k + 2, 2 * k:2 * k + 2] = rot @ np.diag([math.exp(-r), math.exp(r)])
    return S


class TestGaussianState:
    """Test suite for gaussian_state"""

    def test_vacuum_layouts(self):
        one = vacuum_state(ModeLayout(("a",)))
        assert_close(one.cov, np.eye(2), 0, "single-mode vacuum")
        three = vacuum_state(ModeLayout(("a", "b", "c")))
        assert_equals(three.cov.shape, (6, 6), "three-mode covariance shape")
        assert_close(purity(three), 1.0, 1e-12, "vacuum purity")
        check_physical(three)

    def test_layout_rejects_duplicates_and_unknown_labels(self):
        assert_raises(DimensionError, ModeLayout, ("a", "a"))
        layout = ModeLayout(("a", "b"))
        assert_raises(DimensionError, layout.index, "z")
        assert_equals(layout.quadrature_indices(["b"]), [2, 3], "quadrature rows of b")

    def test_symplectic_form_blocks(self):
        omega = symplectic_form(2)
        assert_close(omega[:2, :2], [[0, 1], [-1, 0]], 0, "first block")
        assert_close(omega @ omega, -np.eye(4), 1e-15, "Ω² = -I")

    def test_validate_state_diagnostics(self):
        diag = validate_state(vacuum_state(ModeLayout(("a",))))
        assert_close(diag.as_tuple(), (0.0, 0.0, 1.0), 1e-12, "vacuum diagnostics")
        squeezed_below = GaussianState(ModeLayout(("a",)), np.zeros(2), np.diag([0.5, 0.5]))
        diag = validate_state(squeezed_below)
        assert_close(diag.min_eigenvalue, -0.5, 1e-12, "min eigenvalue of Σ+iΩ")
        assert_true(not diag.is_physical(), "below vacuum noise is unphysical")
        assert_raises(UnphysicalStateError, check_physical, squeezed_below)
        pure = validate_state(conditional_state(1.0))
        assert_close(pure.min_symplectic_eigenvalue, 1.0, 1e-10, "conditional state is pure")

    def test_reduce_state(self):
        layout = ModeLayout(("a", "b", "c"))
        reduced = reduce_state(vacuum_state(layout), ["c", "a"])
        assert_equals(reduced.layout.labels, ("a", "c"), "kept modes stay in layout order")
        assert_close(reduced.cov, np.eye(4), 0, "vacuum marginal")
        marginal = reduce_state(conditional_state(1.0), ["a"])
        assert_close(marginal.cov, np.diag([2.0 / 3.0, 2.0]), 1e-12, "mode-a marginal")
        assert_raises(DimensionError, reduce_state, marginal, [])

    def test_symplectic_spectrum(self):
        assert_close(symplectic_spectrum(np.eye(6)), [1, 1, 1], 1e-12, "vacuum spectrum")
        assert_close(symplectic_spectrum(np.diag([3.0, 3.0])), [3.0], 1e-12, "thermal spectrum")
        marginal = reduce_state(conditional_state(1.0), ["a"])
        assert_close(symplectic_spectrum(marginal.cov), [2.0 / math.sqrt(3.0)], 1e-10, "ν at γt=1")
        assert_raises(DimensionError, symplectic_spectrum, np.eye(3))

    def test_log_negativity_conditional_law(self):
        partition = Partition.from_side_a(ModeLayout(("a", "b")), ["a"])
        assert_close(log_negativity(conditional_state(1.0), partition), 0.5 * math.log(3.0), 1e-10, "γt=1")
        assert_close(log_negativity(conditional_state(0.0), partition), 0.0, 1e-12, "γt=0")
        vacuum = vacuum_state(ModeLayout(("a", "b", "c")))
        for side in (["a"], ["a", "c"], ["b"]):
            value = log_negativity(vacuum, Partition.from_side_a(vacuum.layout, side))
            assert_close(value, 0.0, 1e-12, f"vacuum across {side}")

    def test_two_mode_squeezed_family(self):
        for r in (0.1, 0.5, 1.2):
            state = two_mode_squeezed_state(r)
            partition = Partition.from_side_a(state.layout, ["a"])
            assert_close(log_negativity(state, partition), 2 * r, 1e-9, f"E_N at r={r}")
            expected = math.cosh(r) ** 2 * math.log(math.cosh(r) ** 2) - math.sinh(r) ** 2 * math.log(math.sinh(r) ** 2)
            assert_close(entanglement_entropy(state, ["a"]), expected, 1e-9, f"entropy at r={r}")
            assert_close(eof_symmetric_two_mode(state), entanglement_entropy(state, ["a"]), 1e-8, "EoF of pure state")

    def test_log_negativity_local_invariance(self):
        rng = np.random.default_rng(11)
        partition = Partition(("a",), ("b",))
        for state in (conditional_state(1.0), conditional_state(7.5), two_mode_squeezed_state(0.6)):
            before = log_negativity(state, partition)
            for _ in range(5):
                moved = apply_symplectic(state, local_symplectic(rng, 2))
                assert_close(log_negativity(moved, partition), before, 1e-8, "local rotation and squeezing")

        layout = ModeLayout(("a", "b", "c"))
        cov = np.eye(6)
        cov[:4, :4] = two_mode_squeezed_state(0.4).cov
        joint = GaussianState(layout, np.zeros(6), cov)
        s, c = math.sin(0.7), math.cos(0.7)
        splitter = np.eye(6)
        splitter[2:, 2:] = np.array([[c, 0, s, 0], [0, c, 0, s], [-s, 0, c, 0], [0, -s, 0, c]])
        split = Partition(("a",), ("b", "c"))
        moved = apply_symplectic(joint, splitter @ local_symplectic(rng, 3))
        assert_close(log_negativity(moved, split), 0.8, 1e-8, "beam splitter inside side B")

    def test_partition_validation(self):
        layout = ModeLayout(("a", "b"))
        assert_raises(DimensionError, Partition.from_side_a, layout, ["a", "b"])
        assert_raises(DimensionError, Partition("a", ("x",)).validate, layout)
        assert_raises(DimensionError, Partition(("a",), ("a", "b")).validate, layout)

    def test_partial_transpose_is_involution(self):
        state = conditional_state(2.5)
        once = partial_transpose(state.cov, state.layout, ["b"])
        twice = partial_transpose(once, state.layout, ["b"])
        assert_true(np.array_equal(twice, state.cov), "partial transpose twice restores Σ exactly")

    def test_entropy(self):
        vacuum = vacuum_state(ModeLayout(("a", "b")))
        assert_close(entanglement_entropy(vacuum, ["a"]), 0.0, 1e-12, "vacuum entropy")
        state = conditional_state(1.0)
        assert_close(entanglement_entropy(state, ["a"]), 0.27823, 1e-5, "S at γt=1")
        assert_close(entanglement_entropy(state, ["a"]), entanglement_entropy(state, ["b"]), 1e-12, "swap symmetry")

    def test_entropy_on_mixed_state_is_flagged(self):
        thermal = GaussianState(ModeLayout(("a", "b")), np.zeros(4), 3.0 * np.eye(4))
        assert_true(math.isnan(entanglement_entropy(thermal, ["a"])), "mixed state gives NaN")
        assert_raises(UnsupportedStateError, entanglement_entropy, thermal, ["a"], True)

    def test_purity(self):
        assert_close(purity(GaussianState(ModeLayout(("a",)), np.zeros(2), np.diag([3.0, 3.0]))), 1 / 3, 1e-12, "thermal")
        for gt in (0.0, 0.3, 1.0, 10.0):
            assert_close(purity(conditional_state(gt)), 1.0, 1e-9, f"conditional purity at γt={gt}")

    def test_eof(self):
        assert_close(eof_symmetric_two_mode(vacuum_state(ModeLayout(("a", "b")))), 0.0, 1e-12, "vacuum pair")
        assert_raises(UnsupportedStateError, eof_symmetric_two_mode, vacuum_state(ModeLayout(("a", "b", "c"))))
        skewed = GaussianState(ModeLayout(("a", "b")), np.zeros(4), np.diag([1.0, 1.0, 2.0, 2.0]))
        assert_raises(UnsupportedStateError, eof_symmetric_two_mode, skewed)

    def test_pairing_correlators(self):
        assert_close(pairing_correlators(vacuum_state(ModeLayout(("a", "b")))), np.zeros((2, 2)), 1e-15, "vacuum")
        r = 0.4
        squeezed = GaussianState(ModeLayout(("a",)), np.zeros(2), np.diag([math.exp(-2 * r), math.exp(2 * r)]))
        expected = (math.exp(-2 * r) - math.exp(2 * r)) / 4.0
        assert_close(pairing_correlators(squeezed)[0, 0], expected, 1e-12, "single-mode squeezed")
        tmsv = pairing_correlators(two_mode_squeezed_state(r))
        assert_close(abs(tmsv[0, 1]), math.sinh(2 * r) / 2.0, 1e-12, "two-mode pairing amplitude")
        assert_close(tmsv[0, 0], 0.0, 1e-12, "no local pairing in TMSV")

    def test_entanglement_report(self):
        state = two_mode_squeezed_state(0.3)
        report = entanglement_report(state, Partition.from_side_a(state.layout, ["a"]))
        assert_close(report.log_negativity, 0.6, 1e-9, "report E_N")
        assert_close(report.purity, 1.0, 1e-9, "report purity")
        assert_equals(len(report.pt_symplectic_spectrum), 2, "spectrum length")

    def run_all_tests(self):
        """Run all gaussian_state tests"""
        return run_suite(self, "Gaussian_State_Tests", "Gaussian Core")


def main():
    """Main test execution"""
    framework = TestGaussianState().run_all_tests()
    failed = sum(1 for r in framework.results if r.status != "PASS")
    return failed == 0


if __name__ == "__main__":
    success = main()
    exit(0 if success else 1)
