"""
Tests for SimulationSession and the figure presets
"""

import os
from unittest.mock import patch

from tests.test_framework import assert_equals, assert_raises, assert_true, run_suite
from src.errors import UnknownPresetError
from src.gaussian_dynamics import IntegratorSettings
from src.presets import DESK_SCALED, PRESETS, list_presets, presets
from src.sim_session import SimulationSession


def square(x):
    return x * x


class TestSimSession:
    """Test suite for sim_session and presets"""

    def test_environment_defaults(self):
        with patch.dict(os.environ, {}, clear=True):
            session = SimulationSession.from_env()
        assert_equals(session.workers, 1, "serial by default")
        assert_equals(session.output_dir, "results", "default output directory")
        assert_equals(session.max_step, None, "no step cap")
        assert_equals(session.log_level, "INFO", "default log level")

    def test_environment_overrides(self):
        env = {"MIRROR_WORKERS": "3", "MIRROR_OUTPUT_DIR": "/tmp/runs", "MIRROR_MAX_STEP": "5e-4", "MIRROR_LOG_LEVEL": "debug"}
        with patch.dict(os.environ, env, clear=True):
            session = SimulationSession()
        assert_equals((session.workers, session.output_dir), (3, "/tmp/runs"), "workers and output")
        assert_equals((session.max_step, session.log_level), (5e-4, "DEBUG"), "step cap and level")
        assert_equals(SimulationSession(workers=2).workers, 2, "explicit argument wins")

    def test_invalid_environment(self):
        for env in ({"MIRROR_WORKERS": "many"}, {"MIRROR_WORKERS": "0"}, {"MIRROR_MAX_STEP": "-1"},
                    {"MIRROR_MAX_STEP": "fast"}, {"MIRROR_LOG_LEVEL": "LOUD"}):
            with patch.dict(os.environ, env, clear=True):
                assert_raises(ValueError, SimulationSession, message=str(env))

    def test_apply_caps_step(self):
        settings = IntegratorSettings(max_step=1e-2)
        assert_equals(SimulationSession(max_step=1e-3).apply(settings).max_step, 1e-3, "capped")
        assert_equals(SimulationSession(max_step=1e-1).apply(settings).max_step, 1e-2, "already finer")
        with patch.dict(os.environ, {}, clear=True):
            assert_true(SimulationSession().apply(settings) is settings, "no cap configured")

    def test_map_preserves_order(self):
        items = list(range(7))
        assert_equals(SimulationSession(workers=1).map(square, items), [x * x for x in items], "serial")
        assert_equals(SimulationSession(workers=3).map(square, items), [x * x for x in items], "process pool")

    def test_string_forms(self):
        session = SimulationSession(workers=2, output_dir="out", max_step=1e-3, log_level="INFO")
        assert_true("workers=2" in str(session), "str")
        assert_true("output_dir='out'" in repr(session), "repr")

    def test_presets_build(self):
        for name in PRESETS:
            config = presets(name)
            assert_equals(config.preset, name, f"{name} preset tag")
            assert_equals(config.scale, "desk" if name in DESK_SCALED else "full", f"{name} scale")
        assert_raises(UnknownPresetError, presets, "fig99")

    def test_preset_parameters(self):
        fig2 = presets("fig2").params
        assert_equals((fig2.eta, fig2.M, fig2.t_f, fig2.mu), (1.0, 1, 10.0, 1e-8), "fig2")
        fig3b = presets("fig3b")
        assert_equals((fig3b.params.omega, fig3b.params.eta, fig3b.params.M), (1.2, 5.0, 20), "fig3b")
        assert_equals(len(fig3b.sweep.values), 16, "δω grid")
        figS5 = presets("figS5").params
        assert_equals((figS5.n, figS5.t_f, figS5.lattice), (20, 10.0, True), "figS5")
        desk, full = presets("fig3c"), presets("fig3c", full=True)
        assert_equals((desk.params.n, full.params.n, full.scale), (8, 32, "full"), "fig3c scaling")
        assert_equals(presets("fig4", full=True).seeds.count, 2000, "full trajectory ensemble")
        figS7 = presets("figS7")
        assert_true(figS7.params.stop_rule and figS7.params.t_f is None, "figS7 durations come from the stop rule")
        assert_equals(figS7.sweep.average_over.t_f_values, None, "no fixed per-detuning durations")
        names = [entry[0] for entry in list_presets()]
        assert_equals(names, list(PRESETS), "listing order")

    def run_all_tests(self):
        """Run all sim_session and preset tests"""
        return run_suite(self, "Sim_Session_Tests", "Simulation Session")


def main():
    """Main test execution"""
    framework = TestSimSession().run_all_tests()
    return framework.passed()


if __name__ == "__main__":
    success = main()
    exit(0 if success else 1)
