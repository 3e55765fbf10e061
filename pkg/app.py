"""
Measurement-Induced Entanglement Experiment Runner
"""

import sys
import os
import argparse

# Add current directory to Python path
sys.path.insert(0, os.path.dirname(__file__))

from src.errors import ConfigError, MirrorError, PhysicsViolation
from src.harness import compare, run
from src.presets import list_presets, presets
from src.scenario_config import ScenarioConfigManager, load_config
from src.sim_session import SimulationSession
from typing import Optional
import logging

logger = logging.getLogger(__name__)


def _session(args) -> SimulationSession:
    session = SimulationSession(workers=getattr(args, "workers", None), log_level=getattr(args, "log_level", None))
    session.configure_logging()
    return session


def _report(result) -> int:
    print(f"\n✅ Run '{result.config.name}' complete (config {result.config.config_hash()[:12]})")
    for measure, table in result.tables.items():
        print(f"   {measure}: {len(table.rows)} rows")
    if result.output_dir:
        print(f"   written to {result.output_dir}")
    return 0


def run_mode(session: SimulationSession, config_path: str, out: Optional[str], plot: bool) -> int:
    """Run a scenario file"""
    config = load_config(config_path)
    print(f"🧪 Running scenario '{config.name}' ({config.engine}/{config.variant})")
    return _report(run(config, out_dir=out, session=session, plot=plot))


def preset_mode(session: SimulationSession, name: str, full: bool, out: Optional[str], plot: bool, save_config: Optional[str]) -> int:
    """Run a figure preset"""
    config = presets(name, full=full)
    if save_config:
        with open(save_config, "w") as f:
            f.write(config.model_dump_json(indent=2))
        print(f"✅ Saved preset config to {save_config}")
    print(f"🧪 Running preset '{name}' at {config.scale} scale")
    return _report(run(config, out_dir=out, session=session, plot=plot))


def compare_mode(table_a: str, table_b: str, tol: str) -> int:
    """Compare two result tables or run directories"""
    report = compare(table_a, table_b, tol)
    print(f"\nComparing {table_a} against {table_b}")
    print("-" * 50)
    for m in report.measures:
        status = "✅" if m.passed else "❌"
        extra = f", {m.missing} unaligned rows" if m.missing else ""
        print(f"{status} {m.measure}: max deviation {m.max_deviation:.3e} (tol {m.tolerance:.1e}, {m.rows} rows{extra})")
    for name in report.unmatched:
        print(f"❌ {name}: present on one side only")
    if not report.measures:
        print("❌ No common measures to compare")
    return 0 if report.passed else 1


def list_presets_mode() -> int:
    print("Available presets:")
    print("-" * 50)
    for name, description, desk in list_presets():
        scale = " (desk-scaled; --full for published size)" if desk else ""
        print(f"  {name:<7} {description}{scale}")
    return 0


def validate_mode(path: str) -> int:
    """Validate one config file or every config in a directory"""
    if os.path.isdir(path):
        manager = ScenarioConfigManager(path)
        ok = all(manager.validate_config(c.name) for c in manager.list_configs())
        for name, error in manager.errors.items():
            print(f"❌ {name}: {error}")
        ok = ok and not manager.errors
        print(f"{'✅' if ok else '❌'} {len(manager.list_configs())} config(s) checked in {path}")
        return 0 if ok else ConfigError.exit_code
    config = load_config(path)
    print(f"✅ {config.name} is valid (hash {config.config_hash()[:12]})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Measurement-induced entanglement experiments")
    parser.add_argument("--log-level", default=None, help="Override MIRROR_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run a scenario config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="Output directory")
    p_run.add_argument("--workers", type=int, default=None, help="Override MIRROR_WORKERS")
    p_run.add_argument("--plot", action="store_true", help="Write line plots next to the CSVs")

    p_preset = sub.add_parser("preset", help="Run a figure preset")
    p_preset.add_argument("name")
    p_preset.add_argument("--full", action="store_true", help="Published size instead of the desk scale")
    p_preset.add_argument("--out", default=None, help="Output directory")
    p_preset.add_argument("--workers", type=int, default=None, help="Override MIRROR_WORKERS")
    p_preset.add_argument("--plot", action="store_true", help="Write line plots next to the CSVs")
    p_preset.add_argument("--save-config", default=None, help="Also write the preset as a JSON config")

    p_compare = sub.add_parser("compare", help="Compare two tables (or analytic:conditional_law)")
    p_compare.add_argument("a")
    p_compare.add_argument("b")
    p_compare.add_argument("--tol", required=True, help="'2e-2' or 'measure=tol,...'")

    sub.add_parser("list-presets", help="List figure presets")
    sub.add_parser("check-env", help="Show simulation environment variables")
    p_validate = sub.add_parser("validate", help="Validate a config file or directory")
    p_validate.add_argument("path")

    args = parser.parse_args(argv)

    try:
        session = _session(args)
        if args.command == "run":
            return run_mode(session, args.config, args.out, args.plot)
        if args.command == "preset":
            return preset_mode(session, args.name, args.full, args.out, args.plot, args.save_config)
        if args.command == "compare":
            return compare_mode(args.a, args.b, args.tol)
        if args.command == "list-presets":
            return list_presets_mode()
        if args.command == "check-env":
            SimulationSession.check_env_vars()
            return 0
        if args.command == "validate":
            return validate_mode(args.path)
        return 0

    except ConfigError as e:
        print(f"\n❌ Configuration Error: {e}")
        return ConfigError.exit_code

    except PhysicsViolation as e:
        print(f"\n❌ Physics violation: {e}")
        return PhysicsViolation.exit_code

    except ValueError as e:
        print(f"\n❌ Configuration Error: {e}")
        print(f"\n🔧 Check your environment variables:")
        print(f"   export MIRROR_WORKERS=4          # optional")
        print(f"   export MIRROR_OUTPUT_DIR=results # optional")
        return ConfigError.exit_code

    except MirrorError as e:
        print(f"\n❌ Application error: {e}")
        return 1


if __name__ == "__main__":
    result = main()
    exit(result)
