"""
Consolidated test runner for the entanglement toolkit

Runs every suite in dependency order (state algebra first, harness last),
then writes one JSON report next to the per-suite records. Suites after a
crashed one still run.

    python -m tests.run_all_tests [suite-name ...]
"""

import importlib.util
import json
import os
import platform
import sys
import time
from collections import Counter
from dataclasses import asdict
from datetime import datetime

from tests.test_framework import ERROR, FAIL, PASS, SKIP
from tests.test_gaussian_state import TestGaussianState
from tests.test_gaussian_dynamics import TestGaussianDynamics
from tests.test_protocols import TestProtocols
from tests.test_dense_solver import TestDenseSolver
from tests.test_scenario_config import TestScenarioConfig
from tests.test_sim_session import TestSimSession
from tests.test_harness import TestHarness

RESULTS_DIR = "tests/test_results"
REQUIRED = ("numpy", "scipy", "pydantic")
OPTIONAL = {"matplotlib": "plot tests are skipped"}

SUITES = [
    ("Gaussian State", TestGaussianState),
    ("Gaussian Dynamics", TestGaussianDynamics),
    ("Protocols", TestProtocols),
    ("Dense Solver", TestDenseSolver),
    ("Scenario Config", TestScenarioConfig),
    ("Simulation Session", TestSimSession),
    ("Harness", TestHarness),
]


def missing_packages():
    for name, note in OPTIONAL.items():
        if importlib.util.find_spec(name) is None:
            print(f"⚠️  {name} not installed: {note}")
    return [name for name in REQUIRED if importlib.util.find_spec(name) is None]


def run_suites(selected=None):
    """Run the chosen suites; returns {suite: {"counts": ..., "results": [...]}}"""
    report = {}
    for suite_name, suite_class in SUITES:
        if selected and suite_name.lower().replace(" ", "_") not in selected:
            continue
        print(f"\n🧪 {suite_name}")
        print("-" * 40)
        t0 = time.perf_counter()
        try:
            results = suite_class().run_all_tests().results
        except Exception as e:
            print(f"💥 {suite_name} crashed: {e}")
            report[suite_name] = {"crash": f"{type(e).__name__}: {e}", "counts": {ERROR: 1}, "results": []}
            continue
        tally = Counter(r.status for r in results)
        report[suite_name] = {
            "counts": {s: tally.get(s, 0) for s in (PASS, FAIL, ERROR, SKIP)},
            "duration": time.perf_counter() - t0,
            "results": [asdict(r) for r in results],
        }
    return report


def print_report(report):
    print("\n📊 ALL SUITES")
    print("=" * 60)
    total = Counter()
    for suite_name, entry in report.items():
        counts = entry["counts"]
        total.update(counts)
        ran = sum(counts.values())
        if "crash" in entry:
            print(f"  💥 {suite_name}: {entry['crash']}")
            continue
        icon = "✅" if counts.get(FAIL, 0) + counts.get(ERROR, 0) == 0 else "❌"
        print(f"  {icon} {suite_name}: {counts[PASS]}/{ran} passed ({entry['duration']:.1f}s)")
        for r in entry["results"]:
            if r["status"] in (FAIL, ERROR):
                print(f"      {r['status']} {r['test_name']}: {r['message'].splitlines()[0] if r['message'] else ''}")
    print("-" * 60)
    print(f"✅ {total[PASS]}  ❌ {total[FAIL]}  💥 {total[ERROR]}  ⏭️  {total[SKIP]}")
    return total


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    missing = missing_packages()
    if missing:
        print(f"❌ Missing required packages: {', '.join(missing)}")
        print("Install them with: pip install -r requirements.txt")
        return 1

    started = datetime.now()
    report = run_suites({a.lower() for a in argv})
    total = print_report(report)

    os.makedirs(RESULTS_DIR, exist_ok=True)
    path = os.path.join(RESULTS_DIR, f"all_suites_{started:%Y%m%d_%H%M%S}.json")
    with open(path, "w") as f:
        json.dump({
            "started": started.isoformat(),
            "finished": datetime.now().isoformat(),
            "python": platform.python_version(),
            "env": {k: v for k, v in os.environ.items() if k.startswith("MIRROR_")},
            "totals": dict(total),
            "suites": report,
        }, f, indent=2)
    print(f"📄 {path}")

    return 0 if total[FAIL] + total[ERROR] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
