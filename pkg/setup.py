#!/usr/bin/env python3
"""
Setup script for the measurement-induced entanglement toolkit
"""

import os
import sys
import json
from pathlib import Path

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.errors import ConfigError
from src.presets import PRESETS, presets
from src.scenario_config import parse_config


DIRECTORIES = ("scenario_configs/presets", "scenario_configs/examples", "results", "tests/test_results")


def create_directory_structure():
    for directory in DIRECTORIES:
        Path(directory).mkdir(parents=True, exist_ok=True)
    print(f"✅ Directories: {', '.join(DIRECTORIES)}")


def create_sample_configs():
    """Create sample scenario files for the variants the presets do not cover"""

    # Two-mode variants
    two_mode_configs = [
        {
            "name": "dissipative-only",
            "description": "Purely dissipative QND coupling; E_N(a|bc) grows as ½ ln γt",
            "variant": "dissipative_only",
            "params": {"eta": 1.0, "t_f": 100.0},
            "outputs": ["log_negativity", "purity"],
            "sample_times": {"num": 201},
            "integrator": {"method": "expm"}
        },
        {
            "name": "reservoir-engineered",
            "description": "Feedforward dissipator realized through a damped auxiliary mode z",
            "variant": "reservoir_engineered",
            "params": {"eta": 1.0, "kappa": 100.0, "t_f": 5.0},
            "partition": {"side_a": ["a"]},
            "outputs": ["log_negativity"],
            "sample_times": {"num": 51},
            "integrator": {"method": "expm"}
        },
        {
            "name": "conditional-law",
            "description": "Postselected growth under a single x₊ monitor, for compare against analytic:conditional_law",
            "variant": "conditional",
            "params": {"t_f": 100.0},
            "outputs": ["log_negativity"],
            "sample_times": {"num": 201},
            "integrator": {"method": "expm"}
        }
    ]

    # Dense oracle runs, paired with their Gaussian counterparts
    oracle_configs = [
        {
            "name": "oracle-feedforward-dense",
            "description": "Truncated Fock run of the M=1 feedforward network",
            "engine": "dense",
            "variant": "oscillator",
            "params": {"eta": 1.0, "t_f": 0.3, "n_tr": 8, "reference_variant": "feedforward"},
            "outputs": ["log_negativity"],
            "sample_times": {"num": 4},
            "integrator": {"dense_step": 2e-3}
        },
        {
            "name": "oracle-feedforward-gaussian",
            "description": "Covariance run matching oracle-feedforward-dense",
            "variant": "feedforward",
            "params": {"eta": 1.0, "t_f": 0.3},
            "outputs": ["log_negativity"],
            "sample_times": {"num": 4}
        }
    ]

    # Write configuration files
    config_files = {
        "scenario_configs/examples/two_mode_variants.json": two_mode_configs,
        "scenario_configs/examples/oracle_pair.json": oracle_configs
    }

    for filename, configs in config_files.items():
        # samples must pass the schema
        for data in configs:
            parse_config(data)
        with open(filename, "w") as f:
            json.dump(configs, f, indent=2)
        print(f"✅ {filename} ({len(configs)} scenarios)")


def create_preset_configs():
    """Write every figure preset as a standalone scenario file"""
    for name in PRESETS:
        path = Path("scenario_configs/presets") / f"{name}.json"
        with open(path, 'w') as f:
            json.dump(presets(name).model_dump(mode="json"), f, indent=2)
    print(f"✅ {len(PRESETS)} presets in scenario_configs/presets")


def create_gitignore():
    """Append the toolkit's output paths to .gitignore, keeping existing entries"""
    wanted = ["__pycache__/", "*.py[cod]", ".env", "results/", "tests/test_results/", "*.png"]
    path = Path(".gitignore")
    present = set(path.read_text().splitlines()) if path.exists() else set()
    missing = [line for line in wanted if line not in present]
    if missing:
        with open(path, "a") as f:
            f.write("\n".join(missing) + "\n")
    print(f"✅ .gitignore ({len(missing)} entries added)")


STEPS = [
    ("Directories", create_directory_structure),
    ("Sample scenarios", create_sample_configs),
    ("Preset scenarios", create_preset_configs),
    (".gitignore", create_gitignore),
]


def main():
    print("🚀 Setting up the measurement-induced entanglement toolkit")
    print("=" * 65)
    for k, (title, step) in enumerate(STEPS, 1):
        print(f"\n{k}. {title}")
        try:
            step()
        except (ConfigError, OSError) as e:
            print(f"❌ {title} failed: {e}")
            return 1

    print("\n🔧 Next: pip install -r requirements.txt, then")
    print("   python app.py validate scenario_configs/examples")
    print("   python app.py preset fig2 --plot")
    return 0


if __name__ == "__main__":
    sys.exit(main())
