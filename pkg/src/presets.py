"""
Figure-reproduction presets.

Each preset is a ScenarioConfig. Scenarios whose full size is too slow for a
workstation are desk-scaled by default and carry `scale="desk"`; `full=True`
restores the published size and sets `scale="full"`.
"""

import logging
from typing import Callable, Dict, List, Tuple

import numpy as np

from src.errors import UnknownPresetError
from src.scenario_config import ScenarioConfig, parse_config

logger = logging.getLogger(__name__)

def _grid(start: float, stop: float, num: int) -> List[float]:
    return [round(float(v), 12) for v in np.linspace(start, stop, num)]


def _fig2(full: bool) -> dict:
    return {
        "description": "Feedforward vs postselected vs recovered entanglement of two modes (η=1, M=1)",
        "variant": "feedforward",
        "params": {"gamma": 1.0, "eta": 1.0, "M": 1, "t_f": 10.0, "mu": 1e-8},
        "outputs": [
            "conditional_log_negativity", "log_negativity", "recovered_log_negativity",
            "purity", "recovered_purity",
        ],
        "sample_times": {"num": 101},
        "integrator": {"method": "expm"},
    }


def _fig3a(full: bool) -> dict:
    return {
        "description": "Conditional entanglement growth with staggered detuning ω=1.2γ",
        "variant": "conditional",
        "params": {"omega": 1.2, "t_f": 50.0},
        "sweep": {"axis": "delta_omega", "values": [0.0, 0.2, 0.6, 1.2]},
        "outputs": ["log_negativity"],
        "sample_times": {"num": 201},
        "integrator": {"method": "expm"},
    }


def _fig3b(full: bool) -> dict:
    return {
        "description": "Postselected and measurement-free entanglement at t=10/γ versus δω",
        "variant": "feedforward",
        "params": {"omega": 1.2, "eta": 5.0, "M": 20, "t_f": 10.0},
        "sweep": {"axis": "delta_omega", "values": _grid(0.0, 1.5, 16)},
        "outputs": ["conditional_log_negativity", "log_negativity"],
        "sample_times": {"final_only": True},
        "integrator": {"method": "expm"},
    }


def _fig3c(full: bool) -> dict:
    return {
        "description": "Page curves of the feedforward ring: log law at δω=0, area law at δω=0.3γ",
        "variant": "feedforward",
        "params": {"lattice": True, "n": 32 if full else 8, "M": 15 if full else 10, "eta": 5.0,
                   "t_f": None, "stop_rule": True},
        "sweep": {"axis": "delta_omega", "values": [0.0, 0.3]},
        "outputs": ["page_curve", "conditional_page_curve"],
        "sample_times": {"final_only": True},
        "integrator": {"method": "expm"},
    }


def _fig4(full: bool) -> dict:
    return {
        "description": "Qubit pair entangled through a d-level register, with the trajectory average",
        "engine": "dense",
        "variant": "qudit_register",
        "params": {"eta": 1.0, "t_f": 10.0 if full else 5.0},
        "sweep": {"axis": "d", "values": [2, 3, 4, 5, 6, 7]},
        "seeds": {"base": 1000, "count": 2000 if full else 400, "batch": 200},
        "outputs": ["log_negativity", "trajectory_log_negativity"],
        "sample_times": {"num": 51},
        "integrator": {"sde_step": 1e-4 if full else 5e-4},
    }


def _figS2(full: bool) -> dict:
    return {
        "description": "Inefficiency and purity of feedforward, raw and recovered, versus η",
        "variant": "feedforward",
        "params": {"M": 1, "t_f": 20.0},
        "sweep": {"axis": "eta", "values": [0.5, 1.0, 2.0, 5.0]},
        "outputs": ["inefficiency", "purity", "recovered_inefficiency", "recovered_purity"],
        "sample_times": {"num": 101},
        "integrator": {"method": "expm"},
    }


def _figS3(full: bool) -> dict:
    return {
        "description": "Entanglement of formation after recovery against the postselected state",
        "variant": "feedforward",
        "params": {"M": 1, "t_f": 20.0, "mu": 1e-8},
        "sweep": {"axis": "eta", "values": [1.0, 2.0, 5.0]},
        "outputs": ["recovered_eof", "conditional_eof"],
        "sample_times": {"num": 101},
        "integrator": {"method": "expm"},
    }


def _figS4(full: bool) -> dict:
    return {
        "description": "Recovery quality versus POVM resolution μ",
        "variant": "feedforward",
        "params": {"M": 1, "eta": 1.0, "t_f": 100.0},
        "sweep": {"axis": "mu", "values": [1e-8, 1e-2, 1.0]},
        "outputs": ["recovered_inefficiency", "recovered_purity"],
        "sample_times": {"num": 101},
        "integrator": {"method": "expm"},
    }


def _figS5(full: bool) -> dict:
    return {
        "description": "Pairing correlators of the conditional ring state (n=20, t=10/γ)",
        "variant": "conditional",
        "params": {"lattice": True, "n": 20, "t_f": 10.0},
        "outputs": ["pairing"],
        "sample_times": {"final_only": True},
        "integrator": {"method": "expm"},
    }


def _figS6(full: bool) -> dict:
    return {
        "description": "rms gap between postselected and feedforward entanglement over δω, versus M",
        "variant": "feedforward",
        "params": {"omega": 1.2, "eta": 5.0, "t_f": 10.0},
        "sweep": {
            "axis": "M",
            "values": [5, 10, 15, 20],
            "average_over": {"axis": "delta_omega", "values": _grid(0.0, 1.5, 16 if full else 7)},
        },
        "outputs": ["rms_error"],
        "sample_times": {"final_only": True},
        "integrator": {"method": "expm"},
    }


def _figS7(full: bool) -> dict:
    # each detuning runs until its conditional half-chain entanglement stabilizes
    return {
        "description": "rms gap of half-chain entanglement on the ring versus registers per bond",
        "variant": "feedforward",
        "params": {"lattice": True, "n": 32 if full else 8, "eta": 5.0, "t_f": None, "stop_rule": True},
        "sweep": {
            "axis": "M",
            "values": [2, 5, 10, 15] if full else [2, 4, 6, 8, 10],
            "average_over": {"axis": "delta_omega", "values": [0.1, 0.2, 0.3, 0.4, 0.5]},
        },
        "outputs": ["rms_error"],
        "sample_times": {"final_only": True},
        "integrator": {"method": "expm"},
    }


def _figS9(full: bool) -> dict:
    return {
        "description": "Register model entanglement versus feedforward strength η",
        "engine": "dense",
        "variant": "qudit_register",
        "params": {"d": 5, "t_f": 4.0},
        "sweep": {"axis": "eta", "values": [0.5, 1.0, 2.0, 5.0]},
        "outputs": ["log_negativity", "purity"],
        "sample_times": {"num": 81},
    }


def _figS10(full: bool) -> dict:
    return {
        "description": "Three truncated oscillators: entanglement peak versus local dimension d",
        "engine": "dense",
        "variant": "three_qudit",
        "params": {"eta": 1.0, "t_f": 10.0},
        "sweep": {"axis": "d", "values": [2, 3, 4, 5, 6, 7] if full else [2, 3, 4, 5]},
        "outputs": ["log_negativity", "purity"],
        "sample_times": {"num": 101},
    }


PRESETS: Dict[str, Callable[[bool], dict]] = {
    "fig2": _fig2,
    "fig3a": _fig3a,
    "fig3b": _fig3b,
    "fig3c": _fig3c,
    "fig4": _fig4,
    "figS2": _figS2,
    "figS3": _figS3,
    "figS4": _figS4,
    "figS5": _figS5,
    "figS6": _figS6,
    "figS7": _figS7,
    "figS9": _figS9,
    "figS10": _figS10,
}

# presets whose default run is smaller than the published one
DESK_SCALED = ("fig3c", "fig4", "figS6", "figS7", "figS10")


def presets(name: str, full: bool = False) -> ScenarioConfig:
    """
    Build a preset scenario.

    Raises:
        UnknownPresetError: If no preset has that name
    """
    try:
        builder = PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"Unknown preset '{name}'; available: {', '.join(PRESETS)}") from None
    data = {"name": name, "preset": name, "scale": "full" if full or name not in DESK_SCALED else "desk"}
    data.update(builder(full))
    return parse_config(data)


def list_presets() -> List[Tuple[str, str, bool]]:
    """(name, description, desk-scaled by default) for every preset"""
    return [(name, PRESETS[name](False)["description"], name in DESK_SCALED) for name in PRESETS]
