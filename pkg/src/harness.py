"""
Experiment orchestration: run a ScenarioConfig, fan sweeps out over workers,
collect one ResultTable per measure and write CSV files with a metadata sidecar.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src import __version__
from src.dense_solver import (
    dense_log_negativity,
    dense_partition,
    dense_scenario_timeseries,
    lindblad_timeseries,
    qudit_feedforward_model,
    reduced_density,
    sme_ensemble_log_negativity,
    three_qudit_model,
)
from src.errors import ConfigError, PhysicsViolation
from src.gaussian_dynamics import IntegratorSettings
from src.gaussian_state import (
    GaussianState,
    Partition,
    entanglement_entropy,
    eof_symmetric_two_mode,
    log_negativity,
    pairing_correlators,
    purity,
    reduce_state,
)
from src.plotting import plot_tables
from src.protocols import (
    Scenario,
    ScenarioParams,
    build_scenario,
    build_two_mode_scenario,
    conditional_reference,
    inefficiency_metrics,
    page_curve,
    recover,
    stabilization_time,
)
from src.scenario_config import SWEEPABLE, ScenarioConfig, load_config
from src.sim_session import SimulationSession

logger = logging.getLogger(__name__)

KEY_COLUMNS = ("t", "cut", "l", "m") + SWEEPABLE
CUT_MEASURES = ("page_curve", "conditional_page_curve")
REFERENCE_MEASURES = (
    "inefficiency", "recovered_inefficiency",
    "conditional_log_negativity", "conditional_eof", "conditional_page_curve",
)
RECOVERED_MEASURES = ("recovered_log_negativity", "recovered_purity", "recovered_eof", "recovered_inefficiency")
ANALYTIC_REFERENCES = ("conditional_law",)

Row = Tuple[float, ...]


@dataclass
class ResultTable:
    """
    Columnar records of one measure.

    Key columns (time, cut, mode indices, sweep axis) identify a row; the rest
    are values. Every row belongs to the run identified by config_hash.
    """
    measure: str
    columns: List[str]
    rows: List[Row]
    config_hash: str = ""

    @property
    def key_columns(self) -> List[str]:
        return [c for c in self.columns if c in KEY_COLUMNS]

    @property
    def value_columns(self) -> List[str]:
        return [c for c in self.columns if c not in KEY_COLUMNS]

    def keyed(self) -> Dict[Tuple[float, ...], Tuple[float, ...]]:
        keys = [self.columns.index(c) for c in self.key_columns]
        values = [self.columns.index(c) for c in self.value_columns]
        return {
            tuple(round(row[k], 12) for k in keys): tuple(row[v] for v in values)
            for row in self.rows
        }

    def column(self, name: str) -> np.ndarray:
        index = self.columns.index(name)
        return np.array([row[index] for row in self.rows], dtype=float)

    def write_csv(self, path: Union[str, Path]):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([format(float(v), ".17g") for v in row])

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "ResultTable":
        path = Path(path)
        with open(path, "r", newline="") as f:
            reader = csv.reader(f)
            try:
                columns = next(reader)
            except StopIteration:
                raise ConfigError(f"Result table {path} is empty") from None
            rows = [tuple(float(v) for v in line) for line in reader if line]
        return cls(measure=path.stem, columns=columns, rows=rows)


@dataclass
class RunResult:
    config: ScenarioConfig
    tables: Dict[str, ResultTable]
    metadata: Dict[str, object]
    output_dir: Optional[Path] = None


@dataclass(frozen=True)
class Task:
    """One unit of parallel work: a sweep point, optionally restricted to a seed batch"""
    config_json: str
    sweep_index: int
    sweep_value: Optional[float]
    settings: IntegratorSettings
    seeds: Tuple[int, ...] = ()

    @property
    def is_trajectory_batch(self) -> bool:
        return bool(self.seeds)


def plan_tasks(config: ScenarioConfig, settings: IntegratorSettings) -> List[Task]:
    """Deterministic task list: every sweep point, then every seed batch of it"""
    payload = config.canonical_json()
    values: List[Optional[float]] = list(config.sweep.values) if config.sweep else [None]
    trajectories = "trajectory_log_negativity" in config.outputs
    tasks = []
    for index, value in enumerate(values):
        if any(m != "trajectory_log_negativity" for m in config.outputs):
            tasks.append(Task(payload, index, value, settings))
        if trajectories:
            for batch in config.seeds.batches():
                tasks.append(Task(payload, index, value, settings, tuple(batch)))
    return tasks


def _want(config: ScenarioConfig, *names: str) -> bool:
    return any(name in config.outputs for name in names)


def _system_partition(state: GaussianState, system_modes: Sequence[str], lattice: bool) -> Partition:
    side = list(system_modes[: len(system_modes) // 2]) if lattice else [system_modes[0]]
    return Partition.from_side_a(state.layout, side)


def _partition(config: ScenarioConfig, scenario: Scenario) -> Partition:
    if config.partition.side_a:
        return Partition.from_side_a(scenario.layout, config.partition.side_a)
    return scenario.partition


def _resolve_duration(config: ScenarioConfig, p: ScenarioParams, settings: IntegratorSettings) -> ScenarioParams:
    if config.params.stop_rule:
        t_f = stabilization_time(p, settings)
        return replace(p, t_f=t_f)
    return p


def _rms_rows(config: ScenarioConfig, value: Optional[float], settings: IntegratorSettings) -> List[Row]:
    grid = config.sweep.average_over
    E_ps, E_det, horizon = [], [], 0.0
    for k, inner in enumerate(grid.values):
        overrides = {grid.axis: inner}
        if grid.t_f_values is not None:
            overrides["t_f"] = grid.t_f_values[k]
        p = config.to_params(value, overrides)
        p = _resolve_duration(config, p, settings)
        scenario = build_scenario(p)
        reference = build_scenario(conditional_reference(p))
        E_det.append(log_negativity(scenario.run([p.t_f], settings).final(), _partition(config, scenario)))
        E_ps.append(log_negativity(reference.run([p.t_f], settings).final(), reference.partition))
        horizon = max(horizon, p.t_f)
    _, rms = inefficiency_metrics(E_ps, E_det)
    logger.info(f"rms gap over {grid.axis} at {config.sweep.axis}={value}: {rms:.4g}")
    return [(horizon, rms)]


def _gaussian_rows(config: ScenarioConfig, task: Task) -> Dict[str, List[Row]]:
    settings = task.settings
    out: Dict[str, List[Row]] = {}
    if "rms_error" in config.outputs:
        out["rms_error"] = _rms_rows(config, task.sweep_value, settings)
        if config.outputs == ["rms_error"]:
            return out

    p = _resolve_duration(config, config.to_params(task.sweep_value), settings)
    times = config.sample_times.resolve(p.t_f)
    scenario = build_scenario(p)
    result = scenario.run(times, settings)
    partition = _partition(config, scenario)

    reference_states: Optional[List[GaussianState]] = None
    reference_scenario = scenario
    if _want(config, *REFERENCE_MEASURES):
        if scenario.params.variant == "conditional":
            reference_states = result.states
        else:
            reference_scenario = build_scenario(conditional_reference(p))
            reference_states = reference_scenario.run(times, settings).states

    series: Dict[str, List[float]] = {}
    for k, (t, state) in enumerate(zip(result.times, result.states)):
        t = float(t)
        system = reduce_state(state, scenario.system_modes)

        if _want(config, "log_negativity", "inefficiency"):
            series.setdefault("log_negativity", []).append(log_negativity(state, partition))
        if "purity" in config.outputs:
            series.setdefault("purity", []).append(purity(system))
        if "entropy" in config.outputs:
            series.setdefault("entropy", []).append(entanglement_entropy(state, partition.side_a))
        if "eof" in config.outputs:
            series.setdefault("eof", []).append(eof_symmetric_two_mode(system))
        if "pairing" in config.outputs:
            corr = pairing_correlators(system)
            for l in range(corr.shape[0]):
                for m in range(l, corr.shape[1]):
                    out.setdefault("pairing", []).append(
                        (t, l + 1, m + 1, float(corr[l, m].real), float(corr[l, m].imag))
                    )
        if "page_curve" in config.outputs:
            curve = page_curve(state, scenario.system_modes, scenario.registers_by_bond)
            out.setdefault("page_curve", []).extend((t, j + 1, v) for j, v in enumerate(curve))

        if _want(config, *RECOVERED_MEASURES):
            recovered = recover(state, scenario.registers, p.mu)
            if _want(config, "recovered_log_negativity", "recovered_inefficiency"):
                rec_partition = _system_partition(recovered, scenario.system_modes, p.lattice)
                series.setdefault("recovered_log_negativity", []).append(log_negativity(recovered, rec_partition))
            if "recovered_purity" in config.outputs:
                series.setdefault("recovered_purity", []).append(purity(recovered))
            if "recovered_eof" in config.outputs:
                series.setdefault("recovered_eof", []).append(eof_symmetric_two_mode(recovered))

        if reference_states is not None:
            ref = reference_states[k]
            ref_system = reduce_state(ref, reference_scenario.system_modes)
            if _want(config, "conditional_log_negativity", "inefficiency", "recovered_inefficiency"):
                series.setdefault("conditional_log_negativity", []).append(
                    log_negativity(ref, reference_scenario.partition)
                )
            if "conditional_eof" in config.outputs:
                series.setdefault("conditional_eof", []).append(eof_symmetric_two_mode(ref_system))
            if "conditional_page_curve" in config.outputs:
                curve = page_curve(ref, reference_scenario.system_modes)
                out.setdefault("conditional_page_curve", []).extend((t, j + 1, v) for j, v in enumerate(curve))

    if "inefficiency" in config.outputs:
        ratio, _ = inefficiency_metrics(series["conditional_log_negativity"], series["log_negativity"])
        series["inefficiency"] = list(ratio)
    if "recovered_inefficiency" in config.outputs:
        ratio, _ = inefficiency_metrics(series["conditional_log_negativity"], series["recovered_log_negativity"])
        series["recovered_inefficiency"] = list(ratio)

    for measure in config.outputs:
        if measure in series:
            out[measure] = [(float(t), float(v)) for t, v in zip(result.times, series[measure])]
    return out


def _dense_model(config: ScenarioConfig, value: Optional[float]):
    values = config.param_values(value)
    if config.variant == "qudit_register":
        return qudit_feedforward_model(values["d"], values["eta"], values["gamma"])
    return three_qudit_model(values["d"], values["eta"], values["gamma"])


def _dense_rows(config: ScenarioConfig, task: Task) -> Dict[str, List[Row]]:
    values = config.param_values(task.sweep_value)
    t_f = values["t_f"]
    times = config.sample_times.resolve(t_f)
    dt = config.integrator.dense_step

    if task.is_trajectory_batch:
        model = _dense_model(config, task.sweep_value)
        spec, monitored, psi0 = model.monitored_marginal()
        sample_times, averages = sme_ensemble_log_negativity(
            psi0, spec, None, monitored, values["gamma"],
            model.side_a, times, task.seeds, task.settings.sde_step,
        )
        count = float(len(task.seeds))
        return {
            "trajectory_log_negativity": [
                (float(t), float(v), count) for t, v in zip(sample_times, averages)
            ]
        }

    if config.variant == "oscillator":
        scenario = build_two_mode_scenario(config.to_params(task.sweep_value))
        spec, snapshots = dense_scenario_timeseries(scenario, values["n_tr"], times, dt)
        side_a, system = scenario.partition.side_a, scenario.system_modes
    else:
        model = _dense_model(config, task.sweep_value)
        spec = model.spec
        snapshots = lindblad_timeseries(model.initial_state(), model.H, model.jumps, times, dt)
        side_a, system = model.side_a, [tag for tag in spec.tags if tag != "c"]

    if config.partition.side_a:
        side_a = config.partition.side_a
    partition = dense_partition(spec, side_a)
    out: Dict[str, List[Row]] = {}
    for t, state in zip(times, snapshots):
        if "log_negativity" in config.outputs:
            out.setdefault("log_negativity", []).append((float(t), dense_log_negativity(state, partition)))
        if "purity" in config.outputs:
            out.setdefault("purity", []).append((float(t), reduced_density(state, system).purity()))
    return out


def task_parameters(config: ScenarioConfig, task: Task) -> Dict[str, object]:
    """The parameter set one task runs with, as reported in errors"""
    values = {"variant": config.variant, **config.param_values(task.sweep_value)}
    if task.is_trajectory_batch:
        values["seeds"] = f"{task.seeds[0]}..{task.seeds[-1]}"
    return values


def execute_task(task: Task) -> Dict[str, List[Row]]:
    """
    Worker entry point; rows carry no sweep column yet.

    Raises:
        PhysicsViolation: Re-raised with the task's parameter set attached
    """
    config = ScenarioConfig.model_validate_json(task.config_json)
    label = f"{config.sweep.axis}={task.sweep_value}" if config.sweep else "single point"
    if task.is_trajectory_batch:
        label += f", seeds {task.seeds[0]}..{task.seeds[-1]}"
    logger.info(f"Task {config.name} [{label}] started")
    try:
        if config.engine == "gaussian":
            return _gaussian_rows(config, task)
        return _dense_rows(config, task)
    except PhysicsViolation as e:
        params = {**task_parameters(config, task), **e.params}
        logger.error(f"Task {config.name} [{label}] left the physical domain: {e.args[0]}")
        raise type(e)(e.args[0], params) from e


def _columns(config: ScenarioConfig, measure: str) -> List[str]:
    if measure == "pairing":
        columns = ["t", "l", "m", "pairing_re", "pairing_im"]
    elif measure in CUT_MEASURES:
        columns = ["t", "cut", measure]
    else:
        columns = ["t", measure]
    if config.sweep is not None:
        columns.append(config.sweep.axis)
    return columns


def _merge_trajectories(batches: List[List[Row]]) -> List[Row]:
    """Seed-weighted average of batch means, accumulated in batch order"""
    merged: Dict[float, List[float]] = {}
    for rows in batches:
        for t, mean, count in rows:
            total = merged.setdefault(t, [0.0, 0.0])
            total[0] += mean * count
            total[1] += count
    return [(t, total[0] / total[1]) for t, total in sorted(merged.items())]


def merge_results(config: ScenarioConfig, tasks: Sequence[Task], outputs: Sequence[Dict[str, List[Row]]]) -> Dict[str, ResultTable]:
    """Combine task outputs in task order into one table per measure"""
    config_hash = config.config_hash()
    rows: Dict[str, List[Row]] = {m: [] for m in config.outputs}
    batches: Dict[int, List[List[Row]]] = {}
    values: Dict[int, Optional[float]] = {}
    for task, result in zip(tasks, outputs):
        values[task.sweep_index] = task.sweep_value
        if task.is_trajectory_batch:
            batches.setdefault(task.sweep_index, []).append(result["trajectory_log_negativity"])
            continue
        suffix = (task.sweep_value,) if config.sweep is not None else ()
        for measure, measure_rows in result.items():
            rows[measure].extend(tuple(row) + suffix for row in measure_rows)

    for index in sorted(batches):
        suffix = (values[index],) if config.sweep is not None else ()
        rows["trajectory_log_negativity"].extend(
            row + suffix for row in _merge_trajectories(batches[index])
        )

    return {
        measure: ResultTable(measure, _columns(config, measure), rows[measure], config_hash)
        for measure in config.outputs
    }


def build_metadata(config: ScenarioConfig, settings: IntegratorSettings, tables: Dict[str, ResultTable]) -> Dict[str, object]:
    return {
        "config_hash": config.config_hash(),
        "code_version": __version__,
        "name": config.name,
        "preset": config.preset,
        "scale": config.scale,
        "engine": config.engine,
        "variant": config.variant,
        "integrator": asdict(settings),
        "dense_step": config.integrator.dense_step,
        "units": {"t": "1/gamma", "entanglement": "nats", "rates": "gamma"},
        "tables": {
            measure: {"file": f"{measure}.csv", "columns": table.columns, "rows": len(table.rows)}
            for measure, table in tables.items()
        },
        "created": datetime.now(timezone.utc).isoformat(),
    }


def write_outputs(result: RunResult, out_dir: Union[str, Path]) -> Path:
    """Write one CSV per measure, the config and the metadata sidecar"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for measure, table in result.tables.items():
        path = out / f"{measure}.csv"
        table.write_csv(path)
        logger.info(f"Wrote {path} ({len(table.rows)} rows)")
    with open(out / "config.json", "w") as f:
        json.dump(result.config.model_dump(mode="json"), f, indent=2)
    with open(out / "metadata.json", "w") as f:
        json.dump(result.metadata, f, indent=2)
    result.output_dir = out
    return out


def run(
    config: ScenarioConfig,
    out_dir: Optional[Union[str, Path]] = None,
    session: Optional[SimulationSession] = None,
    write: bool = True,
    plot: bool = False,
) -> RunResult:
    """
    Execute a scenario and (optionally) write its tables.

    Nothing is written unless every task succeeds.

    Raises:
        ConfigError: For parameter sets the builders reject
        PhysicsViolation: When a run leaves the physical domain
    """
    session = session or SimulationSession.from_env()
    settings = session.apply(config.integrator.to_settings())
    tasks = plan_tasks(config, settings)
    logger.info(f"Running '{config.name}' ({config.engine}/{config.variant}) as {len(tasks)} task(s) on {session.workers} worker(s)")
    outputs = session.map(execute_task, tasks)
    tables = merge_results(config, tasks, outputs)
    result = RunResult(config, tables, build_metadata(config, settings, tables))
    if write:
        target = Path(out_dir) if out_dir is not None else Path(session.output_dir) / config.name
        write_outputs(result, target)
        if plot:
            plot_tables(tables, target)
    return result


def run_path(config_path: Union[str, Path], **kwargs) -> RunResult:
    return run(load_config(config_path), **kwargs)


@dataclass
class MeasureComparison:
    measure: str
    max_deviation: float
    tolerance: float
    rows: int
    missing: int = 0

    @property
    def passed(self) -> bool:
        return self.missing == 0 and self.max_deviation <= self.tolerance


@dataclass
class ComparisonReport:
    measures: List[MeasureComparison] = field(default_factory=list)
    unmatched: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.unmatched and bool(self.measures) and all(m.passed for m in self.measures)


def parse_tolerance(spec: Union[str, float]) -> Dict[str, float]:
    """
    '2e-2' applies to every measure; 'log_negativity=1e-6,purity=1e-3' sets
    them individually, with an optional '*=' default.
    """
    if isinstance(spec, (int, float)):
        return {"*": float(spec)}
    tolerances: Dict[str, float] = {}
    try:
        for part in str(spec).split(","):
            part = part.strip()
            if not part:
                continue
            if "=" in part:
                name, value = part.split("=", 1)
                tolerances[name.strip()] = float(value)
            else:
                tolerances["*"] = float(part)
    except ValueError:
        raise ConfigError(f"Cannot parse tolerance spec '{spec}'") from None
    if not tolerances:
        raise ConfigError("Empty tolerance spec")
    return tolerances


def load_tables(source: Union[str, Path]) -> Dict[str, ResultTable]:
    """A single CSV, or every CSV in a run directory"""
    path = Path(source)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
    elif path.is_file():
        files = [path]
    else:
        raise ConfigError(f"No result table at {path}")
    return {f.stem: ResultTable.read_csv(f) for f in files}


def analytic_tables(name: str, like: Dict[str, ResultTable]) -> Dict[str, ResultTable]:
    """
    Closed-form counterparts keyed like the given tables.

    'conditional_law' is the single-monitor postselected growth ½ ln(1+2γt)
    with γ = 1.
    """
    if name not in ANALYTIC_REFERENCES:
        raise ConfigError(f"Unknown analytic reference '{name}'; expected one of {ANALYTIC_REFERENCES}")
    out = {}
    for measure, table in like.items():
        if table.value_columns != [measure]:
            continue
        t_index = table.columns.index("t")
        v_index = table.columns.index(measure)
        rows = []
        for row in table.rows:
            row = list(row)
            row[v_index] = 0.5 * math.log1p(2.0 * row[t_index])
            rows.append(tuple(row))
        out[measure] = ResultTable(measure, list(table.columns), rows)
    return out


def compare_tables(a: Dict[str, ResultTable], b: Dict[str, ResultTable], tol: Union[str, float]) -> ComparisonReport:
    tolerances = parse_tolerance(tol)
    report = ComparisonReport()
    report.unmatched = sorted(set(a) ^ set(b))
    for measure in sorted(set(a) & set(b)):
        left, right = a[measure].keyed(), b[measure].keyed()
        tolerance = tolerances.get(measure, tolerances.get("*", 0.0))
        missing = len(set(left) ^ set(right))
        deviation = 0.0
        for key in sorted(set(left) & set(right)):
            for x, y in zip(left[key], right[key]):
                if math.isnan(x) and math.isnan(y):
                    continue
                deviation = max(deviation, abs(x - y) if not (math.isnan(x) or math.isnan(y)) else math.inf)
        report.measures.append(MeasureComparison(measure, deviation, tolerance, len(left), missing))
    return report


def compare(table_a: Union[str, Path], table_b: Union[str, Path], tol: Union[str, float]) -> ComparisonReport:
    """
    Compare two result sets measure by measure.

    table_b may be 'analytic:<name>' to compare against a closed form.
    """
    a = load_tables(table_a)
    if str(table_b).startswith("analytic:"):
        b = analytic_tables(str(table_b).split(":", 1)[1], a)
        a = {m: t for m, t in a.items() if m in b}
    else:
        b = load_tables(table_b)
    report = compare_tables(a, b, tol)
    for m in report.measures:
        status = "pass" if m.passed else "FAIL"
        logger.info(f"{m.measure}: max deviation {m.max_deviation:.3e} (tol {m.tolerance:.1e}) {status}")
    return report


__all__ = [
    "ResultTable",
    "RunResult",
    "Task",
    "plan_tasks",
    "execute_task",
    "task_parameters",
    "merge_results",
    "run",
    "run_path",
    "compare",
    "compare_tables",
    "parse_tolerance",
    "load_tables",
    "analytic_tables",
    "plot_tables",
]
