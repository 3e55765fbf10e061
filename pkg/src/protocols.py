"""
Scenario builders for monitored and feedforward bosonic networks.

Two-mode scenarios use system modes a, b and register modes c (or c1..cM for
windowed feedforward). Ring lattices use sites a1..an, bond j joining sites j
and j+1 (bond n closes the ring), and registers c{j}_{l} for bond j, window l.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigError, DimensionError
from src.gaussian_dynamics import (
    GeneratorSet,
    IntegratorSettings,
    LinearJump,
    MonitoredQuadrature,
    PovmSpec,
    QuadraticHamiltonian,
    Schedule,
    ScheduleResult,
    Segment,
    annihilation_row,
    assemble_generators,
    condition_on_povm,
    evolve_conditional,
    exchange_term,
    number_term,
    product_term,
    run_schedule,
)
from src.gaussian_state import (
    GaussianState,
    ModeLayout,
    Partition,
    log_negativity,
    reduce_state,
    vacuum_state,
)

logger = logging.getLogger(__name__)

VARIANTS = ("conditional", "feedforward", "dephasing", "dissipative_only", "reservoir_engineered")
LATTICE_VARIANTS = ("conditional", "feedforward", "dephasing")
MAX_LATTICE_QUADRATURES = 4096


@dataclass
class ScenarioParams:
    """
    Physical parameters of one scenario, all rates in units of γ.

    Args:
        gamma: Measurement rate
        eta: Feedforward strength
        M: Registers per measured operator (feedforward windows)
        t_f: Protocol duration
        omega: Staggered detuning ω
        delta_omega: Uniform detuning δω
        n: Lattice size (ring, even)
        mu: Recovery resolution
        kappa: Reservoir linewidth
        variant: One of VARIANTS
        lattice: Build a ring of n sites instead of the two-mode network
    """
    gamma: float = 1.0
    eta: float = 1.0
    M: int = 1
    t_f: float = 10.0
    omega: float = 0.0
    delta_omega: float = 0.0
    n: int = 2
    mu: float = 1e-8
    kappa: float = 100.0
    variant: str = "feedforward"
    lattice: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"Unknown variant '{self.variant}', expected one of {VARIANTS}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be an integer ≥ 1, got {self.M}")
        self.M = int(self.M)
        if not self.t_f > 0:
            raise ConfigError(f"t_f must be positive, got {self.t_f}")
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if self.lattice:
            if self.n < 2 or self.n % 2:
                raise ConfigError(f"Lattice size n must be even and ≥ 2, got {self.n}")
            if self.variant not in LATTICE_VARIANTS:
                raise ConfigError(f"Variant '{self.variant}' is not available on a lattice")

    def as_dict(self) -> Dict[str, object]:
        return dict(self.__dict__)


@dataclass
class Scenario:
    """A compiled scenario ready for integration"""
    params: ScenarioParams
    layout: ModeLayout
    schedule: Schedule
    partition: Partition
    mode: str
    system_modes: List[str]
    registers: List[str] = field(default_factory=list)
    registers_by_bond: Dict[int, List[str]] = field(default_factory=dict)

    def initial_state(self) -> GaussianState:
        return vacuum_state(self.layout)

    def run(
        self,
        sample_times: Optional[Sequence[float]] = None,
        cfg: Optional[IntegratorSettings] = None,
    ) -> ScheduleResult:
        logger.info(
            f"Running {self.params.variant} scenario ({self.layout.n_modes} modes, "
            f"{len(self.schedule.segments)} segments, {self.mode})"
        )
        return run_schedule(self.initial_state(), self.schedule, self.mode, cfg, sample_times)


def _detuning_two_mode(layout: ModeLayout, p: ScenarioParams) -> QuadraticHamiltonian:
    return number_term(layout, "a", p.omega + p.delta_omega) + number_term(
        layout, "b", -p.omega + p.delta_omega
    )


def qmfs_hamiltonian(layout: ModeLayout, omega: float) -> QuadraticHamiltonian:
    """ω(x₊x₋ + p₊p₋): couples only the commuting pairs (x₊, p₋) and (x₋, p₊)"""
    xa, xb = layout.unit("a", "x"), layout.unit("b", "x")
    pa, pb = layout.unit("a", "p"), layout.unit("b", "p")
    s = 1.0 / math.sqrt(2.0)
    return product_term(s * (xa + xb), s * (xa - xb), omega) + product_term(
        s * (pa + pb), s * (pa - pb), omega
    )


def _feedforward_pieces(
    v: np.ndarray, y: np.ndarray, p: ScenarioParams
) -> Tuple[QuadraticHamiltonian, LinearJump]:
    """Directional coupling x → register: jump √γ(x − iηy) and H = γη x y"""
    hamiltonian = product_term(v, y, p.gamma * p.eta)
    jump = LinearJump(math.sqrt(p.gamma) * (v - 1j * p.eta * y), "feedforward")
    return hamiltonian, jump


def build_two_mode_scenario(p: ScenarioParams) -> Scenario:
    """
    Two-mode network for any variant.

    Raises:
        ConfigError: For lattice parameters or unsupported combinations
    """
    if p.lattice:
        raise ConfigError("build_two_mode_scenario called with lattice parameters")
    variant = p.variant
    if variant == "feedforward":
        registers = ["c"] if p.M == 1 else [f"c{j}" for j in range(1, p.M + 1)]
    elif variant == "dissipative_only":
        registers = ["c"]
    elif variant == "reservoir_engineered":
        if p.M != 1:
            raise ConfigError("The reservoir-engineered variant supports a single register (M=1)")
        registers = ["c", "z"]
    else:
        registers = []

    layout = ModeLayout(("a", "b", *registers))
    h_det = _detuning_two_mode(layout, p)
    x_plus = (layout.unit("a", "x") + layout.unit("b", "x")) / math.sqrt(2.0)
    segments: List[Segment] = []
    mode = "unconditional"

    if variant == "conditional":
        g = assemble_generators(h_det, [], [MonitoredQuadrature(x_plus, p.gamma, "x+")])
        segments.append(Segment(p.t_f, g, "monitor"))
        mode = "conditional"
    elif variant == "dephasing":
        g = assemble_generators(h_det, [LinearJump(math.sqrt(p.gamma) * x_plus, "dephasing")])
        segments.append(Segment(p.t_f, g, "dephasing"))
    elif variant == "feedforward":
        window = p.t_f / p.M
        for label in registers:
            h_ff, jump = _feedforward_pieces(x_plus, layout.unit(label, "x"), p)
            segments.append(Segment(window, assemble_generators(h_det + h_ff, [jump]), label))
    elif variant == "dissipative_only":
        y = layout.unit("c", "x")
        jump = LinearJump(math.sqrt(2.0 * p.gamma) * (x_plus - 1j * p.eta * y), "dissipative")
        segments.append(Segment(p.t_f, assemble_generators(h_det, [jump]), "dissipative"))
    elif variant == "reservoir_engineered":
        y = layout.unit("c", "x")
        target = x_plus - 1j * p.eta * y
        h_sr = (
            h_det
            + product_term(x_plus, y, p.eta * p.gamma)
            + exchange_term(annihilation_row(layout, "z"), target, math.sqrt(p.gamma * p.kappa) / 2.0)
        )
        decay = LinearJump(math.sqrt(p.kappa) * annihilation_row(layout, "z"), "reservoir")
        segments.append(Segment(p.t_f, assemble_generators(h_sr, [decay]), "reservoir"))

    partition = Partition.from_side_a(layout, ["a"])
    return Scenario(
        params=p,
        layout=layout,
        schedule=Schedule(segments),
        partition=partition,
        mode=mode,
        system_modes=["a", "b"],
        registers=registers,
    )


def site_labels(n: int) -> List[str]:
    return [f"a{j}" for j in range(1, n + 1)]


def bond_vectors(layout: ModeLayout, n: int) -> List[np.ndarray]:
    """m_j = (x_j + x_{j+1})/√2 around the ring"""
    sites = site_labels(n)
    vectors = []
    for j in range(n):
        left, right = sites[j], sites[(j + 1) % n]
        vectors.append((layout.unit(left, "x") + layout.unit(right, "x")) / math.sqrt(2.0))
    return vectors


def _detuning_lattice(layout: ModeLayout, p: ScenarioParams) -> QuadraticHamiltonian:
    h = QuadraticHamiltonian.zero(layout.dim)
    for j, label in enumerate(site_labels(p.n), start=1):
        frequency = p.delta_omega + (p.omega if j % 2 == 0 else -p.omega)
        h = h + number_term(layout, label, frequency)
    return h


def build_lattice_scenario(p: ScenarioParams) -> Scenario:
    """
    Ring of n sites with bond monitors or bond feedforward registers.

    Raises:
        ConfigError: For odd n, an unsupported variant, or a state too large
    """
    if not p.lattice:
        p = replace(p, lattice=True)
    n = p.n
    with_registers = p.variant == "feedforward"
    dim = 2 * (n + (n * p.M if with_registers else 0))
    if dim > MAX_LATTICE_QUADRATURES:
        raise ConfigError(
            f"Lattice needs {dim} quadratures, above the limit of {MAX_LATTICE_QUADRATURES}"
        )

    registers_by_bond: Dict[int, List[str]] = {}
    registers: List[str] = []
    if with_registers:
        for l in range(1, p.M + 1):
            for j in range(1, n + 1):
                label = f"c{j}_{l}"
                registers_by_bond.setdefault(j, []).append(label)
                registers.append(label)

    sites = site_labels(n)
    layout = ModeLayout((*sites, *registers))
    h_det = _detuning_lattice(layout, p)
    bonds = bond_vectors(layout, n)
    segments: List[Segment] = []
    mode = "unconditional"

    if p.variant == "conditional":
        monitors = [MonitoredQuadrature(v, p.gamma, f"m{j + 1}") for j, v in enumerate(bonds)]
        segments.append(Segment(p.t_f, assemble_generators(h_det, [], monitors), "monitor"))
        mode = "conditional"
    elif p.variant == "dephasing":
        jumps = [LinearJump(math.sqrt(p.gamma) * v, f"m{j + 1}") for j, v in enumerate(bonds)]
        segments.append(Segment(p.t_f, assemble_generators(h_det, jumps), "dephasing"))
    else:
        window = p.t_f / p.M
        for l in range(1, p.M + 1):
            h = h_det
            jumps = []
            for j, v in enumerate(bonds, start=1):
                h_ff, jump = _feedforward_pieces(v, layout.unit(f"c{j}_{l}", "x"), p)
                h = h + h_ff
                jumps.append(jump)
            segments.append(Segment(window, assemble_generators(h, jumps), f"window {l}"))

    partition = lattice_partition(layout, sites, registers_by_bond, n // 2)
    return Scenario(
        params=p,
        layout=layout,
        schedule=Schedule(segments),
        partition=partition,
        mode=mode,
        system_modes=sites,
        registers=registers,
        registers_by_bond=registers_by_bond,
    )


def build_scenario(p: ScenarioParams) -> Scenario:
    return build_lattice_scenario(p) if p.lattice else build_two_mode_scenario(p)


def conditional_reference(p: ScenarioParams) -> ScenarioParams:
    """Postselected counterpart of a scenario: monitors replace the registers"""
    return replace(p, variant="conditional")


def lattice_partition(
    layout: ModeLayout,
    system_order: Sequence[str],
    registers_by_bond: Dict[int, List[str]],
    cut: int,
) -> Partition:
    """First `cut` sites plus the registers of bonds lying wholly inside them"""
    side_a = list(system_order[:cut])
    for bond in range(1, cut):
        side_a.extend(registers_by_bond.get(bond, []))
    return Partition.from_side_a(layout, side_a)


def page_curve(
    s: GaussianState,
    system_order: Sequence[str],
    registers_by_bond: Optional[Dict[int, List[str]]] = None,
) -> List[float]:
    """
    Log-negativity across every cut j = 1..n-1 of an ordered lattice.

    Registers of a bond crossing the cut belong to side B.
    """
    registers_by_bond = registers_by_bond or {}
    return [
        log_negativity(s, lattice_partition(s.layout, system_order, registers_by_bond, j))
        for j in range(1, len(system_order))
    ]


def recover(s: GaussianState, registers: Sequence[str], mu: float) -> GaussianState:
    """
    Condition each register on outcome ζ = 0 in the given order and return the
    system marginal.
    """
    registers = list(registers)
    labels = s.layout.labels
    unknown = set(registers) - set(labels)
    if unknown:
        raise DimensionError(f"Unknown register modes: {sorted(unknown)}")
    system = [label for label in labels if label not in set(registers)]
    if not system:
        raise DimensionError("recover needs at least one system mode outside the registers")
    state = s
    for label in registers:
        state, _ = condition_on_povm(state, PovmSpec(label, mu, 0j))
    return reduce_state(state, system)


@dataclass
class BondSpectrum:
    """Eigen-decomposition of Σ_j m_j² = xᵀ K x"""
    lambdas: np.ndarray
    basis: np.ndarray
    K: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.basis @ np.diag(self.lambdas) @ self.basis.T

    def zero_modes(self, tol: float = 1e-10) -> np.ndarray:
        return self.basis[:, np.abs(self.lambdas) < tol]


def bond_spectrum(n: int) -> BondSpectrum:
    """Spectrum of the ring bond form, λ_k = 1 + cos(2πk/n), sorted descending"""
    if n < 2:
        raise DimensionError(f"bond_spectrum needs n ≥ 2, got {n}")
    K = np.zeros((n, n))
    for j in range(n):
        b = np.zeros(n)
        b[j] += 1.0 / math.sqrt(2.0)
        b[(j + 1) % n] += 1.0 / math.sqrt(2.0)
        K += np.outer(b, b)
    values, vectors = np.linalg.eigh(K)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    return BondSpectrum(values, vectors[:, order], K)


def inefficiency_metrics(E_ps: Sequence[float], E_det: Sequence[float]) -> Tuple[np.ndarray, float]:
    """
    Pointwise relative inefficiency and the rms deviation.

    Returns:
        ((E_ps - E_det)/E_ps with 0/0 → 0, sqrt(mean (E_ps - E_det)²))
    """
    ps = np.asarray(E_ps, dtype=float)
    det = np.asarray(E_det, dtype=float)
    if ps.shape != det.shape:
        raise DimensionError(f"Series shapes differ: {ps.shape} vs {det.shape}")
    diff = ps - det
    safe = np.where(np.abs(ps) > 1e-15, ps, 1.0)
    ratio = np.where(np.abs(ps) > 1e-15, diff / safe, 0.0)
    rms = float(np.sqrt(np.mean(diff ** 2))) if diff.size else 0.0
    return ratio, rms


def log_slope(times: Sequence[float], values: Sequence[float], window: Tuple[float, float] = (20.0, 100.0)) -> float:
    """Least-squares slope of values against ln t inside a time window"""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = (t >= window[0]) & (t <= window[1])
    if mask.sum() < 2:
        raise DimensionError(f"Need at least two samples in window {window}")
    slope, _ = np.polyfit(np.log(t[mask]), v[mask], 1)
    return float(slope)


def stabilization_time(
    p: ScenarioParams,
    cfg: Optional[IntegratorSettings] = None,
    tol: float = 1e-3,
    window: float = 1.0,
    cap: float = 50.0,
    increment: float = 0.25,
) -> float:
    """
    Time at which the conditional half-chain entanglement stops changing.

    Stops once |dE_N/dt| < tol for a full window, or at the cap.
    """
    reference = conditional_reference(replace(p, t_f=cap))
    scenario = build_scenario(reference)
    g = scenario.schedule.segments[0].generators
    state = scenario.initial_state()
    t, previous, calm = 0.0, log_negativity(state, scenario.partition), 0.0
    while t < cap - 1e-12:
        step = min(increment, cap - t)
        state = evolve_conditional(state, g, step, cfg)
        t += step
        value = log_negativity(state, scenario.partition)
        calm = calm + step if abs(value - previous) / step < tol else 0.0
        previous = value
        if calm >= window - 1e-12:
            logger.info(f"Entanglement stabilized at γt={t:.3g} (δω={p.delta_omega})")
            return t
    logger.warning(f"Entanglement did not stabilize before the cap γt={cap}")
    return cap


def sample_grid(t_f: float, num: int) -> List[float]:
    return [float(t) for t in np.linspace(0.0, t_f, num)]
