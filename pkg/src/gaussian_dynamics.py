"""
Gaussian generators and integrators.

Quadratic Hamiltonians, linear jump operators and monitored quadratures are
compiled into a drift A, a diffusion D and a drive vector. The covariance then
follows a Lyapunov equation (unconditional) or a Riccati equation (conditional
on the measurement record); conditional means are sampled by Euler–Maruyama.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from src.errors import DimensionError, NonCommutingMonitorsError, PhysicsViolation
from src.gaussian_state import (
    GaussianState,
    ModeLayout,
    check_physical,
    symplectic_form,
)

logger = logging.getLogger(__name__)

COMMUTE_TOL = 1e-12
UNIT_NORM_TOL = 1e-9


@dataclass
class QuadraticHamiltonian:
    """H = ½ rᵀ G r + fᵀ r"""
    G: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float)
        self.f = np.asarray(self.f, dtype=float).reshape(-1)
        if self.G.shape != (self.f.size, self.f.size):
            raise DimensionError(f"G has shape {self.G.shape} but drive has length {self.f.size}")
        if np.max(np.abs(self.G - self.G.T), initial=0.0) > 1e-12:
            raise DimensionError("Hamiltonian matrix G must be symmetric")

    @classmethod
    def zero(cls, dim: int) -> "QuadraticHamiltonian":
        return cls(np.zeros((dim, dim)), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.f.size

    def __add__(self, other: "QuadraticHamiltonian") -> "QuadraticHamiltonian":
        return QuadraticHamiltonian(self.G + other.G, self.f + other.f)


def number_term(layout: ModeLayout, label: str, frequency: float) -> QuadraticHamiltonian:
    """frequency · a†a on one mode (vacuum energy dropped)"""
    h = QuadraticHamiltonian.zero(layout.dim)
    i = layout.x_index(label)
    h.G[i, i] = h.G[i + 1, i + 1] = frequency
    return h


def product_term(u: np.ndarray, w: np.ndarray, strength: float) -> QuadraticHamiltonian:
    """
    strength · (uᵀr)(wᵀr) for two commuting real quadratures.

    Raises:
        DimensionError: If the quadratures do not commute
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if abs(u @ symplectic_form(u.size // 2) @ w) > COMMUTE_TOL:
        raise DimensionError("product_term needs commuting quadratures")
    G = strength * (np.outer(u, w) + np.outer(w, u))
    return QuadraticHamiltonian(G, np.zeros(u.size))


def exchange_term(u: np.ndarray, w: np.ndarray, coupling: float) -> QuadraticHamiltonian:
    """coupling · (L₁†L₂ + L₂†L₁) with L₁ = uᵀr, L₂ = wᵀr complex linear forms"""
    u = np.asarray(u, dtype=complex)
    w = np.asarray(w, dtype=complex)
    M = np.outer(u.conj(), w) + np.outer(w.conj(), u)
    G = 2.0 * coupling * M.real
    return QuadraticHamiltonian(0.5 * (G + G.T), np.zeros(u.size))


def annihilation_row(layout: ModeLayout, label: str) -> np.ndarray:
    """Coefficient row of â = (x̂ + ip̂)/√2"""
    return (layout.unit(label, "x") + 1j * layout.unit(label, "p")) / math.sqrt(2.0)


@dataclass
class LinearJump:
    """Jump operator L = cᵀ r with the rate folded into c"""
    c: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=complex).reshape(-1)
        if not np.any(np.abs(self.c) > 0):
            raise DimensionError("Jump coefficients must not vanish")


@dataclass
class MonitoredQuadrature:
    """Continuously measured quadrature vᵀr at rate γ with unit efficiency"""
    v: np.ndarray
    rate: float
    label: str = ""

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float).reshape(-1)
        if abs(np.linalg.norm(self.v) - 1.0) > UNIT_NORM_TOL:
            raise DimensionError(f"Monitored direction must be unit norm, got {np.linalg.norm(self.v):.6f}")
        if self.rate < 0:
            raise DimensionError("Monitor rate must be nonnegative")


@dataclass
class GeneratorSet:
    """Compiled drift, diffusion, drive and monitors"""
    A: np.ndarray
    D: np.ndarray
    drive: np.ndarray
    monitors: List[MonitoredQuadrature] = field(default_factory=list)
    hamiltonian: Optional[QuadraticHamiltonian] = None
    jumps: List[LinearJump] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.drive.size

    @classmethod
    def zero(cls, dim: int) -> "GeneratorSet":
        return cls(np.zeros((dim, dim)), np.zeros((dim, dim)), np.zeros(dim), [])

    def backaction(self) -> np.ndarray:
        """B = Σ_k 2γ_k v_k v_kᵀ, the Riccati measurement term"""
        B = np.zeros((self.dim, self.dim))
        for m in self.monitors:
            B += 2.0 * m.rate * np.outer(m.v, m.v)
        return B


@dataclass
class IntegratorSettings:
    """
    Step control shared by all integrators.

    method 'rk4' takes fixed steps of at most max_step; 'expm' propagates
    piecewise-constant generators exactly in chunks of at most expm_chunk.
    """
    method: str = "rk4"
    max_step: float = 1e-3
    expm_chunk: float = 0.5
    sde_step: float = 1e-4
    physicality_tol: float = 1e-9
    check_physicality: bool = True

    def __post_init__(self):
        if self.method not in ("rk4", "expm"):
            raise ValueError(f"Unknown integration method '{self.method}'")
        if self.max_step <= 0 or self.sde_step <= 0 or self.expm_chunk <= 0:
            raise ValueError("Integrator steps must be positive")


@dataclass
class Segment:
    duration: float
    generators: GeneratorSet
    label: str = ""


@dataclass
class Schedule:
    """Time-ordered piecewise-constant generators"""
    segments: List[Segment]

    def __post_init__(self):
        if not self.segments:
            raise DimensionError("Schedule needs at least one segment")
        dims = {seg.generators.dim for seg in self.segments}
        if len(dims) != 1:
            raise DimensionError(f"Segments have inconsistent dimensions: {sorted(dims)}")
        for seg in self.segments:
            if seg.duration <= 0:
                raise DimensionError(f"Segment '{seg.label}' has non-positive duration {seg.duration}")

    @classmethod
    def single(cls, generators: GeneratorSet, duration: float, label: str = "") -> "Schedule":
        return cls([Segment(duration, generators, label)])

    @property
    def total_duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments))

    def boundaries(self) -> List[float]:
        edges = [0.0]
        for seg in self.segments:
            edges.append(edges[-1] + seg.duration)
        return edges


@dataclass
class PovmSpec:
    """
    Gaussian general-dyne measurement of one register mode.

    The kernel covariance is diag(1/μ, μ) in the (y, π) ordering, so μ → 0
    projects onto a π eigenstate.
    """
    target_mode: str
    mu: float
    outcome: complex = 0j

    def __post_init__(self):
        if not self.mu > 0:
            raise DimensionError(f"POVM resolution μ must be positive, got {self.mu}")


def assemble_generators(
    H: QuadraticHamiltonian,
    jumps: Sequence[LinearJump] = (),
    monitors: Sequence[MonitoredQuadrature] = (),
) -> GeneratorSet:
    """
    Compile a Hamiltonian, jumps and monitors into drift and diffusion.

    A = Ω(G + Σ Im(c̄cᵀ)), D = 2Ω(Σ Re(c̄cᵀ) + Σ γ v vᵀ)Ωᵀ, drive = Ωf.

    Raises:
        DimensionError: If the pieces act on different dimensions
        NonCommutingMonitorsError: If two monitored quadratures do not commute
    """
    dim = H.dim
    omega = symplectic_form(dim // 2)
    inner = H.G.copy()
    noise = np.zeros((dim, dim))
    for jump in jumps:
        if jump.c.size != dim:
            raise DimensionError(f"Jump '{jump.label}' has length {jump.c.size}, expected {dim}")
        outer = np.outer(jump.c.conj(), jump.c)
        inner += outer.imag
        noise += outer.real
    monitors = list(monitors)
    for m in monitors:
        if m.v.size != dim:
            raise DimensionError(f"Monitor '{m.label}' has length {m.v.size}, expected {dim}")
        noise += m.rate * np.outer(m.v, m.v)
    for i, first in enumerate(monitors):
        for second in monitors[i + 1:]:
            if abs(first.v @ omega @ second.v) > COMMUTE_TOL:
                raise NonCommutingMonitorsError(
                    f"Monitors '{first.label}' and '{second.label}' do not commute"
                )
    A = omega @ inner
    D = 2.0 * omega @ noise @ omega.T
    return GeneratorSet(A, 0.5 * (D + D.T), omega @ H.f, monitors, H, list(jumps))


def _steps(duration: float, max_step: float) -> Tuple[int, float]:
    n = max(1, int(math.ceil(duration / max_step - 1e-9)))
    return n, duration / n


def _rk4(fun, y, h):
    k1 = fun(y)
    k2 = fun(y + 0.5 * h * k1)
    k3 = fun(y + 0.5 * h * k2)
    k4 = fun(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _propagate_mean(mean: np.ndarray, g: GeneratorSet, duration: float) -> np.ndarray:
    dim = g.dim
    aug = np.zeros((dim + 1, dim + 1))
    aug[:dim, :dim] = g.A
    aug[:dim, dim] = g.drive
    prop = expm(aug * duration)
    return prop[:dim, :dim] @ mean + prop[:dim, dim]


def _lyapunov_expm(cov: np.ndarray, g: GeneratorSet, duration: float) -> np.ndarray:
    dim = g.dim
    block = np.zeros((2 * dim, 2 * dim))
    block[:dim, :dim] = -g.A
    block[:dim, dim:] = g.D
    block[dim:, dim:] = g.A.T
    prop = expm(block * duration)
    phi = prop[dim:, dim:].T
    noise = phi @ prop[:dim, dim:]
    cov = phi @ cov @ phi.T + noise
    return 0.5 * (cov + cov.T)


def _riccati_expm(cov: np.ndarray, g: GeneratorSet, duration: float) -> np.ndarray:
    # Σ = X Y⁻¹ with [X; Y]' = [[A, D], [B, -Aᵀ]] [X; Y]
    dim = g.dim
    block = np.zeros((2 * dim, 2 * dim))
    block[:dim, :dim] = g.A
    block[:dim, dim:] = g.D
    block[dim:, :dim] = g.backaction()
    block[dim:, dim:] = -g.A.T
    prop = expm(block * duration)
    X = prop[:dim, :dim] @ cov + prop[:dim, dim:]
    Y = prop[dim:, :dim] @ cov + prop[dim:, dim:]
    cov = np.linalg.solve(Y.T, X.T).T
    return 0.5 * (cov + cov.T)


def _check(s: GaussianState, cfg: IntegratorSettings, what: str):
    if cfg.check_physicality:
        check_physical(s, cfg.physicality_tol, {"stage": what})


def evolve_unconditional(
    s: GaussianState,
    g: GeneratorSet,
    duration: float,
    cfg: Optional[IntegratorSettings] = None,
) -> GaussianState:
    """
    Lindblad (record-averaged) evolution: dΣ/dt = AΣ + ΣAᵀ + D.

    Monitors act through D only. The result is rejected if it leaves the
    physical domain.
    """
    cfg = cfg or IntegratorSettings()
    if g.dim != s.layout.dim:
        raise DimensionError(f"Generators act on {g.dim} quadratures, state has {s.layout.dim}")
    if duration <= 0:
        return s.copy()

    if cfg.method == "expm":
        cov = _lyapunov_expm(s.cov, g, duration)
        mean = _propagate_mean(s.mean, g, duration)
    else:
        A, D, drive = g.A, g.D, g.drive
        n, h = _steps(duration, cfg.max_step)
        cov, mean = s.cov.copy(), s.mean.copy()
        lyapunov = lambda S: A @ S + S @ A.T + D
        drift = lambda m: A @ m + drive
        for _ in range(n):
            cov = _rk4(lyapunov, cov, h)
            cov = 0.5 * (cov + cov.T)
            mean = _rk4(drift, mean, h)

    result = GaussianState(s.layout, mean, cov)
    _check(result, cfg, "unconditional")
    return result


def riccati_rhs(g: GeneratorSet):
    """Right-hand side of the conditional covariance equation"""
    A, D, B = g.A, g.D, g.backaction()
    return lambda S: A @ S + S @ A.T + D - S @ B @ S


def evolve_conditional(
    s: GaussianState,
    g: GeneratorSet,
    duration: float,
    cfg: Optional[IntegratorSettings] = None,
) -> GaussianState:
    """
    Covariance conditioned on the full measurement record (Riccati equation).

    The mean follows its record-averaged drift; individual conditional means
    are produced by sample_trajectory.
    """
    cfg = cfg or IntegratorSettings()
    if g.dim != s.layout.dim:
        raise DimensionError(f"Generators act on {g.dim} quadratures, state has {s.layout.dim}")
    if duration <= 0:
        return s.copy()

    if cfg.method == "expm":
        cov = s.cov.copy()
        n, h = _steps(duration, cfg.expm_chunk)
        for _ in range(n):
            cov = _riccati_expm(cov, g, h)
        mean = _propagate_mean(s.mean, g, duration)
    else:
        rhs = riccati_rhs(g)
        A, drive = g.A, g.drive
        drift = lambda m: A @ m + drive
        n, h = _steps(duration, cfg.max_step)
        cov, mean = s.cov.copy(), s.mean.copy()
        for _ in range(n):
            cov = _rk4(rhs, cov, h)
            cov = 0.5 * (cov + cov.T)
            mean = _rk4(drift, mean, h)

    result = GaussianState(s.layout, mean, cov)
    _check(result, cfg, "conditional")
    return result


@dataclass
class ScheduleResult:
    """Snapshots of a schedule run"""
    times: np.ndarray
    states: List[GaussianState]
    mode: str

    def final(self) -> GaussianState:
        return self.states[-1]


def run_schedule(
    s: GaussianState,
    sched: Schedule,
    mode: str = "unconditional",
    cfg: Optional[IntegratorSettings] = None,
    sample_times: Optional[Sequence[float]] = None,
) -> ScheduleResult:
    """
    Integrate every segment in order, snapshotting at the requested times.

    Segment boundaries are exact breakpoints, so no step straddles two
    segments.

    Args:
        s: Initial state
        sched: Piecewise-constant schedule
        mode: 'conditional' or 'unconditional'
        cfg: Integrator settings
        sample_times: Snapshot times in [0, total]; defaults to the final time
    """
    if mode not in ("conditional", "unconditional"):
        raise ValueError(f"Unknown evolution mode '{mode}'")
    cfg = cfg or IntegratorSettings()
    evolve = evolve_conditional if mode == "conditional" else evolve_unconditional
    total = sched.total_duration
    times = sorted(set(float(t) for t in (sample_times if sample_times is not None else [total])))
    if times and (times[0] < -1e-12 or times[-1] > total * (1 + 1e-12) + 1e-12):
        raise DimensionError(f"Sample times must lie within [0, {total}]")

    edges = sched.boundaries()
    snapshots: List[GaussianState] = []
    state = s.copy()
    now = 0.0
    pending = list(times)
    while pending and pending[0] <= 1e-15:
        snapshots.append(state.copy())
        pending.pop(0)

    for k, seg in enumerate(sched.segments):
        end = edges[k + 1]
        logger.debug(f"Segment {k} '{seg.label}' [{edges[k]:.4g}, {end:.4g}] ({mode})")
        while pending and pending[0] <= end + 1e-12:
            target = min(pending.pop(0), end)
            state = evolve(state, seg.generators, target - now, cfg)
            now = target
            snapshots.append(state.copy())
        if now < end:
            state = evolve(state, seg.generators, end - now, cfg)
            now = end

    return ScheduleResult(np.array(times), snapshots, mode)


@dataclass
class TrajectoryBundle:
    """
    Sampled conditional means and measurement records.

    means has shape (seeds, times, 2n); records has shape (seeds, times, monitors);
    cov holds the conditional covariance at each sampled time.
    """
    times: np.ndarray
    means: np.ndarray
    records: np.ndarray
    cov: np.ndarray
    seeds: List[int]

    def ensemble_covariance(self, index: int = -1) -> np.ndarray:
        """Σ_cond + 2·Cov(means) at one sampled time (record-averaged covariance)"""
        spread = np.atleast_2d(np.cov(self.means[:, index, :], rowvar=False, bias=True))
        return self.cov[index] + 2.0 * spread


class NoiseStreams:
    """One generator per seed, drawn in blocks so batching never changes a path"""

    def __init__(self, seeds: Sequence[int], width: int, block: int = 1024):
        self.generators = [np.random.default_rng(seed) for seed in seeds]
        self.width = width
        self.block = block
        self._buffer = None
        self._cursor = block

    def next(self) -> np.ndarray:
        if self._cursor >= self.block:
            self._buffer = np.stack(
                [rng.standard_normal((self.block, self.width)) for rng in self.generators]
            )
            self._cursor = 0
        row = self._buffer[:, self._cursor, :]
        self._cursor += 1
        return row


def sample_trajectories(
    s: GaussianState,
    g: GeneratorSet,
    duration: float,
    seeds: Sequence[int],
    cfg: Optional[IntegratorSettings] = None,
    sample_every: int = 1,
) -> TrajectoryBundle:
    """
    Euler–Maruyama sampling of conditional means for a batch of seeds.

    d⟨r⟩ = (A⟨r⟩ + drive)dt + Σ_k √γ_k (Σ v_k) dW_k and
    dI_k = 2√γ_k v_kᵀ⟨r⟩ dt + dW_k, with Σ(t) integrated alongside by RK4.
    """
    cfg = cfg or IntegratorSettings()
    seeds = [int(seed) for seed in seeds]
    n_steps, dt = _steps(duration, cfg.sde_step)
    monitors = g.monitors
    n_mon = max(1, len(monitors))
    V = np.array([m.v for m in monitors]) if monitors else np.zeros((1, g.dim))
    rates = np.sqrt(np.array([m.rate for m in monitors])) if monitors else np.zeros(1)
    rhs = riccati_rhs(g)
    A, drive = g.A, g.drive

    means = np.tile(s.mean, (len(seeds), 1))
    records = np.zeros((len(seeds), n_mon))
    cov = s.cov.copy()
    noise = NoiseStreams(seeds, n_mon)
    sqrt_dt = math.sqrt(dt)

    times, mean_path, record_path, cov_path = [0.0], [means.copy()], [records.copy()], [cov.copy()]
    for step in range(1, n_steps + 1):
        dW = noise.next() * sqrt_dt
        gain = rates[:, None] * (V @ cov)
        projected = means @ V.T
        records = records + 2.0 * rates[None, :] * projected * dt + dW
        means = means + (means @ A.T + drive) * dt + dW @ gain
        cov = _rk4(rhs, cov, dt)
        cov = 0.5 * (cov + cov.T)
        if step % sample_every == 0 or step == n_steps:
            times.append(step * dt)
            mean_path.append(means.copy())
            record_path.append(records.copy())
            cov_path.append(cov.copy())

    return TrajectoryBundle(
        times=np.array(times),
        means=np.stack(mean_path, axis=1),
        records=np.stack(record_path, axis=1),
        cov=np.stack(cov_path),
        seeds=seeds,
    )


def sample_trajectory(
    s: GaussianState,
    g: GeneratorSet,
    duration: float,
    seed: int,
    cfg: Optional[IntegratorSettings] = None,
    sample_every: int = 1,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-seed path: (times, means, records)"""
    bundle = sample_trajectories(s, g, duration, [seed], cfg, sample_every)
    return bundle.times, bundle.means[0], bundle.records[0]


def condition_on_povm(s: GaussianState, p: PovmSpec) -> Tuple[GaussianState, Dict[str, complex]]:
    """
    Condition on a Gaussian measurement of one register mode.

    The remaining modes get Σ̃ = σ − ε(σ_c + V_μ)⁻¹εᵀ and a mean shifted by
    ε(σ_c + V_μ)⁻¹(r_ζ − ⟨r_c⟩) with r_ζ = √2(Re ζ, Im ζ). The measured mode is
    replaced by the pure kernel state.

    Returns:
        The conditioned state and, per remaining mode, the amplitude α with
        ρ(ζ) = D(α) ρ(0) D(α)†. Displacing the ζ-conditioned state by −α
        therefore returns the ζ = 0 state; `recover` conditions at ζ = 0 and
        needs neither direction.
    """
    layout = s.layout
    target = p.target_mode
    layout.index(target)
    others = [label for label in layout.labels if label != target]
    rows = layout.quadrature_indices(others)
    cols = layout.quadrature_indices([target])
    sigma_c = s.cov[np.ix_(cols, cols)]
    eps = s.cov[np.ix_(rows, cols)]
    kernel = np.diag([1.0 / p.mu, p.mu])
    inner = sigma_c + kernel
    if np.linalg.cond(inner) > 1e15:
        raise PhysicsViolation("Singular σ_c + V_μ in POVM conditioning", {"mu": p.mu, "mode": target})
    gain = np.linalg.solve(inner.T, eps.T).T
    outcome = math.sqrt(2.0) * np.array([p.outcome.real, p.outcome.imag])

    cov = s.cov.copy()
    mean = s.mean.copy()
    cov[np.ix_(rows, rows)] = s.cov[np.ix_(rows, rows)] - gain @ eps.T
    cov[np.ix_(rows, cols)] = 0.0
    cov[np.ix_(cols, rows)] = 0.0
    cov[np.ix_(cols, cols)] = kernel
    mean[rows] = s.mean[rows] + gain @ (outcome - s.mean[cols])
    mean[cols] = outcome

    shift = gain @ outcome
    amplitudes = {
        label: complex(shift[2 * k], shift[2 * k + 1]) / math.sqrt(2.0)
        for k, label in enumerate(others)
    }
    return GaussianState(layout, mean, 0.5 * (cov + cov.T)), amplitudes


def displace(s: GaussianState, amplitudes: Dict[str, complex]) -> GaussianState:
    """Apply D(α) per mode: ⟨x⟩ += √2 Re α, ⟨p⟩ += √2 Im α"""
    mean = s.mean.copy()
    for label, alpha in amplitudes.items():
        mean[s.layout.x_index(label)] += math.sqrt(2.0) * alpha.real
        mean[s.layout.p_index(label)] += math.sqrt(2.0) * alpha.imag
    return GaussianState(s.layout, mean, s.cov.copy())
