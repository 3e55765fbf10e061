"""
Dense density-matrix and trajectory engine over finite tensor products.

Used for qubit/qudit register models and as a brute-force oracle for the
Gaussian engine (truncated Fock spaces). Operators are kept sparse; states are
dense arrays. Basis index 0 of a qubit is |↓⟩, matching Fock |0⟩.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from src.errors import (
    DimensionError,
    NormCollapseError,
    TraceDriftError,
)
from src.gaussian_dynamics import (
    GeneratorSet,
    IntegratorSettings,
    NoiseStreams,
    run_schedule,
)
from src.gaussian_state import ModeLayout, Partition, log_negativity
from src.protocols import Scenario, ScenarioParams, build_two_mode_scenario

logger = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 4096
TRACE_TOL = 1e-8
TRACE_FAIL_TOL = 1e-6
LEAK_TOL = 1e-4

OPERATOR_KINDS = (
    "pauli_x", "pauli_y", "pauli_z", "truncated_x", "truncated_p",
    "annihilation", "number", "identity",
)


@dataclass(frozen=True)
class HilbertSpec:
    """Ordered subsystem dimensions with one tag per factor"""
    dims: Tuple[int, ...]
    tags: Tuple[str, ...] = ()
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        tags = tuple(self.tags) if self.tags else tuple(f"q{k + 1}" for k in range(len(dims)))
        object.__setattr__(self, "tags", tags)
        if not dims or any(d < 2 for d in dims):
            raise DimensionError(f"Every subsystem needs dimension ≥ 2, got {dims}")
        if len(tags) != len(dims) or len(set(tags)) != len(tags):
            raise DimensionError(f"Tags {tags} do not match dims {dims}")
        if self.total > self.max_dim:
            raise DimensionError(f"Hilbert space of dimension {self.total} exceeds max_dim={self.max_dim}")

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def site(self, tag_or_index) -> int:
        if isinstance(tag_or_index, (int, np.integer)):
            if not 0 <= tag_or_index < len(self.dims):
                raise DimensionError(f"Site index {tag_or_index} out of range")
            return int(tag_or_index)
        try:
            return self.tags.index(tag_or_index)
        except ValueError:
            raise DimensionError(f"Unknown subsystem tag '{tag_or_index}'") from None


@dataclass
class DenseOperator:
    """Sparse operator on a tensor-product space"""
    matrix: sp.csr_matrix
    spec: HilbertSpec
    label: str = ""

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix, dtype=complex)
        if self.matrix.shape != (self.spec.total, self.spec.total):
            raise DimensionError(f"Operator shape {self.matrix.shape} does not match {self.spec.dims}")

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def dag(self) -> "DenseOperator":
        return DenseOperator(self.matrix.conj().T, self.spec, f"{self.label}†")

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        return DenseOperator(self.matrix + other.matrix, self.spec)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        return DenseOperator(self.matrix - other.matrix, self.spec)

    def __mul__(self, scalar: complex) -> "DenseOperator":
        return DenseOperator(self.matrix * scalar, self.spec, self.label)

    __rmul__ = __mul__

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        return DenseOperator(self.matrix @ other.matrix, self.spec)


@dataclass
class DenseState:
    """Density matrix over a HilbertSpec (pure amplitudes are promoted on demand)"""
    spec: HilbertSpec
    rho: np.ndarray

    @classmethod
    def from_pure(cls, spec: HilbertSpec, psi: np.ndarray) -> "DenseState":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(spec, np.outer(psi, psi.conj()))

    @classmethod
    def ground(cls, spec: HilbertSpec) -> "DenseState":
        psi = np.zeros(spec.total, dtype=complex)
        psi[0] = 1.0
        return cls.from_pure(spec, psi)

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho, self.rho)))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))))

    def expect(self, op: DenseOperator) -> complex:
        return complex(np.sum((op.matrix @ self.rho).diagonal()))


def _local(kind: str, d: int) -> sp.csr_matrix:
    if kind == "identity":
        return sp.identity(d, dtype=complex, format="csr")
    if kind.startswith("pauli_"):
        if d != 2:
            raise DimensionError(f"{kind} needs a two-level factor, got dimension {d}")
        table = {
            "pauli_x": [[0, 1], [1, 0]],
            "pauli_y": [[0, -1j], [1j, 0]],
            "pauli_z": [[-1, 0], [0, 1]],
        }
        return sp.csr_matrix(np.array(table[kind], dtype=complex))
    a = sp.diags(np.sqrt(np.arange(1, d)), 1, shape=(d, d), dtype=complex, format="csr")
    if kind == "annihilation":
        return a
    if kind == "number":
        return sp.csr_matrix(a.conj().T @ a)
    if kind == "truncated_x":
        return sp.csr_matrix((a + a.conj().T) / math.sqrt(2.0))
    if kind == "truncated_p":
        return sp.csr_matrix(-1j * (a - a.conj().T) / math.sqrt(2.0))
    raise DimensionError(f"Unknown operator kind '{kind}', expected one of {OPERATOR_KINDS}")


def build_operators(spec: HilbertSpec, kind: str, site=None) -> DenseOperator:
    """
    Embed a single-site operator with identities elsewhere.

    Args:
        spec: Tensor-product space
        kind: One of OPERATOR_KINDS
        site: Subsystem tag or index (ignored for identity)
    """
    if kind == "identity":
        return DenseOperator(sp.identity(spec.total, dtype=complex, format="csr"), spec, "1")
    k = spec.site(site)
    result = None
    for j, d in enumerate(spec.dims):
        factor = _local(kind if j == k else "identity", d)
        result = factor if result is None else sp.kron(result, factor, format="csr")
    return DenseOperator(result, spec, f"{kind}[{spec.tags[k]}]")


def weighted_sum(spec: HilbertSpec, terms: Sequence[Tuple[complex, str, object]]) -> DenseOperator:
    """Σ w·op for (weight, kind, site) triples"""
    total = DenseOperator(sp.csr_matrix((spec.total, spec.total), dtype=complex), spec)
    for weight, kind, site in terms:
        total = total + weight * build_operators(spec, kind, site)
    return total


class LindbladGenerator:
    """dρ/dt = -i[H, ρ] + Σ D[L]ρ with a non-Hermitian effective Hamiltonian"""

    def __init__(self, H: Optional[DenseOperator], jumps: Sequence[DenseOperator], spec: HilbertSpec):
        zero = sp.csr_matrix((spec.total, spec.total), dtype=complex)
        h = H.matrix if H is not None else zero
        self.jumps = [j.matrix for j in jumps]
        decay = zero
        for L in self.jumps:
            decay = decay + L.conj().T @ L
        self.effective = sp.csr_matrix(h - 0.5j * decay)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        x = self.effective @ rho
        out = -1j * x + 1j * x.conj().T
        for L in self.jumps:
            y = L @ rho
            out = out + L @ y.conj().T
        return out


def evolve_lindblad(
    state: DenseState,
    H: Optional[DenseOperator],
    jumps: Sequence[DenseOperator],
    duration: float,
    dt: float = 1e-3,
    generator: Optional[LindbladGenerator] = None,
) -> DenseState:
    """
    RK4 integration of the Lindblad equation.

    Raises:
        TraceDriftError: When a single step changes the trace by more than 1e-6
    """
    if duration <= 0:
        return DenseState(state.spec, state.rho.copy())
    rhs = generator or LindbladGenerator(H, jumps, state.spec)
    n = max(1, int(math.ceil(duration / dt - 1e-9)))
    h = duration / n
    rho = state.rho.copy()
    for _ in range(n):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * h * k1)
        k3 = rhs(rho + 0.5 * h * k2)
        k4 = rhs(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > TRACE_FAIL_TOL:
            raise TraceDriftError(f"Trace drifted to {tr:.10f}", {"dt": h})
        if abs(tr - 1.0) > TRACE_TOL:
            rho = rho / tr
    return DenseState(state.spec, rho)


def lindblad_timeseries(
    state: DenseState,
    H: Optional[DenseOperator],
    jumps: Sequence[DenseOperator],
    times: Sequence[float],
    dt: float = 1e-3,
) -> List[DenseState]:
    """Snapshots of evolve_lindblad at increasing times (t=0 allowed)"""
    generator = LindbladGenerator(H, jumps, state.spec)
    snapshots, now, current = [], 0.0, state
    for t in sorted(times):
        current = evolve_lindblad(current, None, [], t - now, dt, generator)
        now = t
        snapshots.append(current)
    return snapshots


def _partial_transpose(rho: np.ndarray, spec: HilbertSpec, side_b: Sequence[str]) -> np.ndarray:
    n = len(spec.dims)
    tensor = rho.reshape(spec.dims + spec.dims)
    axes = list(range(2 * n))
    for tag in side_b:
        k = spec.site(tag)
        axes[k], axes[n + k] = n + k, k
    return tensor.transpose(axes).reshape(spec.total, spec.total)


def dense_partition(spec: HilbertSpec, side_a: Sequence[str]) -> Partition:
    return Partition.from_side_a(ModeLayout(spec.tags), side_a)


def dense_log_negativity(state: DenseState, p: Partition) -> float:
    """ln ‖ρ^{T_B}‖₁ from the eigenvalues of the partial transpose"""
    p.validate(ModeLayout(state.spec.tags))
    pt = _partial_transpose(state.rho, state.spec, p.side_b)
    try:
        eig = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    except np.linalg.LinAlgError as e:
        raise TraceDriftError(f"Partial-transpose eigensolve failed: {e}") from e
    return float(max(0.0, math.log(np.sum(np.abs(eig)))))


def reduced_density(state: DenseState, keep: Sequence[str]) -> DenseState:
    """Partial trace onto the kept subsystems (in spec order)"""
    spec = state.spec
    keep_idx = sorted(spec.site(tag) for tag in keep)
    n = len(spec.dims)
    tensor = state.rho.reshape(spec.dims + spec.dims)
    traced = [k for k in range(n) if k not in keep_idx]
    for k in sorted(traced, reverse=True):
        tensor = np.trace(tensor, axis1=k, axis2=k + tensor.ndim // 2)
    dims = tuple(spec.dims[k] for k in keep_idx)
    sub = HilbertSpec(dims, tuple(spec.tags[k] for k in keep_idx), spec.max_dim)
    d = int(np.prod(dims))
    return DenseState(sub, tensor.reshape(d, d))


def von_neumann_entropy(state: DenseState) -> float:
    eig = np.linalg.eigvalsh(0.5 * (state.rho + state.rho.conj().T))
    eig = eig[eig > 1e-14]
    return float(-np.sum(eig * np.log(eig)))


def mutual_information(state: DenseState, p: Partition) -> float:
    """I(A:B) = S(A) + S(B) - S(AB) in nats"""
    return (
        von_neumann_entropy(reduced_density(state, p.side_a))
        + von_neumann_entropy(reduced_density(state, p.side_b))
        - von_neumann_entropy(state)
    )


def pure_log_negativity(psi: np.ndarray, spec: HilbertSpec, side_a: Sequence[str]) -> np.ndarray:
    """
    Log-negativity of a batch of pure states, 2 ln Σ_k s_k over Schmidt values.

    Args:
        psi: Amplitudes with shape (batch, dim)
    """
    psi = np.atleast_2d(psi)
    a_idx = [spec.site(tag) for tag in side_a]
    b_idx = [k for k in range(len(spec.dims)) if k not in a_idx]
    da = int(np.prod([spec.dims[k] for k in a_idx]))
    tensor = psi.reshape((psi.shape[0],) + spec.dims)
    tensor = tensor.transpose([0] + [k + 1 for k in a_idx + b_idx]).reshape(psi.shape[0], da, -1)
    singular = np.linalg.svd(tensor, compute_uv=False)
    norms = np.linalg.norm(singular, axis=1)
    return 2.0 * np.log(np.sum(singular, axis=1) / norms)


@dataclass
class SmeResult:
    times: np.ndarray
    psi: np.ndarray
    seeds: List[int]
    averages: Dict[str, np.ndarray] = field(default_factory=dict)


def sample_sme_ensemble(
    psi0: np.ndarray,
    spec: HilbertSpec,
    H: Optional[DenseOperator],
    monitored: DenseOperator,
    rate: float,
    duration: float,
    seeds: Sequence[int],
    dt: float = 1e-4,
    sample_times: Optional[Sequence[float]] = None,
    observers: Optional[Dict[str, Callable[[np.ndarray], np.ndarray]]] = None,
    keep_states: bool = False,
) -> SmeResult:
    """
    Diffusive unraveling for a batch of seeds.

    dψ = [-iH - (γ/2)(L-⟨L⟩)²]ψ dt + √γ(L-⟨L⟩)ψ dW with renormalization each
    step. Observers map the (batch, dim) amplitudes to per-trajectory values and
    are averaged over the batch at each sample time.

    Raises:
        NormCollapseError: If any trajectory loses its norm
    """
    seeds = [int(seed) for seed in seeds]
    n_steps = max(1, int(math.ceil(duration / dt - 1e-9)))
    dt = duration / n_steps
    H_mat = H.toarray() if H is not None else np.zeros((spec.total, spec.total), dtype=complex)
    L = monitored.toarray()
    if np.max(np.abs(L - L.conj().T)) > 1e-12:
        raise DimensionError("Monitored operator must be Hermitian")
    psi = np.tile(np.asarray(psi0, dtype=complex).reshape(-1), (len(seeds), 1))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    noise = NoiseStreams(seeds, 1)
    observers = observers or {}
    wanted = sorted(sample_times) if sample_times is not None else [duration]
    sample_steps = {int(round(t / dt)): t for t in wanted}

    times, states = [], []
    averages: Dict[str, List[float]] = {name: [] for name in observers}

    def record(step):
        if step in sample_steps:
            times.append(sample_steps[step])
            for name, fn in observers.items():
                averages[name].append(float(np.mean(fn(psi))))
            if keep_states:
                states.append(psi.copy())

    record(0)
    sqrt_rate = math.sqrt(rate)
    for step in range(1, n_steps + 1):
        dW = noise.next()[:, 0] * math.sqrt(dt)
        Lpsi = psi @ L.T
        mean_L = np.real(np.sum(psi.conj() * Lpsi, axis=1))
        centered = Lpsi - mean_L[:, None] * psi
        centered_sq = centered @ L.T - mean_L[:, None] * centered
        drift = -1j * (psi @ H_mat.T) - 0.5 * rate * centered_sq
        psi = psi + drift * dt + sqrt_rate * dW[:, None] * centered
        norms = np.linalg.norm(psi, axis=1)
        if not np.all(np.isfinite(norms)) or np.min(norms) < 1e-12:
            raise NormCollapseError("Stochastic trajectory lost its norm", {"step": step, "dt": dt})
        psi = psi / norms[:, None]
        record(step)

    return SmeResult(
        times=np.array(times),
        psi=np.stack(states, axis=1) if keep_states else psi,
        seeds=seeds,
        averages={name: np.array(vals) for name, vals in averages.items()},
    )


def sample_sme_trajectory(
    psi0: np.ndarray,
    spec: HilbertSpec,
    H: Optional[DenseOperator],
    monitored: DenseOperator,
    rate: float,
    duration: float,
    seed: int,
    dt: float = 1e-4,
    sample_times: Optional[Sequence[float]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Single-seed pure-state path: (times, amplitudes with shape (times, dim))"""
    result = sample_sme_ensemble(
        psi0, spec, H, monitored, rate, duration, [seed], dt, sample_times, keep_states=True
    )
    return result.times, result.psi[0]


def sme_ensemble_log_negativity(
    psi0: np.ndarray,
    spec: HilbertSpec,
    H: Optional[DenseOperator],
    monitored: DenseOperator,
    rate: float,
    side_a: Sequence[str],
    sample_times: Sequence[float],
    seeds: Sequence[int],
    dt: float = 1e-4,
) -> Tuple[np.ndarray, np.ndarray]:
    """Trajectory-averaged conditional log-negativity at the sample times"""
    observer = {"log_negativity": lambda psi: pure_log_negativity(psi, spec, side_a)}
    result = sample_sme_ensemble(
        psi0, spec, H, monitored, rate, max(sample_times), seeds, dt, sample_times, observer
    )
    return result.times, result.averages["log_negativity"]


@dataclass
class RegisterModel:
    """Hamiltonian, jump and initial state of a qubit/qudit feedforward model"""
    spec: HilbertSpec
    H: DenseOperator
    jumps: List[DenseOperator]
    monitored: DenseOperator
    side_a: Tuple[str, ...]

    def initial_state(self) -> DenseState:
        return DenseState.ground(self.spec)

    def initial_amplitudes(self) -> np.ndarray:
        psi = np.zeros(self.spec.total, dtype=complex)
        psi[0] = 1.0
        return psi

    def monitored_marginal(self) -> Tuple[HilbertSpec, DenseOperator, np.ndarray]:
        """
        Space, monitored operator and ground amplitudes for the measured pair.

        Under pure monitoring the register (last factor) has no dynamics and
        stays in its ground state, so it is dropped whenever the monitored
        operator acts on it as the identity. Otherwise the full model is returned.
        """
        dc = self.spec.dims[-1]
        dab = self.spec.total // dc
        full = self.monitored.toarray()
        reduced = np.trace(full.reshape(dab, dc, dab, dc), axis1=1, axis2=3) / dc
        if not np.allclose(np.kron(reduced, np.eye(dc)), full, atol=1e-12):
            return self.spec, self.monitored, self.initial_amplitudes()
        spec = HilbertSpec(self.spec.dims[:-1], self.spec.tags[:-1], self.spec.max_dim)
        psi = np.zeros(dab, dtype=complex)
        psi[0] = 1.0
        return spec, DenseOperator(sp.csr_matrix(reduced), spec, self.monitored.label), psi


def qudit_feedforward_model(d: int, eta: float, gamma: float = 1.0, weight: float = 0.7) -> RegisterModel:
    """
    Two qubits feeding a d-level register through a truncated quadrature F.

    H = γη Σ_x F and L = √γ(Σ_x - iηF) with Σ_x = (σ_x,1 + weight·σ_x,2)/2.
    """
    spec = HilbertSpec((2, 2, d), ("q1", "q2", "c"))
    sigma = weighted_sum(spec, [(0.5, "pauli_x", "q1"), (0.5 * weight, "pauli_x", "q2")])
    F = build_operators(spec, "truncated_x", "c")
    H = (gamma * eta) * (sigma @ F)
    jump = math.sqrt(gamma) * (sigma - (1j * eta) * F)
    return RegisterModel(spec, H, [jump], sigma, ("q1",))


def three_qudit_model(d: int, eta: float, gamma: float = 1.0) -> RegisterModel:
    """
    Truncated-oscillator analogue of the two-mode feedforward on three d-level sites.

    At d = 2 the quadratures reduce to z₊ = (σ_x,a + σ_x,b)/2 and z_c = σ_x,c/√2.
    """
    spec = HilbertSpec((d, d, d), ("a", "b", "c"))
    x_plus = weighted_sum(
        spec, [(1 / math.sqrt(2.0), "truncated_x", "a"), (1 / math.sqrt(2.0), "truncated_x", "b")]
    )
    y = build_operators(spec, "truncated_x", "c")
    H = (gamma * eta) * (x_plus @ y)
    jump = math.sqrt(gamma) * (x_plus - (1j * eta) * y)
    return RegisterModel(spec, H, [jump], x_plus, ("a",))


def register_log_negativity_curve(
    model: RegisterModel, times: Sequence[float], dt: float = 1e-3
) -> np.ndarray:
    """E_N(first subsystem | rest) of the deterministic register dynamics"""
    partition = dense_partition(model.spec, model.side_a)
    snapshots = lindblad_timeseries(model.initial_state(), model.H, model.jumps, times, dt)
    return np.array([dense_log_negativity(s, partition) for s in snapshots])


def bell_register_example() -> Dict[str, float]:
    """
    Two qubits in a Bell state selected by a classical register qubit.

    ρ = ½(Φ₊ ⊗ |↑⟩⟨↑| + Φ₋ ⊗ |↓⟩⟨↓|) with Φ₊ = (|++⟩+|--⟩)/√2 and
    Φ₋ = (|+-⟩+|-+⟩)/√2.
    """
    spec = HilbertSpec((2, 2, 2), ("q1", "q2", "r"))
    plus = np.array([1.0, 1.0]) / math.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / math.sqrt(2.0)
    phi_plus = (np.kron(plus, plus) + np.kron(minus, minus)) / math.sqrt(2.0)
    phi_minus = (np.kron(plus, minus) + np.kron(minus, plus)) / math.sqrt(2.0)
    down, up = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    rho = 0.5 * (
        np.kron(np.outer(phi_plus, phi_plus), up) + np.kron(np.outer(phi_minus, phi_minus), down)
    )
    state = DenseState(spec, rho.astype(complex))
    pair = DenseState.from_pure(HilbertSpec((2, 2), ("q1", "q2")), phi_plus)
    report = {
        "log_negativity_1_23": dense_log_negativity(state, dense_partition(spec, ["q1"])),
        "log_negativity_12_3": dense_log_negativity(state, dense_partition(spec, ["q1", "q2"])),
        "mutual_information_12_3": mutual_information(state, dense_partition(spec, ["q1", "q2"])),
        "bell_pair_entropy": von_neumann_entropy(reduced_density(pair, ["q1"])),
    }
    logger.info(f"Bell register example: {report}")
    return report


def _quadrature_ops(spec: HilbertSpec) -> List[DenseOperator]:
    ops = []
    for tag in spec.tags:
        ops.append(build_operators(spec, "truncated_x", tag))
        ops.append(build_operators(spec, "truncated_p", tag))
    return ops


def dense_generators(g: GeneratorSet, spec: HilbertSpec) -> Tuple[DenseOperator, List[DenseOperator]]:
    """Truncated-Fock versions of H = ½ rᵀGr + fᵀr and L = cᵀr"""
    if g.hamiltonian is None:
        raise DimensionError("Generator set carries no source Hamiltonian for the dense engine")
    if g.monitors:
        raise DimensionError("Monitored generators have no dense master-equation counterpart")
    r = _quadrature_ops(spec)
    G, f = g.hamiltonian.G, g.hamiltonian.f
    H = weighted_sum(spec, [])
    for i in range(len(r)):
        if f[i]:
            H = H + f[i] * r[i]
        for j in range(len(r)):
            if G[i, j]:
                H = H + (0.5 * G[i, j]) * (r[i] @ r[j])
    H = 0.5 * (H + H.dag())
    jumps = []
    for jump in g.jumps:
        L = weighted_sum(spec, [])
        for i, coeff in enumerate(jump.c):
            if coeff:
                L = L + complex(coeff) * r[i]
        jumps.append(L)
    return H, jumps


def dense_moments(state: DenseState) -> Tuple[np.ndarray, np.ndarray]:
    """
    First moments and vacuum-normalized covariance ⟨{δr_i, δr_j}⟩.

    Same-mode blocks are read in normal order from ⟨a²⟩ and ⟨a†a⟩: the
    truncated product a·a† misses N·|N-1⟩⟨N-1| on the top level, which would
    bias ⟨x²⟩ and ⟨p²⟩ by N times the top population.
    """
    spec = state.spec
    r = _quadrature_ops(spec)
    mean = np.array([state.expect(op).real for op in r])
    n = len(r)
    cov = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            if i // 2 == j // 2:
                continue
            value = state.expect(r[i] @ r[j] + r[j] @ r[i]).real - 2.0 * mean[i] * mean[j]
            cov[i, j] = cov[j, i] = value
    for k, tag in enumerate(spec.tags):
        a = build_operators(spec, "annihilation", tag)
        squeeze = state.expect(a @ a)
        number = state.expect(a.dag() @ a).real
        x, p = 2 * k, 2 * k + 1
        cov[x, x] = 2.0 * squeeze.real + 2.0 * number + 1.0 - 2.0 * mean[x] ** 2
        cov[p, p] = -2.0 * squeeze.real + 2.0 * number + 1.0 - 2.0 * mean[p] ** 2
        cov[x, p] = cov[p, x] = 2.0 * squeeze.imag - 2.0 * mean[x] * mean[p]
    return mean, cov


def top_level_population(state: DenseState) -> Dict[str, float]:
    """Population of the highest Fock level of every factor"""
    out = {}
    for tag, d in zip(state.spec.tags, state.spec.dims):
        reduced = reduced_density(state, [tag])
        out[tag] = float(reduced.rho[d - 1, d - 1].real)
    return out


@dataclass
class OracleReport:
    max_delta_log_negativity: float
    max_moment_deviation: float
    max_top_population: float
    truncation_leak: bool
    times: List[float]

    def passed(self, tol: float) -> bool:
        return self.max_delta_log_negativity < tol


def dense_scenario_timeseries(
    scenario: Scenario,
    n_tr: int,
    sample_times: Sequence[float],
    dt: float = 1e-3,
) -> Tuple[HilbertSpec, List[DenseState]]:
    """Truncated-Fock Lindblad snapshots of an unconditional scenario schedule"""
    if scenario.mode != "unconditional":
        raise DimensionError("The dense engine reproduces record-averaged (unconditional) dynamics only")
    spec = HilbertSpec(tuple([n_tr] * scenario.layout.n_modes), scenario.layout.labels)
    edges = scenario.schedule.boundaries()
    state = DenseState.ground(spec)
    now, snapshots = 0.0, []
    pending = sorted(sample_times)
    for k, seg in enumerate(scenario.schedule.segments):
        if not pending:
            break
        H, jumps = dense_generators(seg.generators, spec)
        generator = LindbladGenerator(H, jumps, spec)
        end = edges[k + 1]
        while pending and pending[0] <= end + 1e-12:
            target = pending.pop(0)
            state = evolve_lindblad(state, None, [], target - now, dt, generator)
            now = max(now, target)
            snapshots.append(state)
        if pending and now < end:
            state = evolve_lindblad(state, None, [], end - now, dt, generator)
            now = end
    if pending:
        raise DimensionError(f"Sample times {pending} lie beyond the schedule")
    return spec, snapshots


def oracle_compare(
    params: ScenarioParams,
    n_tr: int,
    horizon: float,
    sample_times: Optional[Sequence[float]] = None,
    dt: float = 1e-3,
    cfg: Optional[IntegratorSettings] = None,
) -> OracleReport:
    """
    Run a two-mode scenario in both engines and compare moments and E_N.

    The dense run uses N_tr Fock levels per mode; a warning is logged when the
    top level carries more than 1e-4 population.
    """
    scenario = build_two_mode_scenario(replace(params, t_f=horizon))
    times = sorted(sample_times) if sample_times is not None else [horizon]
    spec, snapshots = dense_scenario_timeseries(scenario, n_tr, times, dt)
    gaussian = run_schedule(scenario.initial_state(), scenario.schedule, "unconditional", cfg, times)
    partition = dense_partition(spec, scenario.partition.side_a)

    delta_en, delta_mom, top = 0.0, 0.0, 0.0
    for state, reference in zip(snapshots, gaussian.states):
        mean, cov = dense_moments(state)
        delta_mom = max(
            delta_mom,
            float(np.max(np.abs(cov - reference.cov))),
            float(np.max(np.abs(mean - reference.mean))),
        )
        delta_en = max(
            delta_en,
            abs(dense_log_negativity(state, partition) - log_negativity(reference, scenario.partition)),
        )
        top = max(top, max(top_level_population(state).values()))

    leak = top > LEAK_TOL
    if leak:
        logger.warning(f"Truncation leak: top Fock population {top:.2e} exceeds {LEAK_TOL:.0e} at N_tr={n_tr}")
    return OracleReport(delta_en, delta_mom, top, leak, list(times))
