"""
Gaussian state representation, symplectic algebra and entanglement measures.

Quadratures are ordered (x_1, p_1, x_2, p_2, ...) and the covariance matrix is
normalized so that the vacuum is the identity: Σ_ij = ⟨{δr_i, δr_j}⟩.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import DimensionError, UnphysicalStateError, UnsupportedStateError

logger = logging.getLogger(__name__)

PHYSICALITY_TOL = 1e-9
PURE_STATE_TOL = 1e-6
SYMMETRY_TOL = 1e-6
ENTROPY_CUTOFF = 1e-12


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal Ω with 2×2 blocks [[0, 1], [-1, 0]]"""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class ModeLayout:
    """
    Ordered mode labels of a Gaussian register.

    Mode k owns quadrature rows 2k (x) and 2k+1 (p).
    """
    labels: Tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise DimensionError("Mode layout needs at least one mode")
        if len(set(labels)) != len(labels):
            raise DimensionError(f"Mode labels must be unique: {labels}")

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return 2 * len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DimensionError(f"Unknown mode label '{label}'") from None

    def x_index(self, label: str) -> int:
        return 2 * self.index(label)

    def p_index(self, label: str) -> int:
        return 2 * self.index(label) + 1

    def quadrature_indices(self, labels: Iterable[str]) -> List[int]:
        """Quadrature rows of the given modes, in layout order"""
        wanted = set(labels)
        unknown = wanted - set(self.labels)
        if unknown:
            raise DimensionError(f"Unknown mode labels: {sorted(unknown)}")
        rows = []
        for k, label in enumerate(self.labels):
            if label in wanted:
                rows.extend((2 * k, 2 * k + 1))
        return rows

    def subset(self, labels: Iterable[str]) -> "ModeLayout":
        wanted = set(labels)
        return ModeLayout(tuple(label for label in self.labels if label in wanted))

    def extended(self, labels: Iterable[str]) -> "ModeLayout":
        return ModeLayout(self.labels + tuple(labels))

    def unit(self, label: str, quadrature: str = "x") -> np.ndarray:
        """Real unit vector selecting one quadrature"""
        vec = np.zeros(self.dim)
        vec[self.x_index(label) if quadrature == "x" else self.p_index(label)] = 1.0
        return vec

    def omega(self) -> np.ndarray:
        return symplectic_form(self.n_modes)


@dataclass
class GaussianState:
    """Mean quadrature vector and covariance matrix of an n-mode Gaussian state"""
    layout: ModeLayout
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=float)
        dim = self.layout.dim
        if self.mean.shape != (dim,):
            raise DimensionError(f"Mean has shape {self.mean.shape}, expected ({dim},)")
        if self.cov.shape != (dim, dim):
            raise DimensionError(f"Covariance has shape {self.cov.shape}, expected ({dim}, {dim})")

    @property
    def n_modes(self) -> int:
        return self.layout.n_modes

    def copy(self) -> "GaussianState":
        return GaussianState(self.layout, self.mean.copy(), self.cov.copy())

    def symmetrized(self) -> "GaussianState":
        return GaussianState(self.layout, self.mean.copy(), 0.5 * (self.cov + self.cov.T))

    def block(self, rows: Sequence[str], cols: Optional[Sequence[str]] = None) -> np.ndarray:
        """Covariance sub-block between two mode groups"""
        r = self.layout.quadrature_indices(rows)
        c = self.layout.quadrature_indices(cols if cols is not None else rows)
        return self.cov[np.ix_(r, c)]


@dataclass(frozen=True)
class Partition:
    """Bipartition of a mode layout into side A and side B"""
    side_a: Tuple[str, ...]
    side_b: Tuple[str, ...]

    @classmethod
    def from_side_a(cls, layout: ModeLayout, side_a: Iterable[str]) -> "Partition":
        side_a = tuple(side_a)
        wanted = set(side_a)
        side_b = tuple(label for label in layout.labels if label not in wanted)
        partition = cls(side_a, side_b)
        partition.validate(layout)
        return partition

    def validate(self, layout: ModeLayout):
        a, b = set(self.side_a), set(self.side_b)
        if not a or not b:
            raise DimensionError("Both sides of a partition must be nonempty")
        if a & b:
            raise DimensionError(f"Partition sides overlap: {sorted(a & b)}")
        if a | b != set(layout.labels):
            missing = set(layout.labels) - (a | b)
            extra = (a | b) - set(layout.labels)
            raise DimensionError(
                f"Partition does not cover the layout (missing={sorted(missing)}, unknown={sorted(extra)})"
            )


@dataclass
class StateDiagnostics:
    """Physicality diagnostics returned by validate_state"""
    max_asymmetry: float
    min_eigenvalue: float
    min_symplectic_eigenvalue: float

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        return (
            self.max_asymmetry <= tol
            and self.min_eigenvalue >= -tol
            and self.min_symplectic_eigenvalue >= 1.0 - tol
        )

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.max_asymmetry, self.min_eigenvalue, self.min_symplectic_eigenvalue)


@dataclass
class EntanglementReport:
    log_negativity: float
    purity: float
    pt_symplectic_spectrum: List[float]
    entropy: Optional[float] = None
    entropy_flagged: bool = False
    details: Dict[str, float] = field(default_factory=dict)


def vacuum_state(layout: ModeLayout) -> GaussianState:
    """All modes in vacuum: zero mean, identity covariance"""
    return GaussianState(layout, np.zeros(layout.dim), np.eye(layout.dim))


def two_mode_squeezed_state(r: float, labels: Tuple[str, str] = ("a", "b")) -> GaussianState:
    """
    Pure two-mode squeezed vacuum with x₊ and p₋ squeezed to e^{-2r}.

    Args:
        r: Squeezing parameter
        labels: Labels of the two modes
    """
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    cov = np.array([
        [c, 0.0, -s, 0.0],
        [0.0, c, 0.0, s],
        [-s, 0.0, c, 0.0],
        [0.0, s, 0.0, c],
    ])
    return GaussianState(ModeLayout(labels), np.zeros(4), cov)


def _tolerance(cov: np.ndarray, tol: float) -> float:
    # absolute tolerance scaled with the largest covariance entry
    return tol * max(1.0, float(np.max(np.abs(cov))) if cov.size else 1.0)


def symplectic_spectrum(cov: np.ndarray) -> np.ndarray:
    """
    Symplectic eigenvalues of a covariance matrix.

    Computed as |eig(iΩΣ)|, which come in ± pairs; each pair is merged.

    Args:
        cov: Symmetric 2n×2n covariance

    Returns:
        n values sorted ascending

    Raises:
        DimensionError: If the matrix is not square of even size
        UnphysicalStateError: If the eigensolver does not converge
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise DimensionError(f"Covariance must be square with even size, got {cov.shape}")
    n = cov.shape[0] // 2
    try:
        eig = np.linalg.eigvals(1j * symplectic_form(n) @ cov)
    except np.linalg.LinAlgError as e:
        raise UnphysicalStateError(f"Symplectic eigensolve failed: {e}") from e
    values = np.sort(np.abs(eig))
    return 0.5 * (values[0::2] + values[1::2])


def validate_state(s: GaussianState) -> StateDiagnostics:
    """
    Physicality diagnostics; the caller decides pass/fail.

    Returns:
        max |Σ - Σᵀ|, min eigenvalue of Σ + iΩ, min symplectic eigenvalue
    """
    cov = s.cov
    if s.mean.shape[0] != cov.shape[0]:
        raise DimensionError("Mean and covariance dimensions disagree")
    asym = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    sym = 0.5 * (cov + cov.T)
    min_eig = float(np.min(np.linalg.eigvalsh(sym + 1j * s.layout.omega())))
    min_nu = float(np.min(symplectic_spectrum(sym)))
    return StateDiagnostics(asym, min_eig, min_nu)


def check_physical(s: GaussianState, tol: float = PHYSICALITY_TOL, context: Optional[Dict] = None):
    """Raise UnphysicalStateError when Σ + iΩ has an eigenvalue below -tol"""
    scaled = _tolerance(s.cov, tol)
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (s.cov + s.cov.T) + 1j * s.layout.omega())))
    if min_eig < -scaled:
        raise UnphysicalStateError(
            f"Covariance violates Σ + iΩ ⪰ 0 (min eigenvalue {min_eig:.3e})", context
        )


def reduce_state(s: GaussianState, keep: Iterable[str]) -> GaussianState:
    """Gaussian partial trace: restrict mean and Σ to the kept modes"""
    keep = list(keep)
    if not keep:
        raise DimensionError("reduce_state needs at least one mode to keep")
    rows = s.layout.quadrature_indices(keep)
    return GaussianState(s.layout.subset(keep), s.mean[rows], s.cov[np.ix_(rows, rows)])


def apply_symplectic(s: GaussianState, transform: np.ndarray) -> GaussianState:
    """Apply a linear quadrature map S: mean → S mean, Σ → S Σ Sᵀ"""
    transform = np.asarray(transform, dtype=float)
    return GaussianState(s.layout, transform @ s.mean, transform @ s.cov @ transform.T)


def partial_transpose(cov: np.ndarray, layout: ModeLayout, side_b: Iterable[str]) -> np.ndarray:
    """Flip the momenta of side B: Σ → PΣP"""
    signs = np.ones(layout.dim)
    for label in side_b:
        signs[layout.p_index(label)] = -1.0
    return cov * np.outer(signs, signs)


def log_negativity(s: GaussianState, p: Partition) -> float:
    """
    Logarithmic negativity in nats.

    E_N = Σ_k max(0, -ln ν̃_k) over the partially transposed symplectic spectrum.
    """
    p.validate(s.layout)
    check_physical(s)
    spectrum = symplectic_spectrum(partial_transpose(s.cov, s.layout, p.side_b))
    return float(sum(max(0.0, -math.log(nu)) for nu in spectrum))


def _entropy_of_spectrum(spectrum: Iterable[float]) -> float:
    total = 0.0
    for nu in spectrum:
        if nu <= 1.0 + ENTROPY_CUTOFF:
            continue
        plus, minus = (nu + 1.0) / 2.0, (nu - 1.0) / 2.0
        total += plus * math.log(plus) - minus * math.log(minus)
    return total


def purity(s: GaussianState) -> float:
    """Tr ρ² = 1/√det Σ"""
    sign, logdet = np.linalg.slogdet(s.cov)
    if sign <= 0:
        raise UnphysicalStateError("Covariance has a non-positive determinant")
    return float(math.exp(-0.5 * logdet))


def entanglement_entropy(s: GaussianState, side: Iterable[str], strict: bool = False) -> float:
    """
    Von Neumann entropy of one side of a globally pure state.

    A mixed global state yields NaN (flagged with a warning), or raises when strict.
    """
    side = list(side)
    if purity(s) < 1.0 - PURE_STATE_TOL:
        if strict:
            raise UnsupportedStateError("Entanglement entropy needs a pure global state")
        logger.warning("Entanglement entropy requested for a mixed state; returning NaN")
        return math.nan
    reduced = reduce_state(s, side)
    return _entropy_of_spectrum(symplectic_spectrum(reduced.cov))


def eof_symmetric_two_mode(s: GaussianState) -> float:
    """
    Entanglement of formation of an exchange-symmetric two-mode state.

    Raises:
        UnsupportedStateError: For more than two modes or asymmetric input
    """
    if s.n_modes != 2:
        raise UnsupportedStateError(f"EoF closed form needs exactly two modes, got {s.n_modes}")
    cov = s.cov
    tol = _tolerance(cov, SYMMETRY_TOL)
    a_block, b_block, ab_block = cov[:2, :2], cov[2:, 2:], cov[:2, 2:]
    if np.max(np.abs(a_block - b_block)) > tol or np.max(np.abs(ab_block - ab_block.T)) > tol:
        raise UnsupportedStateError("EoF closed form needs a state symmetric under mode exchange")
    side_b = (s.layout.labels[1],)
    nu = min(1.0, float(np.min(symplectic_spectrum(partial_transpose(cov, s.layout, side_b)))))
    if nu >= 1.0:
        return 0.0
    c_plus = (nu ** -0.5 + nu ** 0.5) ** 2 / 4.0
    c_minus = (nu ** -0.5 - nu ** 0.5) ** 2 / 4.0
    value = c_plus * math.log(c_plus)
    if c_minus > 0:
        value -= c_minus * math.log(c_minus)
    return float(value)


def pairing_correlators(s: GaussianState) -> np.ndarray:
    """Anomalous correlators ⟨a_l a_m⟩ rebuilt from quadrature covariances"""
    cov = s.cov
    xx = cov[0::2, 0::2]
    pp = cov[1::2, 1::2]
    xp = cov[0::2, 1::2]
    px = cov[1::2, 0::2]
    return (xx - pp + 1j * (xp + px)) / 4.0


def entanglement_report(s: GaussianState, p: Partition) -> EntanglementReport:
    """Collect the standard measures for one state and partition"""
    spectrum = symplectic_spectrum(partial_transpose(s.cov, s.layout, p.side_b))
    value = purity(s)
    report = EntanglementReport(
        log_negativity=log_negativity(s, p),
        purity=value,
        pt_symplectic_spectrum=sorted(float(nu) for nu in spectrum),
    )
    if value >= 1.0 - PURE_STATE_TOL:
        report.entropy = entanglement_entropy(s, p.side_a)
    else:
        report.entropy_flagged = True
    return report
