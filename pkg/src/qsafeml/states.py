"""Statevectors, density matrices and mixture construction."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, InvalidDensity, InvalidDistribution, InvalidMixture
from .linalg import HERM_TOL, PSD_CLAMP, eig_hermitian, hermitian_defect

NORM_TOL = 1e-9
TRACE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm complex amplitude vector."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size < 1 or not np.all(np.isfinite(amps)):
            raise InvalidMixture("statevector must be non-empty and finite")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InvalidMixture(f"statevector norm^2 is {norm2!r}, expected 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def basis(cls, index, dim=2):
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def normalized(cls, amplitudes):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(amps / np.linalg.norm(amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive-semidefinite, unit-trace matrix.

    Construct through :func:`validate_density` (or the builders in this
    module) to get the invariants checked; the raw constructor only freezes
    the array.
    """

    matrix: np.ndarray
    _pure: "np.ndarray | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def pure_vector(self):
        """The generating statevector when known to be pure, else ``None``."""
        return self._pure

    @classmethod
    def maximally_mixed(cls, dim):
        return cls(np.eye(dim, dtype=complex) / dim)

    @classmethod
    def from_state(cls, state: StateVector):
        return cls(state.projector(), _pure=state.amplitudes)


def validate_density(m) -> DensityMatrix:
    """Check the density-matrix invariants and wrap the matrix.

    Raises
    ------
    InvalidDensity
        Naming the first violated invariant (hermitian, psd, trace, in that
        order) and the measured violation: the max Hermitian asymmetry, the
        smallest eigenvalue, or the trace.
    """
    if isinstance(m, DensityMatrix):
        m = m.matrix
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidDensity("shape", a.shape, f"not a square matrix: shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidDensity("finite", float("nan"), "matrix has non-finite entries")
    defect = hermitian_defect(a)
    if defect > HERM_TOL:
        raise InvalidDensity("hermitian", defect, f"not Hermitian: max |m - m^H| = {defect:.3e}")
    lowest = float(eig_hermitian(a).eigenvalues[0])
    if lowest < -PSD_CLAMP:
        raise InvalidDensity("psd", lowest, f"not PSD: eigenvalue {lowest:.6g}")
    tr = float(np.trace(a).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidDensity("trace", tr, f"trace = {tr:.6g}, expected 1")
    return DensityMatrix(0.5 * (a + a.conj().T))


def _check_mixture(components):
    if not components:
        raise InvalidMixture("mixture must have at least one component")
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(~np.isfinite(weights)) or np.any(weights < 0):
        raise InvalidMixture("mixture weights must be finite and non-negative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidMixture(f"mixture weights sum to {weights.sum()!r}, expected 1")
    states = [s if isinstance(s, StateVector) else StateVector(s) for _, s in components]
    dims = {s.dim for s in states}
    if len(dims) != 1:
        raise InvalidMixture(f"mixture components have differing dims {sorted(dims)}")
    return weights, states


def density_from_mixture(components) -> DensityMatrix:
    """Build ``sum_i p_i |psi_i><psi_i|`` from ``(weight, state)`` pairs."""
    weights, states = _check_mixture(components)
    amps = np.stack([s.amplitudes for s in states])
    rho = (amps.T * weights) @ amps.conj()
    pure = states[0].amplitudes if len(states) == 1 else None
    return DensityMatrix(rho, _pure=pure)


def density_from_distribution(probs) -> DensityMatrix:
    """Diagonal density matrix of a computational-basis outcome distribution."""
    p = np.asarray(probs, dtype=float).reshape(-1)
    if p.size < 1 or not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidDistribution("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InvalidDistribution(f"probabilities sum to {p.sum()!r}, expected 1")
    return DensityMatrix(np.diag(p).astype(complex))


def purity(rho: DensityMatrix) -> float:
    """``Tr(rho^2)``."""
    m = rho.matrix
    return float(np.sum(np.abs(m) ** 2))


def check_same_dim(rho, sigma):
    if rho.dim != sigma.dim:
        raise DimMismatch(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
