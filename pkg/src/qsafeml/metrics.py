"""Quantum distance metrics between density matrices, plus the statistics
used to relate them to classifier accuracy."""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InfiniteMetric, InsufficientData, NumericalFailure, ZeroVariance
from .linalg import ZERO_CUT, eig_hermitian, mat_sqrt_psd, trace_norm
from .states import DensityMatrix, check_same_dim

TRACE_DISTANCE = "trace_distance"
FIDELITY = "fidelity"
BURES_DISTANCE = "bures_distance"
QUANTUM_RELATIVE_ENTROPY = "quantum_relative_entropy"
METRIC_KINDS = (TRACE_DISTANCE, FIDELITY, BURES_DISTANCE, QUANTUM_RELATIVE_ENTROPY)

SQRT2 = math.sqrt(2.0)
SUPPORT_TOL = 1e-9
EPS = np.finfo(float).eps

# Cross-check the general fidelity route against the pure-state overlap
# whenever one argument is known to be pure.  Enabled in tests.
shadow_checks = bool(os.environ.get("QSAFEML_SHADOW_CHECKS"))


@dataclass(frozen=True)
class MetricValue:
    """One metric evaluation.

    ``support_violation`` is only ever set for relative entropy: it marks
    that the support of the first argument is not contained in the support
    of the second.  ``smoothed`` records that the second argument was mixed
    with the maximally mixed state before evaluation.
    """

    kind: str
    value: float
    support_violation: bool = False
    smoothed: bool = False

    def __float__(self):
        return float(self.value)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> MetricValue:
    """Half the trace norm of ``rho - sigma``, in ``[0, 1]``."""
    check_same_dim(rho, sigma)
    d = 0.5 * trace_norm(rho.matrix - sigma.matrix)
    return MetricValue(TRACE_DISTANCE, min(max(d, 0.0), 1.0))


def _pure_overlap(psi, other):
    return float(np.real(np.vdot(psi, other @ psi)))


def _fidelity_value(rho, sigma):
    root = mat_sqrt_psd(rho.matrix, rank_tol="auto")
    inner = root @ sigma.matrix @ root
    inner = 0.5 * (inner + inner.conj().T)
    # round-off in the product scales with its factors, not with the result
    noise = EPS * rho.dim * np.linalg.norm(root) ** 2 * np.linalg.norm(sigma.matrix)
    f = float(np.trace(mat_sqrt_psd(inner, rank_tol=noise)).real ** 2)
    return min(max(f, 0.0), 1.0)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> MetricValue:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    Always evaluated through the two matrix square roots.  With
    ``shadow_checks`` on, the result is compared against ``<psi|other|psi>``
    when either argument carries a known pure generator.
    """
    check_same_dim(rho, sigma)
    f = _fidelity_value(rho, sigma)
    if shadow_checks:
        for pure, other in ((rho, sigma), (sigma, rho)):
            if pure.pure_vector is not None:
                expected = _pure_overlap(pure.pure_vector, other.matrix)
                if abs(expected - f) > 1e-9:
                    raise NumericalFailure(
                        f"fidelity {f!r} disagrees with pure-state overlap {expected!r}"
                    )
    return MetricValue(FIDELITY, f)


def _bures_from_fidelity(f):
    return math.sqrt(max(2.0 * (1.0 - math.sqrt(f)), 0.0))


def bures_distance(rho: DensityMatrix, sigma: DensityMatrix) -> MetricValue:
    """``sqrt(2 (1 - sqrt(F)))``, in ``[0, sqrt(2)]``."""
    f = fidelity(rho, sigma).value
    return MetricValue(BURES_DISTANCE, _bures_from_fidelity(f))


def quantum_relative_entropy(rho: DensityMatrix, sigma: DensityMatrix,
                             smoothing=None, base=None) -> MetricValue:
    """Relative entropy ``Tr(rho log rho - rho log sigma)``.

    Parameters
    ----------
    rho, sigma : DensityMatrix
    smoothing : float, optional
        If given (in ``(0, 1e-3]``), ``sigma`` is replaced by
        ``(1 - eps) sigma + eps I / d`` so the result is always finite.
    base : float, optional
        Logarithm base; natural log (nats) by default, ``2`` for bits.

    Returns
    -------
    MetricValue
        ``+inf`` with ``support_violation=True`` when the support of ``rho``
        leaks into the kernel of ``sigma`` and no smoothing was requested.
        With smoothing, ``support_violation`` still reports whether the
        unsmoothed ``sigma`` would have violated the support condition.
    """
    check_same_dim(rho, sigma)
    if smoothing is not None and not 0.0 < smoothing <= 1e-3:
        raise ValueError(f"smoothing must lie in (0, 1e-3], got {smoothing!r}")

    lam, v = eig_hermitian(rho.matrix)
    lam = np.maximum(lam, 0.0)
    keep = lam > ZERO_CUT
    lam, v = lam[keep], v[:, keep]

    def leaks(mu, w):
        kernel = w[:, mu <= ZERO_CUT]
        if kernel.shape[1] == 0:
            return False
        weight = np.sum(np.abs(kernel.conj().T @ v) ** 2, axis=0)
        return bool(np.any(weight > SUPPORT_TOL))

    mu, w = eig_hermitian(sigma.matrix)
    violation = leaks(mu, w)
    if smoothing is not None:
        d = sigma.dim
        smoothed = (1.0 - smoothing) * sigma.matrix + smoothing * np.eye(d) / d
        mu, w = eig_hermitian(smoothed)
    elif violation:
        return MetricValue(QUANTUM_RELATIVE_ENTROPY, math.inf, support_violation=True)

    mu = np.maximum(mu, 0.0)
    log_mu = np.zeros_like(mu)
    pos = mu > ZERO_CUT
    log_mu[pos] = np.log(mu[pos])
    # overlap[j, i] = |<w_j|v_i>|^2
    overlap = np.abs(w.conj().T @ v) ** 2
    cross = float(np.sum(lam * (log_mu @ overlap)))
    entropy_term = float(np.sum(lam * np.log(lam)))
    value = max(entropy_term - cross, 0.0)
    if base is not None:
        value /= math.log(base)
    return MetricValue(QUANTUM_RELATIVE_ENTROPY, value,
                       support_violation=violation, smoothed=smoothing is not None)


def all_metrics(rho, sigma, smoothing=None):
    """All four metrics for one pair, sharing the fidelity evaluation."""
    f = fidelity(rho, sigma)
    return {
        TRACE_DISTANCE: trace_distance(rho, sigma),
        FIDELITY: f,
        BURES_DISTANCE: MetricValue(BURES_DISTANCE, _bures_from_fidelity(f.value)),
        QUANTUM_RELATIVE_ENTROPY: quantum_relative_entropy(rho, sigma, smoothing),
    }


def thread_count():
    """Worker cap from ``QSAFEML_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("QSAFEML_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n < 1:
            raise ValueError(f"QSAFEML_THREADS must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def evaluate_pairs(pairs, smoothing=None, max_workers=None):
    """Evaluate :func:`all_metrics` over many pairs; output order follows input."""
    pairs = list(pairs)
    workers = max_workers or thread_count()
    if workers == 1 or len(pairs) < 2:
        return [all_metrics(r, s, smoothing) for r, s in pairs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda rs: all_metrics(rs[0], rs[1], smoothing), pairs))


def normalized_value(metric: MetricValue) -> float:
    """Map a metric onto a common ``[0, 1]`` dissimilarity scale.

    Bures is divided by sqrt(2), fidelity is complemented, and relative
    entropy is clamped at 1 (so ``+inf`` maps to 1).
    """
    v = metric.value
    if metric.kind == TRACE_DISTANCE:
        return v
    if metric.kind == FIDELITY:
        return 1.0 - v
    if metric.kind == BURES_DISTANCE:
        return v / SQRT2
    if metric.kind == QUANTUM_RELATIVE_ENTROPY:
        return min(v, 1.0)
    raise ValueError(f"unknown metric kind {metric.kind!r}")


def closeness_to_accuracy(metric: MetricValue, accuracy: float) -> float:
    """``|normalized(metric) - accuracy|``."""
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {accuracy!r}")
    if not metric.finite:
        raise InfiniteMetric(f"{metric.kind} is infinite; closeness undefined")
    return abs(normalized_value(metric) - accuracy)


def pearson_correlation(xs, ys) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise InsufficientData(f"need two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise InsufficientData("need at least two points for a correlation")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(max(r, -1.0), 1.0)
