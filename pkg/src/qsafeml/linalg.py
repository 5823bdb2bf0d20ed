"""Hermitian eigendecomposition and the matrix functions built on it.

The eigensolver is a cyclic Jacobi method using round-robin (tournament)
ordering, so that each round applies ``n // 2`` disjoint complex rotations
at once.  Matrices here are small (at most 256 x 256) and the method is
stable and easy to verify, which matters more than raw speed.
"""

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import InvalidMatrix, NotHermitian, NotPSD, NumericalFailure

HERM_TOL = 1e-10
PSD_CLAMP = 1e-10
ZERO_CUT = 1e-12
MAX_SWEEPS = 100
CONVERGENCE = 1e-14


class HermitianEigen(NamedTuple):
    """Eigenvalues (ascending) and unitary matrix of column eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(m) -> np.ndarray:
    """Coerce to a square, finite, complex 2-D array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidMatrix(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix has non-finite entries")
    return a


def hermitian_defect(m) -> float:
    """Largest absolute entry of ``m - m^dagger``."""
    a = np.asarray(m)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def _check_hermitian(m, tol=HERM_TOL) -> np.ndarray:
    a = as_matrix(m)
    defect = hermitian_defect(a)
    if defect > tol:
        raise NotHermitian(f"matrix is not Hermitian (max |m - m^H| = {defect:.3e})")
    return 0.5 * (a + a.conj().T)


@lru_cache(maxsize=None)
def _tournament(n):
    """Round-robin schedule: ``n - 1`` rounds of disjoint pairs covering all pairs."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        p, q = zip(*pairs)
        rounds.append((np.array(p), np.array(q)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_norm(a):
    off = a - np.diag(np.diagonal(a))
    return np.linalg.norm(off)


def eig_hermitian(m, herm_tol=HERM_TOL, max_sweeps=MAX_SWEEPS) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    m : array_like
        Square complex matrix, Hermitian to within ``herm_tol``.
    herm_tol : float
        Tolerance on ``max |m - m^H|``.
    max_sweeps : int
        Sweep budget; exceeding it raises :class:`NumericalFailure`.

    Returns
    -------
    HermitianEigen
        Eigenvalues in ascending order and the unitary ``V`` with
        ``m = V diag(w) V^H``.
    """
    a = _check_hermitian(m, herm_tol)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return HermitianEigen(np.real(np.diagonal(a)).copy(), v)

    target = CONVERGENCE * n * scale
    rounds = _tournament(n)
    idx = np.arange(n)
    for _ in range(max_sweeps):
        if _off_norm(a) < target:
            break
        for p, q in rounds:
            b = a[p, q]
            absb = np.abs(b)
            live = absb > 0.0
            if not np.any(live):
                continue
            app = a[p, p].real
            aqq = a[q, q].real
            safe_b = np.where(live, absb, 1.0)
            theta = (aqq - app) / (2.0 * safe_b)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = sign / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(live, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            phase = np.where(live, np.conj(b) / safe_b, 1.0)

            g = np.zeros((n, n), dtype=complex)
            g[idx, idx] = 1.0
            g[p, p] = c
            g[p, q] = s
            g[q, p] = -s * phase
            g[q, q] = c * phase
            a = g.conj().T @ a @ g
            v = v @ g
        a = 0.5 * (a + a.conj().T)
    else:
        if _off_norm(a) >= target:
            raise NumericalFailure(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps"
            )

    w = np.real(np.diagonal(a))
    order = np.argsort(w, kind="stable")
    return HermitianEigen(w[order], v[:, order])


def _psd_eigen(m, psd_clamp):
    eig = eig_hermitian(m)
    lowest = eig.eigenvalues[0]
    if lowest < -psd_clamp:
        raise NotPSD(f"matrix has eigenvalue {lowest:.6g} below -{psd_clamp:g}")
    return HermitianEigen(np.maximum(eig.eigenvalues, 0.0), eig.eigenvectors)


def _from_spectrum(vecs, values):
    return (vecs * values) @ vecs.conj().T


def numerical_rank_tol(eigenvalues) -> float:
    """Eigenvalue magnitude indistinguishable from round-off."""
    w = np.asarray(eigenvalues)
    return w.size * np.finfo(float).eps * float(np.max(np.abs(w), initial=0.0))


def mat_sqrt_psd(m, psd_clamp=PSD_CLAMP, rank_tol=0.0) -> np.ndarray:
    """Principal square root of a Hermitian positive-semidefinite matrix.

    Eigenvalues in ``[-psd_clamp, 0)`` are treated as round-off and clamped
    to zero; anything more negative raises :class:`NotPSD`.  Passing
    ``rank_tol="auto"`` (or a number) also zeroes eigenvalues at or below
    that cut, which keeps the square root of round-off noise (~1e-8) out of
    rank-deficient inputs.
    """
    w, vecs = _psd_eigen(m, psd_clamp)
    if rank_tol == "auto":
        rank_tol = numerical_rank_tol(w)
    if rank_tol:
        w = np.where(w > rank_tol, w, 0.0)
    return _from_spectrum(vecs, np.sqrt(w))


def mat_log_psd(m, psd_clamp=PSD_CLAMP, zero_cut=ZERO_CUT, return_support=False):
    """Natural logarithm of a PSD matrix restricted to its support.

    Eigenvalues at or below ``zero_cut`` map to 0 rather than ``-inf``.
    With ``return_support=True`` a tuple ``(log_m, support, eigen)`` is
    returned, where ``support`` is a boolean mask over ``eigen.eigenvalues``
    marking eigenvalues above ``zero_cut``.
    """
    eig = _psd_eigen(m, psd_clamp)
    support = eig.eigenvalues > zero_cut
    logs = np.zeros_like(eig.eigenvalues)
    logs[support] = np.log(eig.eigenvalues[support])
    log_m = _from_spectrum(eig.eigenvectors, logs)
    if return_support:
        return log_m, support, eig
    return log_m


def trace_norm(m) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.sum(np.abs(eig_hermitian(m).eigenvalues)))
