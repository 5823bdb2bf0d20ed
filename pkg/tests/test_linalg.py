import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from qsafeml.errors import InputError, NotHermitian, NotPSD, NumericalFailure
from qsafeml.linalg import eig_hermitian, mat_log_psd, mat_sqrt_psd, trace_norm

from conftest import random_density, random_hermitian, random_unitary

PLUS = np.array([[0.5, 0.5], [0.5, 0.5]])
ZERO = np.diag([1.0, 0.0])


def test_identity_spectrum():
    w, v = eig_hermitian(np.eye(2))
    np.testing.assert_allclose(w, [1, 1])
    np.testing.assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-12)


def test_diagonal_spectrum():
    w, _ = eig_hermitian(np.diag([0.75, 0.25]))
    np.testing.assert_allclose(w, [0.25, 0.75])


def test_projector_spectrum():
    # characteristic polynomial t^2 - t = 0
    w, _ = eig_hermitian(PLUS)
    np.testing.assert_allclose(w, [0.0, 1.0], atol=1e-14)


def test_random_hermitian_sweep():
    rng = np.random.default_rng(2024)
    for i in range(1000):
        n = 2 + i % 7
        a = random_hermitian(rng, n)
        w, v = eig_hermitian(a)
        assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - a)) <= 1e-10 * n
        assert np.max(np.abs(v.conj().T @ v - np.eye(n))) <= 1e-10
        assert np.all(np.diff(w) >= 0)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-10)


def test_complex_phase_matrix():
    a = np.array([[1, 2 - 1j, 0], [2 + 1j, -1, 1j], [0, -1j, 3]])
    w, _ = eig_hermitian(a)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-12)


def test_one_by_one():
    w, v = eig_hermitian([[2.5]])
    assert w.tolist() == [2.5] and v.shape == (1, 1)


@pytest.mark.parametrize("bad", [
    np.zeros((2, 3)),
    np.zeros((0, 0)),
    np.array([[np.nan, 0], [0, 1]]),
    np.array([[np.inf, 0], [0, 1]]),
])
def test_shape_and_finiteness_errors(bad):
    with pytest.raises(InputError):
        eig_hermitian(bad)


def test_not_hermitian():
    with pytest.raises(NotHermitian):
        eig_hermitian([[1, 1], [0, 1]])


def test_sweep_budget_exhausted():
    rng = np.random.default_rng(1)
    with pytest.raises(NumericalFailure):
        eig_hermitian(random_hermitian(rng, 6), max_sweeps=1)


def test_sqrt_examples():
    np.testing.assert_allclose(mat_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(mat_sqrt_psd(np.diag([0.25, 0.75])),
                               np.diag([0.5, np.sqrt(0.75)]), atol=1e-14)
    np.testing.assert_allclose(mat_sqrt_psd(PLUS), PLUS, atol=1e-14)


def test_sqrt_matches_scipy_and_squares_back():
    rng = np.random.default_rng(5)
    for n in range(2, 9):
        for rank in (n, 1):
            m = random_density(rng, n, rank)
            r = mat_sqrt_psd(m)
            np.testing.assert_allclose(r @ r, m, atol=1e-8)
            if rank == n:
                np.testing.assert_allclose(r, sla.sqrtm(m), atol=1e-8)


def test_negative_clamp_and_reject():
    np.testing.assert_allclose(mat_sqrt_psd(np.diag([1.0, -5e-11])), np.diag([1.0, 0.0]))
    with pytest.raises(NotPSD):
        mat_sqrt_psd(np.diag([1.0, -1e-6]))


def test_log_examples():
    np.testing.assert_allclose(mat_log_psd(np.eye(4)), np.zeros((4, 4)), atol=1e-15)
    np.testing.assert_allclose(mat_log_psd(np.diag([np.e, 1.0])), np.diag([1.0, 0.0]), atol=1e-14)
    np.testing.assert_allclose(mat_log_psd(np.diag([0.5, 0.5])), np.log(0.5) * np.eye(2), atol=1e-14)


def test_log_matches_scipy():
    rng = np.random.default_rng(6)
    m = random_density(rng, 5)
    np.testing.assert_allclose(mat_log_psd(m), sla.logm(m), atol=1e-8)


def test_log_support_mask():
    log_m, support, _ = mat_log_psd(np.diag([1.0, 0.0]), return_support=True)
    assert support.tolist() == [False, True]
    assert np.all(np.isfinite(log_m))


def test_trace_norm_examples():
    assert trace_norm(np.zeros((3, 3))) == 0
    assert trace_norm(np.diag([0.5, -0.5])) == pytest.approx(1.0, abs=1e-15)
    # eigenvalues of |0><0| - |+><+| are +-1/sqrt(2)
    assert trace_norm(ZERO - PLUS) == pytest.approx(np.sqrt(2), abs=1e-12)


def test_trace_norm_unitary_invariance_and_triangle():
    rng = np.random.default_rng(9)
    for i in range(200):
        n = 2 + i % 7
        a, b = random_hermitian(rng, n), random_hermitian(rng, n)
        u = random_unitary(rng, n)
        assert abs(trace_norm(a) - trace_norm(u @ a @ u.conj().T)) <= 1e-9
        assert trace_norm(a + b) <= trace_norm(a) + trace_norm(b) + 1e-9
        assert trace_norm(a) == pytest.approx(np.abs(np.linalg.eigvalsh(a)).sum(), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=6), st.integers(0, 2**31 - 1))
def test_spectrum_recovered_after_rotation(values, seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, len(values))
    a = u @ np.diag(values) @ u.conj().T
    a = (a + a.conj().T) / 2
    w, _ = eig_hermitian(a)
    scale = max(1.0, max(abs(v) for v in values))
    np.testing.assert_allclose(w, np.sort(values), atol=1e-10 * scale)
