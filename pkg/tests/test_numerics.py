"""Kernel tests: roots, eigenvalues, rank, Lyapunov, Riccati.

numpy.linalg / scipy.linalg serve as independent oracles throughout; the
implementations under test never call them.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg as sla

from balbot import model, numerics
from balbot.errors import InvalidInputError, SolverFailureError


def _sorted(vals):
    vals = np.asarray(vals, dtype=complex)
    return vals[np.lexsort((vals.imag, vals.real))]


def assert_spectra_match(got, expected, atol=1e-8, rtol=1e-8):
    got, expected = _sorted(got), _sorted(expected)
    assert got.shape == expected.shape
    scale = max(np.abs(expected).max(initial=0.0), 1.0)
    assert np.abs(got - expected).max(initial=0.0) <= atol + rtol * scale


# ---------------------------------------------------------------------------
# poly_roots
# ---------------------------------------------------------------------------

def test_roots_factored_quadratic():
    roots = numerics.poly_roots([1.0, 0.0, -1.0])  # s^2 - 1
    assert_spectra_match(roots, [-1.0, 1.0])


def test_roots_position_loop_denominator(reference_tf):
    # Open-loop denominator of the stabilized position loop: one exact
    # integrator root plus three strictly stable roots.
    den = np.array(reference_tf["den"])
    roots = numerics.poly_roots(den)
    assert roots.shape == (4,)
    assert np.abs(roots).min() == 0.0  # trailing zero factors out exactly
    others = roots[np.abs(roots) > 0]
    assert np.all(others.real < 0)
    assert_spectra_match(roots, np.roots(den), atol=1e-7)


def test_roots_clustered_triple():
    coeffs = [1.0, 3.0, 3.0, 1.0]  # (s+1)^3
    roots = numerics.poly_roots(coeffs)
    assert_allclose(roots, [-1.0, -1.0, -1.0], atol=1e-4)


def test_roots_residual_bound():
    rng = np.random.default_rng(7)
    for _ in range(50):
        deg = rng.integers(1, 7)
        coeffs = rng.normal(size=deg + 1)
        coeffs[0] = coeffs[0] if abs(coeffs[0]) > 0.1 else 1.0
        roots = numerics.poly_roots(coeffs)
        assert roots.shape == (deg,)
        resid = np.abs(numerics.polyval(coeffs, roots))
        assert resid.max(initial=0.0) <= 1e-7 * np.linalg.norm(coeffs)


def test_roots_roundtrip_random_root_sets():
    rng = np.random.default_rng(42)
    for _ in range(60):
        n = rng.integers(1, 7)
        roots = rng.uniform(-3, 3, size=n).astype(complex)
        # Promote some pairs to complex conjugates.
        i = 0
        while i + 1 < n:
            if rng.random() < 0.4:
                im = rng.uniform(0.1, 2.0)
                roots[i] = complex(roots[i].real, im)
                roots[i + 1] = roots[i].conjugate()
                i += 2
            else:
                i += 1
        coeffs = np.real(numerics.poly_from_roots(roots))
        got = numerics.poly_roots(coeffs)
        assert_spectra_match(got, roots, atol=1e-6, rtol=1e-6)


def test_roots_degenerate_inputs():
    with pytest.raises(InvalidInputError):
        numerics.poly_roots([0.0, 0.0])
    with pytest.raises(InvalidInputError):
        numerics.poly_roots([5.0])
    with pytest.raises(InvalidInputError):
        numerics.poly_roots([0.0, 1.0, 2.0])


# ---------------------------------------------------------------------------
# eigenvalues
# ---------------------------------------------------------------------------

def test_eigenvalues_identity():
    assert_spectra_match(numerics.eigenvalues(np.eye(3)), [1.0, 1.0, 1.0])


def test_eigenvalues_unstable_plant(reference_params):
    sys = model.linearize(reference_params)
    eigs = numerics.eigenvalues(sys.A)
    assert eigs.real.max() > 0  # upright equilibrium is unstable


def test_eigenvalues_companion_cross_check():
    comp = numerics.companion([1.0, 0.0, -1.0])
    assert_spectra_match(numerics.eigenvalues(comp),
                         numerics.poly_roots([1.0, 0.0, -1.0]))


def test_eigenvalues_trace_and_det_invariants():
    rng = np.random.default_rng(3)
    for _ in range(120):
        n = rng.integers(1, 6)
        M = rng.normal(size=(n, n))
        eigs = numerics.eigenvalues(M)
        scale = max(np.linalg.norm(M), 1.0)
        assert abs(eigs.sum().real - np.trace(M)) <= 1e-8 * scale
        assert abs(eigs.sum().imag) <= 1e-8 * scale
        det = np.linalg.det(M)
        assert abs(np.prod(eigs) - det) <= 1e-7 * max(abs(det), scale ** n)


def test_eigenvalues_match_lapack_random():
    rng = np.random.default_rng(11)
    for k in range(200):
        n = int(rng.integers(1, 9))
        M = rng.normal(size=(n, n)) * rng.choice([1e-2, 1.0, 1e3])
        if k % 4 == 0:
            M = M + M.T          # symmetric
        if k % 7 == 0:
            M = np.triu(M)       # repeated structure, defective-ish
        expected = np.linalg.eigvals(M)
        got = numerics.eigenvalues(M)
        scale = max(np.abs(expected).max(initial=0.0), 1.0)
        assert_spectra_match(got, expected, atol=1e-6 * scale, rtol=1e-7)


def test_eigenvalues_conjugate_pairing():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        M = rng.normal(size=(n, n))
        eigs = numerics.eigenvalues(M)
        nonreal = eigs[np.abs(eigs.imag) > 0]
        leftover = list(nonreal)
        while leftover:
            z = leftover.pop()
            match = min(leftover, key=lambda w: abs(w - z.conjugate()),
                        default=None)
            assert match is not None and abs(match - z.conjugate()) <= 1e-9
            leftover.remove(match)


def test_eigenvalues_rejects_nonsquare():
    with pytest.raises(InvalidInputError):
        numerics.eigenvalues(np.ones((2, 3)))


# ---------------------------------------------------------------------------
# matrix_rank
# ---------------------------------------------------------------------------

def test_rank_zero_matrix():
    assert numerics.matrix_rank(np.zeros((4, 4)), tol=1e-10) == 0


def test_rank_controllability_matrix(reference_params):
    sys = model.linearize(reference_params)
    A, B = sys.A, sys.B
    Co = np.hstack([B, A @ B, A @ A @ B, A @ A @ A @ B])
    assert numerics.matrix_rank(Co, tol=1e-10) == 4


def test_rank_outer_product():
    rng = np.random.default_rng(2)
    u, v = rng.normal(size=4), rng.normal(size=4)
    assert numerics.matrix_rank(np.outer(u, v), tol=1e-10) == 1


def test_rank_matches_numpy_random():
    rng = np.random.default_rng(9)
    for _ in range(60):
        rows, cols = rng.integers(1, 7, size=2)
        r = int(rng.integers(0, min(rows, cols) + 1))
        M = rng.normal(size=(rows, r)) @ rng.normal(size=(r, cols)) if r else \
            np.zeros((rows, cols))
        assert numerics.matrix_rank(M, tol=1e-10) == np.linalg.matrix_rank(M)


def test_rank_requires_positive_tol():
    with pytest.raises(InvalidInputError):
        numerics.matrix_rank(np.eye(2), tol=0.0)


# ---------------------------------------------------------------------------
# Lyapunov / CARE
# ---------------------------------------------------------------------------

def test_lyapunov_residual_random_stable():
    rng = np.random.default_rng(4)
    for _ in range(40):
        n = int(rng.integers(1, 7))
        A = rng.normal(size=(n, n)) - (n + 2) * np.eye(n)
        Qh = rng.normal(size=(n, n))
        Q = Qh @ Qh.T
        X = numerics.solve_lyapunov(A, Q)
        resid = A.T @ X + X @ A + Q
        assert np.linalg.norm(resid) <= 1e-9 * max(1.0, np.linalg.norm(X))
        assert_allclose(X, X.T, atol=1e-12)


def test_care_scalar_analytic():
    # a=0, b=1, q=1, r=1: 2aP - P^2 b^2/r + q = 0 -> P = 1
    P = numerics.solve_care(np.array([[0.0]]), np.array([[1.0]]),
                            np.array([[1.0]]), np.array([[1.0]]))
    assert_allclose(P, [[1.0]], rtol=1e-10)


def test_care_reproduces_reference_lqr3_gains(reference_params,
                                              reference_gains):
    sys = model.linearize(reference_params)
    idx = [1, 2, 3]
    A3 = sys.A[np.ix_(idx, idx)]
    B3 = sys.B[idx, :]
    spec = reference_gains["lqr3"]
    Q = np.diag(spec["Q"])
    R = np.array([[spec["R"]]])
    P = numerics.solve_care(A3, B3, Q, R)
    k = np.linalg.solve(R, B3.T @ P).ravel()
    assert_allclose(k, spec["k"], rtol=spec["tolerance_rel"])


def test_care_residual_random_stable():
    rng = np.random.default_rng(6)
    for _ in range(25):
        n = int(rng.integers(1, 6))
        A = rng.normal(size=(n, n)) - (n + 2) * np.eye(n)
        B = rng.normal(size=(n, rng.integers(1, 3)))
        P = numerics.solve_care(A, B, np.eye(n), np.eye(B.shape[1]))
        assert numerics.care_residual(A, B, np.eye(n), np.eye(B.shape[1]), P) \
            <= 1e-8 * max(1.0, np.linalg.norm(P))
        assert_allclose(P, P.T, atol=1e-10)
        Acl = A - B @ np.linalg.solve(np.eye(B.shape[1]), B.T @ P)
        assert numerics.eigenvalues(Acl).real.max() < 0


def test_care_matches_scipy_unstable_plant(reference_params):
    sys = model.linearize(reference_params)
    Q = np.diag([1.0, 0.01, 1.0, 0.01])
    R = np.array([[100.0]])
    P = numerics.solve_care(sys.A, sys.B, Q, R)
    P_ref = sla.solve_continuous_are(sys.A, sys.B, Q, R)
    assert_allclose(P, P_ref, rtol=1e-6, atol=1e-9 * np.linalg.norm(P_ref))


def test_care_rejects_unstabilizable_pair():
    A = np.diag([1.0, 2.0])
    B = np.array([[1.0], [0.0]])  # the +2 mode is unreachable
    with pytest.raises(SolverFailureError):
        numerics.solve_care(A, B, np.eye(2), np.eye(1))


def test_care_rejects_indefinite_r():
    with pytest.raises(InvalidInputError):
        numerics.solve_care(np.array([[0.0]]), np.array([[1.0]]),
                            np.array([[1.0]]), np.array([[-1.0]]))


def test_care_carries_residual_on_failure():
    A = np.diag([1.0, 2.0])
    B = np.array([[1.0], [0.0]])
    try:
        numerics.solve_care(A, B, np.eye(2), np.eye(1))
    except SolverFailureError:
        pass  # residual attribute may be None when no iterate exists yet
    else:
        pytest.fail("expected SolverFailureError")
