"""Small dense linear-algebra and polynomial kernels.

Every matrix in this project is tiny (n <= 8), so the solvers below favor
textbook-reliable algorithms over performance:

* eigenvalues : balancing + Householder Hessenberg reduction + Francis
  double-shift QR iteration.  Real input yields exactly conjugate-paired
  complex eigenvalues because complex values only ever come out of 2x2
  trailing blocks.
* poly_roots  : eigenvalues of the (balanced) companion matrix.
* solve_care  : Newton-Kleinman iteration (one Lyapunov solve per step),
  started from a stabilizing gain constructed by Bass' method.
* matrix_rank : elimination with full pivoting against a threshold scaled
  by the largest singular value.

Inputs and outputs are plain numpy arrays: a matrix is a 2-D float array
(row-major), a polynomial a 1-D float array of coefficients in descending
degree, and a set of eigenvalues a 1-D complex array.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, SolverFailureError

# Default tolerances; every operation accepts an override.
EIG_MAX_ITER_PER_VALUE = 40
CARE_RESIDUAL_TOL = 1e-8
CARE_MAX_ITER = 60
RANK_TOL = 1e-10
CONJUGATE_PAIR_TOL = 1e-9

_EPS = np.finfo(float).eps


def _as_matrix(M, name="matrix"):
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


def _as_square(M, name="matrix"):
    A = _as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {A.shape}")
    return A


# ---------------------------------------------------------------------------
# eigenvalues
# ---------------------------------------------------------------------------

def _balance(A):
    """Parlett-Reinsch balancing: scale rows/cols by powers of 2 in place."""
    n = A.shape[0]
    radix = 2.0
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(A[:, i])) - abs(A[i, i])
            r = np.sum(np.abs(A[i, :])) - abs(A[i, i])
            if c == 0.0 or r == 0.0:
                continue
            f = 1.0
            s = c + r
            while c < r / radix:
                c *= radix
                r /= radix
                f *= radix
            while c > r * radix:
                c /= radix
                r *= radix
                f /= radix
            if (c + r) < 0.95 * s:
                done = False
                A[i, :] /= f
                A[:, i] *= f
    return A


def _hessenberg(A):
    """Reduce to upper Hessenberg form by Householder similarity."""
    H = A.copy()
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k]
        nx = np.linalg.norm(x)
        if nx <= _EPS * np.linalg.norm(H):
            H[k + 2:, k] = 0.0
            continue
        v = x.copy()
        v[0] += np.copysign(nx, x[0] if x[0] != 0.0 else 1.0)
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _eig_2x2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]] with exact conjugate pairing."""
    tr = a + d
    det = a * d - b * c
    disc = 0.25 * tr * tr - det
    if disc >= 0.0:
        rt = np.sqrt(disc)
        # Stable formula: bigger root first, second from the product.
        r1 = 0.5 * tr + np.copysign(rt, tr if tr != 0.0 else 1.0)
        r2 = det / r1 if r1 != 0.0 else 0.5 * tr - np.copysign(rt, 1.0)
        return [complex(r1), complex(r2)]
    im = np.sqrt(-disc)
    return [complex(0.5 * tr, im), complex(0.5 * tr, -im)]


def _reflector(col):
    """Householder unit vector annihilating all but the first entry."""
    nx = np.linalg.norm(col)
    if nx == 0.0:
        return None
    v = col.copy()
    v[0] += np.copysign(nx, col[0] if col[0] != 0.0 else 1.0)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return None
    return v / nv


def _francis_sweep(H, lo, hi, s, t):
    """One implicit double-shift QR sweep on the active block [lo, hi]."""
    x = H[lo, lo] * H[lo, lo] + H[lo, lo + 1] * H[lo + 1, lo] - s * H[lo, lo] + t
    y = H[lo + 1, lo] * (H[lo, lo] + H[lo + 1, lo + 1] - s)
    z = H[lo + 2, lo + 1] * H[lo + 1, lo] if lo + 2 <= hi else 0.0
    for k in range(lo, hi - 1):
        last = min(k + 2, hi)
        v = _reflector(np.array([x, y, z][: last - k + 1]))
        if v is not None:
            rows = slice(k, last + 1)
            H[rows, :] -= 2.0 * np.outer(v, v @ H[rows, :])
            H[:, rows] -= 2.0 * np.outer(H[:, rows] @ v, v)
        if k > lo:
            H[k + 1:, k - 1] = 0.0
        x = H[k + 1, k]
        y = H[k + 2, k] if k + 2 <= hi else 0.0
        z = H[k + 3, k] if k + 3 <= hi else 0.0
    # Final 2x2 reflector on rows (hi-1, hi).
    v = _reflector(np.array([x, y]))
    if v is not None:
        rows = slice(hi - 1, hi + 1)
        H[rows, :] -= 2.0 * np.outer(v, v @ H[rows, :])
        H[:, rows] -= 2.0 * np.outer(H[:, rows] @ v, v)
    if hi - 2 >= lo:
        H[hi:, hi - 2] = 0.0


def eigenvalues(M, max_iter_per_value=EIG_MAX_ITER_PER_VALUE):
    """All eigenvalues of a square real matrix (n <= 8 by design).

    Returns a complex array sorted by (real, imag).  For real input the
    non-real values occur in exact conjugate pairs.  Raises
    InvalidInputError on non-square input and SolverFailureError if the QR
    iteration stalls (does not happen for the sizes this package uses).
    """
    A = _as_square(M)
    n = A.shape[0]
    if n == 0:
        return np.empty(0, dtype=complex)
    if n == 1:
        return np.array([complex(A[0, 0])])
    H = _hessenberg(_balance(A.copy()))
    hnorm = max(np.linalg.norm(H), 1.0)
    eigs = []
    hi = n - 1
    iters = 0
    while hi >= 0:
        # Deflate negligible subdiagonals.
        for i in range(1, hi + 1):
            thresh = _EPS * (abs(H[i - 1, i - 1]) + abs(H[i, i]))
            if thresh == 0.0:
                thresh = _EPS * hnorm
            if abs(H[i, i - 1]) <= thresh:
                H[i, i - 1] = 0.0
        if hi == 0 or H[hi, hi - 1] == 0.0:
            eigs.append(complex(H[hi, hi]))
            hi -= 1
            iters = 0
            continue
        if hi == 1 or H[hi - 1, hi - 2] == 0.0:
            eigs.extend(_eig_2x2(H[hi - 1, hi - 1], H[hi - 1, hi],
                                 H[hi, hi - 1], H[hi, hi]))
            hi -= 2
            iters = 0
            continue
        lo = hi
        while lo > 0 and H[lo, lo - 1] != 0.0:
            lo -= 1
        iters += 1
        if iters > max_iter_per_value:
            raise SolverFailureError(
                f"QR iteration did not converge after {iters} sweeps "
                f"on a block of size {hi - lo + 1}")
        if iters % 10 == 0:
            # Exceptional shift breaks symmetry-induced stalls.
            w = abs(H[hi, hi - 1]) + abs(H[hi - 1, hi - 2])
            s = H[hi, hi] + 0.75 * w
            t = s * s - 0.4375 * w * w
            s = 2.0 * s
        else:
            # Shifts are the eigenvalues of the trailing 2x2 block.
            s = H[hi - 1, hi - 1] + H[hi, hi]
            t = (H[hi - 1, hi - 1] * H[hi, hi]
                 - H[hi - 1, hi] * H[hi, hi - 1])
        _francis_sweep(H, lo, hi, s, t)
    eigs = np.array(eigs, dtype=complex)
    return eigs[np.lexsort((eigs.imag, eigs.real))]


# ---------------------------------------------------------------------------
# polynomial helpers and roots
# ---------------------------------------------------------------------------

def polyval(coeffs, x):
    """Horner evaluation of a descending-degree coefficient array."""
    acc = 0.0 * x
    for c in np.asarray(coeffs).ravel():
        acc = acc * x + c
    return acc


def poly_from_roots(roots):
    """Expand a root set into monic descending-degree coefficients."""
    coeffs = np.array([1.0], dtype=complex)
    for r in np.asarray(roots).ravel():
        coeffs = np.convolve(coeffs, np.array([1.0, -r]))
    if np.abs(coeffs.imag).max(initial=0.0) < 1e-9 * max(np.abs(coeffs).max(), 1.0):
        return coeffs.real
    return coeffs


def companion(coeffs):
    """Companion matrix of a polynomial, leading coefficient nonzero."""
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size < 2:
        raise InvalidInputError("polynomial must have degree >= 1")
    if c[0] == 0.0:
        raise InvalidInputError("leading coefficient must be nonzero")
    monic = c[1:] / c[0]
    n = monic.size
    C = np.zeros((n, n))
    C[0, :] = -monic
    C[1:, :-1] = np.eye(n - 1)
    return C


def poly_roots(coeffs):
    """Roots of a real polynomial via its balanced companion matrix.

    Coefficients are descending degree; the leading coefficient must be
    nonzero and the degree at least one.  Returns exactly `degree` roots.
    """
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0 or not np.any(c):
        raise InvalidInputError("zero polynomial has no well-defined roots")
    if c.size < 2:
        raise InvalidInputError("constant polynomial has no roots")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("polynomial coefficients must be finite")
    if c[0] == 0.0:
        raise InvalidInputError("leading coefficient must be nonzero")
    # Trailing zero coefficients factor out as exact roots at the origin.
    nz = np.nonzero(c)[0][-1]
    zeros_at_origin = c.size - 1 - nz
    core = c[: nz + 1]
    roots = []
    if core.size >= 2:
        roots = list(eigenvalues(companion(core)))
    roots.extend([0j] * zeros_at_origin)
    out = np.array(roots, dtype=complex)
    return out[np.lexsort((out.imag, out.real))]


def resolvent_expansion(A):
    """Faddeev-LeVerrier expansion of (sI - A)^-1.

    Returns (d, N) with d the monic characteristic polynomial
    [1, d1, ..., dn] and N the list [N_1, ..., N_n] such that

        (sI - A)^-1 = (N_1 s^(n-1) + ... + N_n) / charpoly(s).
    """
    A = _as_square(A)
    n = A.shape[0]
    d = np.empty(n + 1)
    d[0] = 1.0
    N = [np.eye(n)]
    d[1] = -np.trace(A)
    for k in range(1, n):
        Nk = A @ N[-1] + d[k] * np.eye(n)
        N.append(Nk)
        d[k + 1] = -np.trace(A @ Nk) / (k + 1)
    return d, N


def charpoly(A):
    """Monic characteristic polynomial coefficients of a square matrix."""
    return resolvent_expansion(A)[0]


# ---------------------------------------------------------------------------
# rank
# ---------------------------------------------------------------------------

def largest_singular_value(M):
    """sigma_max via the Gram matrix and the QR eigensolver."""
    A = _as_matrix(M)
    if A.size == 0:
        return 0.0
    G = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    lam = max(eigenvalues(G).real.max(), 0.0)
    return float(np.sqrt(lam))


def matrix_rank(M, tol=RANK_TOL):
    """Numerical rank by full-pivot elimination.

    Pivots are counted while they exceed tol * sigma_max(M).
    """
    if tol <= 0.0:
        raise InvalidInputError("tol must be positive")
    A = _as_matrix(M).copy()
    smax = largest_singular_value(A)
    if smax == 0.0:
        return 0
    thresh = tol * smax
    rank = 0
    rows, cols = A.shape
    for _ in range(min(rows, cols)):
        sub = np.abs(A[rank:, rank:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= thresh:
            break
        A[[rank, rank + i], :] = A[[rank + i, rank], :]
        A[:, [rank, rank + j]] = A[:, [rank + j, rank]]
        pivot = A[rank, rank]
        factors = A[rank + 1:, rank] / pivot
        A[rank + 1:, rank:] -= np.outer(factors, A[rank, rank:])
        rank += 1
        if rank == min(rows, cols):
            break
    return rank


# ---------------------------------------------------------------------------
# Lyapunov and Riccati
# ---------------------------------------------------------------------------

def solve_lyapunov(A, Q):
    """Solve A' X + X A + Q = 0 by Kronecker vectorization.

    A must have no pair of eigenvalues summing to zero (true whenever A is
    Hurwitz, which is how the CARE iteration uses it).
    """
    A = _as_square(A, "A")
    Q = _as_square(Q, "Q")
    n = A.shape[0]
    if Q.shape[0] != n:
        raise InvalidInputError("A and Q must have matching shapes")
    eye = np.eye(n)
    K = np.kron(eye, A.T) + np.kron(A.T, eye)
    try:
        vec = np.linalg.solve(K, -Q.reshape(n * n, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SolverFailureError(f"Lyapunov system is singular: {exc}") from exc
    X = vec.reshape((n, n), order="F")
    return 0.5 * (X + X.T)


def care_residual(A, B, Q, R, P):
    """Frobenius norm of A'P + PA - P B R^-1 B' P + Q."""
    RiBt = np.linalg.solve(R, B.T)
    res = A.T @ P + P @ A - P @ B @ RiBt @ P + Q
    return float(np.linalg.norm(res))


def _is_hurwitz(A, margin=0.0):
    return bool(np.all(eigenvalues(A).real < -margin))


def stabilizing_gain(A, B):
    """Some gain K with A - B K Hurwitz (Bass' construction).

    Solves (A + beta I) Z + Z (A + beta I)' = 2 B B' with beta > rho(A);
    K = B' Z^-1 then renders A - B K Hurwitz for controllable (A, B).
    The result is verified before being returned.
    """
    A = _as_square(A, "A")
    B = _as_matrix(B, "B")
    if _is_hurwitz(A):
        return np.zeros((B.shape[1], A.shape[0]))
    beta = 1.0 + np.linalg.norm(A)
    Z = solve_lyapunov((A + beta * np.eye(A.shape[0])).T, -2.0 * B @ B.T)
    try:
        K = np.linalg.solve(Z.T, B).T
    except np.linalg.LinAlgError as exc:
        raise SolverFailureError(
            f"pair (A, B) appears not to be stabilizable: {exc}") from exc
    if not _is_hurwitz(A - B @ K):
        raise SolverFailureError("pair (A, B) appears not to be stabilizable")
    return K


def solve_care(A, B, Q, R, tol=CARE_RESIDUAL_TOL, max_iter=CARE_MAX_ITER):
    """Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0.

    Newton-Kleinman iteration: starting from a stabilizing gain K0, each
    step solves the Lyapunov equation of the current closed loop and
    refreshes the gain.  Acceptance is by residual: the returned P is
    symmetric PSD with relative residual below `tol` and A - B R^-1 B' P
    Hurwitz, otherwise SolverFailureError (carrying the final residual).
    """
    A = _as_square(A, "A")
    B = _as_matrix(B, "B")
    Q = _as_square(Q, "Q")
    R = _as_square(R, "R")
    n, m = B.shape
    if A.shape[0] != n or Q.shape[0] != n or R.shape[0] != m:
        raise InvalidInputError("A, B, Q, R have inconsistent shapes")
    if np.linalg.norm(Q - Q.T) > 1e-9 * max(1.0, np.linalg.norm(Q)):
        raise InvalidInputError("Q must be symmetric")
    if np.linalg.norm(R - R.T) > 1e-9 * max(1.0, np.linalg.norm(R)):
        raise InvalidInputError("R must be symmetric")
    if not np.all(eigenvalues(R).real > 0.0):
        raise InvalidInputError("R must be positive definite")

    K = stabilizing_gain(A, B)
    P = None
    residual = np.inf
    for _ in range(max_iter):
        Acl = A - B @ K
        P = solve_lyapunov(Acl, Q + K.T @ R @ K)
        K = np.linalg.solve(R, B.T @ P)
        residual = care_residual(A, B, Q, R, P)
        if residual <= tol * max(1.0, np.linalg.norm(P)):
            break
    else:
        raise SolverFailureError(
            f"Riccati iteration stopped after {max_iter} steps "
            f"with residual {residual:.3e}", residual=residual)
    P = 0.5 * (P + P.T)
    if not _is_hurwitz(A - B @ np.linalg.solve(R, B.T @ P)):
        raise SolverFailureError(
            "Riccati solution does not stabilize the closed loop",
            residual=residual)
    return P
