"""Dense symmetric eigensolver and thin SVD, both by Jacobi rotations.

Rotations are scheduled in round-robin ("tournament") order: each step of a
sweep pairs every index with exactly one partner, so all rotations of a step
touch disjoint rows/columns and can be applied together as array operations.
"""

from __future__ import annotations

import numpy as np

EIG_TOL = 1e-11
EIG_MAX_SWEEPS = 100
SVD_TOL = 1e-15
SVD_MAX_SWEEPS = 100


class NumericError(ArithmeticError):
    """A numerical routine failed to converge or produced an invalid value."""


def round_robin_pairs(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Index pairs for one sweep, grouped into steps of disjoint pairs.

    Every unordered pair ``(p, q)`` with ``p < q < n`` appears exactly once.
    """
    m = n + (n % 2)
    players = list(range(m))
    steps = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        if ps:
            steps.append((np.array(ps), np.array(qs)))
        players = [players[0], players[-1], *players[1:-1]]
    return steps


def _rotation(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cosine/sine of the smaller rotation angle given ``cot(2 phi) = theta``."""
    with np.errstate(over="ignore"):
        t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    return c, t * c


def _off_norm(A: np.ndarray) -> float:
    off = A.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def check_symmetric(S, rtol: float = 1e-9) -> np.ndarray:
    S = np.array(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(S))))
    asym = float(np.max(np.abs(S - S.T)))
    if asym > rtol * scale:
        raise ValueError(f"matrix is not symmetric (max |S - S^T| = {asym:.3g})")
    return 0.5 * (S + S.T)


def jacobi_eigh(S, tol: float = EIG_TOL, max_sweeps: int = EIG_MAX_SWEEPS, vectors: bool = False):
    """Eigen-decompose a symmetric matrix by cyclic Jacobi rotations.

    Convergence means the off-diagonal Frobenius norm is at most
    ``tol * ||S||_F``.  Returns ``(w, V)`` with eigenvalues in descending order
    (``V`` is ``None`` unless ``vectors``).
    """
    A = check_symmetric(S)
    n = A.shape[0]
    Vt = np.eye(n) if vectors else None
    scale = float(np.linalg.norm(A))
    steps = round_robin_pairs(n)

    off = _off_norm(A)
    sweeps = 0
    while off > tol * scale:
        if sweeps == max_sweeps:
            raise NumericError(
                f"Jacobi eigensolver did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {off:.3e}, target {tol * scale:.3e})"
            )
        for P, Q in steps:
            apq = A[P, Q]
            live = apq != 0.0
            if not live.any():
                continue
            P, Q, apq = P[live], Q[live], apq[live]
            with np.errstate(over="ignore"):
                theta = (A[Q, Q] - A[P, P]) / (2.0 * apq)
            c, s = _rotation(theta)
            c, s = c[:, None], s[:, None]
            # J^T A J for symmetric A: rotate rows, transpose, rotate rows again.
            for _ in range(2):
                Ap, Aq = A[P], A[Q]
                A[P] = c * Ap - s * Aq
                A[Q] = s * Ap + c * Aq
                A = A.T.copy()
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            if Vt is not None:
                Vp, Vq = Vt[P], Vt[Q]
                Vt[P] = c * Vp - s * Vq
                Vt[Q] = s * Vp + c * Vq
        sweeps += 1
        off = _off_norm(A)

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], (Vt[order].T.copy() if Vt is not None else None)


def symmetric_eigenvalues(S) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, descending."""
    return jacobi_eigh(S)[0]


def _complete_basis(U: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Replace the columns of ``U`` not in ``keep`` by orthonormal complements."""
    m, n = U.shape
    basis = [U[:, j] for j in range(n) if keep[j]]
    out = U.copy()
    candidates = iter(range(m))
    for j in range(n):
        if keep[j]:
            continue
        for e in candidates:
            v = np.zeros(m)
            v[e] = 1.0
            for _ in range(2):
                for b in basis:
                    v -= (b @ v) * b
            nv = np.linalg.norm(v)
            if nv > 0.5:
                v /= nv
                basis.append(v)
                out[:, j] = v
                break
        else:  # pragma: no cover - n <= m guarantees enough candidates
            raise NumericError("could not complete the left singular basis")
    return out


def svd_factor(A, tol: float = SVD_TOL, max_sweeps: int = SVD_MAX_SWEEPS):
    """Thin SVD ``A = U diag(s) V^T`` of an ``m x n`` matrix with ``m >= n``.

    One-sided (Hestenes) Jacobi: columns of a working copy of ``A`` are rotated
    pairwise until mutually orthogonal; their norms are the singular values.
    Columns belonging to zero singular values are replaced by unit vectors
    orthogonal to the rest so that ``U^T U = I`` always holds.
    """
    W = np.array(A, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {W.shape}")
    m, n = W.shape
    if m < n:
        raise ValueError(f"svd_factor needs m >= n, got {m} x {n}")
    if not np.all(np.isfinite(W)):
        raise ValueError("matrix has non-finite entries")
    V = np.eye(n)
    steps = round_robin_pairs(n)
    # columns below this squared norm are numerically zero; rotating them chases rounding noise
    negligible = (np.finfo(float).eps * np.linalg.norm(W)) ** 2

    for _sweep in range(max_sweeps):
        rotated = False
        for P, Q in steps:
            up, uq = W[:, P], W[:, Q]
            alpha = np.sum(up * up, axis=0)
            beta = np.sum(uq * uq, axis=0)
            gamma = np.sum(up * uq, axis=0)
            live = (np.abs(gamma) > tol * np.sqrt(alpha * beta)) & (np.minimum(alpha, beta) > negligible)
            if not live.any():
                continue
            rotated = True
            P, Q = P[live], Q[live]
            with np.errstate(over="ignore"):
                theta = (beta[live] - alpha[live]) / (2.0 * gamma[live])
            c, s = _rotation(theta)
            Wp, Wq = W[:, P].copy(), W[:, Q].copy()
            W[:, P] = c * Wp - s * Wq
            W[:, Q] = s * Wp + c * Wq
            Vp, Vq = V[:, P].copy(), V[:, Q].copy()
            V[:, P] = c * Vp - s * Vq
            V[:, Q] = s * Vp + c * Vq
        if not rotated:
            break
    else:
        raise NumericError(f"one-sided Jacobi SVD did not converge in {max_sweeps} sweeps")

    s = np.linalg.norm(W, axis=0)
    order = np.argsort(-s, kind="stable")
    s, W, V = s[order], W[:, order], V[:, order]
    cutoff = s[0] * max(m, n) * np.finfo(float).eps if n else 0.0
    keep = s > cutoff
    U = np.zeros((m, n))
    U[:, keep] = W[:, keep] / s[keep]
    if not keep.all():
        U = _complete_basis(U, keep)
    return U, s, V
