"""Distributed Lloyd's algorithm."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..comm import Communicator
from ..dmat import RowBlockMatrix


@dataclass
class KmeansResult:
    centroids: np.ndarray
    labels: np.ndarray  # local rows only
    iterations_run: int
    converged: bool
    wcss_history: list[float] = field(default_factory=list)

    @property
    def wcss(self) -> float:
        return self.wcss_history[-1] if self.wcss_history else float("nan")


def squared_distances(local: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """``(rows, k)`` squared Euclidean distances, computed row by row.

    Differences are formed explicitly (no ``|x|^2 - 2 x.c + |c|^2`` expansion) so
    each row's distances do not depend on how rows are blocked across ranks.
    """
    out = np.empty((local.shape[0], centroids.shape[0]))
    for j, c in enumerate(centroids):
        diff = local - c
        out[:, j] = (diff * diff).sum(axis=1)
    return out


def assign(local: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum: ties go to the lowest cluster index
    return np.argmin(squared_distances(local, centroids), axis=1)


def _update(X: RowBlockMatrix, labels: np.ndarray, centroids: np.ndarray, comm: Communicator):
    k, p = centroids.shape
    buf = np.zeros((k, p + 1))
    for j in range(k):
        rows = X.local[labels == j]
        buf[j, :p] = rows.sum(axis=0)
        buf[j, p] = rows.shape[0]
    buf = comm.allreduce_sum(buf)
    counts = buf[:, p]
    new = centroids.copy()
    filled = counts > 0
    # empty clusters keep their previous centroid
    new[filled] = buf[filled, :p] / counts[filled, None]
    return new


def _wcss(X: RowBlockMatrix, labels: np.ndarray, centroids: np.ndarray, comm: Communicator) -> float:
    diff = X.local - centroids[labels]
    return float(comm.allreduce_sum(np.array([np.sum(diff * diff)]))[0])


def init_from_rows(X: RowBlockMatrix, k: int, seed: int, comm: Communicator) -> np.ndarray:
    """Initial centroids: ``k`` distinct rows chosen by a seeded random permutation.

    Rows are taken in permutation order, skipping any row equal to one already
    chosen, so the ``k`` centroids are always distinct points when the data has
    at least ``k`` distinct rows.
    """
    n = X.global_nrows
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows ({n})")
    perm = np.random.default_rng(seed).permutation(n)
    chosen: list[np.ndarray] = []
    lo, hi = X.row_offset, X.row_offset + X.local_nrows
    pos = 0
    while len(chosen) < k:
        need = k - len(chosen)
        idx = perm[pos : pos + need]
        if idx.size == 0:
            raise ValueError(f"data has fewer than {k} distinct rows")
        pos += need
        buf = np.zeros((idx.size, X.ncols))
        mine = (idx >= lo) & (idx < hi)
        buf[mine] = X.local[idx[mine] - lo]
        rows = comm.allreduce_sum(buf)
        for r in rows:
            if not any(np.array_equal(r, c) for c in chosen):
                chosen.append(r)
    return np.array(chosen)


def kmeans_lloyd(
    X: RowBlockMatrix,
    k: int,
    init_centroids,
    max_iter: int,
    comm: Communicator,
) -> KmeansResult:
    """Lloyd iterations until no label changes globally or ``max_iter`` is hit.

    Each iteration assigns every row to its nearest centroid and then replaces
    the centroids by the global means of their rows (per-cluster sums and
    counts are combined with one all-reduce).  The returned centroids are the
    means of the returned labels.
    """
    C = np.array(init_centroids, dtype=np.float64)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if k > X.global_nrows:
        raise ValueError(f"k={k} exceeds the number of rows ({X.global_nrows})")
    if C.shape != (k, X.ncols):
        raise ValueError(f"init_centroids has shape {C.shape}, expected {(k, X.ncols)}")
    if not np.all(np.isfinite(C)):
        raise ValueError("init_centroids must be finite")

    labels = None
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = assign(X.local, C)
        if labels is None:
            changed = X.global_nrows
        else:
            changed = comm.allreduce_sum(np.array([np.count_nonzero(new != labels)], dtype=float))[0]
        labels = new
        C = _update(X, labels, C, comm)
        history.append(_wcss(X, labels, C, comm))
        if changed == 0:
            converged = True
            break
    return KmeansResult(C, labels, it, converged, history)
