"""Exact PCA standard deviations from the covariance eigenvalues."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..comm import Communicator
from ..dmat import RowBlockMatrix, covariance
from .linalg import NumericError, symmetric_eigenvalues

NEG_EIG_CLAMP = -1e-10


@dataclass
class PcaResult:
    sdev_first: float
    sdev_last: float
    eigenvalues: np.ndarray | None = None

    @property
    def sdev(self) -> np.ndarray | None:
        if self.eigenvalues is None:
            return None
        return np.sqrt(np.maximum(self.eigenvalues, 0.0))


def eigen_sdev(eigenvalues: np.ndarray) -> np.ndarray:
    """Square roots of covariance eigenvalues, clamping round-off negatives to zero."""
    w = np.asarray(eigenvalues, dtype=np.float64)
    if np.any(w < NEG_EIG_CLAMP):
        raise NumericError(f"covariance has a negative eigenvalue {w.min():.3e}")
    return np.sqrt(np.maximum(w, 0.0))


def pca_sdev(X: RowBlockMatrix, comm: Communicator, keep_eigenvalues: bool = False) -> PcaResult:
    """First and last principal-component standard deviations of ``X``.

    Uses the full eigenvalue spectrum of the sample covariance; no
    approximation or truncation.  The small dense eigenproblem is solved on
    rank 0 and broadcast.
    """
    C = covariance(X, comm)
    w = symmetric_eigenvalues(C) if comm.rank == 0 else None
    w = comm.broadcast(w, root=0)
    sd = eigen_sdev(w)
    return PcaResult(float(sd[0]), float(sd[-1]), w if keep_eigenvalues else None)
