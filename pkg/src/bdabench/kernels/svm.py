"""Linear two-class SVM trained by Nelder-Mead on the (unregularised) hinge loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..comm import Communicator
from ..dmat import LabeledBlock, RowBlockMatrix
from .neldermead import NmParams, nelder_mead

SVM_ITERS = 500


@dataclass
class SvmModel:
    weights: np.ndarray  # weights[0] multiplies the intercept column
    final_loss: float
    iterations_run: int


def _margins(local: np.ndarray, w: np.ndarray) -> np.ndarray:
    # row-wise products and sums keep each row's value independent of blocking
    return (local * w).sum(axis=1)


def hinge_loss(w, X: RowBlockMatrix, y, comm: Communicator) -> float:
    """Global ``sum_i max(0, 1 - y_i * x_i . w)``; identical on every rank."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (X.ncols,):
        raise ValueError(f"weight vector has shape {w.shape}, expected ({X.ncols},)")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.local_nrows,):
        raise ValueError(f"{y.shape[0] if y.ndim else 0} labels for {X.local_nrows} local rows")
    local = np.maximum(0.0, 1.0 - y * _margins(X.local, w)).sum()
    return float(comm.allreduce_sum(np.array([local]))[0])


def svm_fit(
    data: LabeledBlock,
    comm: Communicator,
    iters: int = SVM_ITERS,
    params: NmParams = NmParams(),
) -> SvmModel:
    """Minimise the hinge loss from ``w = 0`` for exactly ``iters`` simplex iterations.

    There is no convergence stop.  Every rank runs the same simplex updates on
    globally reduced loss values, so the weights agree on all ranks.
    """
    y = np.asarray(data.y, dtype=np.float64)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("SVM labels must be -1 or +1")
    res = nelder_mead(lambda w: hinge_loss(w, data.X, y, comm), np.zeros(data.X.ncols), iters, params)
    return SvmModel(res.x, res.fval, res.iterations)


def svm_predict(w, local: np.ndarray) -> np.ndarray:
    # a zero margin counts as the +1 class
    return np.where(_margins(local, np.asarray(w, dtype=np.float64)) >= 0.0, 1.0, -1.0)


def svm_accuracy(model: SvmModel, data: LabeledBlock, comm: Communicator) -> float:
    """Global fraction of rows whose predicted sign matches the label."""
    w = np.asarray(model.weights, dtype=np.float64)
    if w.shape != (data.X.ncols,):
        raise ValueError(f"model has {w.size} weights for {data.X.ncols} columns")
    hits = np.count_nonzero(svm_predict(w, data.X.local) == np.asarray(data.y))
    tot = comm.allreduce_sum(np.array([hits, data.X.local_nrows], dtype=float))
    return float(tot[0] / tot[1])
