"""Iris-based correctness checks for the three benchmark kernels.

Each check runs the same kernel its benchmark uses, distributed over the
ranks of ``comm``, and compares one metric with a fixed pass threshold.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .comm import Communicator
from .dmat import LabeledBlock, RowBlockMatrix
from .kernels import init_from_rows, kmeans_lloyd, svd_factor, svm_accuracy, svm_fit

IRIS_SHA256 = "c373a9c8310e8228225765b6c3a0f9c47f5887d0dc05f97a2ebde2f174cffbed"
IRIS_COLUMNS = ("sepal_length", "sepal_width", "petal_length", "petal_width", "species")

SVD_MAE_THRESHOLD = float(np.sqrt(np.finfo(np.float64).eps))  # sqrt(2**-52)
KMEANS_RAND_THRESHOLD = 0.75
KMEANS_SEEDS = range(1, 101)
KMEANS_MAX_ITER = 1000
SVM_ACCURACY_THRESHOLD = 0.80
SVM_MAX_ITERS = 500
MIN_RANKS = 2


@dataclass(frozen=True)
class IrisTable:
    features: np.ndarray  # (150, 4)
    species: np.ndarray  # 1 setosa, 2 versicolor, 3 virginica


@dataclass
class ValidationReport:
    test: str
    passed: bool
    metric: float
    threshold: float
    direction: str  # "<" or ">": how metric must compare to threshold

    def to_dict(self) -> dict:
        return asdict(self)

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.test:<7s} {status}  metric={self.metric:.10g}  required {self.direction} {self.threshold:.10g}"


def _report(test: str, metric: float, threshold: float, direction: str) -> ValidationReport:
    passed = metric < threshold if direction == "<" else metric > threshold
    return ValidationReport(test, bool(passed), float(metric), float(threshold), direction)


def default_iris_path() -> Path:
    return Path(str(resources.files("bdabench") / "data" / "iris.csv"))


def load_iris(path: str | Path | None = None, sha256: str | None = IRIS_SHA256) -> IrisTable:
    """Load the bundled, pre-shuffled iris table and verify its checksum."""
    path = Path(path) if path is not None else default_iris_path()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read iris table {path}: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    if sha256 is not None and digest != sha256:
        raise OSError(f"iris table {path} checksum mismatch: expected {sha256}, got {digest}")
    text = raw.decode("ascii")
    header = text.splitlines()[0].split(",")
    if tuple(header) != IRIS_COLUMNS:
        raise OSError(f"iris table {path} has unexpected header {header}")
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1)
    if data.shape != (150, 5):
        raise OSError(f"iris table {path} has shape {data.shape}, expected (150, 5)")
    return IrisTable(data[:, :4].copy(), data[:, 4].astype(np.int64))


def rand_measure(a, b) -> float:
    """Rand's agreement measure between two labelings of the same items.

    Fraction of item pairs that both labelings treat alike (same cluster in
    both, or different clusters in both), computed from the contingency table.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"label vectors differ in length ({a.size} vs {b.size})")
    n = a.size
    if n < 2:
        raise ValueError("rand_measure needs at least 2 items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        x = np.asarray(x, dtype=np.int64)
        return int(np.sum(x * (x - 1) // 2))

    total = n * (n - 1) // 2
    both = pairs(table)
    agree = total + 2 * both - pairs(table.sum(axis=1)) - pairs(table.sum(axis=0))
    return agree / total


def _require_ranks(comm: Communicator) -> None:
    if comm.size < MIN_RANKS:
        raise ValueError(f"validation runs on at least {MIN_RANKS} ranks, got {comm.size}")


def svd_reconstruction_mae(X: RowBlockMatrix, comm: Communicator, perturb: float = 0.0) -> float:
    """Factor the global matrix, rebuild this rank's rows, return the global MAE.

    ``perturb`` is added to the first reconstructed entry (rank 0 only) to
    exercise the failure path.
    """
    U, s, V = svd_factor(X.to_global(comm))
    rebuilt = (U[X.row_offset : X.row_offset + X.local_nrows] * s) @ V.T
    if perturb and comm.rank == 0:
        rebuilt[0, 0] += perturb
    err = comm.allreduce_sum(np.array([np.abs(X.local - rebuilt).sum()]))[0]
    return float(err / (X.global_nrows * X.ncols))


def validate_pca(comm: Communicator, iris: IrisTable | None = None, perturb: float = 0.0) -> ValidationReport:
    _require_ranks(comm)
    iris = iris or load_iris()
    X = RowBlockMatrix.from_global(iris.features, comm)
    return _report("PCA", svd_reconstruction_mae(X, comm, perturb), SVD_MAE_THRESHOLD, "<")


def kmeans_rand_scores(comm: Communicator, iris: IrisTable | None = None, seeds=KMEANS_SEEDS) -> list[float]:
    """Rand measure against species for one k=3 Lloyd run per seed."""
    iris = iris or load_iris()
    X = RowBlockMatrix.from_global(iris.features, comm)
    scores = []
    for seed in seeds:
        init = init_from_rows(X, 3, seed, comm)
        res = kmeans_lloyd(X, 3, init, KMEANS_MAX_ITER, comm)
        labels = np.concatenate(comm.allgather(res.labels))
        scores.append(rand_measure(labels, iris.species))
    return scores


def validate_kmeans(comm: Communicator, iris: IrisTable | None = None) -> ValidationReport:
    _require_ranks(comm)
    return _report("KMEANS", max(kmeans_rand_scores(comm, iris)), KMEANS_RAND_THRESHOLD, ">")


def iris_svm_block(comm: Communicator, iris: IrisTable | None = None) -> LabeledBlock:
    """Intercept column plus the four features; +1 for setosa, -1 otherwise."""
    iris = iris or load_iris()
    design = np.column_stack([np.ones(len(iris.species)), iris.features])
    y = np.where(iris.species == 1, 1.0, -1.0)
    X = RowBlockMatrix.from_global(design, comm)
    return LabeledBlock(X, y[X.row_offset : X.row_offset + X.local_nrows], "svm-response")


def validate_svm(comm: Communicator, iris: IrisTable | None = None) -> ValidationReport:
    _require_ranks(comm)
    data = iris_svm_block(comm, iris)
    model = svm_fit(data, comm, iters=SVM_MAX_ITERS)
    return _report("SVM", svm_accuracy(model, data, comm), SVM_ACCURACY_THRESHOLD, ">")


VALIDATORS = {"pca": validate_pca, "kmeans": validate_kmeans, "svm": validate_svm}


def validate_all(comm: Communicator, tests=("pca", "kmeans", "svm")) -> list[ValidationReport]:
    iris = load_iris()
    return [VALIDATORS[t](comm, iris) for t in tests]
