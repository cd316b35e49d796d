"""Row-block distributed dense matrices and synthetic benchmark data.

Random numbers come from Philox4x64-10 (numpy's ``Philox`` bit generator),
a counter-based generator.  Each row consumes a fixed block of 64-bit words:

* word 0 selects the row's class (mixture component) for KMEANS/SVM data;
* the following ``2 * ceil(ncols / 2)`` words feed a Box-Muller transform,
  two uniforms per pair of standard normals;
* the block is padded to a multiple of four words so every row starts on a
  Philox counter boundary.

In ``replicated`` mode the generator key is the seed and row ``i`` starts at
counter ``i * words_per_row / 4``, so the global dataset does not depend on the
number of ranks.  In ``per-rank`` mode the key is ``seed XOR rank`` and each
rank's stream starts at counter zero.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .comm import Communicator

_U64 = (1 << 64) - 1
_CHUNK_ROWS = 8192

KMEANS_MEANS = (0.0, 2.0, 10.0)
SVM_MEANS = (0.0, 2.0)


class Workload(str, enum.Enum):
    PCA = "PCA"
    KMEANS = "KMEANS"
    SVM = "SVM"

    @classmethod
    def parse(cls, value: "str | Workload") -> "Workload":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown workload {value!r}; expected one of pca, kmeans, svm") from None


class GenMode(str, enum.Enum):
    PER_RANK = "per-rank"
    REPLICATED = "replicated"

    @classmethod
    def parse(cls, value: "str | GenMode") -> "GenMode":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        if v in ("per-rank-stream", "per_rank"):
            v = "per-rank"
        if v in ("replicated-by-row-index", "replicated_by_row_index"):
            v = "replicated"
        try:
            return cls(v)
        except ValueError:
            raise ValueError(f"unknown generation mode {value!r}") from None


def partition(nrows: int, size: int, rank: int) -> tuple[int, int]:
    """Return ``(row_offset, local_rows)`` for a contiguous block layout.

    The first ``nrows % size`` ranks get one extra row.
    """
    base, extra = divmod(nrows, size)
    count = base + (1 if rank < extra else 0)
    offset = rank * base + min(rank, extra)
    return offset, count


@dataclass
class RowBlockMatrix:
    """The rows ``[row_offset, row_offset + len(local))`` of a global matrix."""

    local: np.ndarray
    ncols: int
    global_nrows: int
    row_offset: int

    def __post_init__(self):
        self.local = np.ascontiguousarray(self.local, dtype=np.float64)
        if self.local.ndim != 2 or self.local.shape[1] != self.ncols:
            raise ValueError(f"local block shape {self.local.shape} does not have {self.ncols} columns")

    @property
    def local_nrows(self) -> int:
        return self.local.shape[0]

    @classmethod
    def from_global(cls, A, comm: Communicator) -> "RowBlockMatrix":
        """Slice this rank's block out of a matrix every rank holds in full."""
        A = np.asarray(A, dtype=np.float64)
        if A.ndim == 1:
            A = A[:, None]
        if A.shape[0] < comm.size:
            raise ValueError(f"{A.shape[0]} rows cannot be spread over {comm.size} ranks")
        off, cnt = partition(A.shape[0], comm.size, comm.rank)
        return cls(A[off : off + cnt].copy(), A.shape[1], A.shape[0], off)

    def to_global(self, comm: Communicator) -> np.ndarray:
        """Assemble the full matrix on every rank (exact: peers contribute zeros)."""
        full = np.zeros((self.global_nrows, self.ncols))
        full[self.row_offset : self.row_offset + self.local_nrows] = self.local
        return comm.allreduce_sum(full)


@dataclass(frozen=True)
class GenSpec:
    workload: Workload
    nrows_global: int
    ncols: int = 250
    seed: int = 1
    mode: GenMode = GenMode.REPLICATED

    def __post_init__(self):
        object.__setattr__(self, "workload", Workload.parse(self.workload))
        object.__setattr__(self, "mode", GenMode.parse(self.mode))


@dataclass
class LabeledBlock:
    """A data block plus per-row labels.

    ``role`` is ``"svm-response"`` (labels in {-1, +1}), ``"kmeans-truth"``
    (generating component ids, used only for testing), or ``None`` for PCA.
    """

    X: RowBlockMatrix
    y: np.ndarray | None = None
    role: str | None = None

    def __post_init__(self):
        if self.y is not None:
            self.y = np.asarray(self.y)
            if len(self.y) != self.X.local_nrows:
                raise ValueError(f"{len(self.y)} labels for {self.X.local_nrows} local rows")


def words_per_row(ncols: int) -> int:
    w = 1 + 2 * ((ncols + 1) // 2)
    return (w + 3) // 4 * 4


def _uniform(raw: np.ndarray) -> np.ndarray:
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _rows_from_words(raw: np.ndarray, ncols: int) -> tuple[np.ndarray, np.ndarray]:
    """Turn a (m, words_per_row) block of raw words into (class uniforms, normals)."""
    u = _uniform(raw)
    npairs = (ncols + 1) // 2
    u1 = 1.0 - u[:, 1 : 1 + 2 * npairs : 2]  # in (0, 1]
    u2 = u[:, 2 : 2 + 2 * npairs : 2]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty((raw.shape[0], 2 * npairs))
    z[:, 0::2] = r * np.cos(theta)
    z[:, 1::2] = r * np.sin(theta)
    return u[:, 0], z[:, :ncols]


def generate_rows(key: int, first_row: int, nrows: int, ncols: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``first_row .. first_row + nrows`` of the stream keyed by ``key``.

    Returns ``(class_uniform, normals)`` with shapes ``(nrows,)`` and
    ``(nrows, ncols)``.  Row ``i`` is a pure function of ``(key, i)``.
    """
    wpr = words_per_row(ncols)
    bitgen = np.random.Philox(key=key & _U64)
    bitgen.advance(first_row * wpr // 4)
    cls = np.empty(nrows)
    z = np.empty((nrows, ncols))
    for start in range(0, nrows, _CHUNK_ROWS):
        m = min(_CHUNK_ROWS, nrows - start)
        raw = bitgen.random_raw(m * wpr).reshape(m, wpr)
        cls[start : start + m], z[start : start + m] = _rows_from_words(raw, ncols)
    return cls, z


def generate(spec: GenSpec, comm: Communicator) -> LabeledBlock:
    """Generate this rank's block of the benchmark dataset described by ``spec``."""
    n, p = spec.nrows_global, spec.ncols
    if n < comm.size:
        raise ValueError(f"nrows_global={n} is smaller than the number of ranks ({comm.size})")
    if p < 1:
        raise ValueError(f"ncols must be >= 1, got {p}")
    if spec.workload is Workload.SVM and p < 2:
        raise ValueError("SVM data needs ncols >= 2 (intercept plus at least one feature)")

    offset, count = partition(n, comm.size, comm.rank)
    if spec.mode is GenMode.REPLICATED:
        cls_u, z = generate_rows(spec.seed, offset, count, p)
    else:
        cls_u, z = generate_rows(spec.seed ^ comm.rank, 0, count, p)

    if spec.workload is Workload.PCA:
        return LabeledBlock(RowBlockMatrix(z, p, n, offset))
    if spec.workload is Workload.KMEANS:
        truth = np.minimum((cls_u * len(KMEANS_MEANS)).astype(np.int64), len(KMEANS_MEANS) - 1)
        z += np.asarray(KMEANS_MEANS)[truth][:, None]
        return LabeledBlock(RowBlockMatrix(z, p, n, offset), truth, "kmeans-truth")

    cls = np.minimum((cls_u * 2).astype(np.int64), 1)
    X = np.empty((count, p))
    X[:, 0] = 1.0
    X[:, 1:] = z[:, : p - 1] + np.asarray(SVM_MEANS)[cls][:, None]
    y = np.where(cls == 0, -1.0, 1.0)
    return LabeledBlock(RowBlockMatrix(X, p, n, offset), y, "svm-response")


def column_means(X: RowBlockMatrix, comm: Communicator) -> np.ndarray:
    if X.global_nrows < 1:
        raise ValueError("column_means of a matrix with no rows")
    return comm.allreduce_sum(X.local.sum(axis=0)) / X.global_nrows


def covariance(X: RowBlockMatrix, comm: Communicator) -> np.ndarray:
    """Sample covariance with divisor ``n - 1``; identical on all ranks."""
    n = X.global_nrows
    if n < 2:
        raise ValueError(f"covariance needs at least 2 rows, got {n}")
    mu = column_means(X, comm)
    Xc = X.local - mu
    C = comm.allreduce_sum(Xc.T @ Xc) / (n - 1)
    return 0.5 * (C + C.T)


# Debug export: 16-byte header (4-byte magic, uint64 nrows, uint32 ncols), then row-major doubles.
_MAGIC = b"RBM1"
_HEADER = struct.Struct("<4sQI")


def write_block(path, local: np.ndarray) -> None:
    local = np.ascontiguousarray(local, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, local.shape[0], local.shape[1]))
        fh.write(local.tobytes())


def read_block(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, nrows, ncols = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = data[_HEADER.size :]
    if len(body) != nrows * ncols * 8:
        raise ValueError(f"{path}: expected {nrows * ncols * 8} payload bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(nrows, ncols).astype(np.float64)
