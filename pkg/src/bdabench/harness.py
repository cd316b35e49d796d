"""Benchmark orchestration: configuration, kernel timing, records, FOM, scaling campaigns."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import platform
import re
import socket
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .comm import DEFAULT_TIMEOUT, Communicator, run_ranks
from .dmat import GenMode, GenSpec, Workload, generate
from .kernels import init_from_rows, kmeans_lloyd, pca_sdev, svm_fit

log = logging.getLogger(__name__)

BYTES_PER_VALUE = 8
GIB = 2**30
FULL_SCALE_BYTES = 1024 * GIB
KMEANS_K_ALLOWED = (2, 3, 4)
TAG_KEYS = ("architecture", "library", "threads", "version")


class ConfigError(ValueError):
    pass


class RecordParseError(ValueError):
    pass


def parse_size(text: str | int) -> int:
    """Parse a byte count such as ``8MB`` (10**6), ``8MiB`` (2**20) or ``4096``."""
    if isinstance(text, (int, np.integer)):
        return int(text)
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([kKmMgGtT]?)(i?)[bB]?\s*", str(text))
    if not m:
        raise ConfigError(f"cannot parse size {text!r}")
    num, prefix, binary = m.groups()
    power = " KMGT".index(prefix.upper()) if prefix else 0
    value = float(num) * (1024 if binary else 1000) ** power
    if value != int(value):
        raise ConfigError(f"size {text!r} is not a whole number of bytes")
    return int(value)


def default_tags() -> dict[str, str]:
    return {
        "architecture": platform.machine() or "unknown",
        "library": f"numpy-{np.__version__}",
        "threads": os.environ.get("OMP_NUM_THREADS", "default"),
        "version": platform.python_version(),
    }


@dataclass
class BenchmarkConfig:
    workload: Workload
    ranks: int = 1
    rows_per_rank: int | None = None
    bytes_per_rank: int | None = None
    global_rows: int | None = None
    ncols: int = 250
    seed: int = 1
    kmeans_k: tuple[int, ...] = KMEANS_K_ALLOWED
    kmeans_max_iter: int = 30
    svm_iters: int = 500
    gen_mode: GenMode = GenMode.REPLICATED
    full_scale: bool = False
    tags: dict[str, str] = field(default_factory=dict)
    gen_delay: float = 0.0  # test hook: extra seconds spent "generating" before the timed window

    def __post_init__(self):
        self.workload = Workload.parse(self.workload)
        self.gen_mode = GenMode.parse(self.gen_mode)
        self.kmeans_k = tuple(int(k) for k in self.kmeans_k)
        self.tags = {str(k): str(v) for k, v in self.tags.items()}

    @property
    def row_bytes(self) -> int:
        return self.ncols * BYTES_PER_VALUE

    @property
    def nrows_global(self) -> int:
        if self.rows_per_rank is not None:
            return self.rows_per_rank * self.ranks
        if self.bytes_per_rank is not None:
            return self.bytes_per_rank // self.row_bytes * self.ranks
        if self.global_rows is not None:
            return self.global_rows
        raise ConfigError("no problem size given (rows_per_rank, bytes_per_rank or global_rows)")

    @property
    def problem_bytes(self) -> int:
        return self.nrows_global * self.row_bytes

    def validate(self) -> "BenchmarkConfig":
        sizes = [s for s in (self.rows_per_rank, self.bytes_per_rank, self.global_rows) if s is not None]
        if len(sizes) != 1:
            raise ConfigError("give exactly one of rows_per_rank, bytes_per_rank, global_rows")
        if self.ranks < 1:
            raise ConfigError(f"ranks must be >= 1, got {self.ranks}")
        if self.ncols < 1:
            raise ConfigError(f"ncols must be >= 1, got {self.ncols}")
        if self.workload is Workload.SVM and self.ncols < 2:
            raise ConfigError("SVM needs at least 2 columns (intercept plus features)")
        if sizes[0] <= 0:
            raise ConfigError("problem size must be positive")
        if self.bytes_per_rank is not None and self.bytes_per_rank % self.row_bytes:
            raise ConfigError(
                f"bytes_per_rank={self.bytes_per_rank} is not a whole number of "
                f"{self.ncols}-column rows ({self.row_bytes} bytes each)"
            )
        if self.nrows_global < self.ranks:
            raise ConfigError(f"{self.nrows_global} rows cannot be spread over {self.ranks} ranks")
        if self.workload is Workload.KMEANS:
            if not self.kmeans_k or any(k not in KMEANS_K_ALLOWED for k in self.kmeans_k):
                raise ConfigError(f"kmeans_k must be a non-empty subset of {KMEANS_K_ALLOWED}, got {self.kmeans_k}")
            if max(self.kmeans_k) > self.nrows_global:
                raise ConfigError("more clusters than rows")
            if self.kmeans_max_iter < 1:
                raise ConfigError("kmeans_max_iter must be >= 1")
        if self.workload is Workload.SVM and self.svm_iters < 1:
            raise ConfigError("svm_iters must be >= 1")
        if self.full_scale and self.problem_bytes < FULL_SCALE_BYTES:
            raise ConfigError(
                f"full-scale runs need at least 1024 GB; this problem is {self.problem_bytes / GIB:.3g} GB"
            )
        return self

    def gen_spec(self) -> GenSpec:
        return GenSpec(self.workload, self.nrows_global, self.ncols, self.seed, self.gen_mode)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["workload"] = self.workload.value
        d["gen_mode"] = self.gen_mode.value
        d["kmeans_k"] = list(self.kmeans_k)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BenchmarkConfig":
        return cls(**d)


@dataclass
class TimingSummary:
    t_min: float
    t_mean: float
    t_max: float
    per_rank: list[float] | None = None

    @classmethod
    def from_times(cls, times: Sequence[float]) -> "TimingSummary":
        t = [float(x) for x in times]
        if not t:
            raise ValueError("no timings")
        mean = math.fsum(t) / len(t)
        # clamp so round-off in the mean cannot break t_min <= t_mean <= t_max
        mean = min(max(mean, min(t)), max(t))
        return cls(min(t), mean, max(t), t)


@dataclass
class RunRecord:
    config: BenchmarkConfig
    timing: TimingSummary
    problem_bytes: int
    throughput_gbs: float
    digest: dict[str, Any]
    timestamp: str
    host: str
    tags: dict[str, str]

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "timing": dataclasses.asdict(self.timing),
            "problem_bytes": self.problem_bytes,
            "throughput_gbs": self.throughput_gbs,
            "digest": self.digest,
            "timestamp": self.timestamp,
            "host": self.host,
            "tags": dict(self.tags),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunRecord":
        return cls(
            config=BenchmarkConfig.from_dict(d["config"]),
            timing=TimingSummary(**d["timing"]),
            problem_bytes=int(d["problem_bytes"]),
            throughput_gbs=float(d["throughput_gbs"]),
            digest=d["digest"],
            timestamp=d["timestamp"],
            host=d["host"],
            tags=dict(d["tags"]),
        )


def _kernel(config: BenchmarkConfig, block, comm: Communicator) -> dict[str, Any]:
    """Run the timed part of the benchmark and return its output digest."""
    if config.workload is Workload.PCA:
        res = pca_sdev(block.X, comm)
        return {"sdev_first": res.sdev_first, "sdev_last": res.sdev_last}
    if config.workload is Workload.KMEANS:
        out = {}
        for k in config.kmeans_k:
            init = init_from_rows(block.X, k, config.seed, comm)
            res = kmeans_lloyd(block.X, k, init, config.kmeans_max_iter, comm)
            out[f"k={k}"] = {
                "centroid_checksum": float(np.sum(res.centroids)),
                "wcss": res.wcss,
                "iterations": res.iterations_run,
            }
        return out
    model = svm_fit(block, comm, iters=config.svm_iters)
    return {
        "final_loss": model.final_loss,
        "weight_checksum": float(np.sum(model.weights)),
        "iterations": model.iterations_run,
    }


def run_benchmark(config: BenchmarkConfig, comm: Communicator) -> RunRecord:
    """Generate data, time the kernel alone on every rank, summarise on rank 0.

    The returned record is identical on all ranks.
    """
    config.validate()
    if comm.size != config.ranks:
        raise ConfigError(f"config asks for {config.ranks} ranks but the communicator has {comm.size}")

    block = generate(config.gen_spec(), comm)
    if config.gen_delay:
        time.sleep(config.gen_delay)
    comm.barrier()
    t0 = time.perf_counter_ns()
    digest = _kernel(config, block, comm)
    elapsed = (time.perf_counter_ns() - t0) * 1e-9

    times = comm.gather(elapsed, root=0)
    record = None
    if comm.rank == 0:
        timing = TimingSummary.from_times(times)
        nbytes = config.problem_bytes
        tags = {**default_tags(), **config.tags}
        record = RunRecord(
            config=config,
            timing=timing,
            problem_bytes=nbytes,
            throughput_gbs=nbytes / max(timing.t_max, 1e-9) / GIB,
            digest=digest,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            host=socket.gethostname(),
            tags=tags,
        )
    return comm.broadcast(record, root=0)


def run_distributed(config: BenchmarkConfig, timeout: float = DEFAULT_TIMEOUT) -> RunRecord:
    """Run one benchmark on ``config.ranks`` in-process ranks."""
    config.validate()
    return run_ranks(config.ranks, lambda comm: run_benchmark(config, comm), timeout=timeout)[0]


def ensemble_ta(records: Iterable[RunRecord]) -> float:
    """Mean over repeated jobs of each job's slowest-rank time."""
    t = [r.timing.t_max for r in records]
    if not t:
        raise ValueError("no records")
    return math.fsum(t) / len(t)


@dataclass(frozen=True)
class FomInput:
    t_a: float
    job_size_tb: float = 1.024
    total_nodes: int = 18688
    job_nodes: int = 128


def fom_tbs(inp: FomInput) -> float:
    """Figure of merit in TB/s: data per job over mean job time, scaled to a full machine."""
    if not (inp.t_a > 0 and math.isfinite(inp.t_a)):
        raise ValueError(f"t_a must be positive, got {inp.t_a}")
    if inp.job_size_tb <= 0:
        raise ValueError(f"job size must be positive, got {inp.job_size_tb}")
    if inp.total_nodes <= 0 or inp.job_nodes <= 0:
        raise ValueError("node counts must be positive")
    if inp.job_nodes > inp.total_nodes:
        raise ValueError(f"job_nodes ({inp.job_nodes}) exceeds total_nodes ({inp.total_nodes})")
    return inp.job_size_tb / inp.t_a * (inp.total_nodes / inp.job_nodes)


@dataclass
class ScalingPlan:
    """A weak or strong scaling sweep.

    ``size_bytes`` is per rank for weak scaling and global for strong scaling.
    """

    mode: str
    ranks: Sequence[int]
    size_bytes: int
    workloads: Sequence[Workload | str] = ("PCA", "KMEANS", "SVM")
    ncols: int = 250
    seed: int = 1
    kmeans_k: tuple[int, ...] = KMEANS_K_ALLOWED
    kmeans_max_iter: int = 30
    svm_iters: int = 500
    gen_mode: GenMode = GenMode.REPLICATED
    tags: dict[str, str] = field(default_factory=dict)

    def configs(self) -> list[BenchmarkConfig]:
        if self.mode not in ("weak", "strong"):
            raise ConfigError(f"scaling mode must be 'weak' or 'strong', got {self.mode!r}")
        if not self.ranks:
            raise ConfigError("campaign needs at least one rank count")
        if not self.workloads:
            raise ConfigError("campaign needs at least one workload")
        row_bytes = self.ncols * BYTES_PER_VALUE
        if self.size_bytes % row_bytes:
            raise ConfigError(f"size {self.size_bytes} is not a whole number of {row_bytes}-byte rows")
        out = []
        for wl in self.workloads:
            for r in self.ranks:
                size = (
                    {"bytes_per_rank": self.size_bytes}
                    if self.mode == "weak"
                    else {"global_rows": self.size_bytes // row_bytes}
                )
                cfg = BenchmarkConfig(
                    workload=wl,
                    ranks=int(r),
                    ncols=self.ncols,
                    seed=self.seed,
                    kmeans_k=self.kmeans_k,
                    kmeans_max_iter=self.kmeans_max_iter,
                    svm_iters=self.svm_iters,
                    gen_mode=self.gen_mode,
                    tags=dict(self.tags),
                    **size,
                )
                out.append(cfg.validate())
        return out


def campaign(plan: ScalingPlan, out: str | Path | None = None, figures: bool = True) -> list[RunRecord]:
    """Run every (workload, rank count) of ``plan``.

    With ``out`` (a ``.jsonl`` path) the records are written there, together
    with ``<stem>_summary.txt``, ``<stem>_summary.csv`` and, if ``figures``,
    ``<stem>_scaling.png`` beside it.
    """
    records = []
    for cfg in plan.configs():
        log.info("running %s on %d rank(s), %d rows", cfg.workload.value, cfg.ranks, cfg.nrows_global)
        records.append(run_distributed(cfg))
    if out is not None:
        from . import report

        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_records(records, out)
        stem = out.with_suffix("")
        Path(f"{stem}_summary.txt").write_text(report.summary_table(records, plan.mode))
        report.write_csv(records, f"{stem}_summary.csv")
        if figures:
            report.scaling_figure(records, f"{stem}_scaling.png", plan.mode)
    return records


def write_records(records: Iterable[RunRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True))
            fh.write("\n")


def read_records(path: str | Path) -> list[RunRecord]:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(RunRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise RecordParseError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return records
