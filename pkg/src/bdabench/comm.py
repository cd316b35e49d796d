"""Collective communication over ranks.

Kernels are written against :class:`Communicator`, which exposes only
collectives (sum-reduce, broadcast, gather, barrier).  Two backends exist:

* :class:`SelfComm`, a pass-through single-rank communicator.
* :class:`ThreadComm`, one handle per rank of an in-process group where every
  rank runs on its own worker thread.  Use :func:`run_ranks` to launch one.

Reductions fold contributions left to right in ascending rank order, so every
rank obtains a bit-identical result and repeated runs are bit-reproducible.
"""

from __future__ import annotations

import pickle
import threading
from typing import Any, Callable, Sequence

import numpy as np

DEFAULT_TIMEOUT = 60.0


class CommError(RuntimeError):
    """Collective protocol violation (mismatched buffers across ranks)."""


class CommTimeout(CommError):
    """A collective did not complete within the configured timeout."""


class Communicator:
    """Rank identity plus the collectives kernels may use."""

    rank: int
    size: int

    def allreduce_sum(self, local) -> np.ndarray:
        raise NotImplementedError

    def broadcast(self, value: Any, root: int = 0) -> Any:
        raise NotImplementedError

    def gather(self, value: Any, root: int = 0) -> list | None:
        raise NotImplementedError

    def allgather(self, value: Any) -> list:
        raise NotImplementedError

    def barrier(self) -> None:
        raise NotImplementedError

    def _check_root(self, root: int) -> None:
        if not isinstance(root, (int, np.integer)) or not 0 <= root < self.size:
            raise ValueError(f"root {root!r} outside [0, {self.size})")

    def __repr__(self) -> str:
        return f"{type(self).__name__}(rank={self.rank}, size={self.size})"


class SelfComm(Communicator):
    """Single-rank communicator; every collective is the identity."""

    rank = 0
    size = 1

    def allreduce_sum(self, local) -> np.ndarray:
        return np.array(local, dtype=np.float64, copy=True)

    def broadcast(self, value, root=0):
        self._check_root(root)
        return pickle.loads(pickle.dumps(value))

    def gather(self, value, root=0):
        self._check_root(root)
        return [value]

    def allgather(self, value):
        return [value]

    def barrier(self):
        return None


class _Exchange:
    """Shared rendezvous state for one in-process group."""

    def __init__(self, size: int, timeout: float):
        self.size = size
        self.timeout = timeout
        self.slots: list[Any] = [None] * size
        self.gate = threading.Barrier(size)

    def wait(self) -> None:
        try:
            self.gate.wait(self.timeout)
        except threading.BrokenBarrierError as exc:
            raise CommTimeout(
                f"collective did not complete within {self.timeout:g} s "
                "(not all ranks entered, or a peer rank failed)"
            ) from exc

    def abort(self) -> None:
        self.gate.abort()


class ThreadComm(Communicator):
    """Handle for one rank of an in-process group.

    Handles must not be shared between ranks.  Every exchange is a two-phase
    rendezvous: deposit into the rank's slot, wait, read all slots, wait again
    so no slot is overwritten before every rank has read it.
    """

    def __init__(self, exchange: _Exchange, rank: int):
        self._ex = exchange
        self.rank = rank
        self.size = exchange.size

    def _exchange(self, value):
        ex = self._ex
        ex.slots[self.rank] = value
        ex.wait()
        values = list(ex.slots)
        ex.wait()
        return values

    def allgather(self, value):
        return [pickle.loads(b) for b in self._exchange(pickle.dumps(value))]

    def allreduce_sum(self, local):
        local = np.asarray(local, dtype=np.float64)
        parts = self._exchange(local)
        shapes = {p.shape for p in parts}
        if len(shapes) != 1:
            raise CommError(f"allreduce_sum: mismatched buffer shapes across ranks {sorted(shapes)}")
        acc = parts[0].copy()
        for p in parts[1:]:
            acc = acc + p
        return acc

    def broadcast(self, value, root=0):
        self._check_root(root)
        parts = self._exchange(pickle.dumps(value) if self.rank == root else None)
        return pickle.loads(parts[root])

    def gather(self, value, root=0):
        self._check_root(root)
        parts = self._exchange(pickle.dumps(value))
        if self.rank != root:
            return None
        return [pickle.loads(b) for b in parts]

    def barrier(self):
        self._ex.wait()


def make_group(size: int, timeout: float = DEFAULT_TIMEOUT) -> list[ThreadComm]:
    """Create ``size`` linked :class:`ThreadComm` handles, one per rank."""
    if size < 1:
        raise ValueError(f"group size must be >= 1, got {size}")
    ex = _Exchange(size, timeout)
    return [ThreadComm(ex, r) for r in range(size)]


def run_ranks(
    size: int,
    fn: Callable[..., Any],
    *args,
    timeout: float = DEFAULT_TIMEOUT,
    rank_args: Sequence[tuple] | None = None,
    **kwargs,
) -> list[Any]:
    """Run ``fn(comm, *args, **kwargs)`` on ``size`` concurrent ranks.

    Returns the per-rank return values ordered by rank.  If any rank raises,
    the group is aborted so peers do not wait out the timeout, and the first
    originating exception is re-raised annotated with its rank.
    """
    comms = make_group(size, timeout)
    results: list[Any] = [None] * size
    errors: list[BaseException | None] = [None] * size

    def worker(comm: ThreadComm) -> None:
        try:
            extra = rank_args[comm.rank] if rank_args is not None else ()
            results[comm.rank] = fn(comm, *args, *extra, **kwargs)
        except BaseException as exc:  # noqa: BLE001 - propagated below
            errors[comm.rank] = exc
            comm._ex.abort()

    threads = [
        threading.Thread(target=worker, args=(c,), name=f"rank-{c.rank}", daemon=True)
        for c in comms
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    failed = [(r, e) for r, e in enumerate(errors) if e is not None]
    if failed:
        # Prefer the rank that failed first-hand over peers that merely saw the abort.
        primary = [(r, e) for r, e in failed if not isinstance(e, CommTimeout)] or failed
        rank, exc = primary[0]
        try:
            exc.rank = rank
        except AttributeError:
            pass
        if hasattr(exc, "add_note"):
            exc.add_note(f"raised on rank {rank} of {size}")
        raise exc
    return results
