"""Derivative-free Nelder-Mead simplex minimisation with a fixed iteration count."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import NumericError


@dataclass(frozen=True)
class NmParams:
    alpha: float = 1.0  # reflection
    gamma: float = 2.0  # expansion
    rho: float = 0.5  # contraction
    sigma: float = 0.5  # shrink
    simplex_step: float = 0.1

    def __post_init__(self):
        if not (self.alpha > 0 and self.gamma > 1 and 0 < self.rho < 1 and 0 < self.sigma < 1):
            raise ValueError(f"invalid Nelder-Mead coefficients {self}")
        if self.simplex_step == 0:
            raise ValueError("simplex_step must be non-zero")


@dataclass
class NmResult:
    x: np.ndarray
    fval: float
    iterations: int
    evaluations: int
    history: list[float]  # best vertex value after each iteration


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0,
    iters: int,
    params: NmParams = NmParams(),
) -> NmResult:
    """Run exactly ``iters`` Nelder-Mead iterations starting from ``x0``.

    The initial simplex is ``x0`` plus ``x0 + simplex_step * e_i`` for each
    coordinate.  One iteration is one full simplex update (reflect, then
    possibly expand, contract or shrink).  Vertices are kept ordered by value
    with a stable sort, so among equal values the older ordering wins; the
    returned point is the best vertex and ``fval == f(x)``.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    x0 = np.array(x0, dtype=np.float64).ravel()
    d = x0.size
    if d < 1:
        raise ValueError("x0 must have at least one coordinate")
    nevals = 0

    def call(x):
        nonlocal nevals
        nevals += 1
        return float(f(x))

    simplex = np.tile(x0, (d + 1, 1))
    simplex[1:] += params.simplex_step * np.eye(d)
    fs = np.array([call(v) for v in simplex])
    if not np.all(np.isfinite(fs)):
        raise NumericError(f"objective is not finite on the initial simplex: {fs}")

    a, g, r, sg = params.alpha, params.gamma, params.rho, params.sigma
    history = []
    for _ in range(iters):
        order = np.argsort(fs, kind="stable")
        simplex, fs = simplex[order], fs[order]
        best, worst = fs[0], fs[-1]
        second_worst = fs[-2]
        centroid = simplex[:-1].mean(axis=0)

        xr = centroid + a * (centroid - simplex[-1])
        fr = call(xr)
        if fr < best:
            xe = centroid + g * (xr - centroid)
            fe = call(xe)
            if fe < fr:
                simplex[-1], fs[-1] = xe, fe
            else:
                simplex[-1], fs[-1] = xr, fr
        elif fr < second_worst:
            simplex[-1], fs[-1] = xr, fr
        else:
            if fr < worst:
                xc = centroid + r * (xr - centroid)
                fc = call(xc)
                accept = fc <= fr
            else:
                xc = centroid + r * (simplex[-1] - centroid)
                fc = call(xc)
                accept = fc < worst
            if accept:
                simplex[-1], fs[-1] = xc, fc
            else:
                simplex[1:] = simplex[0] + sg * (simplex[1:] - simplex[0])
                fs[1:] = [call(v) for v in simplex[1:]]
        history.append(float(np.min(fs)))

    i = int(np.argsort(fs, kind="stable")[0])
    fbest = fs[i]
    if not math.isfinite(fbest):
        raise NumericError("Nelder-Mead ended on a non-finite objective value")
    return NmResult(simplex[i].copy(), float(fbest), iters, nevals, history)
