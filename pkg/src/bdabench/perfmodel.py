"""Linear models of log throughput: OLS, AIC, stepwise selection, drop-one ANOVA.

Categorical factors are treatment coded: levels sort lexicographically (as
strings) and the first level is the baseline.  A column is categorical when
any of its values is non-numeric.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .kernels.linalg import NumericError

CF_TOL = 1e-12
CF_MAX_ITER = 10_000
_TINY = 1e-300

RESPONSE_ALIASES = {"throughput": ("throughput", "throughput_gbs")}


@dataclass
class FactorTable:
    """Observations by column.  Numeric columns are float arrays, categorical ones str arrays."""

    columns: dict[str, np.ndarray]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have different lengths: {sorted(lengths)}")
        self.columns = {k: _coerce(v) for k, v in self.columns.items()}

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def is_categorical(self, name: str) -> bool:
        return self.columns[name].dtype.kind in "UO"

    def levels(self, name: str) -> list[str]:
        return sorted(set(self.columns[self._name(name)].tolist()))

    def _name(self, name: str) -> str:
        if name in self.columns:
            return name
        for alias in RESPONSE_ALIASES.get(name, ()):
            if alias in self.columns:
                return alias
        raise KeyError(f"no column {name!r}; have {sorted(self.columns)}")

    @classmethod
    def read_csv(cls, path: str | Path) -> "FactorTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no data rows")
        return cls({k: np.array([r[k] for r in rows], dtype=object) for k in rows[0]})

    def response(self, spec: str) -> tuple[str, np.ndarray]:
        """Resolve a response spec such as ``log-throughput``, ``log(t_max)`` or ``t_max``."""
        m = re.fullmatch(r"log[-_(](\w+)\)?", spec)
        col = self._name(m.group(1) if m else spec)
        if self.is_categorical(col):
            raise ValueError(f"response column {col!r} is not numeric")
        y = self.columns[col].astype(float)
        if not np.all(np.isfinite(y)):
            raise ValueError(f"response column {col!r} has missing or non-finite values")
        if m:
            if np.any(y <= 0):
                raise ValueError(f"log response needs positive {col!r}")
            return f"log({col})", np.log(y)
        return col, y

    def term_columns(self, term: str) -> tuple[list[str], np.ndarray]:
        """Design columns for one main-effect term."""
        col = self.columns[self._name(term)]
        if self.is_categorical(term):
            levels = self.levels(term)
            if len(levels) < 2:
                raise ValueError(f"factor {term!r} has a single level {levels}")
            names = [f"{term}{lv}" for lv in levels[1:]]
            return names, np.column_stack([(col == lv).astype(float) for lv in levels[1:]])
        return [term], col.astype(float)[:, None]


def _coerce(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype.kind in "fiub":
        return arr.astype(float)
    try:
        return np.array([float(v) for v in arr], dtype=float)
    except (TypeError, ValueError):
        return np.array([str(v) for v in arr], dtype=str)


@dataclass
class LinearModelFit:
    response: str
    terms: tuple[str, ...]
    coef_names: list[str]
    coefficients: np.ndarray
    rss: float
    df_resid: int
    n: int
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    @property
    def residuals(self) -> np.ndarray:
        return self.y - self.X @ self.coefficients

    @property
    def formula(self) -> str:
        return f"{self.response} ~ {' + '.join(self.terms) if self.terms else '1'}"

    def coefficient_table(self) -> list[tuple[str, float, float, float, float]]:
        """``(name, estimate, std_error, t, p)`` rows with two-sided t-test p-values."""
        sigma2 = self.rss / self.df_resid
        cov = sigma2 * np.linalg.inv(self.X.T @ self.X)
        rows = []
        for name, b, v in zip(self.coef_names, self.coefficients, np.diag(cov)):
            se = math.sqrt(max(v, 0.0))
            t = b / se if se > 0 else math.inf
            p = f_pvalue(t * t, 1, self.df_resid) if math.isfinite(t) else 0.0
            rows.append((name, float(b), se, float(t), p))
        return rows


def design_matrix(table: FactorTable, terms: Sequence[str]) -> tuple[np.ndarray, list[str], dict[str, int]]:
    """Intercept plus treatment-coded term columns.

    Raises ``ValueError`` naming the first term whose columns are linearly
    dependent on the columns before it.
    """
    cols = [np.ones((table.n, 1))]
    names = ["(Intercept)"]
    widths = {}
    for term in terms:
        tn, tc = table.term_columns(term)
        cols.append(tc)
        names += tn
        widths[term] = tc.shape[1]
        X = np.hstack(cols)
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise ValueError(f"design is rank deficient: term {term!r} is aliased with earlier terms")
    return np.hstack(cols), names, widths


def ols_fit(table: FactorTable, response: str, terms: Sequence[str]) -> LinearModelFit:
    """Least-squares fit of ``response`` on an intercept plus ``terms``."""
    terms = tuple(terms)
    if len(set(terms)) != len(terms):
        raise ValueError(f"duplicate terms in {terms}")
    rname, y = table.response(response)
    X, names, _ = design_matrix(table, terms)
    n, k = X.shape
    if n - k < 1:
        raise ValueError(f"{n} observations leave no residual degrees of freedom for {k} coefficients")
    Q, R = np.linalg.qr(X)
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    return LinearModelFit(rname, terms, names, beta, rss, n - k, n, X, y)


def aic(fit: LinearModelFit) -> float:
    """``n log(RSS / n) + 2 (k + 1)`` with ``k`` estimated coefficients.

    The ``+1`` counts the error variance; the constant ``n (log(2 pi) + 1)`` is
    omitted, which does not affect comparisons between models of the same data.
    """
    if not fit.rss > 0:
        raise NumericError("AIC is undefined for a perfect fit (RSS == 0)")
    return fit.n * math.log(fit.rss / fit.n) + 2 * (len(fit.coefficients) + 1)


def stepwise_aic(table: FactorTable, response: str, candidate_terms: Sequence[str]) -> LinearModelFit:
    """Bidirectional stepwise selection over main effects by AIC.

    Starts from the model with every candidate term.  Each step evaluates
    dropping each included term and adding each excluded one, and takes the
    move with the lowest AIC if it improves on the current model; ties go to
    the alphabetically first term.
    """
    candidates = sorted(set(candidate_terms))
    current = ols_fit(table, response, candidates)
    current_aic = aic(current)
    while True:
        best = None
        for term in candidates:
            if term in current.terms:
                terms = [t for t in current.terms if t != term]
            else:
                terms = [t for t in candidates if t in current.terms or t == term]
            fit = ols_fit(table, response, terms)
            score = aic(fit)
            if best is None or score < best[0]:
                best = (score, fit)
        if best is None or not best[0] < current_aic:
            return current
        current_aic, current = best


@dataclass
class AnovaRow:
    term: str
    sum_sq: float
    df: int
    F: float
    p: float


@dataclass
class AnovaTable:
    rows: list[AnovaRow]
    residual_sum_sq: float
    residual_df: int

    def format(self) -> str:
        width = max([len("Residuals")] + [len(r.term) for r in self.rows])
        out = [f"{'Term':<{width}}  {'Sum Sq':>10}  {'Df':>4}  {'F value':>10}  {'Pr(>F)':>10}"]
        for r in self.rows:
            out.append(f"{r.term:<{width}}  {r.sum_sq:>10.4g}  {r.df:>4d}  {r.F:>10.4g}  {r.p:>10.4g}")
        out.append(f"{'Residuals':<{width}}  {self.residual_sum_sq:>10.4g}  {self.residual_df:>4d}")
        return "\n".join(out)


def anova(fit: LinearModelFit, table: FactorTable) -> AnovaTable:
    """Drop-one sums of squares with F tests for each term of ``fit``."""
    if not fit.terms:
        raise ValueError("ANOVA needs a model with at least one term")
    _, _, widths = design_matrix(table, fit.terms)
    resid_ms = fit.rss / fit.df_resid
    response = _response_spec(fit.response)
    rows = []
    for term in fit.terms:
        reduced = ols_fit(table, response, [t for t in fit.terms if t != term])
        ss = max(reduced.rss - fit.rss, 0.0)
        df = widths[term]
        F = (ss / df) / resid_ms if resid_ms > 0 else math.inf
        p = f_pvalue(F, df, fit.df_resid) if math.isfinite(F) else 0.0
        rows.append(AnovaRow(term, ss, df, F, p))
    return AnovaTable(rows, fit.rss, fit.df_resid)


def _response_spec(name: str) -> str:
    m = re.fullmatch(r"log\((\w+)\)", name)
    return f"log-{m.group(1)}" if m else name


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            return h
    raise NumericError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc_reg needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_pvalue(F: float, df1: float, df2: float) -> float:
    """Upper-tail probability ``P(F(df1, df2) > F)``."""
    if not math.isfinite(F):
        raise ValueError(f"F statistic must be finite, got {F}")
    if F < 0:
        raise ValueError(f"F statistic must be >= 0, got {F}")
    if df1 < 1 or df2 < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got ({df1}, {df2})")
    if F == 0:
        return 1.0
    x = df2 / (df2 + df1 * F)
    return min(max(betainc_reg(df2 / 2.0, df1 / 2.0, x), 0.0), 1.0)


def model_report(table: FactorTable, response: str, factors: Sequence[str], stepwise: bool = True) -> str:
    """Selected formula, coefficient table and ANOVA table as text."""
    fit = stepwise_aic(table, response, factors) if stepwise else ols_fit(table, response, factors)
    lines = [f"Model: {fit.formula}", f"n = {fit.n}, residual df = {fit.df_resid}, AIC = {aic(fit):.4f}", ""]
    lines.append(f"{'Coefficient':<24} {'Estimate':>11} {'Std.Error':>11} {'t value':>9} {'Pr(>|t|)':>10}")
    for name, b, se, t, p in fit.coefficient_table():
        lines.append(f"{name:<24} {b:>11.5g} {se:>11.5g} {t:>9.4g} {p:>10.4g}")
    lines.append("")
    if fit.terms:
        lines.append(anova(fit, table).format())
    else:
        lines.append("(intercept-only model: no ANOVA terms)")
    return "\n".join(lines) + "\n"
