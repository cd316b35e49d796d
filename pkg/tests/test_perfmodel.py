import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdabench.kernels.linalg import NumericError
from bdabench.perfmodel import (
    FactorTable,
    aic,
    anova,
    betainc_reg,
    design_matrix,
    f_pvalue,
    model_report,
    ols_fit,
    stepwise_aic,
)

scipy_stats = pytest.importorskip("scipy.stats")


def random_table(seed, n=40, effect=1.0):
    r = np.random.default_rng(seed)
    wl = r.choice(["KMEANS", "PCA", "SVM"], n)
    lib = r.choice(["mkl", "openblas"], n)
    size = r.uniform(1, 10, n)
    thr = r.choice(["1", "4", "16", "64"], n)
    y = np.exp(effect * (wl == "PCA") + 0.5 * effect * (wl == "SVM") + 0.1 * size + r.normal(0, 0.3, n))
    return FactorTable({"workload": wl, "library": lib, "size": size, "threads": thr, "throughput": y})


def test_exact_line():
    x = np.arange(5.0)
    fit = ols_fit(FactorTable({"x": x, "y": 2 * x + 1}), "y", ["x"])
    assert np.allclose(fit.coefficients, [1.0, 2.0], atol=1e-12)
    assert fit.rss < 1e-24


def test_intercept_only():
    y = np.array([1.0, 4.0, 2.0, 7.0])
    fit = ols_fit(FactorTable({"y": y}), "y", [])
    assert fit.coefficients[0] == pytest.approx(y.mean(), abs=1e-14)
    assert fit.rss == pytest.approx(((y - y.mean()) ** 2).sum(), rel=1e-14)
    assert fit.formula == "y ~ 1"


def test_treatment_coding_lexicographic():
    t = FactorTable({"f": ["b", "a", "c", "a", "b", "c"], "y": np.arange(6.0)})
    X, names, widths = design_matrix(t, ["f"])
    assert names == ["(Intercept)", "fb", "fc"] and widths == {"f": 2}
    assert X[:, 1].tolist() == [1, 0, 0, 0, 1, 0]


def test_numeric_strings_are_numeric():
    t = FactorTable({"threads": ["1", "4", "16"], "y": ["1.0", "2.0", "3.5"]})
    assert not t.is_categorical("threads")


@pytest.mark.parametrize("seed", range(10))
def test_normal_equations_oracle(seed):
    t = random_table(seed)
    terms = ["library", "size", "workload"]
    fit = ols_fit(t, "log-throughput", terms)
    X, _, _ = design_matrix(t, terms)
    y = np.log(t.columns["throughput"])
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    assert np.allclose(fit.coefficients, beta, atol=1e-8)
    # residuals orthogonal to every design column
    assert np.all(np.abs(X.T @ fit.residuals) < 1e-8 * np.linalg.norm(X, axis=0) * np.linalg.norm(y))


def test_aliased_term_named():
    t = FactorTable({"a": ["x", "y", "x", "y"], "b": ["p", "q", "p", "q"], "y": [1.0, 2.0, 3.0, 5.0]})
    with pytest.raises(ValueError, match="'b'"):
        ols_fit(t, "y", ["a", "b"])


def test_log_response_requires_positive():
    with pytest.raises(ValueError):
        FactorTable({"t": [1.0, 0.0]}).response("log-t")


def test_aic_arithmetic():
    fit = ols_fit(FactorTable({"x": np.arange(10.0), "y": np.zeros(10)}), "y", ["x"])
    fit.rss = 10.0  # n=10, k=2
    assert aic(fit) == 6.0


def test_aic_perfect_fit():
    x = np.arange(4.0)
    with pytest.raises(NumericError):
        aic(ols_fit(FactorTable({"x": x, "y": x}), "y", ["x"]))


def test_aic_formula_oracle():
    t = random_table(3)
    fit = ols_fit(t, "log-throughput", ["workload", "size"])
    y = np.log(t.columns["throughput"])
    X, _, _ = design_matrix(t, ["workload", "size"])
    rss = float(np.sum((y - X @ np.linalg.lstsq(X, y, rcond=None)[0]) ** 2))
    assert aic(fit) == pytest.approx(len(y) * math.log(rss / len(y)) + 2 * (X.shape[1] + 1), abs=1e-9)


def test_aic_matches_statsmodels_up_to_constant():
    sm = pytest.importorskip("statsmodels.api")
    t = random_table(5)
    fit = ols_fit(t, "log-throughput", ["workload", "size"])
    ref = sm.OLS(fit.y, fit.X).fit()
    n = fit.n
    # statsmodels counts k coefficients and keeps the Gaussian constant
    assert aic(fit) == pytest.approx(ref.aic - n * (math.log(2 * math.pi) + 1) + 2, abs=1e-9)


def test_adding_noise_term_never_raises_rss():
    t = random_table(8)
    small = ols_fit(t, "log-throughput", ["workload"])
    big = ols_fit(t, "log-throughput", ["workload", "threads"])
    assert big.rss <= small.rss


def test_stepwise_keeps_single_strong_term():
    t = random_table(1, effect=3.0)
    fit = stepwise_aic(t, "log-throughput", ["workload"])
    assert fit.terms == ("workload",)


@pytest.mark.parametrize("seed", range(5))
def test_stepwise_not_worse_than_full(seed):
    t = random_table(seed, n=60)
    cands = ["library", "size", "threads", "workload"]
    sel = stepwise_aic(t, "log-throughput", cands)
    assert aic(sel) <= aic(ols_fit(t, "log-throughput", cands))
    assert "workload" in sel.terms


def test_stepwise_deterministic():
    t = random_table(4, n=60)
    cands = ["threads", "library", "size", "workload"]
    assert stepwise_aic(t, "log-throughput", cands).terms == stepwise_aic(t, "log-throughput", cands[::-1]).terms


def test_stepwise_null_response_mostly_intercept_only():
    hits = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        t = FactorTable({"a": r.choice(["x", "y", "z"], 60), "b": r.normal(size=60), "y": r.normal(size=60)})
        hits += stepwise_aic(t, "y", ["a", "b"]).terms == ()
    assert hits > 50


@pytest.mark.parametrize("seed", range(8))
def test_anova_drop_one_oracle(seed):
    t = random_table(seed)
    terms = ["library", "size", "workload"]
    fit = ols_fit(t, "log-throughput", terms)
    y = np.log(t.columns["throughput"])
    tab = anova(fit, t)

    def rss(ts):
        X, _, _ = design_matrix(t, ts)
        beta = np.linalg.solve(X.T @ X, X.T @ y)
        return float(np.sum((y - X @ beta) ** 2))

    full = rss(terms)
    for row in tab.rows:
        assert row.sum_sq == pytest.approx(rss([s for s in terms if s != row.term]) - full, abs=1e-8)
        assert row.F == pytest.approx((row.sum_sq / row.df) / (full / fit.df_resid), rel=1e-9)
        assert 0.0 <= row.p <= 1.0


def test_anova_zero_effect_balanced():
    a = np.repeat(["lo", "hi"], 8)
    b = np.tile(np.repeat(["p", "q"], 4), 2)
    noise = np.tile([0.1, -0.1, 0.2, -0.2], 4)
    y = 3.0 * (a == "hi") + noise
    tab = anova(ols_fit(FactorTable({"a": a, "b": b, "y": y}), "y", ["a", "b"]), FactorTable({"a": a, "b": b, "y": y}))
    row = {r.term: r for r in tab.rows}["b"]
    assert row.sum_sq < 1e-20 and row.p == pytest.approx(1.0, abs=1e-9)


def test_anova_table_shape():
    # 34 observations, a numeric size term and a three-level workload factor
    r = np.random.default_rng(0)
    t = FactorTable({
        "problem_size": r.uniform(1, 100, 34),
        "workload": np.resize(["KMEANS", "PCA", "SVM"], 34),
        "throughput": r.uniform(0.5, 2.0, 34),
    })
    fit = ols_fit(t, "log-throughput", ["problem_size", "workload"])
    tab = anova(fit, t)
    assert [(row.term, row.df) for row in tab.rows] == [("problem_size", 1), ("workload", 2)]
    assert tab.residual_df == 30
    head = tab.format().splitlines()[0].split()
    assert head == ["Term", "Sum", "Sq", "Df", "F", "value", "Pr(>F)"]
    assert tab.format().splitlines()[-1].split()[0] == "Residuals"


def test_anova_scale_invariance():
    t = random_table(2)
    t2 = FactorTable({**t.columns, "throughput": t.columns["throughput"] ** 3})  # log scales by 3
    a = anova(ols_fit(t, "log-throughput", ["workload", "size"]), t)
    b = anova(ols_fit(t2, "log-throughput", ["workload", "size"]), t2)
    for ra, rb in zip(a.rows, b.rows):
        assert rb.sum_sq == pytest.approx(9 * ra.sum_sq, rel=1e-10)
        assert rb.F == pytest.approx(ra.F, rel=1e-10)
        assert rb.p == pytest.approx(ra.p, rel=1e-8, abs=1e-14)


def test_anova_requires_term():
    t = random_table(0)
    with pytest.raises(ValueError):
        anova(ols_fit(t, "log-throughput", []), t)


def test_f_pvalue_edges():
    assert f_pvalue(0.0, 3, 7) == 1.0
    for d in (1, 2, 5, 30):
        assert f_pvalue(1.0, d, d) == pytest.approx(0.5, abs=1e-12)
    assert f_pvalue(36.91, 1, 30) < 1e-5
    for bad in (math.inf, math.nan, -1.0):
        with pytest.raises(ValueError):
            f_pvalue(bad, 1, 1)
    with pytest.raises(ValueError):
        f_pvalue(1.0, 0, 3)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1e4), st.integers(1, 200), st.integers(1, 500))
def test_f_pvalue_matches_scipy(F, d1, d2):
    assert abs(f_pvalue(F, d1, d2) - scipy_stats.f.sf(F, d1, d2)) <= 1e-10


def test_f_pvalue_monotone():
    Fs = np.linspace(0, 50, 400)
    p = [f_pvalue(F, 2, 30) for F in Fs]
    assert np.all(np.diff(p) <= 0)


def test_betainc_against_scipy():
    from scipy.special import betainc

    for a, b, x in [(0.5, 0.5, 0.3), (15.0, 0.5, 0.99), (2.0, 3.0, 0.5), (100.0, 100.0, 0.49)]:
        assert betainc_reg(a, b, x) == pytest.approx(betainc(a, b, x), abs=1e-12)


def test_model_report_text():
    text = model_report(random_table(0, n=60, effect=3.0), "log-throughput", ["workload", "library"])
    assert text.startswith("Model: log(throughput) ~")
    assert "Pr(>F)" in text and "Residuals" in text
