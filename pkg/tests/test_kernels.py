import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdabench.comm import SelfComm
from bdabench.dmat import GenSpec, LabeledBlock, RowBlockMatrix, column_means, generate
from bdabench.kernels import (
    SvmModel,
    hinge_loss,
    init_from_rows,
    kmeans_lloyd,
    pca_sdev,
    svm_accuracy,
    svm_fit,
)
from bdabench.kernels.kmeans import assign

SELF = SelfComm()


def block(A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    return RowBlockMatrix(A, A.shape[1], A.shape[0], 0)


# ---- PCA -----------------------------------------------------------------

def test_pca_hand_case():
    r = pca_sdev(block([[1.0, 0.0], [-1.0, 0.0]]), SELF)
    assert r.sdev_first == pytest.approx(np.sqrt(2.0), abs=1e-15)
    assert r.sdev_last == 0.0


def test_pca_rank_count_oracle(on_ranks):
    spec = GenSpec("PCA", 2000, 20, seed=4)
    one = pca_sdev(generate(spec, SELF).X, SELF)
    four = on_ranks(4, lambda c: pca_sdev(generate(spec, c).X, c))
    for r in four:
        assert abs(r.sdev_first - one.sdev_first) < 1e-10
        assert abs(r.sdev_last - one.sdev_last) < 1e-10
    assert len({(r.sdev_first, r.sdev_last) for r in four}) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 50), st.integers(1, 8))
def test_pca_matches_centered_svd(seed, n, p):
    A = np.random.default_rng(seed).normal(size=(n, p)) * np.arange(1, p + 1)
    r = pca_sdev(block(A), SELF, keep_eigenvalues=True)
    Ac = A - A.mean(axis=0)
    sv = np.linalg.svd(Ac, compute_uv=False) / np.sqrt(n - 1)
    sd = r.sdev
    m = min(n - 1, p)  # centring removes one degree of freedom
    assert np.allclose(sd[:m], sv[:m], atol=1e-8)
    assert np.allclose(sd[m:], 0.0, atol=1e-6)
    assert r.sdev_first >= r.sdev_last >= 0


# ---- k-means -------------------------------------------------------------

def test_lloyd_hand_case():
    res = kmeans_lloyd(block([0.0, 0.1, 9.9, 10.0]), 2, [[0.0], [10.0]], 10, SELF)
    assert np.allclose(res.centroids.ravel(), [0.05, 9.95], atol=1e-15)
    assert res.iterations_run <= 2 and res.converged
    assert res.labels.tolist() == [0, 0, 1, 1]


def test_lloyd_single_cluster_is_column_mean(rng):
    X = block(rng.normal(size=(37, 5)))
    res = kmeans_lloyd(X, 1, X.local[:1], 5, SELF)
    assert np.allclose(res.centroids[0], column_means(X, SELF), atol=1e-14)


def test_lloyd_ties_go_to_lowest_index():
    assert assign(np.array([[1.0]]), np.array([[0.0], [2.0]])).tolist() == [0]


def test_lloyd_empty_cluster_keeps_centroid():
    res = kmeans_lloyd(block([0.0, 1.0]), 2, [[0.5], [100.0]], 5, SELF)
    assert res.centroids[1, 0] == 100.0
    assert res.labels.tolist() == [0, 0]


def test_lloyd_errors():
    X = block([1.0, 2.0])
    with pytest.raises(ValueError):
        kmeans_lloyd(X, 3, np.zeros((3, 1)), 5, SELF)
    with pytest.raises(ValueError):
        kmeans_lloyd(X, 1, [[np.nan]], 5, SELF)
    with pytest.raises(ValueError):
        kmeans_lloyd(X, 1, [[0.0]], 0, SELF)


def test_lloyd_invariants_on_mixture(on_ranks):
    spec = GenSpec("KMEANS", 3000, 6, seed=2)

    def run(c):
        b = generate(spec, c)
        init = init_from_rows(b.X, 3, 9, c)
        res = kmeans_lloyd(b.X, 3, init, 100, c)
        return b, res

    out = on_ranks(3, run)
    res = out[0][1]
    assert res.converged
    assert np.all(np.diff(res.wcss_history) <= 1e-9 * res.wcss_history[0])
    X = np.vstack([b.X.local for b, _ in out])
    labels = np.concatenate([r.labels for _, r in out])
    assert np.array_equal(assign(X, res.centroids), labels)  # idempotent assignment
    for j in range(3):
        assert np.allclose(res.centroids[j], X[labels == j].mean(axis=0), atol=1e-10)
    assert all(np.array_equal(r.centroids, res.centroids) for _, r in out)


def test_init_rows_distinct_and_seeded(on_ranks):
    A = np.array([[1.0], [1.0], [1.0], [2.0], [3.0]])
    out = on_ranks(2, lambda c: init_from_rows(RowBlockMatrix.from_global(A, c), 3, 0, c))
    assert sorted(out[0].ravel().tolist()) == [1.0, 2.0, 3.0]
    assert np.array_equal(out[0], out[1])
    with pytest.raises(ValueError):
        init_from_rows(block([1.0, 1.0, 2.0]), 3, 0, SELF)


def test_kmeans_rank_count_oracle(on_ranks):
    spec = GenSpec("KMEANS", 1500, 8, seed=6)

    def run(c):
        b = generate(spec, c)
        return kmeans_lloyd(b.X, 4, init_from_rows(b.X, 4, 3, c), 30, c).centroids

    one = run(SELF)
    for C in on_ranks(4, run):
        assert np.allclose(C, one, atol=1e-10, rtol=0)


# ---- SVM -----------------------------------------------------------------

def test_hinge_zero_weights_equals_n():
    b = generate(GenSpec("SVM", 57, 4, seed=1), SELF)
    assert hinge_loss(np.zeros(4), b.X, b.y, SELF) == 57.0


def test_hinge_single_row():
    assert hinge_loss([2.0, 0.0], block([[1.0, 1.0]]), [1.0], SELF) == 0.0


def test_hinge_three_row_hand_case():
    # margins x.w = {0.5, -1, 2}; terms max(0, 1 - y m) = 0.5, 2, 3
    X = block([[0.5], [-1.0], [2.0]])
    assert hinge_loss([1.0], X, [1.0, 1.0, -1.0], SELF) == 5.5


def test_hinge_dimension_mismatch():
    with pytest.raises(ValueError):
        hinge_loss([1.0, 2.0], block([[1.0]]), [1.0], SELF)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_hinge_convex(seed):
    r = np.random.default_rng(seed)
    X = block(r.normal(size=(20, 3)))
    y = r.choice([-1.0, 1.0], 20)
    a, b = r.normal(size=3) * 3, r.normal(size=3) * 3
    f = lambda w: hinge_loss(w, X, y, SELF)
    assert f(0.5 * (a + b)) <= 0.5 * (f(a) + f(b)) + 1e-12


def test_svm_separable_training_accuracy():
    x = np.array([-5.0] * 10 + [5.0] * 10)
    X = block(np.column_stack([np.ones(20), x]))
    data = LabeledBlock(X, np.where(x > 0, 1.0, -1.0), "svm-response")
    model = svm_fit(data, SELF, iters=500)
    assert svm_accuracy(model, data, SELF) == 1.0
    assert model.final_loss == hinge_loss(model.weights, X, data.y, SELF)


def test_svm_one_iteration_not_worse_than_zero():
    data = generate(GenSpec("SVM", 80, 5, seed=3), SELF)
    model = svm_fit(data, SELF, iters=1)
    assert model.final_loss <= 80.0
    assert model.iterations_run == 1


def test_svm_rejects_bad_labels():
    data = LabeledBlock(block([[1.0, 2.0]]), np.array([0.0]), "svm-response")
    with pytest.raises(ValueError):
        svm_fit(data, SELF, iters=1)


def test_svm_rank_count_oracle(on_ranks):
    spec = GenSpec("SVM", 600, 6, seed=12)
    run = lambda c: svm_fit(generate(spec, c), c, iters=200).weights
    one = run(SELF)
    for w in on_ranks(4, run):
        assert np.allclose(w, one, atol=1e-10, rtol=0)


def test_accuracy_all_positive():
    data = LabeledBlock(block([[1.0], [2.0]]), np.array([1.0, 1.0]))
    assert svm_accuracy(SvmModel(np.array([1.0]), 0.0, 0), data, SELF) == 1.0


def test_accuracy_zero_weights_is_positive_fraction():
    y = np.array([1.0, -1.0, -1.0, 1.0, 1.0])
    data = LabeledBlock(block(np.ones((5, 2))), y)
    assert svm_accuracy(SvmModel(np.zeros(2), 0.0, 0), data, SELF) == 3 / 5


def test_accuracy_hand_case():
    # predictions {+, -, +} against truth {+, +, +}
    data = LabeledBlock(block([[1.0], [-1.0], [2.0]]), np.ones(3))
    assert svm_accuracy(SvmModel(np.array([1.0]), 0.0, 0), data, SELF) == pytest.approx(2 / 3)


def test_accuracy_dimension_mismatch():
    data = LabeledBlock(block([[1.0]]), np.ones(1))
    with pytest.raises(ValueError):
        svm_accuracy(SvmModel(np.zeros(2), 0.0, 0), data, SELF)
