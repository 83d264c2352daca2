import math
import warnings

import numpy as np
import pytest
import scipy.optimize
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from tropelens.classify import (
    ConvergenceWarning,
    LogRegModel,
    RatingBin,
    TropeFeatureMatrix,
    author_gender_task,
    bin_rating,
    build_matrix,
    fit_logreg,
    gendered_usage_counts,
    logreg_loss_grad,
    split_rows,
    top_features,
    train_logreg,
)
from tropelens.errors import DegenerateLabels, InsufficientData, RangeError
from tropelens.optim import lbfgs

from oracles import reference_logreg_objective


@pytest.mark.parametrize("rating,expected", [
    (0.1, RatingBin.LOW), (6.7, RatingBin.LOW), (6.700001, RatingBin.MEDIUM), (7.7, RatingBin.MEDIUM),
    (7.71, RatingBin.HIGH), (10.0, RatingBin.HIGH),
])
def test_rating_bins(rating, expected):
    assert bin_rating(rating) is expected


@pytest.mark.parametrize("rating", [0.0, -1.0, 10.01, float("nan"), None])
def test_rating_out_of_range(rating):
    with pytest.raises(RangeError):
        bin_rating(rating)


@given(st.floats(min_value=0.0, max_value=10.0, exclude_min=True))
def test_bins_partition(r):
    b = bin_rating(r)
    assert (b is RatingBin.LOW) == (r <= 6.7)
    assert (b is RatingBin.HIGH) == (r > 7.7)


# feature matrix

def test_matrix_bit_pattern():
    m = build_matrix({"w1": ["t1", "t2"], "w2": ["t2", "t3"]}, min_examples=1)
    assert m.row_ids == ["w1", "w2"] and m.col_ids == ["t1", "t2", "t3"]
    assert m.dense().tolist() == [[1, 1, 0], [0, 1, 1]]


def test_matrix_min_examples_filters_rows():
    m = build_matrix({"big": ["t"] * 10, "small": ["t"] * 9}, min_examples=10, trope_counts={"t": 19})
    assert m.row_ids == ["big"]


def test_matrix_is_binary():
    m = build_matrix({"w": ["t1", "t1", "t1", "t2"]}, min_examples=1)
    assert m.dense().tolist() == [[1, 1]]


def test_matrix_prunes_unused_and_rare_columns():
    m = build_matrix({"w1": ["a", "b"], "w2": ["a"]}, min_examples=2, trope_counts={"a": 5, "b": 1, "c": 9})
    assert m.col_ids == ["a"]
    assert np.all(m.dense().sum(axis=0) > 0)


def test_matrix_empty():
    with pytest.raises(InsufficientData):
        build_matrix({"w": ["a"]}, min_examples=5)


def test_matrix_save_load(tmp_path):
    m = build_matrix({"w1": ["t1", "t2"], "w2": ["t2", "t3"], "w3": ["t3"]}, min_examples=1)
    m.save(tmp_path)
    back = TropeFeatureMatrix.load(tmp_path)
    assert back.row_ids == m.row_ids and back.col_ids == m.col_ids
    assert np.array_equal(back.dense(), m.dense())


# objective and optimizer

def random_problem(rng, n=None, p=None, k=None):
    n = n or int(rng.integers(3, 15))
    p = p or int(rng.integers(1, 6))
    k = k or int(rng.integers(2, 5))
    X = rng.normal(size=(n, p))
    y = rng.integers(0, k, size=n)
    params = rng.normal(size=k * p + k)
    C = float(rng.uniform(0.1, 5.0))
    return X, y, k, C, params


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(0)
    for _ in range(20):
        X, y, k, C, params = random_problem(rng)
        _, grad = logreg_loss_grad(params, X, y, k, C)
        h = 1e-6
        numeric = np.empty_like(params)
        for j in range(len(params)):
            e = np.zeros_like(params)
            e[j] = h
            numeric[j] = (logreg_loss_grad(params + e, X, y, k, C)[0] - logreg_loss_grad(params - e, X, y, k, C)[0]) / (2 * h)
        rel = np.linalg.norm(grad - numeric) / max(np.linalg.norm(grad), np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-5


def test_loss_matches_reference_objective():
    rng = np.random.default_rng(1)
    for _ in range(10):
        X, y, k, C, params = random_problem(rng)
        p = X.shape[1]
        W, b = params[: k * p].reshape(k, p), params[k * p:]
        loss, _ = logreg_loss_grad(params, X, y, k, C)
        assert math.isclose(loss, reference_logreg_objective(W, b, X, y, C), rel_tol=1e-12)


def test_sparse_and_dense_agree():
    rng = np.random.default_rng(2)
    X = (rng.random((12, 5)) < 0.4).astype(float)
    y = rng.integers(0, 3, size=12)
    params = rng.normal(size=18)
    a = logreg_loss_grad(params, X, y, 3, 1.0)
    b = logreg_loss_grad(params, sp.csr_matrix(X), y, 3, 1.0)
    assert math.isclose(a[0], b[0]) and np.allclose(a[1], b[1])


def test_fit_matches_scipy_minimizer():
    rng = np.random.default_rng(3)
    X = (rng.random((60, 8)) < 0.3).astype(float)
    y = rng.integers(0, 3, size=60)
    labels = [["a", "b", "c"][i] for i in y]
    model = fit_logreg(X, labels, C=0.7)
    assert model.converged

    def objective(theta):
        W, b = theta[:24].reshape(3, 8), theta[24:]
        return reference_logreg_objective(W, b, X, y, 0.7)

    ref = scipy.optimize.minimize(objective, np.zeros(27), method="BFGS", options={"gtol": 1e-8})
    ours = np.concatenate([model.weights.ravel(), model.bias])
    assert objective(ours) <= ref.fun + 1e-8
    # softmax is invariant to a shared bias shift; compare centred biases
    assert np.allclose(model.weights, ref.x[:24].reshape(3, 8), atol=1e-4)
    assert np.allclose(model.bias - model.bias.mean(), ref.x[24:] - ref.x[24:].mean(), atol=1e-4)


def test_fit_matches_sklearn_when_available():
    sklearn_lm = pytest.importorskip("sklearn.linear_model")
    rng = np.random.default_rng(4)
    X = (rng.random((80, 6)) < 0.4).astype(float)
    y = rng.integers(0, 3, size=80)
    ours = fit_logreg(X, y.tolist(), C=2.0)
    ref = sklearn_lm.LogisticRegression(C=2.0, tol=1e-10, max_iter=5000).fit(X, y)
    assert np.allclose(ours.weights, ref.coef_, atol=1e-4)


def test_lbfgs_rosenbrock():
    res = lbfgs(lambda x: (scipy.optimize.rosen(x), scipy.optimize.rosen_der(x)), np.array([-1.2, 1.0, 0.5]),
                gtol=1e-8, max_iter=500)
    assert res.converged and np.allclose(res.x, 1.0, atol=1e-5)


def test_non_convergence_warns():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 6))
    with pytest.warns(ConvergenceWarning):
        model = fit_logreg(X, rng.integers(0, 3, 40).tolist(), max_iter=2)
    assert not model.converged


def test_single_class_rejected():
    with pytest.raises(DegenerateLabels):
        fit_logreg(np.eye(3), ["a", "a", "a"])


def separable(seed, n=100, p=5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    w = rng.normal(size=p)
    margin = X @ w
    keep = np.abs(margin) > 0.3 * np.std(margin)
    # top up so exactly n rows with a clear margin remain
    while keep.sum() < n:
        extra = rng.normal(size=(n, p))
        X = np.vstack([X, extra])
        margin = X @ w
        keep = np.abs(margin) > 0.3 * np.std(margin)
    X, margin = X[keep][:n], margin[keep][:n]
    labels = ["pos" if m > 0 else "neg" for m in margin]
    return X, labels


def dense_matrix(X):
    return TropeFeatureMatrix([f"r{i:03d}" for i in range(X.shape[0])], [f"f{j}" for j in range(X.shape[1])], X)


def test_separable_accuracy():
    X, labels = separable(0)
    res = train_logreg(dense_matrix(X), labels, C=10.0, seed=1)
    assert res.test_accuracy >= 0.95


def test_shuffled_labels_near_baseline():
    # single 20-row test splits swing by +-0.2 from sampling alone, so average
    # over seeded permutations of a larger set
    X, labels = separable(1, n=1000)
    matrix = dense_matrix(X)
    acc, base = [], []
    for seed in range(20):
        shuffled = list(np.random.default_rng(seed).permutation(labels))
        res = train_logreg(matrix, shuffled, C=1.0, seed=seed)
        acc.append(res.test_accuracy)
        base.append(res.majority_baseline)
    assert abs(np.mean(acc) - np.mean(base)) <= 0.1


def test_near_optimum_line_search_converges():
    # predicted decrease here falls below the rounding error of the summed loss
    X, labels = separable(24, n=1000)
    labels = list(np.random.default_rng(124).permutation(labels))
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        res = train_logreg(dense_matrix(X), labels, seed=24)
    assert res.model.converged


def test_weight_norm_monotone_in_C():
    rng = np.random.default_rng(6)
    X = (rng.random((50, 7)) < 0.4).astype(float)
    y = rng.integers(0, 3, size=50).tolist()
    norms = [np.linalg.norm(fit_logreg(X, y, C=C).weights) for C in (10.0, 3.0, 1.0, 0.3, 0.1, 0.01)]
    assert all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))


def test_split_determinism():
    ids = [f"r{i}" for i in range(37)]
    assert split_rows(ids, 0.8, 5) == split_rows(list(reversed(ids)), 0.8, 5)
    train, test = split_rows(ids, 0.8, 5)
    assert len(train) == 30 and len(test) == 7 and not set(train) & set(test)
    assert split_rows(ids, 0.8, 6) != (train, test)


def test_accuracy_invariant_to_row_order():
    X, labels = separable(7, n=60)
    m = dense_matrix(X)
    perm = np.random.default_rng(0).permutation(60)
    m2 = TropeFeatureMatrix([m.row_ids[i] for i in perm], m.col_ids, X[perm])
    a = train_logreg(m, labels, seed=4)
    b = train_logreg(m2, [labels[i] for i in perm], seed=4)
    assert a.test_accuracy == b.test_accuracy and a.test_ids == b.test_ids


def test_duplicate_column_keeps_baseline():
    X, labels = separable(8, n=60)
    a = train_logreg(dense_matrix(X), labels, seed=2)
    b = train_logreg(dense_matrix(np.hstack([X, X[:, :1]])), labels, seed=2)
    assert a.majority_baseline == b.majority_baseline


def test_top_features_ranking():
    model = LogRegModel(["A", "B"], np.array([[2.0, -1.0, 0.5], [0.0, 1.0, 0.0]]), np.zeros(2), 1.0, 0,
                        ["t1", "t2", "t3"])
    rep = top_features(model, "A", 2, {"t1": 1.0, "t2": 0.2, "t3": -0.5})
    assert [t for t, _, _ in rep.top_tropes] == ["t1", "t3"]
    assert rep.mean_abs_g == 0.75 and rep.mean_g == 0.25
    assert len(top_features(model, "A", 10, {}).top_tropes) == 3
    assert top_features(model, "A", 10, {}).mean_abs_g is None


def test_author_task_separable():
    examples = {f"fa{i}": ["romance", "tea", "garden"] for i in range(6)}
    examples.update({f"ma{i}": ["robot", "war", "laser"] for i in range(6)})
    labels = {a: ("Female" if a.startswith("f") else "Male") for a in examples}
    matrix = build_matrix(examples, min_examples=1)
    res = author_gender_task(matrix, labels, examples, {"romance": 1.5, "robot": -1.5}, seed=0)
    assert res.test_accuracy == 1.0


def test_usage_counts():
    usage = gendered_usage_counts({"jane": ["hot", "hot", "hot", "plain"], "isaac": ["cold"]},
                                  {"jane": "Female", "isaac": "Male"}, {"hot": 1.5, "plain": 0.2, "cold": -2.0})
    assert usage["Female"] == {"examples": 4, "high_female": 3, "high_male": 0}
    assert usage["Male"] == {"examples": 1, "high_female": 0, "high_male": 1}
