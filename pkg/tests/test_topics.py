import inspect
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tropelens.config import PipelineConfig
from tropelens.errors import InsufficientData
from tropelens.lexicon import Lemmatizer
from tropelens.scoring import GenderednessReport, TropeDocument
from tropelens.topics import (
    LdaModel,
    load_stopwords,
    select_training_set,
    skew_summary,
    topic_gender_profiles,
    train_lda,
)

from oracles import synthetic_topic_corpus

IDENTITY = Lemmatizer({})
NO_STOP = frozenset()


def rep(trope_id, g):
    return GenderednessReport(trope_id, 1, 1, 0.5, 1.0, g)


def test_selection_defaults():
    sig = inspect.signature(select_training_set)
    assert sig.parameters["min_tokens"].default == 1000
    assert sig.parameters["subset_size"].default == 3000
    cfg = PipelineConfig()
    assert (cfg.min_tokens, cfg.subset, cfg.k, cfg.beta, cfg.iterations) == (1000, 3000, 75, 0.01, 1000)


def test_selection_takes_extremes():
    docs = [TropeDocument(f"t{i}", "x", 50) for i in range(10)]
    reports = [rep(f"t{i}", g) for i, g in enumerate([0.3, -2.0, 1.1, 0.0, -0.5, 2.5, -1.0, 0.7, 1.9, -0.1])]
    picked = [d.trope_id for d in select_training_set(docs, reports, min_tokens=10, subset_size=4)]
    assert picked == ["t1", "t6", "t8", "t5"]


def test_selection_filters_short_and_unscored():
    docs = [TropeDocument("long", "x", 2000), TropeDocument("short", "x", 10), TropeDocument("nog", "x", 2000),
            TropeDocument("long2", "x", 1500)]
    reports = [rep("long", 1.0), rep("short", 2.0), GenderednessReport("nog", 0, 0), rep("long2", -1.0)]
    assert [d.trope_id for d in select_training_set(docs, reports, 1000, 2)] == ["long2", "long"]


def test_selection_insufficient():
    docs = [TropeDocument(f"t{i}", "x", 5) for i in range(4)]
    with pytest.raises(InsufficientData):
        select_training_set(docs, [rep(f"t{i}", i) for i in range(4)], min_tokens=1000, subset_size=2)


def assert_distributions(model: LdaModel):
    for mat in (model.phi, model.theta):
        assert np.all(mat >= 0)
        assert np.allclose(mat.sum(axis=1), 1.0, atol=1e-6)


def test_single_word_corpus():
    model = train_lda([TropeDocument("only", "word", 1)], K=2, iterations=20, seed=1, stopwords=NO_STOP,
                      min_df=1, lemmatizer=IDENTITY)
    assert model.vocab == ["word"]
    assert model.phi.shape == (2, 1) and model.theta.shape == (1, 2)
    assert_distributions(model)


def test_alpha_default():
    docs, _ = synthetic_topic_corpus(n_docs=10)
    model = train_lda(docs, K=4, iterations=2, stopwords=NO_STOP, lemmatizer=IDENTITY)
    assert model.alpha == 12.5 and model.beta == 0.01


def test_recovers_disjoint_topics():
    docs, topics = synthetic_topic_corpus(seed=11, n_docs=150)
    model = train_lda(docs, K=3, iterations=150, seed=2, stopwords=NO_STOP, lemmatizer=IDENTITY)
    assert_distributions(model)
    learned = [set(model.top_terms(k, 10)) for k in range(3)]
    for words in topics:
        assert any(set(words[:5]) <= top for top in learned)


def test_seed_determinism():
    docs, _ = synthetic_topic_corpus(seed=5, n_docs=40)
    a = train_lda(docs, K=3, iterations=30, seed=9, stopwords=NO_STOP, lemmatizer=IDENTITY)
    b = train_lda(docs, K=3, iterations=30, seed=9, stopwords=NO_STOP, lemmatizer=IDENTITY)
    c = train_lda(docs, K=3, iterations=30, seed=10, stopwords=NO_STOP, lemmatizer=IDENTITY)
    assert a.phi.tobytes() == b.phi.tobytes() and a.theta.tobytes() == b.theta.tobytes()
    assert a.theta.tobytes() != c.theta.tobytes()


def test_document_order_only_permutes_theta():
    docs, _ = synthetic_topic_corpus(seed=5, n_docs=30)
    perm = np.random.default_rng(0).permutation(len(docs))
    shuffled = [docs[i] for i in perm]
    a = train_lda(docs, K=3, iterations=20, seed=4, stopwords=NO_STOP, lemmatizer=IDENTITY)
    b = train_lda(shuffled, K=3, iterations=20, seed=4, stopwords=NO_STOP, lemmatizer=IDENTITY)
    assert np.array_equal(a.phi, b.phi)
    assert np.array_equal(a.theta[perm], b.theta)
    assert b.doc_ids == [d.trope_id for d in shuffled]


def test_stopwords_and_min_df():
    docs = [TropeDocument("a", "the cat sat", 3), TropeDocument("b", "the cat ran", 3)]
    model = train_lda(docs, K=2, iterations=5, stopwords=load_stopwords(), min_df=2, lemmatizer=IDENTITY)
    assert model.vocab == ["cat"]
    with pytest.raises(InsufficientData):
        train_lda(docs, K=2, iterations=5, stopwords=frozenset({"cat", "the"}), min_df=2, lemmatizer=IDENTITY)


def fixed_model(theta, doc_ids):
    theta = np.asarray(theta, dtype=float)
    K = theta.shape[1]
    return LdaModel(K, ["w"], np.ones((K, 1)), theta, 0, doc_ids)


def test_profile_ratio():
    model = fixed_model([[0.9, 0.1], [0.8, 0.2], [0.6, 0.4], [0.5, 0.5]], ["f1", "f2", "m1", "tie"])
    g = {"f1": 1.2, "f2": 0.4, "m1": -2.0, "tie": 0.0}
    p0, p1 = topic_gender_profiles(model, g)
    assert (p0.n_female, p0.n_male, p0.n_assigned) == (2, 1, 4)
    assert p0.ratio == 2.0 and p0.skew == "female"
    assert (p1.n_female, p1.n_male, p1.n_assigned) == (0, 0, 0)
    assert p1.ratio is None and p1.skew == "empty"
    assert skew_summary([p0, p1]) == {"male": 0, "female": 1, "balanced": 0, "empty": 1}


def test_profile_requires_reports():
    with pytest.raises(ValueError):
        topic_gender_profiles(fixed_model([[1.0, 0.0]], ["x"]), {})


def test_ratio_without_male_tropes():
    model = fixed_model([[0.9, 0.1]], ["f"])
    assert math.isinf(topic_gender_profiles(model, {"f": 1.0})[0].ratio)


@given(st.lists(st.tuples(st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1),
                          st.sampled_from([-1.5, -0.2, 0.0, 0.3, 2.0])), min_size=1, max_size=25))
def test_sum_consistency(rows):
    theta = np.array([r[:3] for r in rows])
    theta /= theta.sum(axis=1, keepdims=True)
    ids = [f"t{i}" for i in range(len(rows))]
    profiles = topic_gender_profiles(fixed_model(theta, ids), {t: r[3] for t, r in zip(ids, rows)})
    assert sum(p.n_female + p.n_male for p in profiles) == sum(1 for r in rows if r[3] != 0)
    assert sum(p.n_assigned for p in profiles) == len(rows)


def test_argmax_ties_go_to_lowest_topic():
    model = fixed_model([[0.25, 0.5, 0.25], [0.5, 0.5, 0.0]], ["a", "b"])
    assert model.dominant_topics().tolist() == [1, 0]
