import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from helpvote.errors import ConfigError, EmptyDataset
from helpvote.features import (
    ALL_FEATURES,
    PAPER_FEATURES,
    FeatureMatrix,
    FeatureSpec,
    build_features,
    compute_product_avg_rating,
    compute_user_avg_helpful,
    label,
    load_lexicon,
    sentiment_scores,
    standardize_apply,
    standardize_fit,
)
from helpvote.ingest import Dataset, RawReview, load_dataset


def review(user="U", asin="A", votes=0, rating=5.0, text="", images=0, ts=0):
    return RawReview(rating, "", text, images, asin, asin, user, ts, votes)


LEX = {"great": (0.8, 0.75), "bad": (-0.7, 0.67)}


@pytest.mark.parametrize("votes,expected", [(0, 0), (1, 1), (220, 1)])
def test_label(votes, expected):
    assert label(review(votes=votes)) == expected


@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_label_monotone(a, b):
    lo, hi = sorted((a, b))
    assert label(review(votes=lo)) <= label(review(votes=hi))


def test_user_avg():
    ds = Dataset((review("U", votes=0), review("U", votes=3), review("V", votes=7)))
    assert compute_user_avg_helpful(ds) == {"U": 1.5, "V": 7.0}
    assert compute_user_avg_helpful(ds, leave_one_out=True) == [3.0, 0.0, 0.0]


def test_product_avg_rating():
    ds = Dataset((review(asin="A", rating=5), review(asin="A", rating=1), review(asin="B", rating=4)))
    assert compute_product_avg_rating(ds) == {"A": 3.0, "B": 4.0}


def test_product_avg_rating_fixture(fixtures):
    import json

    ds, _ = load_dataset(fixtures / "five.jsonl")
    groups = {}
    with open(fixtures / "five.jsonl") as fh:
        for line in fh:
            obj = json.loads(line)
            groups.setdefault(obj["asin"], []).append(obj["rating"])
    assert len(groups) == 3
    expected = {k: sum(v) / len(v) for k, v in groups.items()}
    assert compute_product_avg_rating(ds) == pytest.approx(expected, abs=1e-12)


def test_sentiment_examples():
    assert sentiment_scores("", LEX) == (0.0, 0.0)
    assert sentiment_scores("great GREAT", LEX) == pytest.approx((0.8, 0.75))
    assert sentiment_scores("great bad", LEX) == pytest.approx((0.05, 0.71))
    assert sentiment_scores("nothing known here", LEX) == (0.0, 0.0)
    # punctuation and digits split tokens
    assert sentiment_scores("great!bad,2great", LEX) == pytest.approx(((0.8 - 0.7 + 0.8) / 3, (0.75 + 0.67 + 0.75) / 3))


@given(st.lists(st.sampled_from(["great", "bad", "GREAT", "Bad", "meh", "the"]), max_size=12), st.randoms())
def test_sentiment_order_and_case_invariant(words, rnd):
    shuffled = list(words)
    rnd.shuffle(shuffled)
    a = sentiment_scores(" ".join(words), LEX)
    b = sentiment_scores(" ".join(w.swapcase() for w in shuffled), LEX)
    assert a == pytest.approx(b, abs=1e-12)


def test_lexicon_loading(fixtures):
    assert load_lexicon(fixtures / "lexicon_small.tsv") == LEX
    bundled = load_lexicon()
    assert len(bundled) > 50
    assert all(k == k.lower() and k for k in bundled)
    assert all(-1 <= p <= 1 and 0 <= s <= 1 for p, s in bundled.values())


def test_lexicon_rejects_bad_rows(tmp_path):
    p = tmp_path / "lex.tsv"
    p.write_text("good\t2.0\t0.5\n")
    with pytest.raises(ConfigError):
        load_lexicon(p)


def test_feature_spec_validation():
    with pytest.raises(ConfigError):
        FeatureSpec(())
    with pytest.raises(ConfigError):
        FeatureSpec(("rating", "rating"))
    with pytest.raises(ConfigError):
        FeatureSpec(("helpful_vote",))


THREE = Dataset((
    review("U1", "A", votes=0, rating=5.0, text="great", images=2, ts=100),
    review("U1", "B", votes=4, rating=1.0, text="bad bad item", images=0, ts=200),
    review("U2", "A", votes=1, rating=2.0, text="great and bad", images=1, ts=300),
))


def test_build_all_features_by_hand():
    m = build_features(THREE, FeatureSpec(ALL_FEATURES), LEX)
    assert m.columns == ALL_FEATURES
    expected = np.array([
        # len, pol, subj, prod_avg, rating, user_avg, images, ts
        [5, 0.8, 0.75, 3.5, 5.0, 2.0, 2, 100],
        [12, -0.7, 0.67, 1.0, 1.0, 2.0, 0, 200],
        [13, 0.05, 0.71, 3.5, 2.0, 1.0, 1, 300],
    ])
    np.testing.assert_allclose(m.rows, expected, atol=1e-12)
    assert list(m.labels) == [0, 1, 1]


def test_build_leave_one_out():
    m = build_features(THREE, FeatureSpec(("user_avg_helpful_votes",), leave_one_out_user_avg=True), LEX)
    assert list(m.rows[:, 0]) == [4.0, 0.0, 0.0]


def test_paper_features_give_three_columns():
    m = build_features(THREE, FeatureSpec(PAPER_FEATURES))
    assert m.d == 3 and m.columns == PAPER_FEATURES


def test_build_features_column_order_follows_spec():
    full = build_features(THREE, FeatureSpec(ALL_FEATURES), LEX)
    perm = ALL_FEATURES[::-1]
    rev = build_features(THREE, FeatureSpec(perm), LEX)
    assert rev.columns == perm
    np.testing.assert_array_equal(rev.rows, full.rows[:, ::-1])


def test_build_features_deterministic_and_empty():
    a = build_features(THREE, FeatureSpec(ALL_FEATURES), LEX)
    b = build_features(THREE, FeatureSpec(ALL_FEATURES), LEX)
    np.testing.assert_array_equal(a.rows, b.rows)
    with pytest.raises(EmptyDataset):
        build_features(Dataset(()), FeatureSpec())


def _matrix(cols):
    rows = np.column_stack(cols).astype(float)
    return FeatureMatrix(tuple(f"c{i}" for i in range(rows.shape[1])), rows, np.zeros(rows.shape[0], np.int8))


def test_standardize_closed_form():
    m = _matrix([[1, 2, 3], [5, 5, 5]])
    stats = standardize_fit(m)
    assert stats.mean[0] == pytest.approx(2.0)
    assert stats.std[0] == pytest.approx(math.sqrt(2 / 3))
    assert list(stats.constant) == [False, True]
    z = standardize_apply(m, stats)
    np.testing.assert_allclose(z.rows[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)
    assert list(z.rows[:, 1]) == [0.0, 0.0, 0.0]


def test_standardize_fits_on_subset_only():
    m = _matrix([[0, 1, 2, 10, 20]])
    stats = standardize_fit(m, [0, 1, 2])
    z = standardize_apply(m, stats)
    assert stats.mean[0] == pytest.approx(1.0)
    assert z.rows[3:, 0].mean() > 1.0


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)))
def test_standardize_zero_mean_unit_std(x):
    m = FeatureMatrix(tuple(f"c{i}" for i in range(x.shape[1])), x, np.zeros(x.shape[0], np.int8))
    stats = standardize_fit(m)
    z = standardize_apply(m, stats).rows
    for j in range(x.shape[1]):
        if stats.constant[j]:
            assert np.all(z[:, j] == 0.0)
        elif stats.std[j] > 1e-6 * max(1.0, np.abs(x[:, j]).max()):
            assert abs(z[:, j].mean()) <= 1e-9
            assert abs(z[:, j].std() - 1.0) <= 1e-9


def test_standardize_timestamps_scale():
    ts = np.array([1.6e12, 1.61e12, 1.65e12, 1.7e12])
    m = _matrix([ts])
    z = standardize_apply(m, standardize_fit(m)).rows[:, 0]
    assert abs(z.mean()) <= 1e-9 and abs(z.std() - 1) <= 1e-9


def test_feature_matrix_csv(tmp_path):
    m = build_features(THREE, FeatureSpec(PAPER_FEATURES))
    p = tmp_path / "f.csv"
    m.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "user_avg_helpful_votes,images_per_review,timestamp,label"
    assert len(lines) == 4 and lines[1].endswith(",0")
