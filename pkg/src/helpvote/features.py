"""Engineered review features, the binary label, and standardization."""

from __future__ import annotations

import csv
import re
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, EmptyDataset
from .ingest import Dataset, RawReview

ALL_FEATURES = (
    "text_length",
    "polarity",
    "subjectivity",
    "product_avg_rating",
    "rating",
    "user_avg_helpful_votes",
    "images_per_review",
    "timestamp",
)

# the three features the final models are trained on
PAPER_FEATURES = ("user_avg_helpful_votes", "images_per_review", "timestamp")

_TOKEN = re.compile(r"[^\W\d_]+")


@dataclass(frozen=True)
class FeatureSpec:
    enabled: tuple[str, ...] = PAPER_FEATURES
    leave_one_out_user_avg: bool = False

    def __post_init__(self):
        enabled = tuple(self.enabled)
        object.__setattr__(self, "enabled", enabled)
        if not enabled:
            raise ConfigError("feature spec must enable at least one feature")
        if len(set(enabled)) != len(enabled):
            raise ConfigError(f"duplicate feature names in {enabled}")
        unknown = [f for f in enabled if f not in ALL_FEATURES]
        if unknown:
            raise ConfigError(f"unknown feature(s): {', '.join(unknown)}")


@dataclass(frozen=True)
class FeatureMatrix:
    columns: tuple[str, ...]
    rows: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int8 in {0, 1}

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def take(self, index) -> "FeatureMatrix":
        return FeatureMatrix(self.columns, self.rows[index], self.labels[index])

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([*self.columns, "label"])
            for row, y in zip(self.rows, self.labels):
                writer.writerow([*(repr(float(v)) for v in row), int(y)])


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool per column

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "constant": [bool(v) for v in self.constant],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StandardizationStats":
        return cls(
            np.asarray(data["mean"], dtype=np.float64),
            np.asarray(data["std"], dtype=np.float64),
            np.asarray(data["constant"], dtype=bool),
        )


SentimentLexicon = dict  # word -> (polarity, subjectivity)


def load_lexicon(path=None) -> SentimentLexicon:
    """Read a ``word<TAB>polarity<TAB>subjectivity`` file; ``#`` lines are comments.

    Without ``path`` the lexicon bundled with the package is used.
    """
    if path is None:
        text = resources.files("helpvote").joinpath("data/lexicon.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    lexicon = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise ConfigError(f"lexicon line {lineno}: expected 3 tab-separated columns")
        word = parts[0].strip().lower()
        polarity, subjectivity = float(parts[1]), float(parts[2])
        if not word:
            raise ConfigError(f"lexicon line {lineno}: empty word")
        if not (-1.0 <= polarity <= 1.0 and 0.0 <= subjectivity <= 1.0):
            raise ConfigError(f"lexicon line {lineno}: score out of range")
        lexicon[word] = (polarity, subjectivity)
    return lexicon


def label(review: RawReview) -> int:
    """1 if the review has at least one helpful vote, else 0."""
    return 1 if review.helpful_vote >= 1 else 0


def compute_user_avg_helpful(dataset: Dataset, leave_one_out: bool = False):
    """Mean helpful votes per user.

    Returns a ``user_id -> mean`` dict, or with ``leave_one_out`` a list with
    one value per review: the mean over the author's *other* reviews (0.0 for
    an author with a single review).
    """
    if not len(dataset):
        raise EmptyDataset("dataset is empty")
    totals = defaultdict(int)
    counts = defaultdict(int)
    for r in dataset.reviews:
        totals[r.user_id] += r.helpful_vote
        counts[r.user_id] += 1
    if not leave_one_out:
        return {u: totals[u] / counts[u] for u in totals}
    out = []
    for r in dataset.reviews:
        others = counts[r.user_id] - 1
        out.append((totals[r.user_id] - r.helpful_vote) / others if others else 0.0)
    return out


def compute_product_avg_rating(dataset: Dataset) -> dict:
    if not len(dataset):
        raise EmptyDataset("dataset is empty")
    totals = defaultdict(float)
    counts = defaultdict(int)
    for r in dataset.reviews:
        totals[r.asin] += r.rating
        counts[r.asin] += 1
    return {a: totals[a] / counts[a] for a in totals}


def sentiment_scores(text: str, lexicon: SentimentLexicon) -> tuple[float, float]:
    """Average (polarity, subjectivity) over lexicon words found in ``text``.

    Tokens are maximal runs of letters, lower-cased. No match gives (0, 0).
    """
    hits = [lexicon[t] for t in _TOKEN.findall(text.lower()) if t in lexicon]
    if not hits:
        return 0.0, 0.0
    n = len(hits)
    return sum(p for p, _ in hits) / n, sum(s for _, s in hits) / n


def build_features(dataset: Dataset, spec: FeatureSpec, lexicon: SentimentLexicon | None = None) -> FeatureMatrix:
    """One row per review with columns in ``spec.enabled`` order.

    The raw helpful-vote count is never a column: it only feeds the label and
    the per-user average.
    """
    if not len(dataset):
        raise EmptyDataset("cannot build features from an empty dataset")
    enabled = spec.enabled
    reviews = dataset.reviews
    n = len(reviews)

    cols = {}
    if "text_length" in enabled:
        cols["text_length"] = [float(len(r.text)) for r in reviews]
    if "polarity" in enabled or "subjectivity" in enabled:
        lex = lexicon if lexicon is not None else load_lexicon()
        scores = [sentiment_scores(r.text, lex) for r in reviews]
        cols["polarity"] = [s[0] for s in scores]
        cols["subjectivity"] = [s[1] for s in scores]
    if "product_avg_rating" in enabled:
        means = compute_product_avg_rating(dataset)
        cols["product_avg_rating"] = [means[r.asin] for r in reviews]
    if "rating" in enabled:
        cols["rating"] = [r.rating for r in reviews]
    if "user_avg_helpful_votes" in enabled:
        if spec.leave_one_out_user_avg:
            cols["user_avg_helpful_votes"] = compute_user_avg_helpful(dataset, True)
        else:
            means = compute_user_avg_helpful(dataset)
            cols["user_avg_helpful_votes"] = [means[r.user_id] for r in reviews]
    if "images_per_review" in enabled:
        cols["images_per_review"] = [float(r.image_count) for r in reviews]
    if "timestamp" in enabled:
        cols["timestamp"] = [float(r.timestamp) for r in reviews]

    rows = np.empty((n, len(enabled)), dtype=np.float64)
    for j, name in enumerate(enabled):
        rows[:, j] = cols[name]
    labels = np.fromiter((label(r) for r in reviews), dtype=np.int8, count=n)
    return FeatureMatrix(tuple(enabled), rows, labels)


def standardize_fit(matrix: FeatureMatrix, rows=None) -> StandardizationStats:
    """Per-column mean and population std over ``rows`` (all rows if None)."""
    x = matrix.rows if rows is None else matrix.rows[np.asarray(rows)]
    if x.shape[0] == 0:
        raise EmptyDataset("standardization fit subset is empty")
    mean = x.mean(axis=0)
    std = np.sqrt(((x - mean) ** 2).mean(axis=0))
    # std can underflow to 0 for distinct subnormal values
    constant = np.all(x == x[0], axis=0) | (std == 0.0)
    return StandardizationStats(mean, std, constant)


def standardize_apply(matrix: FeatureMatrix, stats: StandardizationStats) -> FeatureMatrix:
    """z-score every column; columns flagged constant become 0.0."""
    safe_std = np.where(stats.constant, 1.0, stats.std)
    z = (matrix.rows - stats.mean) / safe_std
    z[:, stats.constant] = 0.0
    return FeatureMatrix(matrix.columns, z, matrix.labels)
