"""Accuracy, exploratory aggregations and model comparison tables.

Empty groups and buckets report ``None`` (written as an empty CSV cell)
instead of a fabricated 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, LengthMismatch
from .ingest import Dataset, RawReview
from .optim import Metrics

X_FIELDS = {
    "text_length": lambda r: len(r.text),
    "image_count": lambda r: r.image_count,
    "helpful_vote": lambda r: r.helpful_vote,
    "rating": lambda r: r.rating,
}
Y_FIELDS = ("rating", "helpful_vote", "count", "log10_count")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if preds.shape != labels.shape or preds.shape[0] == 0:
        raise LengthMismatch(f"accuracy needs equal non-empty inputs, got {preds.shape} and {labels.shape}")
    return int(np.count_nonzero(preds == labels)) / preds.shape[0]


@dataclass(frozen=True)
class StarRow:
    star: int
    count: int
    mean_helpful_votes: float | None


def _star_of(review: RawReview) -> int:
    # round half up; ratings are whole-star floats in practice
    return int(math.floor(review.rating + 0.5))


def star_summary(dataset: Dataset) -> list[StarRow]:
    """Review count and mean helpful votes per (rounded) star rating 1..5."""
    if not len(dataset):
        raise EmptyDataset("star summary of an empty dataset")
    counts = [0] * 6
    votes = [0] * 6
    for r in dataset.reviews:
        s = _star_of(r)
        counts[s] += 1
        votes[s] += r.helpful_vote
    return [StarRow(s, counts[s], votes[s] / counts[s] if counts[s] else None) for s in range(1, 6)]


def write_star_summary(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["star", "count", "mean_helpful_votes"])
        for row in rows:
            w.writerow([row.star, row.count, _fmt(row.mean_helpful_votes)])


@dataclass(frozen=True)
class Histogram:
    x_field: str
    y_field: str
    bucket_width: float
    lefts: tuple[float, ...]  # left-closed bucket edges, one per bucket
    counts: tuple[int, ...]
    values: tuple[float | None, ...]

    @property
    def n(self) -> int:
        return sum(self.counts)

    def to_rows(self):
        for left, count, value in zip(self.lefts, self.counts, self.values):
            yield left, left + self.bucket_width, count, value

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bucket_left", "bucket_right", "count", self.y_field])
            for left, right, count, value in self.to_rows():
                w.writerow([_fmt(left), _fmt(right), count, _fmt(value)])

    def to_dict(self) -> dict:
        return {
            "x_field": self.x_field,
            "y_field": self.y_field,
            "bucket_width": self.bucket_width,
            "lefts": list(self.lefts),
            "counts": list(self.counts),
            "values": list(self.values),
        }


def bucketed_mean(dataset: Dataset, x_field: str, y_field: str, bucket_width: float) -> Histogram:
    """Bucket reviews by ``x_field`` into ``[k*w, (k+1)*w)`` and aggregate ``y_field``.

    ``y_field`` is ``count``, ``log10_count`` or a per-bucket mean of
    ``rating``/``helpful_vote``. Buckets run from 0 up to the largest occupied
    one, so empty buckets in between are listed with count 0.
    """
    if bucket_width <= 0:
        raise ValueError("bucket_width must be positive")
    if x_field not in X_FIELDS:
        raise ValueError(f"x_field must be one of {sorted(X_FIELDS)}")
    if y_field not in Y_FIELDS:
        raise ValueError(f"y_field must be one of {Y_FIELDS}")
    get_x = X_FIELDS[x_field]
    counts: dict[int, int] = {}
    sums: dict[int, float] = {}
    for r in dataset.reviews:
        k = int(math.floor(get_x(r) / bucket_width))
        counts[k] = counts.get(k, 0) + 1
        if y_field in ("rating", "helpful_vote"):
            sums[k] = sums.get(k, 0.0) + getattr(r, y_field)
    top = max(counts) if counts else -1
    lefts, cs, values = [], [], []
    for k in range(0, top + 1):
        c = counts.get(k, 0)
        lefts.append(k * bucket_width)
        cs.append(c)
        if y_field == "count":
            values.append(c)
        elif y_field == "log10_count":
            values.append(math.log10(c) if c else None)
        else:
            values.append(sums[k] / c if c else None)
    return Histogram(x_field, y_field, bucket_width, tuple(lefts), tuple(cs), tuple(values))


def model_comparison(results) -> list[dict]:
    """One row per ``(name, Metrics)`` in the given order; ``mse`` is None where undefined."""
    results = list(results)
    if not results:
        raise ValueError("model_comparison needs at least one result")
    return [{"model": name, "accuracy": m.accuracy, "mse": m.mse, "n": m.n} for name, m in results]


def write_comparison(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "accuracy", "mse", "n"])
        for row in rows:
            w.writerow([row["model"], _fmt(row["accuracy"]), _fmt(row["mse"]), row["n"]])


__all__ = [
    "Histogram",
    "Metrics",
    "StarRow",
    "accuracy",
    "bucketed_mean",
    "model_comparison",
    "star_summary",
    "write_comparison",
    "write_star_summary",
]
