"""Pearson correlation analysis and the correlation-threshold retention rule."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, UnknownWhitelistName, ZeroVariance
from .features import FeatureMatrix

TARGET = "helpful"


def pearson(x, y) -> float:
    """Sample Pearson correlation of two equal-length sequences.

    Raises:
        LengthMismatch: lengths differ or are below 2.
        ZeroVariance: either input is constant (correlation undefined).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"pearson needs equal-length 1-d inputs, got {x.shape} and {y.shape}")
    n = x.shape[0]
    if n < 2:
        raise LengthMismatch("pearson needs at least 2 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ZeroVariance("correlation undefined for a constant input")
    dx = x - x.mean()
    dy = y - y.mean()
    # the 1/(n-1) factors of the sample covariance and variances cancel
    cov = np.dot(dx, dy) / (n - 1)
    sx = math.sqrt(np.dot(dx, dx) / (n - 1))
    sy = math.sqrt(np.dot(dy, dy) / (n - 1))
    return float(min(1.0, max(-1.0, cov / (sx * sy))))


@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple[str, ...]
    r: np.ndarray  # NaN marks an undefined (flagged) entry

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.r)

    def get(self, a: str, b: str) -> float | None:
        v = self.r[self.names.index(a), self.names.index(b)]
        return None if math.isnan(v) else float(v)

    @classmethod
    def from_target_correlations(cls, target_r: dict, target: str = TARGET) -> "CorrelationMatrix":
        """Matrix holding only feature-vs-target entries; feature pairs are flagged."""
        names = (*target_r, target)
        k = len(names)
        r = np.full((k, k), np.nan)
        for i, name in enumerate(target_r):
            v = target_r[name]
            if v is not None:
                r[i, -1] = r[-1, i] = v
                r[i, i] = 1.0
        r[-1, -1] = 1.0
        return cls(names, r)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["", *self.names])
            for name, row in zip(self.names, self.r):
                writer.writerow([name, *("NA" if math.isnan(v) else repr(float(v)) for v in row)])

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "r": [[None if math.isnan(v) else float(v) for v in row] for row in self.r],
        }


def correlation_matrix(matrix: FeatureMatrix, target: str = TARGET) -> CorrelationMatrix:
    """Pairwise Pearson r over every feature column plus the label."""
    names = (*matrix.columns, target)
    data = np.column_stack([matrix.rows, matrix.labels.astype(np.float64)])
    k = len(names)
    r = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(i, k):
            try:
                v = 1.0 if i == j and not np.all(data[:, i] == data[0, i]) else pearson(data[:, i], data[:, j])
            except ZeroVariance:
                continue
            r[i, j] = r[j, i] = v
    return CorrelationMatrix(names, r)


def retain_features(corr: CorrelationMatrix, threshold: float, whitelist=(), target: str = TARGET) -> tuple[str, ...]:
    """Keep features with ``|r(feature, target)| > threshold`` or whitelisted.

    Features whose target correlation is undefined survive only via the
    whitelist. Order follows ``corr.names``.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    features = [n for n in corr.names if n != target]
    unknown = set(whitelist) - set(features)
    if unknown:
        raise UnknownWhitelistName(f"whitelist names not in the matrix: {sorted(unknown)}")
    kept = []
    for name in features:
        r = corr.get(name, target)
        if name in whitelist or (r is not None and abs(r) > threshold):
            kept.append(name)
    return tuple(kept)
