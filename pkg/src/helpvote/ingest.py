"""Review corpus ingestion: JSON Lines parsing, record filters, synthetic corpora.

Text length everywhere in this package is counted in characters (Unicode
code points, i.e. ``len(str)``).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DatasetIOError, EmptyDataset, MalformedRecord
from .seeding import derive_seed, make_rng

REQUIRED_FIELDS = ("rating", "text", "user_id", "asin", "timestamp")
OPTIONAL_FIELDS = ("title", "images", "parent_asin", "helpful_vote", "verified_purchase")


@dataclass(frozen=True)
class RawReview:
    rating: float
    title: str
    text: str
    image_count: int
    asin: str
    parent_asin: str
    user_id: str
    timestamp: int
    helpful_vote: int
    verified_purchase: bool = False


@dataclass(frozen=True)
class Dataset:
    reviews: tuple[RawReview, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.reviews)

    def __iter__(self):
        return iter(self.reviews)


@dataclass(frozen=True)
class IngestFilter:
    max_text_length: int | None = None
    require_fields: bool = False

    def __post_init__(self):
        if self.max_text_length is not None and self.max_text_length <= 0:
            raise ValueError("max_text_length must be a positive integer")


@dataclass
class IngestStats:
    read: int = 0
    retained: int = 0
    dropped_malformed: int = 0
    dropped_filtered: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _as_int(obj: dict, key: str, default=None) -> int:
    value = obj.get(key, default)
    if isinstance(value, bool) or value is None:
        raise MalformedRecord(f"field {key!r} must be an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise MalformedRecord(f"field {key!r} must be an integer")
        value = int(value)
    if not isinstance(value, int):
        raise MalformedRecord(f"field {key!r} must be an integer")
    return value


def _as_str(obj: dict, key: str, default=None) -> str:
    value = obj.get(key, default)
    if not isinstance(value, str):
        raise MalformedRecord(f"field {key!r} must be a string")
    return value


def record_from_dict(obj) -> RawReview:
    """Validate a decoded JSON object and map it onto a :class:`RawReview`."""
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")
    missing = [k for k in REQUIRED_FIELDS if k not in obj or obj[k] is None]
    if missing:
        raise MalformedRecord(f"missing required field(s): {', '.join(missing)}")

    rating = obj["rating"]
    if isinstance(rating, bool) or not isinstance(rating, (int, float)):
        raise MalformedRecord("rating must be a number")
    rating = float(rating)
    if not (1.0 <= rating <= 5.0):
        raise MalformedRecord(f"rating {rating} outside [1, 5]")

    helpful = _as_int(obj, "helpful_vote", 0)
    if helpful < 0:
        raise MalformedRecord("negative helpful_vote")
    timestamp = _as_int(obj, "timestamp")
    if timestamp < 0:
        raise MalformedRecord("negative timestamp")

    user_id = _as_str(obj, "user_id")
    asin = _as_str(obj, "asin")
    if not user_id or not asin:
        raise MalformedRecord("user_id and asin must be non-empty")

    images = obj.get("images")
    if images is None:
        images = []
    if not isinstance(images, list):
        raise MalformedRecord("images must be a list")

    parent = obj.get("parent_asin")
    verified = obj.get("verified_purchase")
    return RawReview(
        rating=rating,
        title=_as_str(obj, "title", "") if obj.get("title") is not None else "",
        text=_as_str(obj, "text"),
        image_count=len(images),
        asin=asin,
        parent_asin=parent if isinstance(parent, str) and parent else asin,
        user_id=user_id,
        timestamp=timestamp,
        helpful_vote=helpful,
        verified_purchase=bool(verified) if verified is not None else False,
    )


def parse_review_record(line: str) -> RawReview:
    """Parse one JSON Lines record.

    Raises:
        MalformedRecord: invalid JSON, not an object, a missing required
            field, rating outside [1, 5], or a negative count.
    """
    try:
        obj = json.loads(line)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedRecord(f"invalid JSON: {exc}") from None
    return record_from_dict(obj)


def review_to_dict(review: RawReview) -> dict:
    """Inverse of :func:`record_from_dict`; images come back as empty stubs."""
    return {
        "rating": review.rating,
        "title": review.title,
        "text": review.text,
        "images": [{} for _ in range(review.image_count)],
        "asin": review.asin,
        "parent_asin": review.parent_asin,
        "user_id": review.user_id,
        "timestamp": review.timestamp,
        "helpful_vote": review.helpful_vote,
        "verified_purchase": review.verified_purchase,
    }


def serialize_review(review: RawReview) -> str:
    return json.dumps(review_to_dict(review), ensure_ascii=False, separators=(",", ":"))


def write_jsonl(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for review in dataset.reviews:
            fh.write(serialize_review(review))
            fh.write("\n")


# (status, review) where status is "ok", "malformed" or "filtered"
def _classify_line(line: str, filt: IngestFilter):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return "malformed", None
    try:
        review = record_from_dict(obj)
    except MalformedRecord:
        return "malformed", None
    if filt.require_fields and any(k not in obj for k in OPTIONAL_FIELDS):
        return "filtered", None
    if filt.max_text_length is not None and len(review.text) > filt.max_text_length:
        return "filtered", None
    return "ok", review


def _classify_chunk(args):
    lines, filt = args
    return [_classify_line(line, filt) for line in lines]


def load_dataset(path, filt: IngestFilter | None = None, workers: int = 1):
    """Read a JSON Lines corpus.

    Malformed lines are counted and skipped; blank lines are ignored and not
    counted as read. With ``workers > 1`` lines are parsed in worker
    processes, and the result is identical to the sequential one.

    Returns:
        ``(Dataset, IngestStats)``
    """
    filt = filt or IngestFilter()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetIOError(f"cannot read {path}: {exc}") from None

    if workers > 1 and len(lines) > 1:
        size = math.ceil(len(lines) / workers)
        chunks = [(lines[i:i + size], filt) for i in range(0, len(lines), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_classify_chunk, chunks) for r in part]
    else:
        results = [_classify_line(line, filt) for line in lines]

    stats = IngestStats(read=len(lines))
    kept = []
    for status, review in results:
        if status == "ok":
            kept.append(review)
        elif status == "malformed":
            stats.dropped_malformed += 1
        else:
            stats.dropped_filtered += 1
    stats.retained = len(kept)
    if not kept:
        raise EmptyDataset(f"no records retained from {path} ({stats.to_dict()})")
    return Dataset(tuple(kept), source=str(path)), stats


# ---------------------------------------------------------------------------
# synthetic corpora

_WORDS = (
    "great good love nice bad terrible awful works smell skin hair color "
    "product bottle price cheap soft dry oily shampoo cream lotion scent "
    "amazing poor perfect broke fine okay small large fast slow would buy "
    "again the a it this was is and but not very really too my"
).split()

_BASE_RATE = 0.3
_HELPFUL_USER_RATE = 0.35
_REVIEWS_PER_USER = 10
_TS_START = 1_420_070_400_000  # 2015-01-01
_TS_END = 1_693_526_400_000  # 2023-09-01


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def generate_synthetic(n: int, seed: int, helpful_signal: float) -> Dataset:
    """Generate a review corpus with a planted helpfulness dependency.

    Each user carries a latent binary helpfulness trait. A review's planted
    score is ``2 * trait + image_count - 1.5`` (so it is positive for helpful
    users and for any review with two or more images) and

        logit P(helpful) = (1 - s) * logit(0.3) + 8 s / (1 - s) * score

    with ``s = helpful_signal``. ``s = 0`` gives labels independent of every
    field; ``s -> 1`` makes the label a deterministic function of the score.
    Helpful reviews receive ``1 + Poisson(2)`` votes, others none.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= helpful_signal <= 1.0:
        raise ValueError("helpful_signal must lie in [0, 1]")
    rng = make_rng(derive_seed(seed, "synthetic"))

    n_users = max(1, n // _REVIEWS_PER_USER)
    n_products = max(1, n // 20)
    user_trait = rng.random(n_users) < _HELPFUL_USER_RATE
    product_quality = rng.normal(0.0, 0.8, n_products)

    user_idx = rng.integers(0, n_users, n)
    product_idx = rng.integers(0, n_products, n)
    # mostly zero images with a thin tail, as in real review dumps
    image_count = np.minimum(rng.geometric(0.75, n) - 1, 20)
    timestamps = rng.integers(_TS_START, _TS_END, n)
    star_noise = rng.normal(0.0, 1.2, n)
    text_lengths = rng.geometric(1.0 / 30.0, n)
    title_lengths = rng.integers(1, 5, n)
    verified = rng.random(n) < 0.9

    slope = 8.0 * helpful_signal / max(1.0 - helpful_signal, 1e-3)
    score = 2.0 * user_trait[user_idx] + image_count - 1.5
    logits = (1.0 - helpful_signal) * _logit(_BASE_RATE) + slope * score
    prob = 1.0 / (1.0 + np.exp(-np.clip(logits, -500, 500)))
    helpful = rng.random(n) < prob
    votes = np.where(helpful, 1 + rng.poisson(2.0, n), 0)

    reviews = []
    for i in range(n):
        words = rng.choice(len(_WORDS), size=int(text_lengths[i]))
        title = rng.choice(len(_WORDS), size=int(title_lengths[i]))
        stars = int(np.clip(np.rint(4.0 + product_quality[product_idx[i]] + star_noise[i]), 1, 5))
        asin = f"P{product_idx[i]:06d}"
        reviews.append(RawReview(
            rating=float(stars),
            title=" ".join(_WORDS[j] for j in title),
            text=" ".join(_WORDS[j] for j in words),
            image_count=int(image_count[i]),
            asin=asin,
            parent_asin=asin,
            user_id=f"U{user_idx[i]:06d}",
            timestamp=int(timestamps[i]),
            helpful_vote=int(votes[i]),
            verified_purchase=bool(verified[i]),
        ))
    return Dataset(tuple(reviews), source=f"synthetic({seed})")
