"""Likert rating aggregation and the controversial / non-controversial split.

Scores are integers 0..4.  Per-term aggregates carry total, mean and the
population standard deviation; terms rank by descending mean.  A term is
controversial when its mean strictly exceeds the threshold (default 0.95).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

__all__ = [
    "CONTROVERSIAL",
    "DEFAULT_THRESHOLD",
    "LIKERT_NAMES",
    "NON_CONTROVERSIAL",
    "RatingAggregate",
    "RatingRow",
    "RankingError",
    "TermLabel",
    "aggregate_ratings",
    "label_distribution",
    "partition_terms",
    "read_ratings_csv",
    "read_labels_csv",
    "write_labels_csv",
]

LIKERT_NAMES = (
    "Neutral",
    "Somewhat Controversial",
    "Controversial",
    "Very Controversial",
    "Highly Controversial",
)

CONTROVERSIAL = "controversial"
NON_CONTROVERSIAL = "non-controversial"
DEFAULT_THRESHOLD = 0.95


class RankingError(ValueError):
    pass


@dataclass(frozen=True)
class RatingRow:
    term: str
    participant: str
    score: int


@dataclass(frozen=True)
class RatingAggregate:
    term: str
    total: int
    mean: float
    std: float
    n_raters: int


@dataclass(frozen=True)
class TermLabel:
    term: str
    label: str
    mean: float


def aggregate_ratings(rows: list[RatingRow]) -> list[RatingAggregate]:
    """One aggregate per term, sorted by descending mean then ascending term.

    Rejects scores outside 0..4 and duplicate (term, participant) pairs.
    std is the population standard deviation.
    """
    seen: set[tuple[str, str]] = set()
    scores: dict[str, list[int]] = {}
    for row in rows:
        if not 0 <= row.score <= 4:
            raise RankingError(f"score {row.score} for term {row.term!r} outside 0..4")
        key = (row.term, row.participant)
        if key in seen:
            raise RankingError(f"duplicate rating: term {row.term!r}, participant {row.participant!r}")
        seen.add(key)
        scores.setdefault(row.term, []).append(row.score)

    aggs = []
    for term, vals in scores.items():
        n = len(vals)
        total = sum(vals)
        mean = total / n
        var = sum((v - mean) ** 2 for v in vals) / n
        aggs.append(RatingAggregate(term=term, total=total, mean=mean, std=math.sqrt(var), n_raters=n))
    aggs.sort(key=lambda a: (-a.mean, a.term))
    return aggs


def partition_terms(aggs: list[RatingAggregate], threshold: float = DEFAULT_THRESHOLD) -> list[TermLabel]:
    """Label each aggregate; controversial iff mean > threshold (strict)."""
    if threshold < 0:
        raise RankingError(f"threshold must be >= 0, got {threshold}")
    return [
        TermLabel(
            term=a.term,
            label=CONTROVERSIAL if a.mean > threshold else NON_CONTROVERSIAL,
            mean=a.mean,
        )
        for a in aggs
    ]


def label_distribution(rows: list[RatingRow]) -> dict[str, float]:
    """Percentage of all ratings at each Likert level, keyed by level name."""
    if not rows:
        raise RankingError("label_distribution requires at least one rating")
    counts = [0] * 5
    for row in rows:
        if not 0 <= row.score <= 4:
            raise RankingError(f"score {row.score} outside 0..4")
        counts[row.score] += 1
    n = len(rows)
    return {LIKERT_NAMES[i]: 100.0 * counts[i] / n for i in range(5)}


def read_ratings_csv(path) -> list[RatingRow]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = _next_data_row(reader)
        if header != ["term", "participant", "score"]:
            raise RankingError(f"ratings file {path}: expected header term,participant,score, got {header}")
        rows = []
        for rec in reader:
            if not rec or rec[0].startswith("# "):
                continue
            if len(rec) != 3:
                raise RankingError(f"ratings file {path}: bad row {rec!r}")
            try:
                score = int(rec[2])
            except ValueError as exc:
                raise RankingError(f"ratings file {path}: non-integer score in {rec!r}") from exc
            rows.append(RatingRow(term=rec[0], participant=rec[1], score=score))
    return rows


def _next_data_row(reader):
    for rec in reader:
        if rec and not rec[0].startswith("# "):
            return rec
    return []


def write_labels_csv(path, labels: list[TermLabel], aggs: list[RatingAggregate], manifest_hash: str | None = None) -> None:
    """`term,mean,std,total,label` rows in the given label order."""
    by_term = {a.term: a for a in aggs}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if manifest_hash:
            fh.write(f"# manifest_sha256={manifest_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["term", "mean", "std", "total", "label"])
        for lab in labels:
            agg = by_term[lab.term]
            writer.writerow([lab.term, repr(agg.mean), repr(agg.std), agg.total, lab.label])


def read_labels_csv(path) -> list[TermLabel]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = _next_data_row(reader)
        if header != ["term", "mean", "std", "total", "label"]:
            raise RankingError(f"labels file {path}: expected header term,mean,std,total,label, got {header}")
        labels = []
        for rec in reader:
            if not rec or rec[0].startswith("# "):
                continue
            if len(rec) != 5 or rec[4] not in (CONTROVERSIAL, NON_CONTROVERSIAL):
                raise RankingError(f"labels file {path}: bad row {rec!r}")
            labels.append(TermLabel(term=rec[0], label=rec[4], mean=float(rec[1])))
    return labels
