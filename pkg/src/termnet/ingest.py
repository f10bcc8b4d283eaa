"""Interaction-record parsing, term matching, and per-term network assembly.

Records arrive as line-delimited JSON (optionally gzipped).  Each record that
textually matches a term contributes edges to that term's three directed
graphs: author -> mentioned user (mention), author -> replied-to author
(reply), author -> quoted author (quote retweet).
"""

from __future__ import annotations

import functools
import gzip
import io
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .graphs import DirectedGraph, build_graph

__all__ = [
    "IngestError",
    "InteractionKind",
    "InteractionRecord",
    "ParseResult",
    "TermNetworkSet",
    "build_corpus",
    "build_term_networks",
    "parse_records",
    "parse_timestamp",
    "read_records_file",
    "read_terms_file",
    "term_matches",
]

log = logging.getLogger(__name__)


class IngestError(ValueError):
    pass


class InteractionKind(Enum):
    """The three pairwise interactions; enum order is the fixed export order."""

    MENTION = "mention"
    REPLY = "reply"
    QUOTE_RETWEET = "quote"


@dataclass(frozen=True)
class InteractionRecord:
    post_id: str
    author: str
    text: str
    mentioned: tuple[str, ...] = ()
    reply_to_author: str | None = None
    quoted_author: str | None = None
    timestamp: str = "1970-01-01T00:00:00+00:00"


@dataclass(frozen=True)
class ParseResult:
    records: list[InteractionRecord]
    failures: list[tuple[int, str]]  # (1-based line number, reason)


@dataclass(frozen=True)
class TermNetworkSet:
    term: str
    graphs: dict[InteractionKind, DirectedGraph] = field(compare=False)
    matched_records: int = 0


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 parse; a 'Z' suffix means UTC, naive stamps are taken as UTC."""
    try:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except (ValueError, AttributeError, TypeError) as exc:
        raise IngestError(f"bad timestamp {value!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _record_from_obj(obj) -> InteractionRecord:
    if not isinstance(obj, dict):
        raise IngestError("record is not a JSON object")
    post_id = obj.get("post_id")
    author = obj.get("author")
    text = obj.get("text")
    if not isinstance(post_id, str) or not post_id:
        raise IngestError("missing or empty post_id")
    if not isinstance(author, str) or not author:
        raise IngestError("missing or empty author")
    if not isinstance(text, str):
        raise IngestError("missing text")
    mentioned = obj.get("mentioned", [])
    if not isinstance(mentioned, list) or not all(isinstance(m, str) for m in mentioned):
        raise IngestError("mentioned must be a list of strings")
    reply_to = obj.get("reply_to_author")
    if reply_to is not None and not isinstance(reply_to, str):
        raise IngestError("reply_to_author must be a string or null")
    quoted = obj.get("quoted_author")
    if quoted is not None and not isinstance(quoted, str):
        raise IngestError("quoted_author must be a string or null")
    ts = obj.get("timestamp")
    if not isinstance(ts, str):
        raise IngestError("missing timestamp")
    parse_timestamp(ts)  # validate now so downstream filters cannot fail
    return InteractionRecord(
        post_id=post_id,
        author=author,
        text=text,
        mentioned=tuple(mentioned),
        reply_to_author=reply_to or None,
        quoted_author=quoted or None,
        timestamp=ts,
    )


def parse_records(stream, max_bad_fraction: float = 0.10) -> ParseResult:
    """Parse line-delimited JSON records, keeping input order.

    Malformed lines are reported with their line numbers rather than dropped
    silently; exceeding `max_bad_fraction` of non-blank lines is a hard error.
    Accepts bytes, str, or any iterable of lines.
    """
    if isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)

    records: list[InteractionRecord] = []
    failures: list[tuple[int, str]] = []
    total = 0
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        total += 1
        try:
            records.append(_record_from_obj(json.loads(line)))
        except json.JSONDecodeError as exc:
            failures.append((lineno, f"invalid JSON: {exc.msg}"))
        except IngestError as exc:
            failures.append((lineno, str(exc)))

    if total and len(failures) / total > max_bad_fraction:
        raise IngestError(
            f"{len(failures)} of {total} lines malformed "
            f"(limit {max_bad_fraction:.0%}); first: line {failures[0][0]}: {failures[0][1]}"
        )
    if failures:
        log.warning("parsed %d records, %d malformed lines reported", len(records), len(failures))
    return ParseResult(records=records, failures=failures)


def read_records_file(path, max_bad_fraction: float = 0.10) -> ParseResult:
    """parse_records over a file; names ending .gz are gzip-decompressed."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return parse_records(fh, max_bad_fraction=max_bad_fraction)


@functools.lru_cache(maxsize=4096)
def _term_pattern(term: str) -> re.Pattern:
    if term.startswith("#"):
        # hashtag token: exact tag, ended by end-of-string or a non-word char
        return re.compile(re.escape(term) + r"(?![A-Za-z0-9_])", re.IGNORECASE)
    # keyword: delimited on both sides by non-alphanumerics or boundaries
    return re.compile(
        r"(?<![A-Za-z0-9])" + re.escape(term) + r"(?![A-Za-z0-9])", re.IGNORECASE
    )


def term_matches(text: str, term: str) -> bool:
    if not term:
        raise IngestError("term must be non-empty")
    return _term_pattern(term).search(text) is not None


def build_term_networks(records: list[InteractionRecord], term: str) -> TermNetworkSet:
    """Three graphs for one term from the records whose text matches it."""
    mention_pairs: list[tuple[str, str]] = []
    reply_pairs: list[tuple[str, str]] = []
    quote_pairs: list[tuple[str, str]] = []
    matched = 0
    for rec in records:
        if not term_matches(rec.text, term):
            continue
        matched += 1
        for m in rec.mentioned:
            mention_pairs.append((rec.author, m))
        if rec.reply_to_author is not None:
            reply_pairs.append((rec.author, rec.reply_to_author))
        if rec.quoted_author is not None:
            quote_pairs.append((rec.author, rec.quoted_author))
    return TermNetworkSet(
        term=term,
        graphs={
            InteractionKind.MENTION: build_graph(mention_pairs),
            InteractionKind.REPLY: build_graph(reply_pairs),
            InteractionKind.QUOTE_RETWEET: build_graph(quote_pairs),
        },
        matched_records=matched,
    )


def build_corpus(records: list[InteractionRecord], terms: list[str]) -> list[TermNetworkSet]:
    """One TermNetworkSet per term, input order preserved.

    Terms must be distinct after lowercasing; a record matching several terms
    contributes to each of them.
    """
    seen: set[str] = set()
    for term in terms:
        low = term.lower()
        if low in seen:
            raise IngestError(f"duplicate term (case-insensitive): {term!r}")
        seen.add(low)
    return [build_term_networks(records, term) for term in terms]


def read_terms_file(path) -> list[str]:
    """One term per line; '#'-prefixed lines are hashtags, '//' lines comments."""
    terms: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("//"):
                continue
            terms.append(line)
    if not terms:
        raise IngestError(f"terms file {path} contains no terms")
    return terms
