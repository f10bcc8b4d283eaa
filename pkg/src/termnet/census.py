"""Exact census of weakly-connected induced directed subgraphs on 3 and 4 nodes.

The class universe is built once by exhaustive canonicalization of every
labeled adjacency code (64 for k=3, 4096 for k=4): the canonical form of a
code is the minimum code over all node permutations, and codes whose
undirected skeleton is connected are grouped into isomorphism classes.  That
yields 13 size-3 and 199 size-4 classes, 212 in total, indexed by ascending
canonical code with the size-3 block first.

Counting walks every skeleton-connected node subset exactly once (ESU
enumeration rooted at each node, extending only through higher-indexed
exclusive neighbors) and classifies each induced code with an O(1) table
lookup.  One traversal to depth 4 emits both the 3- and 4-subsets.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .graphs import DirectedGraph, pair_order

__all__ = [
    "CLASS_COUNT_3",
    "CLASS_COUNT_4",
    "TOTAL_CLASSES",
    "CanonicalClassTable",
    "CensusTableError",
    "CensusVector",
    "build_class_table",
    "census",
    "census_parallel",
    "enumerate_connected_subsets",
    "get_class_table",
    "render_class",
]

CLASS_COUNT_3 = 13
CLASS_COUNT_4 = 199
TOTAL_CLASSES = CLASS_COUNT_3 + CLASS_COUNT_4

_TABLE_FORMAT = "termnet-class-table-v1"


class CensusTableError(RuntimeError):
    """Internal consistency failure while building the class table."""


@dataclass(frozen=True)
class CensusVector:
    """Raw counts over the 212 classes plus their single-pool normalization."""

    counts: tuple[int, ...]
    normalized: tuple[float, ...]
    total: int

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "CensusVector":
        counts = tuple(int(c) for c in counts)
        if len(counts) != TOTAL_CLASSES:
            raise ValueError(f"expected {TOTAL_CLASSES} counts, got {len(counts)}")
        total = sum(counts)
        if total > 0:
            normalized = tuple(c / total for c in counts)
        else:
            normalized = (0.0,) * TOTAL_CLASSES
        return cls(counts=counts, normalized=normalized, total=total)


@dataclass(frozen=True)
class CanonicalClassTable:
    """Lookup tables mapping every labeled subgraph code to its class id.

    `class_of_code3[code]` / `class_of_code4[code]` give the class id
    (0..12 for k=3, 13..211 for k=4) or -1 when the code's skeleton is
    disconnected.  `canonical_codes3/4` list each class's canonical
    (permutation-minimal) code in class-id order.
    """

    class_of_code3: tuple[int, ...]
    class_of_code4: tuple[int, ...]
    canonical_codes3: tuple[int, ...]
    canonical_codes4: tuple[int, ...]
    content_hash: str

    @property
    def class_count_3(self) -> int:
        return len(self.canonical_codes3)

    @property
    def class_count_4(self) -> int:
        return len(self.canonical_codes4)

    def class_id(self, k: int, code: int) -> int:
        """Class id for a labeled code, or -1 if its skeleton is disconnected."""
        if k == 3:
            return self.class_of_code3[code]
        if k == 4:
            return self.class_of_code4[code]
        raise ValueError(f"subgraph size must be 3 or 4, got {k}")

    def class_size(self, class_id: int) -> int:
        return 3 if class_id < CLASS_COUNT_3 else 4

    def canonical_code(self, class_id: int) -> int:
        if class_id < CLASS_COUNT_3:
            return self.canonical_codes3[class_id]
        return self.canonical_codes4[class_id - CLASS_COUNT_3]

    def class_edges(self, class_id: int) -> list[tuple[int, int]]:
        """Edge list of the class's canonical representative."""
        k = self.class_size(class_id)
        code = self.canonical_code(class_id)
        pairs = pair_order(k)
        m = len(pairs)
        return [pairs[p] for p in range(m) if (code >> (m - 1 - p)) & 1]

    def write_csv(self, path, manifest_hash: str | None = None) -> None:
        """Export `class_id,k,canonical_code_hex,edge_list` (edges as i->j;...)."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if manifest_hash:
                fh.write(f"# manifest_sha256={manifest_hash}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["class_id", "k", "canonical_code_hex", "edge_list"])
            for cid in range(TOTAL_CLASSES):
                k = self.class_size(cid)
                edges = ";".join(f"{u}->{v}" for u, v in self.class_edges(cid))
                writer.writerow([cid, k, f"{self.canonical_code(cid):#05x}", edges])


def _skeleton_connected_masks(k: int) -> list[bool]:
    """Connectivity of every undirected edge mask over k nodes (BFS per mask)."""
    und_pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    out = []
    for mask in range(1 << len(und_pairs)):
        nbrs = [[] for _ in range(k)]
        for p, (i, j) in enumerate(und_pairs):
            if (mask >> p) & 1:
                nbrs[i].append(j)
                nbrs[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            x = stack.pop()
            for y in nbrs[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        out.append(len(seen) == k)
    return out


def _canonicalize_all(k: int) -> tuple[np.ndarray, np.ndarray]:
    """(canonical code, skeleton-connected flag) for every labeled k-node code.

    Vectorized over all codes: for each node permutation the relabeled code is
    a bit gather, expressed as a matmul of the bit matrix with permuted bit
    weights; the canonical code is the elementwise minimum.
    """
    pairs = pair_order(k)
    m = len(pairs)
    pos = {pair: p for p, pair in enumerate(pairs)}
    codes = np.arange(1 << m, dtype=np.int64)
    # column p of `bits` is the bit of ordered pair pairs[p] (MSB-first layout)
    bits = (codes[:, None] >> np.arange(m - 1, -1, -1)[None, :]) & 1

    canon = codes.copy()
    for perm in itertools.permutations(range(k)):
        weights = np.zeros(m, dtype=np.int64)
        for p, (i, j) in enumerate(pairs):
            q = pos[(perm[i], perm[j])]
            weights[p] = 1 << (m - 1 - q)
        np.minimum(canon, bits @ weights, out=canon)

    # skeleton mask: undirected pair (i,j), i<j, present iff either direction is
    und_pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    skel = np.zeros(len(codes), dtype=np.int64)
    for p, (i, j) in enumerate(und_pairs):
        present = bits[:, pos[(i, j)]] | bits[:, pos[(j, i)]]
        skel |= present << p
    conn_by_mask = np.array(_skeleton_connected_masks(k), dtype=bool)
    return canon, conn_by_mask[skel]


def _build_tables() -> CanonicalClassTable:
    per_k: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    counts: dict[int, int] = {}
    canonical_lists: dict[int, list[int]] = {}
    for k in (3, 4):
        canon, connected = _canonicalize_all(k)
        canonical_lists[k] = sorted(int(c) for c in np.unique(canon[connected]))
        counts[k] = len(canonical_lists[k])
        per_k[k] = (canon, connected)

    expected = {3: CLASS_COUNT_3, 4: CLASS_COUNT_4}
    for k in (3, 4):
        if counts[k] != expected[k]:
            raise CensusTableError(
                f"k={k}: found {counts[k]} weakly-connected classes, expected "
                f"{expected[k]}; canonical codes: {canonical_lists[k]}"
            )

    tables: dict[int, tuple[int, ...]] = {}
    base = {3: 0, 4: CLASS_COUNT_3}
    for k in (3, 4):
        canon, connected = per_k[k]
        index_of = {code: base[k] + i for i, code in enumerate(canonical_lists[k])}
        table = np.full(len(canon), -1, dtype=np.int64)
        for code in range(len(canon)):
            if connected[code]:
                table[code] = index_of[int(canon[code])]
        # soundness: a code and its canonical form share one class; isomorphic
        # relabelings never change skeleton connectivity
        for code in range(len(canon)):
            c = int(canon[code])
            if connected[code] != connected[c] or table[code] != table[c]:
                raise CensusTableError(f"k={k}: code {code:#x} inconsistent with canonical {c:#x}")
        tables[k] = tuple(int(x) for x in table)

    digest = hashlib.sha256()
    digest.update(_TABLE_FORMAT.encode())
    digest.update(np.array(tables[3], dtype=np.int64).tobytes())
    digest.update(np.array(tables[4], dtype=np.int64).tobytes())
    return CanonicalClassTable(
        class_of_code3=tables[3],
        class_of_code4=tables[4],
        canonical_codes3=tuple(canonical_lists[3]),
        canonical_codes4=tuple(canonical_lists[4]),
        content_hash=digest.hexdigest(),
    )


def _default_cache_dir() -> str:
    env = os.environ.get("TERMNET_CACHE")
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "termnet")


def build_class_table(cache_dir: str | None = "") -> CanonicalClassTable:
    """Build (or load from cache) the 212-class canonical table.

    `cache_dir=""` selects the default cache location ($TERMNET_CACHE or
    ~/.cache/termnet); None disables caching.  A cached table whose content
    hash does not match a fresh serialization is rebuilt.
    """
    if cache_dir == "":
        cache_dir = _default_cache_dir()
    cache_path = os.path.join(cache_dir, f"{_TABLE_FORMAT}.npz") if cache_dir else None

    if cache_path and os.path.exists(cache_path):
        table = _load_cached(cache_path)
        if table is not None:
            return table

    table = _build_tables()
    if cache_path:
        try:
            os.makedirs(cache_dir, exist_ok=True)
            np.savez(
                cache_path,
                fmt=np.bytes_(_TABLE_FORMAT.encode()),
                class3=np.array(table.class_of_code3, dtype=np.int64),
                class4=np.array(table.class_of_code4, dtype=np.int64),
                canon3=np.array(table.canonical_codes3, dtype=np.int64),
                canon4=np.array(table.canonical_codes4, dtype=np.int64),
                sha=np.bytes_(table.content_hash.encode()),
            )
        except OSError:
            pass  # cache is an optimization only
    return table


def _load_cached(cache_path: str) -> CanonicalClassTable | None:
    try:
        with np.load(cache_path) as data:
            if bytes(data["fmt"]).decode() != _TABLE_FORMAT:
                return None
            table = CanonicalClassTable(
                class_of_code3=tuple(int(x) for x in data["class3"]),
                class_of_code4=tuple(int(x) for x in data["class4"]),
                canonical_codes3=tuple(int(x) for x in data["canon3"]),
                canonical_codes4=tuple(int(x) for x in data["canon4"]),
                content_hash=bytes(data["sha"]).decode(),
            )
    except (OSError, KeyError, ValueError):
        return None
    digest = hashlib.sha256()
    digest.update(_TABLE_FORMAT.encode())
    digest.update(np.array(table.class_of_code3, dtype=np.int64).tobytes())
    digest.update(np.array(table.class_of_code4, dtype=np.int64).tobytes())
    if digest.hexdigest() != table.content_hash:
        return None
    if table.class_count_3 != CLASS_COUNT_3 or table.class_count_4 != CLASS_COUNT_4:
        return None
    return table


_TABLE_SINGLETON: CanonicalClassTable | None = None


def get_class_table() -> CanonicalClassTable:
    global _TABLE_SINGLETON
    if _TABLE_SINGLETON is None:
        _TABLE_SINGLETON = build_class_table()
    return _TABLE_SINGLETON


def enumerate_connected_subsets(g: DirectedGraph, k: int) -> Iterator[tuple[int, ...]]:
    """Yield every k-node subset with weakly-connected skeleton exactly once.

    ESU scheme: root at each node v, extend through exclusive neighbors with
    index greater than v (an exclusive neighbor of the partial subset is one
    not in the subset and not adjacent to it).
    """
    if k not in (3, 4):
        raise ValueError(f"subgraph size must be 3 or 4, got {k}")
    adj = g.skeleton_adjacency

    def extend(sub: list[int], ext: list[int], seen: set[int], root: int):
        if len(sub) == k:
            yield tuple(sorted(sub))
            return
        while ext:
            w = ext.pop()
            nb_w = adj[w]
            new_ext = ext + [u for u in nb_w if u > root and u not in seen]
            yield from extend(sub + [w], new_ext, seen | set(nb_w), root)

    for v in range(g.node_count):
        nb = adj[v]
        ext0 = [u for u in nb if u > v]
        yield from extend([v], ext0, set(nb) | {v}, v)


def _count_from_roots(g: DirectedGraph, roots, class3, class4) -> list[int]:
    """ESU traversal over the given roots, counting 3- and 4-subset classes.

    Hand-unrolled to depth 4: the recursion levels become nested while loops
    popping from per-level extension stacks.  This is the hot path; adjacency
    is read from the precomputed skeleton lists and out-neighbor sets.
    """
    adj = g.skeleton_adjacency
    outs = g._out_sets
    counts = [0] * TOTAL_CLASSES
    for v in roots:
        nb_v = adj[v]
        if not nb_v:
            continue
        ov = outs[v]
        seen0 = set(nb_v)
        seen0.add(v)
        ext0 = [u for u in nb_v if u > v]
        while ext0:
            b = ext0.pop()
            nb_b = adj[b]
            ext1 = ext0 + [u for u in nb_b if u > v and u not in seen0]
            if not ext1:
                continue
            seen1 = seen0.union(nb_b)
            ob = outs[b]
            vb = b in ov
            bv = v in ob
            while ext1:
                c = ext1.pop()
                oc = outs[c]
                counts[
                    class3[
                        (vb << 5)
                        | ((c in ov) << 4)
                        | (bv << 3)
                        | ((c in ob) << 2)
                        | ((v in oc) << 1)
                        | (b in oc)
                    ]
                ] += 1
                ext2 = ext1 + [u for u in adj[c] if u > v and u not in seen1]
                if not ext2:
                    continue
                base = (
                    (vb << 11)
                    | ((c in ov) << 10)
                    | (bv << 8)
                    | ((c in ob) << 7)
                    | ((v in oc) << 5)
                    | ((b in oc) << 4)
                )
                while ext2:
                    d = ext2.pop()
                    od = outs[d]
                    counts[
                        class4[
                            base
                            | ((d in ov) << 9)
                            | ((d in ob) << 6)
                            | ((d in oc) << 3)
                            | ((v in od) << 2)
                            | ((b in od) << 1)
                            | (c in od)
                        ]
                    ] += 1
    return counts


def census(g: DirectedGraph, table: CanonicalClassTable | None = None) -> CensusVector:
    """Exact 212-class census of g; graphs with under 3 nodes yield zeros."""
    if table is None:
        table = get_class_table()
    if g.node_count < 3:
        return CensusVector.from_counts([0] * TOTAL_CLASSES)
    counts = _count_from_roots(g, range(g.node_count), table.class_of_code3, table.class_of_code4)
    return CensusVector.from_counts(counts)


def _census_worker(args) -> list[int]:
    g, roots, class3, class4 = args
    return _count_from_roots(g, roots, class3, class4)


def census_parallel(
    g: DirectedGraph, workers: int, table: CanonicalClassTable | None = None
) -> CensusVector:
    """census(g) with ESU roots sharded round-robin across worker processes.

    Integer partial counts are summed, so the result is identical for every
    worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if table is None:
        table = get_class_table()
    if workers == 1 or g.node_count < 3:
        return census(g, table)
    shards = [range(w, g.node_count, workers) for w in range(workers)]
    args = [(g, shard, table.class_of_code3, table.class_of_code4) for shard in shards]
    totals = [0] * TOTAL_CLASSES
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for partial in pool.map(_census_worker, args):
            for i, c in enumerate(partial):
                totals[i] += c
    return CensusVector.from_counts(totals)


def render_class(table: CanonicalClassTable, class_id: int) -> str:
    """ASCII adjacency matrix of a class's canonical representative."""
    if not 0 <= class_id < TOTAL_CLASSES:
        raise ValueError(f"class_id must be in 0..{TOTAL_CLASSES - 1}")
    k = table.class_size(class_id)
    edges = set(table.class_edges(class_id))
    lines = [f"class {class_id} (k={k}, code {table.canonical_code(class_id):#05x})"]
    for i in range(k):
        row = []
        for j in range(k):
            row.append("." if i == j else ("1" if (i, j) in edges else "0"))
        lines.append("  " + " ".join(row))
    lines.append("edges: " + (" ".join(f"{u}->{v}" for u, v in sorted(edges)) or "(none)"))
    return "\n".join(lines)
