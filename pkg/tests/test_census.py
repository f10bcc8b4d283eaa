import itertools

import numpy as np
import pytest

from termnet.census import (
    CLASS_COUNT_3,
    CLASS_COUNT_4,
    TOTAL_CLASSES,
    CensusVector,
    build_class_table,
    census,
    census_parallel,
    enumerate_connected_subsets,
    render_class,
)
from termnet.graphs import DirectedGraph, build_graph
from termnet.synth import gen_random_digraph

import oracles


def test_class_counts(class_table):
    assert class_table.class_count_3 == CLASS_COUNT_3 == 13
    assert class_table.class_count_4 == CLASS_COUNT_4 == 199
    assert TOTAL_CLASSES == 212


def test_class_universe_matches_oracle(class_table):
    classes3, classes4 = oracles.class_universe()
    assert list(class_table.canonical_codes3) == classes3
    assert list(class_table.canonical_codes4) == classes4


def test_table_maps_exactly_connected_codes(class_table):
    for k, table in ((3, class_table.class_of_code3), (4, class_table.class_of_code4)):
        for code, cid in enumerate(table):
            assert (cid >= 0) == oracles.skeleton_connected(code, k)


def test_table_sound_under_canonicalization(class_table):
    # a code and its canonical form always land in the same class
    for k, table in ((3, class_table.class_of_code3), (4, class_table.class_of_code4)):
        for code, cid in enumerate(table):
            if cid < 0:
                continue
            canon = oracles.canonical_code(code, k)
            assert table[canon] == cid
            assert class_table.canonical_code(cid) == canon


def test_directed_path_class_has_six_labeled_codes(class_table):
    # a -> b -> c has a trivial automorphism group, so all 6 relabelings differ
    path_code = oracles.subgraph_code({(0, 1), (1, 2)}, [0, 1, 2])
    cid = class_table.class_id(3, path_code)
    preimage = [c for c in range(64) if class_table.class_of_code3[c] == cid]
    assert len(preimage) == 6


def test_class_ids_ordered_by_canonical_code(class_table):
    codes = [class_table.canonical_code(cid) for cid in range(CLASS_COUNT_3)]
    assert codes == sorted(codes)
    codes4 = [class_table.canonical_code(cid) for cid in range(CLASS_COUNT_3, TOTAL_CLASSES)]
    assert codes4 == sorted(codes4)


def test_class_edges_reproduce_code(class_table):
    for cid in range(TOTAL_CLASSES):
        k = class_table.class_size(cid)
        edges = class_table.class_edges(cid)
        assert oracles.subgraph_code(set(edges), list(range(k))) == class_table.canonical_code(cid)


def test_enumerate_subsets_examples():
    cycle = build_graph([("a", "b"), ("b", "c"), ("c", "a")])
    assert list(enumerate_connected_subsets(cycle, 3)) == [(0, 1, 2)]

    k4 = DirectedGraph(4, [(i, j) for i in range(4) for j in range(4) if i != j])
    assert len(list(enumerate_connected_subsets(k4, 3))) == 4
    assert list(enumerate_connected_subsets(k4, 4)) == [(0, 1, 2, 3)]

    disjoint = build_graph([("a", "b"), ("c", "d")])
    assert list(enumerate_connected_subsets(disjoint, 3)) == []


def test_enumerate_subsets_unique_and_connected(rng):
    for _ in range(10):
        n = int(rng.integers(5, 14))
        g = gen_random_digraph(n, float(rng.uniform(0.1, 0.4)), int(rng.integers(1 << 30)))
        edge_set = set(g.edges)
        for k in (3, 4):
            subsets = list(enumerate_connected_subsets(g, k))
            assert len(subsets) == len(set(subsets))
            expected = [
                nodes
                for nodes in itertools.combinations(range(n), k)
                if oracles.skeleton_connected(oracles.subgraph_code(edge_set, nodes), k)
            ]
            assert sorted(subsets) == expected


def test_census_directed_cycle(class_table):
    g = build_graph([("a", "b"), ("b", "c"), ("c", "a")])
    vec = census(g, class_table)
    assert vec.total == 1
    nonzero = [(i, c) for i, c in enumerate(vec.counts) if c]
    assert len(nonzero) == 1
    cid, count = nonzero[0]
    assert count == 1
    assert vec.normalized[cid] == 1.0
    cycle_code = oracles.subgraph_code({(0, 1), (1, 2), (2, 0)}, [0, 1, 2])
    assert cid == class_table.class_id(3, cycle_code)


def test_census_out_star(class_table):
    g = build_graph([("c", "x"), ("c", "y"), ("c", "z")])
    vec = census(g, class_table)
    star3 = class_table.class_id(3, oracles.subgraph_code({(0, 1), (0, 2)}, [0, 1, 2]))
    star4 = class_table.class_id(4, oracles.subgraph_code({(0, 1), (0, 2), (0, 3)}, [0, 1, 2, 3]))
    assert vec.counts[star3] == 3
    assert vec.counts[star4] == 1
    assert vec.total == 4
    assert vec.normalized[star3] == 0.75
    assert vec.normalized[star4] == 0.25
    assert sum(vec.counts) == 4


def test_census_er_graph_matches_oracle(class_table):
    g = gen_random_digraph(8, 0.3, seed=42)
    assert list(census(g, class_table).counts) == oracles.brute_census(g)


def test_census_oracle_equivalence_batch(class_table, rng):
    for trial in range(12):
        n = int(rng.integers(3, 14))
        p = float(rng.uniform(0.05, 0.5))
        g = gen_random_digraph(n, p, seed=1000 + trial)
        assert list(census(g, class_table).counts) == oracles.brute_census(g), (n, p, trial)


def test_census_small_graphs_zero(class_table):
    assert census(build_graph([]), class_table).total == 0
    assert census(build_graph([("a", "b")]), class_table).total == 0
    assert census(build_graph([("a", "b")]), class_table).counts == (0,) * TOTAL_CLASSES


def test_census_isomorphism_invariance(class_table, rng):
    g = gen_random_digraph(12, 0.25, seed=7)
    base = census(g, class_table).counts
    for _ in range(3):
        perm = list(rng.permutation(g.node_count))
        relabeled = DirectedGraph(g.node_count, [(perm[u], perm[v]) for u, v in g.edges])
        assert census(relabeled, class_table).counts == base


def test_census_completeness_vs_enumeration(class_table):
    g = gen_random_digraph(15, 0.2, seed=5)
    vec = census(g, class_table)
    n3 = len(list(enumerate_connected_subsets(g, 3)))
    n4 = len(list(enumerate_connected_subsets(g, 4)))
    assert sum(vec.counts[:CLASS_COUNT_3]) == n3
    assert sum(vec.counts[CLASS_COUNT_3:]) == n4
    assert vec.total == n3 + n4


def test_census_unchanged_by_far_disjoint_edge(class_table):
    g = gen_random_digraph(10, 0.3, seed=11)
    base = census(g, class_table).counts
    extended = DirectedGraph(g.node_count + 2, list(g.edges) + [(g.node_count, g.node_count + 1)])
    assert census(extended, class_table).counts == base


def test_census_parallel_matches_serial(class_table):
    g = gen_random_digraph(60, 0.1, seed=9)
    serial = census(g, class_table)
    for workers in (1, 2, 5):
        par = census_parallel(g, workers, class_table)
        assert par.counts == serial.counts
        assert par.normalized == serial.normalized
    assert census_parallel(build_graph([]), 4, class_table).total == 0
    with pytest.raises(ValueError):
        census_parallel(g, 0, class_table)


def test_census_vector_normalization():
    vec = CensusVector.from_counts([2] + [0] * 210 + [6])
    assert vec.total == 8
    assert vec.normalized[0] == 0.25
    assert vec.normalized[211] == 0.75
    assert abs(sum(vec.normalized) - 1.0) < 1e-9
    # scaling all counts leaves the normalized vector unchanged
    scaled = CensusVector.from_counts([10] + [0] * 210 + [30])
    assert scaled.normalized == vec.normalized
    zero = CensusVector.from_counts([0] * 212)
    assert zero.normalized == (0.0,) * 212
    with pytest.raises(ValueError):
        CensusVector.from_counts([1, 2, 3])


def test_table_cache_round_trip(tmp_path):
    first = build_class_table(cache_dir=str(tmp_path))
    cached = build_class_table(cache_dir=str(tmp_path))
    assert cached == first
    # corrupt the cache: loader must fall back to a fresh build
    cache_file = next(tmp_path.iterdir())
    cache_file.write_bytes(b"garbage")
    rebuilt = build_class_table(cache_dir=str(tmp_path))
    assert rebuilt == first


def test_class_table_csv_export(class_table, tmp_path):
    path = tmp_path / "classes.csv"
    class_table.write_csv(path, manifest_hash="abc123")
    lines = path.read_text().splitlines()
    assert lines[0] == "# manifest_sha256=abc123"
    assert lines[1] == "class_id,k,canonical_code_hex,edge_list"
    assert len(lines) == 2 + TOTAL_CLASSES
    # spot-check one row round-trips to the canonical code
    row = lines[2 + 30].split(",")
    cid = int(row[0])
    k = int(row[1])
    edges = set()
    if row[3]:
        for part in row[3].split(";"):
            a, b = part.split("->")
            edges.add((int(a), int(b)))
    assert int(row[2], 16) == class_table.canonical_code(cid)
    assert oracles.subgraph_code(edges, list(range(k))) == class_table.canonical_code(cid)


def test_render_class(class_table):
    text = render_class(class_table, 0)
    assert "class 0" in text and "k=3" in text
    with pytest.raises(ValueError):
        render_class(class_table, 212)
