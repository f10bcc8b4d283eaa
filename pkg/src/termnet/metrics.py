"""Nine global metrics per network: density, reciprocity, transitivity,
and in/out degree statistics.

Ratios with a zero denominator are reported as 0.0 with the matching entry of
`defined` cleared, so downstream feature matrices stay rectangular while
degenerate networks remain auditable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graphs import DirectedGraph, degree_sequence

__all__ = [
    "METRIC_NAMES",
    "GlobalFeatures",
    "degree_stats",
    "density",
    "global_feature_vector",
    "reciprocity",
    "transitivity",
]

METRIC_NAMES = (
    "density",
    "reciprocity",
    "transitivity",
    "in_mean",
    "in_max",
    "in_min",
    "out_mean",
    "out_max",
    "out_min",
)


@dataclass(frozen=True)
class GlobalFeatures:
    density: float
    reciprocity: float
    transitivity: float
    in_mean: float
    in_max: float
    in_min: float
    out_mean: float
    out_max: float
    out_min: float
    defined: tuple[bool, bool, bool, bool, bool, bool, bool, bool, bool]

    def as_vector(self) -> list[float]:
        """Metric values in METRIC_NAMES order."""
        return [getattr(self, name) for name in METRIC_NAMES]


def density(g: DirectedGraph) -> tuple[float, bool]:
    """|E| / (|V|(|V|-1)); undefined for graphs with fewer than 2 nodes."""
    n = g.node_count
    if n < 2:
        return 0.0, False
    return g.edge_count / (n * (n - 1)), True


def reciprocity(g: DirectedGraph) -> tuple[float, bool]:
    """Fraction of edges whose reverse edge also exists; undefined when |E|=0."""
    if g.edge_count == 0:
        return 0.0, False
    recip = sum(1 for (u, v) in g.edges if (v, u) in g.edges)
    return recip / g.edge_count, True


def transitivity(g: DirectedGraph) -> tuple[float, bool]:
    """Fraction of directed 2-paths u->v->w (u != w) closed by edge u->w.

    Total 2-paths through middle node v is in(v)*out(v) minus v's reciprocal
    partners (those give u->v->u, excluded by u != w).  Closed paths are
    counted per closing edge (u,w) as |out(u) & in(w)|; the common neighbor v
    is distinct from u and w automatically since self-loops cannot exist.
    """
    outs = g._out_sets
    ins = [set() for _ in range(g.node_count)]
    for u, v in g.edges:
        ins[v].add(u)

    total = 0
    for v in range(g.node_count):
        o = outs[v]
        total += len(ins[v]) * len(o) - sum(1 for u in ins[v] if u in o)
    if total == 0:
        return 0.0, False

    closed = sum(len(outs[u] & ins[w]) for (u, w) in g.edges)
    return closed / total, True


def degree_stats(g: DirectedGraph, direction: str) -> tuple[tuple[float, float, float], bool]:
    """(mean, max, min) of the degree sequence; undefined on the empty graph."""
    seq = degree_sequence(g, direction)
    if not seq:
        return (0.0, 0.0, 0.0), False
    return (sum(seq) / len(seq), float(max(seq)), float(min(seq))), True


def global_feature_vector(g: DirectedGraph) -> GlobalFeatures:
    d, d_ok = density(g)
    r, r_ok = reciprocity(g)
    t, t_ok = transitivity(g)
    (in_mean, in_max, in_min), in_ok = degree_stats(g, "in")
    (out_mean, out_max, out_min), out_ok = degree_stats(g, "out")
    return GlobalFeatures(
        density=d,
        reciprocity=r,
        transitivity=t,
        in_mean=in_mean,
        in_max=in_max,
        in_min=in_min,
        out_mean=out_mean,
        out_max=out_max,
        out_min=out_min,
        defined=(d_ok, r_ok, t_ok, in_ok, in_ok, in_ok, out_ok, out_ok, out_ok),
    )
