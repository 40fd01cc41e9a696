"""Distance tables over program graphs.

Three aggregation methods (arithmetic mean, reciprocal-sum harmonic, closest
target) crossed with three granularities:

* ``func`` -- every block inherits the call-graph distance of its enclosing
  function.
* ``appr`` -- call-graph distance magnified by a constant at call blocks,
  composed with intra-CFG hop counts elsewhere.
* ``bblk`` -- call-graph edges weighted by the position of the call site
  inside the caller CFG; no magnifier at call blocks.

All table values are exact rationals (fractions.Fraction); callers convert
to float at serialization boundaries. Absence from a table means the
distance is undefined (no target reachable), never a sentinel number.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .graph import BlockId, FunctionId, ProgramGraph, TargetSpec


class AggregationMethod(str, Enum):
    ARITHMETIC = "arithmetic"
    HARMONIC = "harmonic"
    CLOSEST = "closest"


class Granularity(str, Enum):
    FUNC = "func"
    APPR = "appr"
    BBLK = "bblk"


@dataclass(frozen=True)
class DistanceConfig:
    method: AggregationMethod
    granularity: Granularity
    magnifier_c: float = 10.0  # consulted only when granularity == APPR

    def __post_init__(self):
        if self.magnifier_c <= 0:
            raise ValueError("magnifier_c must be positive")

    @property
    def label(self) -> str:
        return f"{self.method.value}:{self.granularity.value}"


# FunctionDistanceTable: FunctionId -> Fraction; missing key == undefined.
FunctionDistanceTable = dict


@dataclass
class DistanceMap:
    """Per-block distance table for one (method, granularity) selection."""

    values: dict[BlockId, Fraction]
    config: DistanceConfig

    def get(self, block: BlockId):
        return self.values.get(block)

    def as_floats(self) -> dict[BlockId, float]:
        return {b: float(v) for b, v in self.values.items()}


def aggregate(method: AggregationMethod, values):
    """Fold per-target (or per-route) distances into one value.

    The harmonic form is AFLGo's reciprocal sum, not a true harmonic mean;
    a zero summand forces the limit value 0 rather than dividing by zero.
    """
    values = list(values)
    if not values:
        raise ValueError("aggregate() needs at least one value")
    if method is AggregationMethod.CLOSEST:
        return min(values)
    if method is AggregationMethod.ARITHMETIC:
        return sum(values) / len(values)
    if any(v == 0 for v in values):
        return 0 * values[0]  # zero of the caller's numeric type
    return 1 / sum(1 / v for v in values)


def _bfs(start, adjacency) -> dict:
    dist = {start: 0}
    work = deque([start])
    while work:
        n = work.popleft()
        for nxt in adjacency[n]:
            if nxt not in dist:
                dist[nxt] = dist[n] + 1
                work.append(nxt)
    return dist


def call_edge_weight(graph: ProgramGraph, caller: FunctionId,
                     callee: FunctionId) -> Optional[int]:
    """Hop count from the caller's entry to its nearest call site of `callee`.

    A call in the entry block weighs 0. Returns None when every call site is
    unreachable from the entry (the edge is dropped from the weighted call
    graph: an uncallable call site cannot shorten any real path).
    """
    if (caller, callee) not in graph.call_edges:
        raise ValueError(f"no call edge {caller!r} -> {callee!r}")
    cfg = graph.cfgs[caller]
    sites = [b for b, f in cfg.call_sites if f == callee]
    reach = _bfs(cfg.entry, cfg.successors())
    weights = [reach[b] for b in sites if b in reach]
    return min(weights) if weights else None


def _weighted_call_adjacency(graph: ProgramGraph) -> dict[FunctionId, list[tuple[FunctionId, int]]]:
    adj: dict[FunctionId, list[tuple[FunctionId, int]]] = {f: [] for f in graph.cfgs}
    for caller, callee in sorted(graph.call_edges):
        w = call_edge_weight(graph, caller, callee)
        if w is not None:
            adj[caller].append((callee, w))
    return adj


def _weighted_to_target(graph: ProgramGraph,
                        wadj: dict[FunctionId, list[tuple[FunctionId, int]]],
                        target: FunctionId) -> dict[FunctionId, int]:
    """Dijkstra over the reversed weighted call graph, from `target`."""
    rev: dict[FunctionId, list[tuple[FunctionId, int]]] = {f: [] for f in graph.cfgs}
    for caller, pairs in wadj.items():
        for callee, w in pairs:
            rev[callee].append((caller, w))
    dist: dict[FunctionId, int] = {}
    heap = [(0, target)]
    while heap:
        d, f = heapq.heappop(heap)
        if f in dist:
            continue
        dist[f] = d
        for g, w in rev[f]:
            if g not in dist:
                heapq.heappush(heap, (d + w, g))
    return dist


def function_distances(graph: ProgramGraph, targets: TargetSpec,
                       method: AggregationMethod,
                       granularity: Granularity) -> dict[FunctionId, Fraction]:
    """Aggregate call-graph distance from every function to the target set.

    Pairwise distances are unweighted hop counts for func/appr granularity
    and weighted shortest paths (call-site position weights) for bblk.
    A function enclosing a target block gets distance 0 under every method;
    functions reaching no target are absent from the table.
    """
    if granularity is Granularity.BBLK:
        wadj = _weighted_call_adjacency(graph)
        per_target = {t: _weighted_to_target(graph, wadj, t)
                      for t in sorted(targets.target_functions)}
    else:
        rev = _reverse_call_adjacency(graph)
        per_target = {t: _bfs(t, rev) for t in sorted(targets.target_functions)}

    table: dict[FunctionId, Fraction] = {}
    for f in graph.cfgs:
        if f in targets.target_functions:
            table[f] = Fraction(0)
            continue
        pairwise = [Fraction(per_target[t][f])
                    for t in sorted(targets.target_functions)
                    if f in per_target[t]]
        if pairwise:
            table[f] = Fraction(aggregate(method, pairwise))
    return table


def _reverse_call_adjacency(graph: ProgramGraph) -> dict[FunctionId, list[FunctionId]]:
    rev: dict[FunctionId, list[FunctionId]] = {f: [] for f in graph.cfgs}
    for caller, callee in sorted(graph.call_edges):
        rev[callee].append(caller)
    return rev


def block_distances(graph: ProgramGraph, targets: TargetSpec,
                    function_table: Mapping[FunctionId, Fraction],
                    config: DistanceConfig) -> DistanceMap:
    """Per-block distance under the three-case semantics.

    (i) target blocks are 0; (ii) blocks calling a function with a defined
    call-graph distance take the minimum such distance (times the magnifier
    for appr); (iii) other blocks aggregate, over the case-(ii) blocks of
    their own CFG reachable from them, hop count to the call block plus its
    case-(ii) value. Under func granularity every block inherits its
    function's distance instead (targets still 0).
    """
    values: dict[BlockId, Fraction] = {}
    for fname in graph.cfgs:
        cfg = graph.cfgs[fname]

        if config.granularity is Granularity.FUNC:
            fdist = function_table.get(fname)
            for b in cfg.blocks:
                if b in targets.target_blocks:
                    values[b] = Fraction(0)
                elif fdist is not None:
                    values[b] = fdist
            continue

        magnifier = (Fraction(config.magnifier_c)
                     if config.granularity is Granularity.APPR else Fraction(1))
        call_block_value: dict[BlockId, Fraction] = {}
        for b in cfg.blocks:
            callee_dists = [function_table[f] for cb, f in cfg.call_sites
                            if cb == b and f in function_table]
            if callee_dists:
                call_block_value[b] = magnifier * min(callee_dists)

        pred = cfg.predecessors()
        # Hop counts from every block TO each call block, via reverse BFS.
        to_call_block = {r: _bfs(r, pred) for r in sorted(call_block_value)}

        for b in cfg.blocks:
            if b in targets.target_blocks:
                values[b] = Fraction(0)
            elif b in call_block_value:
                values[b] = call_block_value[b]
            else:
                routes = [Fraction(to_call_block[r][b]) + call_block_value[r]
                          for r in sorted(call_block_value)
                          if b in to_call_block[r]]
                if routes:
                    values[b] = Fraction(aggregate(config.method, routes))
    return DistanceMap(values=values, config=config)


def compute_distance_map(graph: ProgramGraph, targets: TargetSpec,
                         config: DistanceConfig) -> DistanceMap:
    """Convenience wrapper: function table then block table."""
    table = function_distances(graph, targets, config.method, config.granularity)
    return block_distances(graph, targets, table, config)


def seed_distance(trace: Sequence[BlockId], dmap: Mapping[BlockId, object],
                  method: AggregationMethod):
    """Aggregate distance of the deduplicated trace under `method`.

    `dmap` is any block -> number mapping (Fraction tables and pre-floated
    dicts both work). Returns None when no visited block has a defined
    distance; raises on an empty trace.
    """
    if not trace:
        raise ValueError("empty trace")
    seen = set(trace)
    values = [dmap[b] for b in seen if b in dmap]
    if not values:
        return None
    return aggregate(method, values)


def distance_map_csv(graph: ProgramGraph, dmap: DistanceMap) -> str:
    """CSV rows `block,function,distance`, lexicographic by block id.

    The distance field is empty for undefined blocks.
    """
    lines = ["block,function,distance"]
    for b in sorted(graph.block_owner):
        v = dmap.values.get(b)
        rendered = "" if v is None else repr(float(v))
        lines.append(f"{b},{graph.block_owner[b]},{rendered}")
    return "\n".join(lines) + "\n"
