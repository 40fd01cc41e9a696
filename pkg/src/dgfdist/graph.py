"""Program structure: per-function control-flow graphs joined by a call graph.

The graph file format is line-oriented UTF-8, `#` starts a comment:

    func <FunctionId> entry=<BlockId>
    block <BlockId> in=<FunctionId>
    edge <BlockId> -> <BlockId>
    call <BlockId> -> <FunctionId>

Declarations may appear in any order; all references are resolved after the
whole file is read.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

from .errors import GraphFormatError

BlockId = str
FunctionId = str


@dataclass(frozen=True)
class ControlFlowGraph:
    """Intra-procedural CFG of one function."""

    function: FunctionId
    entry: BlockId
    blocks: frozenset[BlockId]
    edges: frozenset[tuple[BlockId, BlockId]]
    call_sites: frozenset[tuple[BlockId, FunctionId]]

    def successors(self) -> dict[BlockId, list[BlockId]]:
        succ: dict[BlockId, list[BlockId]] = {b: [] for b in self.blocks}
        for a, b in sorted(self.edges):
            succ[a].append(b)
        return succ

    def predecessors(self) -> dict[BlockId, list[BlockId]]:
        pred: dict[BlockId, list[BlockId]] = {b: [] for b in self.blocks}
        for a, b in sorted(self.edges):
            pred[b].append(a)
        return pred


@dataclass(frozen=True)
class ProgramGraph:
    """All function CFGs of one program. Immutable after construction."""

    cfgs: dict[FunctionId, ControlFlowGraph]

    @cached_property
    def call_edges(self) -> frozenset[tuple[FunctionId, FunctionId]]:
        """Projection of every call site onto (caller, callee) pairs."""
        return frozenset(
            (cfg.function, callee)
            for cfg in self.cfgs.values()
            for _, callee in cfg.call_sites
        )

    @cached_property
    def block_owner(self) -> dict[BlockId, FunctionId]:
        owner: dict[BlockId, FunctionId] = {}
        for cfg in self.cfgs.values():
            for b in cfg.blocks:
                owner.setdefault(b, cfg.function)
        return owner

    @cached_property
    def blocks(self) -> frozenset[BlockId]:
        return frozenset(self.block_owner)

    def function_of(self, block: BlockId) -> FunctionId:
        try:
            return self.block_owner[block]
        except KeyError:
            raise ValueError(f"unknown block id: {block!r}") from None

    def callees(self) -> dict[FunctionId, list[FunctionId]]:
        adj: dict[FunctionId, list[FunctionId]] = {f: [] for f in self.cfgs}
        for caller, callee in sorted(self.call_edges):
            adj[caller].append(callee)
        return adj


@dataclass(frozen=True)
class TargetSpec:
    """Target basic blocks plus the functions enclosing them."""

    target_blocks: frozenset[BlockId]
    target_functions: frozenset[FunctionId]

    @classmethod
    def from_blocks(cls, graph: ProgramGraph, blocks) -> "TargetSpec":
        blocks = frozenset(blocks)
        if not blocks:
            raise ValueError("no target blocks given")
        for b in sorted(blocks):
            if b not in graph.block_owner:
                raise ValueError(f"target block not in graph: {b!r}")
        funcs = frozenset(graph.block_owner[b] for b in blocks)
        return cls(target_blocks=blocks, target_functions=funcs)


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_program_graph(text: str) -> ProgramGraph:
    """Parse the graph file format into a validated ProgramGraph.

    Raises GraphFormatError with the offending line number on syntax errors,
    duplicate ids, and dangling references.
    """
    funcs: dict[FunctionId, tuple[BlockId, int]] = {}  # name -> (entry, line)
    block_func: dict[BlockId, tuple[FunctionId, int]] = {}
    edges: list[tuple[BlockId, BlockId, int]] = []
    calls: list[tuple[BlockId, FunctionId, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "func":
            if len(parts) != 3 or not parts[2].startswith("entry="):
                raise GraphFormatError(
                    "expected 'func <name> entry=<block>'", lineno)
            name, entry = parts[1], parts[2][len("entry="):]
            if not name or not entry:
                raise GraphFormatError("empty function or entry id", lineno)
            if name in funcs:
                raise GraphFormatError(f"duplicate function id: {name!r}", lineno)
            funcs[name] = (entry, lineno)
        elif kind == "block":
            if len(parts) != 3 or not parts[2].startswith("in="):
                raise GraphFormatError(
                    "expected 'block <name> in=<function>'", lineno)
            name, owner = parts[1], parts[2][len("in="):]
            if not name or not owner:
                raise GraphFormatError("empty block or function id", lineno)
            if name in block_func:
                raise GraphFormatError(f"duplicate block id: {name!r}", lineno)
            block_func[name] = (owner, lineno)
        elif kind == "edge":
            if len(parts) != 4 or parts[2] != "->":
                raise GraphFormatError("expected 'edge <block> -> <block>'", lineno)
            edges.append((parts[1], parts[3], lineno))
        elif kind == "call":
            if len(parts) != 4 or parts[2] != "->":
                raise GraphFormatError(
                    "expected 'call <block> -> <function>'", lineno)
            calls.append((parts[1], parts[3], lineno))
        else:
            raise GraphFormatError(f"unknown directive: {kind!r}", lineno)

    if not funcs:
        raise GraphFormatError("no functions declared")

    for name, (owner, lineno) in block_func.items():
        if owner not in funcs:
            raise GraphFormatError(
                f"block {name!r} declared in undeclared function {owner!r}", lineno)

    blocks_of: dict[FunctionId, set[BlockId]] = {f: set() for f in funcs}
    for name, (owner, _) in block_func.items():
        blocks_of[owner].add(name)

    for fname, (entry, lineno) in funcs.items():
        if entry not in block_func:
            raise GraphFormatError(
                f"function {fname!r} entry references undeclared block {entry!r}",
                lineno)
        if block_func[entry][0] != fname:
            raise GraphFormatError(
                f"function {fname!r} entry block {entry!r} belongs to "
                f"{block_func[entry][0]!r}", lineno)

    edges_of: dict[FunctionId, set[tuple[BlockId, BlockId]]] = {f: set() for f in funcs}
    for a, b, lineno in edges:
        for end in (a, b):
            if end not in block_func:
                raise GraphFormatError(
                    f"edge references undeclared block {end!r}", lineno)
        fa, fb = block_func[a][0], block_func[b][0]
        if fa != fb:
            raise GraphFormatError(
                f"edge {a!r} -> {b!r} crosses functions ({fa!r} vs {fb!r})", lineno)
        edges_of[fa].add((a, b))

    calls_of: dict[FunctionId, set[tuple[BlockId, FunctionId]]] = {f: set() for f in funcs}
    for b, callee, lineno in calls:
        if b not in block_func:
            raise GraphFormatError(
                f"call site references undeclared block {b!r}", lineno)
        if callee not in funcs:
            raise GraphFormatError(
                f"call site references undeclared function {callee!r}", lineno)
        # Repeated call lines for the same (block, callee) pair collapse here.
        calls_of[block_func[b][0]].add((b, callee))

    cfgs = {
        f: ControlFlowGraph(
            function=f,
            entry=funcs[f][0],
            blocks=frozenset(blocks_of[f]),
            edges=frozenset(edges_of[f]),
            call_sites=frozenset(calls_of[f]),
        )
        for f in funcs
    }
    return ProgramGraph(cfgs=cfgs)


def serialize_program_graph(graph: ProgramGraph) -> str:
    """Deterministic textual form; parses back to an identical graph."""
    out: list[str] = []
    for f in sorted(graph.cfgs):
        out.append(f"func {f} entry={graph.cfgs[f].entry}")
    for f in sorted(graph.cfgs):
        for b in sorted(graph.cfgs[f].blocks):
            out.append(f"block {b} in={f}")
    for f in sorted(graph.cfgs):
        for a, b in sorted(graph.cfgs[f].edges):
            out.append(f"edge {a} -> {b}")
    for f in sorted(graph.cfgs):
        for b, callee in sorted(graph.cfgs[f].call_sites):
            out.append(f"call {b} -> {callee}")
    return "\n".join(out) + "\n"


def validate(graph: ProgramGraph) -> list[str]:
    """Check structural invariants; each violation names the offending entity.

    Meant for hand-built graphs: parse_program_graph never produces violations.
    """
    violations: list[str] = []
    seen: dict[BlockId, FunctionId] = {}
    for f in sorted(graph.cfgs):
        cfg = graph.cfgs[f]
        if cfg.function != f:
            violations.append(f"cfg registered under {f!r} names function {cfg.function!r}")
        if cfg.entry not in cfg.blocks:
            violations.append(f"entry not in blocks: function={f!r} entry={cfg.entry!r}")
        for b in sorted(cfg.blocks):
            if b in seen:
                violations.append(
                    f"block {b!r} declared in both {seen[b]!r} and {f!r}")
            else:
                seen[b] = f
        for a, b in sorted(cfg.edges):
            for end in (a, b):
                if end not in cfg.blocks:
                    violations.append(
                        f"edge {a!r} -> {b!r} references unknown block {end!r} "
                        f"in function {f!r}")
        for b, callee in sorted(cfg.call_sites):
            if b not in cfg.blocks:
                violations.append(
                    f"call site at unknown block {b!r} in function {f!r}")
            if callee not in graph.cfgs:
                violations.append(
                    f"call {b!r} -> {callee!r} references undeclared function "
                    f"{callee!r}")
    return violations


def reachable_targets(graph: ProgramGraph, func: FunctionId,
                      targets: TargetSpec) -> set[FunctionId]:
    """Target functions reachable from `func` along call edges.

    Reachability is reflexive: `func` itself is included when it is a
    target function.
    """
    if func not in graph.cfgs:
        raise ValueError(f"unknown function id: {func!r}")
    adj = graph.callees()
    seen = {func}
    work = deque([func])
    while work:
        f = work.popleft()
        for g in adj[f]:
            if g not in seen:
                seen.add(g)
                work.append(g)
    return seen & targets.target_functions


def parse_targets(text: str, graph: ProgramGraph) -> TargetSpec:
    """Parse a target file: one BlockId per line (comments/blank lines allowed)."""
    blocks = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        if len(line.split()) != 1:
            raise GraphFormatError("expected one block id per line", lineno)
        if line not in graph.block_owner:
            raise GraphFormatError(f"target block not in graph: {line!r}", lineno)
        blocks.append(line)
    if not blocks:
        raise GraphFormatError("no target blocks declared")
    return TargetSpec.from_blocks(graph, blocks)
