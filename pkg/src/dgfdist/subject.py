"""Deterministic interpreter for synthetic subject programs.

A subject file is a graph file plus four extra directives:

    rule <BlockId> if byte[<i>]<op><const> goto <BlockId>   # repeatable, ordered
    rule <BlockId> default goto <BlockId>
    crash <BlockId>
    entry <FunctionId>

Guards compare single input bytes (``==`` ``!=`` ``<`` ``>``) against a
constant (decimal or 0x-hex) and may be conjoined with ``&&``. A guard
indexing past the end of the input never matches. A block with conditional
rules must also declare a default; a block with no rules ends the walk.
Entering a block that carries a call site walks the callee inline before
taking the block's chosen successor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import SubjectFormatError
from .graph import BlockId, FunctionId, ProgramGraph, parse_program_graph

_ATOM = re.compile(r"^byte\[(\d+)\](==|!=|<|>)(0x[0-9a-fA-F]+|\d+)$")

# op codes for compiled guards
_EQ, _NE, _LT, _GT = 0, 1, 2, 3
_OPS = {"==": _EQ, "!=": _NE, "<": _LT, ">": _GT}


@dataclass(frozen=True)
class ExecutionResult:
    trace: tuple[BlockId, ...]
    crashed: bool
    crash_block: Optional[BlockId]

    @property
    def steps(self) -> int:
        return len(self.trace)


@dataclass
class SubjectSpec:
    graph: ProgramGraph
    entry_function: FunctionId
    rules: dict[BlockId, list[tuple[Optional[tuple], BlockId]]]
    crash_blocks: frozenset[BlockId]
    _compiled: dict = field(default=None, repr=False, compare=False)

    def compiled(self) -> dict:
        """block -> (is_crash, callee entry blocks, compiled rules)."""
        if self._compiled is None:
            prog = {}
            for cfg in self.graph.cfgs.values():
                for b in cfg.blocks:
                    callees = sorted(f for cb, f in cfg.call_sites if cb == b)
                    entries = tuple(self.graph.cfgs[f].entry for f in callees)
                    prog[b] = (b in self.crash_blocks, entries,
                               tuple(self.rules.get(b, ())))
            self._compiled = prog
        return self._compiled


def _parse_guard(text: str, lineno: int) -> tuple:
    atoms = []
    for part in text.split("&&"):
        part = part.strip()
        m = _ATOM.match(part)
        if not m:
            raise SubjectFormatError(f"bad guard atom: {part!r}", lineno)
        idx = int(m.group(1))
        const = int(m.group(3), 0)
        if not 0 <= const <= 255:
            raise SubjectFormatError(f"guard constant out of byte range: {part!r}",
                                     lineno)
        atoms.append((idx, _OPS[m.group(2)], const))
    return tuple(atoms)


def load_subject(text: str) -> SubjectSpec:
    """Parse and validate a subject file."""
    graph_lines: list[str] = []
    rule_lines: list[tuple[int, str]] = []
    crash_lines: list[tuple[int, str]] = []
    entry_lines: list[tuple[int, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        head = stripped.split(None, 1)[0] if stripped else ""
        if head == "rule":
            rule_lines.append((lineno, stripped))
            graph_lines.append("")
        elif head == "crash":
            crash_lines.append((lineno, stripped))
            graph_lines.append("")
        elif head == "entry":
            entry_lines.append((lineno, stripped))
            graph_lines.append("")
        else:
            graph_lines.append(raw)  # blank placeholders keep line numbers honest

    graph = parse_program_graph("\n".join(graph_lines))

    if not entry_lines:
        raise SubjectFormatError("no entry function declared")
    if len(entry_lines) > 1:
        raise SubjectFormatError("multiple entry directives", entry_lines[1][0])
    lineno, line = entry_lines[0]
    parts = line.split()
    if len(parts) != 2:
        raise SubjectFormatError("expected 'entry <function>'", lineno)
    entry_function = parts[1]
    if entry_function not in graph.cfgs:
        raise SubjectFormatError(f"entry references undeclared function "
                                 f"{entry_function!r}", lineno)

    crash_blocks = set()
    for lineno, line in crash_lines:
        parts = line.split()
        if len(parts) != 2:
            raise SubjectFormatError("expected 'crash <block>'", lineno)
        if parts[1] not in graph.block_owner:
            raise SubjectFormatError(f"crash references undeclared block "
                                     f"{parts[1]!r}", lineno)
        crash_blocks.add(parts[1])

    conditional: dict[BlockId, list[tuple[tuple, BlockId]]] = {}
    default: dict[BlockId, BlockId] = {}
    for lineno, line in rule_lines:
        parts = line.split(None, 2)
        if len(parts) != 3:
            raise SubjectFormatError("malformed rule", lineno)
        block, rest = parts[1], parts[2]
        if block not in graph.block_owner:
            raise SubjectFormatError(f"rule at undeclared block {block!r}", lineno)
        if rest.startswith("default "):
            tail = rest[len("default "):].split()
            if len(tail) != 2 or tail[0] != "goto":
                raise SubjectFormatError("expected 'default goto <block>'", lineno)
            succ = tail[1]
            if block in default:
                raise SubjectFormatError(f"duplicate default rule for {block!r}",
                                         lineno)
        elif rest.startswith("if "):
            body = rest[len("if "):]
            if " goto " not in body:
                raise SubjectFormatError("expected 'if <guard> goto <block>'", lineno)
            guard_text, succ = body.rsplit(" goto ", 1)
            succ = succ.strip()
            guard = _parse_guard(guard_text, lineno)
            conditional.setdefault(block, []).append((guard, succ))
        else:
            raise SubjectFormatError("expected 'if' or 'default' rule", lineno)

        if succ not in graph.block_owner:
            raise SubjectFormatError(f"rule successor undeclared: {succ!r}", lineno)
        owner = graph.block_owner[block]
        cfg = graph.cfgs[owner]
        if (block, succ) not in cfg.edges:
            raise SubjectFormatError(
                f"rule successor {succ!r} is not a CFG successor of {block!r}",
                lineno)
        if rest.startswith("default "):
            default[block] = succ

    for block in conditional:
        if block not in default:
            raise SubjectFormatError(
                f"block {block!r} has conditional rules but no default")

    rules: dict[BlockId, list[tuple[Optional[tuple], BlockId]]] = {}
    for block, arms in conditional.items():
        rules[block] = list(arms)
    for block, succ in default.items():
        rules.setdefault(block, []).append((None, succ))

    return SubjectSpec(graph=graph, entry_function=entry_function,
                       rules=rules, crash_blocks=frozenset(crash_blocks))


def _guard_matches(atoms: tuple, data: bytes) -> bool:
    n = len(data)
    for idx, op, const in atoms:
        if idx >= n:
            return False
        v = data[idx]
        if op == _EQ:
            if v != const:
                return False
        elif op == _NE:
            if v == const:
                return False
        elif op == _LT:
            if not v < const:
                return False
        else:
            if not v > const:
                return False
    return True


def execute(spec: SubjectSpec, data: bytes, step_limit: int = 4096) -> ExecutionResult:
    """Walk the subject from its entry block, steered by `data`.

    Calls execute inline (callees in callee-id order), then the caller block's
    chosen successor. Entering a crash block ends the walk crashed; filling
    `step_limit` trace slots ends it uncrashed. Pure: identical inputs give
    identical results.
    """
    if step_limit <= 0:
        raise ValueError("step_limit must be positive")
    prog = spec.compiled()
    trace: list[BlockId] = []
    stack = [spec.graph.cfgs[spec.entry_function].entry]
    crashed = False
    crash_block = None
    while stack and len(trace) < step_limit:
        b = stack.pop()
        trace.append(b)
        is_crash, call_entries, arms = prog[b]
        if is_crash:
            crashed = True
            crash_block = b
            break
        succ = None
        for atoms, target in arms:
            if atoms is None or _guard_matches(atoms, data):
                succ = target
                break
        if succ is not None:
            stack.append(succ)
        for entry in reversed(call_entries):
            stack.append(entry)
    return ExecutionResult(trace=tuple(trace), crashed=crashed,
                           crash_block=crash_block)


def is_poc(result: ExecutionResult, targets) -> bool:
    """True when the run crashed at one of the target blocks."""
    return result.crashed and result.crash_block in targets.target_blocks
