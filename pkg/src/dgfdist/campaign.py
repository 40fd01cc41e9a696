"""Deterministic distance-guided fuzzing campaigns.

One campaign is single-threaded and fully determined by its config: virtual
time is the count of mutation-loop executions, the RNG is seeded once, and
the log serializes byte-identically across runs. Initial seeds are executed
and admitted at tick 0 without consuming budget; every mutation-loop
execution advances the tick by one and is logged.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .distances import DistanceConfig, DistanceMap, seed_distance
from .errors import LogFormatError
from .graph import TargetSpec
from .subject import SubjectSpec, execute, is_poc

_START = None  # pseudo-source of the virtual entry edge in coverage sets


@dataclass
class Seed:
    id: int
    parent_id: Optional[int]
    data: bytes
    distance: Optional[float]  # frozen at admission
    coverage: frozenset
    discovered_at: int


@dataclass(frozen=True)
class CampaignConfig:
    rng_seed: int
    budget: int
    distance_config: DistanceConfig
    exploration_fraction: float = 0.5  # annealing ramp, fraction of budget
    max_power_exponent: float = 4.0    # energy swings within 2**±P
    base_energy: int = 16
    step_limit: int = 4096
    initial_seeds: tuple[bytes, ...] = (b"",)
    wall_clock_cap: Optional[float] = None  # seconds; safety valve only
    stop_on_first_poc: bool = False

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if not 0 < self.exploration_fraction < 1:
            raise ValueError("exploration_fraction must be in (0, 1)")
        if self.max_power_exponent <= 0 or self.base_energy <= 0:
            raise ValueError("power schedule parameters must be positive")
        if not self.initial_seeds:
            raise ValueError("at least one initial seed is required")


@dataclass
class LogEvent:
    tick: int
    kind: str  # "seed" | "exec" | "crash"
    id: Optional[int] = None
    parent_id: Optional[int] = None
    distance: Optional[float] = None
    interesting: Optional[bool] = None
    crashed: Optional[bool] = None
    poc: Optional[bool] = None


@dataclass
class CampaignLog:
    header: dict[str, str]
    events: list[LogEvent] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [f"# {k}={self.header[k]}" for k in sorted(self.header)]
        lines.append("tick,event,id,parent_id,distance,interesting,crashed,poc")
        for e in self.events:
            lines.append(",".join([
                str(e.tick),
                e.kind,
                _opt_int(e.id),
                _opt_int(e.parent_id),
                "" if e.distance is None else repr(e.distance),
                _opt_flag(e.interesting),
                _opt_flag(e.crashed),
                _opt_flag(e.poc),
            ]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "CampaignLog":
        header: dict[str, str] = {}
        events: list[LogEvent] = []
        saw_columns = False
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    header[k.strip()] = v.strip()
                continue
            if not saw_columns:
                if line != "tick,event,id,parent_id,distance,interesting,crashed,poc":
                    raise LogFormatError("missing or wrong column header", lineno)
                saw_columns = True
                continue
            cells = line.split(",")
            if len(cells) != 8:
                raise LogFormatError(f"expected 8 fields, got {len(cells)}", lineno)
            if cells[1] not in ("seed", "exec", "crash"):
                raise LogFormatError(f"unknown event kind {cells[1]!r}", lineno)
            try:
                events.append(LogEvent(
                    tick=int(cells[0]),
                    kind=cells[1],
                    id=None if cells[2] == "" else int(cells[2]),
                    parent_id=None if cells[3] == "" else int(cells[3]),
                    distance=None if cells[4] == "" else float(cells[4]),
                    interesting=_parse_flag(cells[5], lineno),
                    crashed=_parse_flag(cells[6], lineno),
                    poc=_parse_flag(cells[7], lineno),
                ))
            except ValueError as exc:
                raise LogFormatError(str(exc), lineno) from None
        if not saw_columns:
            raise LogFormatError("missing or wrong column header")
        return cls(header=header, events=events)


def _opt_int(v) -> str:
    return "" if v is None else str(v)


def _opt_flag(v) -> str:
    return "" if v is None else ("1" if v else "0")


def _parse_flag(cell: str, lineno: int):
    if cell == "":
        return None
    if cell in ("0", "1"):
        return cell == "1"
    raise LogFormatError(f"bad flag field {cell!r}", lineno)


def trace_edges(trace) -> frozenset:
    """Transition pairs of a trace plus a virtual entry edge.

    The entry edge makes even a one-block trace carry coverage, so the first
    execution of a campaign is always interesting.
    """
    return frozenset(zip(trace, trace[1:])) | {(_START, trace[0])}


def is_interesting(result, global_coverage: set) -> bool:
    """True iff the trace covers an edge not seen before.

    Updates `global_coverage` exactly when returning True.
    """
    edges = trace_edges(result.trace)
    if edges <= global_coverage:
        return False
    global_coverage |= edges
    return True


def choose_next(queue: list[Seed], cursor: int) -> tuple[Seed, int]:
    """Round-robin over admission order; wraps past the end of the queue."""
    if not queue:
        raise ValueError("empty seed queue")
    if cursor >= len(queue):
        cursor = 0
    return queue[cursor], cursor + 1


class DistanceStats:
    """Running min/max over the defined distances of admitted seeds."""

    def __init__(self):
        self.lo: Optional[float] = None
        self.hi: Optional[float] = None

    def update(self, distance: Optional[float]):
        if distance is None:
            return
        if self.lo is None or distance < self.lo:
            self.lo = distance
        if self.hi is None or distance > self.hi:
            self.hi = distance


def assign_energy(seed: Seed, dstats: DistanceStats, elapsed_fraction: float,
                  config: CampaignConfig) -> int:
    """Exponential power schedule with a linear annealing ramp.

    The normalized distance d_hat pins 0.5 for undefined distances and
    degenerate min==max stats; the annealing weight reaches 1 once
    `exploration_fraction` of the budget is spent. Energy is
    base * 2**(P * (1 - 2*d_hat) * w), never below 1.
    """
    if (seed.distance is None or dstats.lo is None or dstats.hi is None
            or dstats.hi == dstats.lo):
        d_hat = 0.5
    else:
        d_hat = (seed.distance - dstats.lo) / (dstats.hi - dstats.lo)
    weight = min(elapsed_fraction / config.exploration_fraction, 1.0)
    energy = round(config.base_energy
                   * 2.0 ** (config.max_power_exponent * (1.0 - 2.0 * d_hat) * weight))
    return max(1, int(energy))


def mutate(data: bytes, rng: random.Random) -> bytes:
    """Stacked havoc: 1-8 operators drawn uniformly.

    Operators: bit flip, byte overwrite, byte insert, byte delete, chunk
    duplicate, chunk erase. Size-dependent operators are skipped on inputs
    too short for them, so an empty input grows only via inserts.
    """
    buf = bytearray(data)
    for _ in range(rng.randint(1, 8)):
        op = rng.randrange(6)
        n = len(buf)
        if op == 0 and n:  # bit flip
            i = rng.randrange(n)
            buf[i] ^= 1 << rng.randrange(8)
        elif op == 1 and n:  # byte overwrite
            buf[rng.randrange(n)] = rng.randrange(256)
        elif op == 2:  # byte insert
            i = rng.randint(0, n)
            buf[i:i] = bytes([rng.randrange(256)])
        elif op == 3 and n:  # byte delete
            del buf[rng.randrange(n)]
        elif op == 4 and n:  # chunk duplicate (grows up to 16 bytes)
            size = rng.randint(1, min(n, 16))
            i = rng.randint(0, n - size)
            chunk = bytes(buf[i:i + size])
            j = rng.randint(0, n)
            buf[j:j] = chunk
        elif op == 5 and n:  # chunk erase (shrinks up to 8 bytes)
            size = rng.randint(1, min(n, 8))
            i = rng.randint(0, n - size)
            del buf[i:i + size]
    return bytes(buf)


def _config_header(config: CampaignConfig) -> dict[str, str]:
    dc = config.distance_config
    return {
        "rng_seed": str(config.rng_seed),
        "budget": str(config.budget),
        "method": dc.method.value,
        "granularity": dc.granularity.value,
        "magnifier_c": repr(dc.magnifier_c),
        "exploration_fraction": repr(config.exploration_fraction),
        "max_power_exponent": repr(config.max_power_exponent),
        "base_energy": str(config.base_energy),
        "step_limit": str(config.step_limit),
        "initial_seeds": ";".join(s.hex() for s in config.initial_seeds),
        "stop_on_first_poc": "1" if config.stop_on_first_poc else "0",
    }


def run_campaign(subject: SubjectSpec, targets: TargetSpec, dmap: DistanceMap,
                 config: CampaignConfig) -> CampaignLog:
    """Run the directed fuzzing loop to budget exhaustion.

    Loop shape: pick the next queued seed round-robin, give it
    distance-scheduled energy, mutate/execute that many testcases, log every
    execution, record crashes, and admit coverage-novel testcases as seeds
    (with their distance frozen at admission). Crashing testcases are never
    queued; crashing initial seeds are still admitted so the queue cannot
    start empty.
    """
    method = config.distance_config.method
    block_dist = dmap.as_floats()
    rng = random.Random(config.rng_seed)
    log = CampaignLog(header=_config_header(config))
    queue: list[Seed] = []
    coverage: set = set()
    dstats = DistanceStats()
    next_id = 0
    tick = 0
    deadline = (time.monotonic() + config.wall_clock_cap
                if config.wall_clock_cap else None)

    def admit(data: bytes, parent_id: Optional[int], dist: Optional[float],
              edges: frozenset, at: int) -> Seed:
        nonlocal next_id
        seed = Seed(id=next_id, parent_id=parent_id, data=data, distance=dist,
                    coverage=edges, discovered_at=at)
        next_id += 1
        queue.append(seed)
        dstats.update(dist)
        log.events.append(LogEvent(tick=at, kind="seed", id=seed.id,
                                   parent_id=parent_id, distance=dist))
        return seed

    for data in config.initial_seeds:
        result = execute(subject, data, config.step_limit)
        edges = trace_edges(result.trace)
        coverage |= edges
        dist = seed_distance(result.trace, block_dist, method)
        seed = admit(data, None, dist, edges, 0)
        if result.crashed:
            poc = is_poc(result, targets)
            log.events.append(LogEvent(tick=0, kind="crash", id=seed.id,
                                       parent_id=None, distance=dist,
                                       crashed=True, poc=poc))
            if config.stop_on_first_poc and poc:
                return log

    cursor = 0
    while tick < config.budget:
        if deadline is not None and time.monotonic() > deadline:
            break
        seed, cursor = choose_next(queue, cursor)
        energy = assign_energy(seed, dstats, tick / config.budget, config)
        for _ in range(energy):
            if tick >= config.budget:
                break
            data = mutate(seed.data, rng)
            result = execute(subject, data, config.step_limit)
            tick += 1
            dist = seed_distance(result.trace, block_dist, method)
            if result.crashed:
                poc = is_poc(result, targets)
                log.events.append(LogEvent(
                    tick=tick, kind="exec", parent_id=seed.id, distance=dist,
                    interesting=False, crashed=True, poc=poc))
                crash_id = next_id
                next_id += 1
                log.events.append(LogEvent(
                    tick=tick, kind="crash", id=crash_id, parent_id=seed.id,
                    distance=dist, crashed=True, poc=poc))
                if config.stop_on_first_poc and poc:
                    return log
            else:
                interesting = is_interesting(result, coverage)
                log.events.append(LogEvent(
                    tick=tick, kind="exec", parent_id=seed.id, distance=dist,
                    interesting=interesting, crashed=False, poc=False))
                if interesting:
                    admit(data, seed.id, dist, trace_edges(result.trace), tick)
    return log
