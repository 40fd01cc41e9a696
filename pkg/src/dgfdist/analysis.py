"""Campaign-log analytics: PoC lineage, distance-decrease distribution, and
cross-campaign comparison statistics (TTE, factor improvement, Vargha-Delaney
effect size, Mann-Whitney U).
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

from .campaign import CampaignLog, LogEvent


@dataclass
class LineageLink:
    id: int
    parent_id: Optional[int]
    distance: Optional[float]
    tick: int


@dataclass
class LineageRecord:
    """Ancestor chain of one PoC, initial seed first, the PoC itself last.

    `length` counts ancestor seeds and excludes the PoC.
    """

    poc_id: int
    chain: list[LineageLink]

    @property
    def length(self) -> int:
        return len(self.chain) - 1


@dataclass
class DecreaseSample:
    parent_distance: float
    child_distance: float
    decrease: float  # (child - parent) / parent
    tick: int


@dataclass
class DecreaseSummary:
    samples: list[DecreaseSample]
    skipped: int  # executions without a usable parent/child distance pair

    @property
    def mean(self) -> Optional[float]:
        return statistics.fmean(s.decrease for s in self.samples) if self.samples else None

    @property
    def median(self) -> Optional[float]:
        return statistics.median(s.decrease for s in self.samples) if self.samples else None


@dataclass
class StatsSummary:
    label: str
    total_runs: int
    runs_reproduced: int
    mu_tte: float  # timeout-imputed mean over all runs
    mu_tte_reproduced: Optional[float]  # mean over reproduced runs only
    factor: float
    a12: float
    p_value: float
    significant: bool


def first_poc(log: CampaignLog) -> Optional[int]:
    """Id of the earliest PoC crash, or None. Ties break on log order."""
    best: Optional[LogEvent] = None
    for e in log.events:
        if e.kind == "crash" and e.poc and (best is None or e.tick < best.tick):
            best = e
    return None if best is None else best.id


def lineage(log: CampaignLog, poc_id: int) -> LineageRecord:
    """Back-trace a PoC through parent links to the initial seed."""
    seeds = {e.id: e for e in log.events if e.kind == "seed"}
    crash = next((e for e in log.events if e.kind == "crash" and e.id == poc_id),
                 None)
    if crash is None:
        raise ValueError(f"no crash with id {poc_id} in log")
    chain = [LineageLink(id=crash.id, parent_id=crash.parent_id,
                         distance=crash.distance, tick=crash.tick)]
    parent = crash.parent_id
    while parent is not None:
        seed = seeds.get(parent)
        if seed is None:
            raise ValueError(f"dangling parent link: seed {parent} missing")
        chain.append(LineageLink(id=seed.id, parent_id=seed.parent_id,
                                 distance=seed.distance, tick=seed.tick))
        parent = seed.parent_id
    chain.reverse()
    return LineageRecord(poc_id=poc_id, chain=chain)


def decrease_distribution(log: CampaignLog) -> DecreaseSummary:
    """One sample per executed testcase whose parent seed has distance > 0.

    decrease = (child - parent) / parent; executions with an undefined child
    distance or an undefined/zero parent distance are skipped and counted.
    """
    seed_dist = {e.id: e.distance for e in log.events if e.kind == "seed"}
    samples: list[DecreaseSample] = []
    skipped = 0
    for e in log.events:
        if e.kind != "exec":
            continue
        parent = seed_dist.get(e.parent_id)
        if parent is None or parent <= 0 or e.distance is None:
            skipped += 1
            continue
        samples.append(DecreaseSample(
            parent_distance=parent, child_distance=e.distance,
            decrease=(e.distance - parent) / parent, tick=e.tick))
    return DecreaseSummary(samples=samples, skipped=skipped)


def tte(log: CampaignLog, timeout_ticks: int) -> int:
    """Tick of the first PoC; the timeout is imputed when there is none."""
    if timeout_ticks <= 0:
        raise ValueError("timeout_ticks must be positive")
    ticks = [e.tick for e in log.events if e.kind == "crash" and e.poc]
    return min(ticks) if ticks else timeout_ticks


def factor(mu_baseline: float, mu_other: float) -> float:
    """Mean-TTE ratio baseline/other; > 1 means `other` outperforms it."""
    if mu_baseline <= 0 or mu_other <= 0:
        raise ValueError("mean TTEs must be positive")
    return mu_baseline / mu_other


def a12(x: Sequence[float], y: Sequence[float]) -> float:
    """Vargha-Delaney effect size: P(x > y) counting ties half.

    0.5 means no effect; values above 0.5 mean x tends to exceed y.
    """
    if not x or not y:
        raise ValueError("a12 needs non-empty samples")
    more = same = 0
    for xi in x:
        for yj in y:
            if xi == yj:
                same += 1
            elif xi > yj:
                more += 1
    return (more + 0.5 * same) / (len(x) * len(y))


def _rank2(pooled_sorted: list[float]) -> dict[float, int]:
    """Doubled midranks (always integral) keyed by value."""
    ranks: dict[float, int] = {}
    i = 0
    n = len(pooled_sorted)
    while i < n:
        j = i
        while j + 1 < n and pooled_sorted[j + 1] == pooled_sorted[i]:
            j += 1
        # positions i+1 .. j+1 share midrank (i+j+2)/2, doubled: i+j+2
        ranks[pooled_sorted[i]] = i + j + 2
        i = j + 1
    return ranks


def mann_whitney_u(x: Sequence[float], y: Sequence[float],
                   exact_limit: int = 200_000) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test with midrank ties.

    Returns (U of x, p). The p-value is exact -- enumeration of all
    C(m+n, m) rank assignments -- whenever that count is at most
    `exact_limit`; otherwise a normal approximation with tie and continuity
    corrections is used. Doubled ranks keep the enumeration in integers.
    """
    m, n = len(x), len(y)
    if m == 0 or n == 0:
        raise ValueError("mann_whitney_u needs non-empty samples")
    pooled = sorted(list(x) + list(y))
    rank2 = _rank2(pooled)
    r2_x = sum(rank2[v] for v in x)
    u2_obs = r2_x - m * (m + 1)  # doubled U statistic of x
    u_x = u2_obs / 2
    dev_obs = abs(u2_obs - m * n)

    if math.comb(m + n, m) <= exact_limit:
        all_ranks = [rank2[v] for v in pooled]
        hits = 0
        total = 0
        for subset in combinations(all_ranks, m):
            u2 = sum(subset) - m * (m + 1)
            if abs(u2 - m * n) >= dev_obs:
                hits += 1
            total += 1
        return u_x, hits / total

    big_n = m + n
    ties = []
    i = 0
    while i < big_n:
        j = i
        while j + 1 < big_n and pooled[j + 1] == pooled[i]:
            j += 1
        ties.append(j - i + 1)
        i = j + 1
    tie_term = sum(t ** 3 - t for t in ties)
    sigma2 = m * n / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if sigma2 <= 0:
        return u_x, 1.0
    z = max(0.0, (dev_obs / 2 - 0.5)) / math.sqrt(sigma2)
    return u_x, min(1.0, math.erfc(z / math.sqrt(2)))


def compare_runs(label: str, ttes: Sequence[float], baseline_ttes: Sequence[float],
                 timeout_ticks: int) -> StatsSummary:
    """Cross-campaign comparison row against a baseline configuration.

    a12 follows the tables' orientation: the probability that a baseline run
    needs more ticks than a run of this configuration.
    """
    mu = statistics.fmean(ttes)
    mu_base = statistics.fmean(baseline_ttes)
    reproduced = [t for t in ttes if t < timeout_ticks]
    _, p = mann_whitney_u(baseline_ttes, ttes)
    return StatsSummary(
        label=label,
        total_runs=len(ttes),
        runs_reproduced=len(reproduced),
        mu_tte=mu,
        mu_tte_reproduced=statistics.fmean(reproduced) if reproduced else None,
        factor=factor(mu_base, mu),
        a12=a12(baseline_ttes, ttes),
        p_value=p,
        significant=p <= 0.05,
    )


def summary_csv(summaries: Sequence[StatsSummary]) -> str:
    lines = ["config,runs,mu_tte,mu_tte_reproduced,factor,a12,p_value,significant"]
    for s in summaries:
        lines.append(",".join([
            s.label,
            str(s.runs_reproduced),
            repr(s.mu_tte),
            "" if s.mu_tte_reproduced is None else repr(s.mu_tte_reproduced),
            repr(s.factor),
            repr(s.a12),
            repr(s.p_value),
            "1" if s.significant else "0",
        ]))
    return "\n".join(lines) + "\n"


@dataclass
class AnalysisArtifacts:
    lineage_csv: str
    decrease_csv: str
    lineage_series_tsv: str
    decrease_cactus_tsv: str
    pocs: int
    samples: int
    skipped: int


def analyze_logs(named_logs: dict[str, CampaignLog]) -> AnalysisArtifacts:
    """Produce every per-log analysis artifact over a set of named logs.

    Output columns carry a leading `run` column (the log name) because one
    analysis may span many repetitions.
    """
    lineage_rows = ["run,poc_id,length,chain"]
    decrease_comments: list[str] = []
    decrease_rows = ["run,tick,parent_distance,child_distance,decrease"]
    series_rows = ["run\ttick\tdistance\tis_ancestor"]
    cactus_rows = ["run\tindex\tdecrease"]
    pocs = 0
    total_samples = 0
    total_skipped = 0

    for name in sorted(named_logs):
        log = named_logs[name]
        poc = first_poc(log)
        if poc is not None:
            pocs += 1
            record = lineage(log, poc)
            chain_ids = ";".join(str(link.id) for link in record.chain)
            lineage_rows.append(f"{name},{poc},{record.length},{chain_ids}")
            ancestor_ids = {link.id for link in record.chain[:-1]}
            for link in record.chain:
                if link.distance is not None:
                    series_rows.append(
                        f"{name}\t{link.tick}\t{link.distance!r}\t1")
            for e in log.events:
                if (e.kind == "exec" and e.parent_id in ancestor_ids
                        and e.distance is not None):
                    series_rows.append(f"{name}\t{e.tick}\t{e.distance!r}\t0")

        summary = decrease_distribution(log)
        total_samples += len(summary.samples)
        total_skipped += summary.skipped
        mean = summary.mean
        median = summary.median
        decrease_comments.append(
            f"# {name}: samples={len(summary.samples)} skipped={summary.skipped}"
            f" mean={'' if mean is None else repr(mean)}"
            f" median={'' if median is None else repr(median)}")
        for s in summary.samples:
            decrease_rows.append(
                f"{name},{s.tick},{s.parent_distance!r},{s.child_distance!r},"
                f"{s.decrease!r}")
        for idx, value in enumerate(sorted(s.decrease for s in summary.samples),
                                    start=1):
            cactus_rows.append(f"{name}\t{idx}\t{value!r}")

    return AnalysisArtifacts(
        lineage_csv="\n".join(lineage_rows) + "\n",
        decrease_csv="\n".join(decrease_comments + decrease_rows) + "\n",
        lineage_series_tsv="\n".join(series_rows) + "\n",
        decrease_cactus_tsv="\n".join(cactus_rows) + "\n",
        pocs=pocs,
        samples=total_samples,
        skipped=total_skipped,
    )
