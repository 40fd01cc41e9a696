"""Experiment manifests: repeated campaigns over a grid of distance configs.

A manifest is a flat key=value file (diff-friendly provenance):

    subject = maze.subject
    targets = maze.targets
    configs = harmonic:appr,arithmetic:appr,closest:appr
    baseline = harmonic:appr      # optional, defaults to the first config
    repetitions = 10
    budget = 50000
    seed_base = 100               # run i uses rng seed base+i, every config
    output_dir = results

Optional keys mirror CampaignConfig: magnifier_c, exploration_fraction,
max_power_exponent, base_energy, step_limit, stop_on_first_poc, initial_seed
(hex, repeatable via ';'). The TTE timeout for the summary statistics is the
budget itself.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .analysis import StatsSummary, compare_runs, summary_csv, tte
from .campaign import CampaignConfig, CampaignLog, run_campaign
from .distances import AggregationMethod, DistanceConfig, Granularity, compute_distance_map
from .errors import ExperimentError, ManifestError
from .graph import parse_targets
from .subject import load_subject

WORKERS_ENV = "DGFDIST_WORKERS"


@dataclass
class ExperimentManifest:
    subject_path: str
    targets_path: str
    configs: list[DistanceConfig]
    baseline: DistanceConfig
    repetitions: int
    budget: int
    seed_base: int
    output_dir: str
    exploration_fraction: float = 0.5
    max_power_exponent: float = 4.0
    base_energy: int = 16
    step_limit: int = 4096
    stop_on_first_poc: bool = False
    initial_seeds: tuple[bytes, ...] = (b"",)


@dataclass
class ExperimentResult:
    summaries: list[StatsSummary]
    summary_csv: str
    logs: dict[str, str] = field(repr=False)  # run name -> log CSV


def parse_distance_config(label: str, magnifier_c: float = 10.0) -> DistanceConfig:
    """Parse a 'method:granularity' label."""
    parts = label.split(":")
    if len(parts) != 2:
        raise ManifestError(f"bad config label {label!r}, expected method:granularity")
    try:
        method = AggregationMethod(parts[0])
        granularity = Granularity(parts[1])
    except ValueError:
        raise ManifestError(f"unknown method or granularity in {label!r}") from None
    return DistanceConfig(method=method, granularity=granularity,
                          magnifier_c=magnifier_c)


def parse_manifest(text: str) -> ExperimentManifest:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError("expected key = value", lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if key in pairs:
            raise ManifestError(f"duplicate key {key!r}", lineno)
        pairs[key] = value.strip()

    def need(key: str) -> str:
        if key not in pairs:
            raise ManifestError(f"missing required key {key!r}")
        return pairs[key]

    def as_int(key: str, default=None) -> int:
        raw = pairs.get(key)
        if raw is None:
            if default is None:
                raise ManifestError(f"missing required key {key!r}")
            return default
        try:
            return int(raw)
        except ValueError:
            raise ManifestError(f"key {key!r} must be an integer, got {raw!r}") from None

    def as_float(key: str, default: float) -> float:
        raw = pairs.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ManifestError(f"key {key!r} must be a number, got {raw!r}") from None

    magnifier_c = as_float("magnifier_c", 10.0)
    labels = [p.strip() for p in need("configs").split(",") if p.strip()]
    if not labels:
        raise ManifestError("configs must list at least one method:granularity pair")
    configs = [parse_distance_config(label, magnifier_c) for label in labels]

    baseline_label = pairs.get("baseline", labels[0])
    baseline = parse_distance_config(baseline_label, magnifier_c)
    if baseline not in configs:
        raise ManifestError(f"baseline {baseline_label!r} is not among configs")

    repetitions = as_int("repetitions")
    if repetitions < 1:
        raise ManifestError("repetitions must be >= 1")
    budget = as_int("budget")
    if budget < 1:
        raise ManifestError("budget must be >= 1")

    initial = pairs.get("initial_seed", "")
    try:
        initial_seeds = tuple(bytes.fromhex(p) for p in initial.split(";")) \
            if initial else (b"",)
    except ValueError:
        raise ManifestError("initial_seed must be ';'-separated hex strings") from None

    return ExperimentManifest(
        subject_path=need("subject"),
        targets_path=need("targets"),
        configs=configs,
        baseline=baseline,
        repetitions=repetitions,
        budget=budget,
        seed_base=as_int("seed_base", 0),
        output_dir=need("output_dir"),
        exploration_fraction=as_float("exploration_fraction", 0.5),
        max_power_exponent=as_float("max_power_exponent", 4.0),
        base_energy=as_int("base_energy", 16),
        step_limit=as_int("step_limit", 4096),
        stop_on_first_poc=pairs.get("stop_on_first_poc", "0") not in ("0", "", "false"),
        initial_seeds=initial_seeds,
    )


def run_name(config: DistanceConfig, rep: int) -> str:
    return f"{config.method.value}-{config.granularity.value}-r{rep:02d}"


def _campaign_config(manifest: ExperimentManifest, dconfig: DistanceConfig,
                     rep: int) -> CampaignConfig:
    return CampaignConfig(
        rng_seed=manifest.seed_base + rep,
        budget=manifest.budget,
        distance_config=dconfig,
        exploration_fraction=manifest.exploration_fraction,
        max_power_exponent=manifest.max_power_exponent,
        base_energy=manifest.base_energy,
        step_limit=manifest.step_limit,
        initial_seeds=manifest.initial_seeds,
        stop_on_first_poc=manifest.stop_on_first_poc,
    )


def _run_job(payload) -> str:
    subject_text, targets_text, config = payload
    subject = load_subject(subject_text)
    targets = parse_targets(targets_text, subject.graph)
    dmap = compute_distance_map(subject.graph, targets, config.distance_config)
    return run_campaign(subject, targets, dmap, config).to_csv()


def worker_count(jobs: int) -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        workers = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ExperimentError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, min(workers, jobs))


def run_experiment(subject_text: str, targets_text: str,
                   manifest: ExperimentManifest) -> ExperimentResult:
    """Run repetitions x configs campaigns and compare against the baseline.

    Campaign jobs may run on a bounded process pool (DGFDIST_WORKERS); each
    campaign is self-contained, so scheduling cannot change any output byte.
    """
    jobs = [(run_name(cfg, rep), (subject_text, targets_text,
                                  _campaign_config(manifest, cfg, rep)))
            for cfg in manifest.configs for rep in range(manifest.repetitions)]
    logs: dict[str, str] = {}
    workers = worker_count(len(jobs))
    if workers == 1:
        for name, payload in jobs:
            try:
                logs[name] = _run_job(payload)
            except Exception as exc:
                raise ExperimentError(f"run {name} failed: {exc}") from exc
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(name, pool.submit(_run_job, payload))
                       for name, payload in jobs]
            for name, future in futures:
                try:
                    logs[name] = future.result()
                except Exception as exc:
                    raise ExperimentError(f"run {name} failed: {exc}") from exc

    ttes: dict[str, list[int]] = {}
    for cfg in manifest.configs:
        ttes[cfg.label] = [
            tte(CampaignLog.from_csv(logs[run_name(cfg, rep)]), manifest.budget)
            for rep in range(manifest.repetitions)
        ]
    baseline_ttes = ttes[manifest.baseline.label]
    summaries = [compare_runs(cfg.label, ttes[cfg.label], baseline_ttes,
                              manifest.budget)
                 for cfg in manifest.configs]
    return ExperimentResult(summaries=summaries, summary_csv=summary_csv(summaries),
                            logs=logs)
