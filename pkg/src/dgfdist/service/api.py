"""Service handlers: pure request-model -> response-model functions.

The FastAPI app and the CLI's in-process client both dispatch here, so the
wire behavior is identical whether or not HTTP is involved. Bad input raises
ApiError, which the HTTP layer maps to status 400.
"""

from __future__ import annotations

from .. import analysis, campaign, distances, experiment, graph, subject
from ..errors import ExperimentError, FormatError
from . import schemas


class ApiError(Exception):
    """Invalid request content (maps to HTTP 400)."""


_SUBJECT_DIRECTIVES = ("rule", "crash", "entry")


def _parse_graph_text(text: str) -> graph.ProgramGraph:
    """Accept either a plain graph file or a full subject file."""
    for raw in text.splitlines():
        head = raw.split("#", 1)[0].split(None, 1)
        if head and head[0] in _SUBJECT_DIRECTIVES:
            return subject.load_subject(text).graph
    return graph.parse_program_graph(text)


def _distance_config(method: str, granularity: str, magnifier_c: float):
    try:
        return distances.DistanceConfig(
            method=distances.AggregationMethod(method),
            granularity=distances.Granularity(granularity),
            magnifier_c=magnifier_c,
        )
    except ValueError as exc:
        raise ApiError(str(exc)) from None


def validate_graph(req: schemas.GraphValidateRequest) -> schemas.GraphValidateResponse:
    try:
        g = _parse_graph_text(req.graph)
    except FormatError as exc:
        return schemas.GraphValidateResponse(valid=False, violations=[str(exc)])
    violations = graph.validate(g)
    return schemas.GraphValidateResponse(
        valid=not violations, violations=violations,
        functions=len(g.cfgs), blocks=len(g.block_owner))


def distance_map(req: schemas.DistanceRequest) -> schemas.DistanceResponse:
    config = _distance_config(req.method, req.granularity, req.magnifier_c)
    try:
        g = _parse_graph_text(req.graph)
        targets = graph.parse_targets(req.targets, g)
    except FormatError as exc:
        raise ApiError(str(exc)) from None
    dmap = distances.compute_distance_map(g, targets, config)
    return schemas.DistanceResponse(
        csv=distances.distance_map_csv(g, dmap),
        defined=len(dmap.values),
        undefined=len(g.block_owner) - len(dmap.values))


def fuzz(req: schemas.FuzzRequest) -> schemas.FuzzResponse:
    dconfig = _distance_config(req.method, req.granularity, req.magnifier_c)
    try:
        spec = subject.load_subject(req.subject)
        targets = graph.parse_targets(req.targets, spec.graph)
        seeds = tuple(bytes.fromhex(s) for s in req.initial_seeds_hex)
        config = campaign.CampaignConfig(
            rng_seed=req.rng_seed,
            budget=req.budget,
            distance_config=dconfig,
            exploration_fraction=req.exploration_fraction,
            max_power_exponent=req.max_power_exponent,
            base_energy=req.base_energy,
            step_limit=req.step_limit,
            initial_seeds=seeds,
            wall_clock_cap=req.wall_clock_cap,
            stop_on_first_poc=req.stop_on_first_poc,
        )
    except (FormatError, ValueError) as exc:
        raise ApiError(str(exc)) from None
    dmap = distances.compute_distance_map(spec.graph, targets, dconfig)
    log = campaign.run_campaign(spec, targets, dmap, config)
    poc_ticks = [e.tick for e in log.events if e.kind == "crash" and e.poc]
    return schemas.FuzzResponse(
        log_csv=log.to_csv(),
        executions=sum(1 for e in log.events if e.kind == "exec"),
        seeds_admitted=sum(1 for e in log.events if e.kind == "seed"),
        crashes=sum(1 for e in log.events if e.kind == "crash"),
        pocs=len(poc_ticks),
        first_poc_tick=min(poc_ticks) if poc_ticks else None)


def run_experiment(req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
    try:
        manifest = experiment.parse_manifest(req.manifest)
    except FormatError as exc:
        raise ApiError(str(exc)) from None
    try:
        result = experiment.run_experiment(req.subject, req.targets, manifest)
    except (FormatError, ExperimentError, ValueError) as exc:
        raise ApiError(str(exc)) from None
    return schemas.ExperimentResponse(
        summary_csv=result.summary_csv,
        logs=result.logs,
        baseline=manifest.baseline.label,
        output_dir=manifest.output_dir)


def analyze(req: schemas.AnalyzeRequest) -> schemas.AnalyzeResponse:
    if not req.logs:
        raise ApiError("no logs supplied")
    named = {}
    for name in sorted(req.logs):
        try:
            named[name] = campaign.CampaignLog.from_csv(req.logs[name])
        except FormatError as exc:
            raise ApiError(f"{name}: {exc}") from None
    art = analysis.analyze_logs(named)
    return schemas.AnalyzeResponse(
        lineage_csv=art.lineage_csv,
        decrease_csv=art.decrease_csv,
        lineage_series_tsv=art.lineage_series_tsv,
        decrease_cactus_tsv=art.decrease_cactus_tsv,
        pocs=art.pocs,
        samples=art.samples,
        skipped=art.skipped)
