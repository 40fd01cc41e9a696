"""Request/response models of the lab service.

File-based inputs travel as their text contents: the service never reads
client-local paths. Seed bytes are hex-encoded.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class GraphValidateRequest(BaseModel):
    graph: str


class GraphValidateResponse(BaseModel):
    valid: bool
    violations: List[str]
    functions: int = 0
    blocks: int = 0


class DistanceRequest(BaseModel):
    graph: str
    targets: str
    method: str = "harmonic"
    granularity: str = "appr"
    magnifier_c: float = 10.0


class DistanceResponse(BaseModel):
    csv: str
    defined: int
    undefined: int


class FuzzRequest(BaseModel):
    subject: str
    targets: str
    method: str = "harmonic"
    granularity: str = "appr"
    magnifier_c: float = 10.0
    rng_seed: int = 0
    budget: int = Field(default=10000, gt=0)
    exploration_fraction: float = 0.5
    max_power_exponent: float = 4.0
    base_energy: int = 16
    step_limit: int = 4096
    initial_seeds_hex: List[str] = [""]
    wall_clock_cap: Optional[float] = None
    stop_on_first_poc: bool = False


class FuzzResponse(BaseModel):
    log_csv: str
    executions: int
    seeds_admitted: int
    crashes: int
    pocs: int
    first_poc_tick: Optional[int] = None


class ExperimentRequest(BaseModel):
    manifest: str
    subject: str
    targets: str


class ExperimentResponse(BaseModel):
    summary_csv: str
    logs: Dict[str, str]
    baseline: str
    output_dir: str


class AnalyzeRequest(BaseModel):
    logs: Dict[str, str]


class AnalyzeResponse(BaseModel):
    lineage_csv: str
    decrease_csv: str
    lineage_series_tsv: str
    decrease_cactus_tsv: str
    pocs: int
    samples: int
    skipped: int
