"""Clients for the lab service.

LocalClient dispatches straight to the service handlers in-process (the
default for the CLI); RemoteClient speaks HTTP to a running server. Both
expose the same methods with the same pydantic models, so callers cannot
tell them apart.
"""

from __future__ import annotations

import httpx

from .service import api, schemas
from .service.api import ApiError


class LocalClient:
    def validate_graph(self, req: schemas.GraphValidateRequest):
        return api.validate_graph(req)

    def distance_map(self, req: schemas.DistanceRequest):
        return api.distance_map(req)

    def fuzz(self, req: schemas.FuzzRequest):
        return api.fuzz(req)

    def run_experiment(self, req: schemas.ExperimentRequest):
        return api.run_experiment(req)

    def analyze(self, req: schemas.AnalyzeRequest):
        return api.analyze(req)


class RemoteClient:
    def __init__(self, base_url: str, timeout: float = 600.0):
        self._http = httpx.Client(base_url=base_url, timeout=timeout)

    def _post(self, path: str, req, response_model):
        resp = self._http.post(path, json=req.model_dump())
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise ApiError(f"{path}: {detail}")
        return response_model.model_validate(resp.json())

    def validate_graph(self, req):
        return self._post("/graph/validate", req, schemas.GraphValidateResponse)

    def distance_map(self, req):
        return self._post("/distance", req, schemas.DistanceResponse)

    def fuzz(self, req):
        return self._post("/fuzz", req, schemas.FuzzResponse)

    def run_experiment(self, req):
        return self._post("/experiment", req, schemas.ExperimentResponse)

    def analyze(self, req):
        return self._post("/analyze", req, schemas.AnalyzeResponse)


def make_client(server: str | None):
    return RemoteClient(server) if server else LocalClient()
