import pytest
from fastapi.testclient import TestClient

from dgfdist.service import create_app

SUBJECT = """
func main entry=m0
block m0 in=main
block yes in=main
block no in=main
edge m0 -> yes
edge m0 -> no
rule m0 if byte[0]==0x42 goto yes
rule m0 default goto no
crash yes
entry main
"""

GRAPH_ONLY = "\n".join(l for l in SUBJECT.splitlines()
                       if not l.startswith(("rule", "crash", "entry")))

MANIFEST = """
subject = s
targets = t
configs = harmonic:appr,arithmetic:appr
repetitions = 2
budget = 300
seed_base = 5
output_dir = results
"""


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_graph_validate_ok(client):
    resp = client.post("/graph/validate", json={"graph": GRAPH_ONLY})
    assert resp.status_code == 200
    body = resp.json()
    assert body["valid"] and body["functions"] == 1 and body["blocks"] == 3


def test_graph_validate_reports_errors_as_data(client):
    resp = client.post("/graph/validate", json={"graph": "edge a -> b\n"})
    assert resp.status_code == 200
    body = resp.json()
    assert not body["valid"]
    assert any("no functions declared" in v for v in body["violations"])
    resp = client.post("/graph/validate", json={
        "graph": "func f entry=f0\nblock f0 in=f\nedge f0 -> ghost\n"})
    assert not resp.json()["valid"]
    assert any("undeclared block 'ghost'" in v
               for v in resp.json()["violations"])


def test_distance_endpoint(client):
    resp = client.post("/distance", json={
        "graph": GRAPH_ONLY, "targets": "yes", "method": "closest",
        "granularity": "func"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["csv"].splitlines()[0] == "block,function,distance"
    assert "yes,main,0.0" in body["csv"]
    assert body["defined"] == 3 and body["undefined"] == 0


def test_distance_rejects_bad_method(client):
    resp = client.post("/distance", json={
        "graph": GRAPH_ONLY, "targets": "yes", "method": "median",
        "granularity": "func"})
    assert resp.status_code == 400
    assert "median" in resp.json()["detail"]


def test_distance_rejects_bad_graph(client):
    resp = client.post("/distance", json={"graph": "nope", "targets": "x"})
    assert resp.status_code == 400
    assert "line 1" in resp.json()["detail"]


def test_fuzz_endpoint_deterministic(client):
    payload = {"subject": SUBJECT, "targets": "yes", "method": "arithmetic",
               "granularity": "appr", "rng_seed": 3, "budget": 500,
               "initial_seeds_hex": ["00"]}
    first = client.post("/fuzz", json=payload)
    second = client.post("/fuzz", json=payload)
    assert first.status_code == 200
    assert first.json()["log_csv"] == second.json()["log_csv"]
    assert first.json()["executions"] == 500


def test_fuzz_reports_poc_tick(client):
    payload = {"subject": SUBJECT, "targets": "yes", "rng_seed": 5,
               "budget": 50_000, "initial_seeds_hex": ["00"],
               "stop_on_first_poc": True}
    resp = client.post("/fuzz", json=payload)
    body = resp.json()
    assert body["pocs"] >= 1
    assert body["first_poc_tick"] is not None
    assert body["first_poc_tick"] <= 50_000


def test_fuzz_validation_error(client):
    resp = client.post("/fuzz", json={"subject": SUBJECT, "targets": "yes",
                                      "budget": 0})
    assert resp.status_code == 422  # schema-level: budget must be > 0


def test_experiment_endpoint(client):
    resp = client.post("/experiment", json={
        "manifest": MANIFEST, "subject": SUBJECT, "targets": "yes"})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["logs"]) == 4
    assert body["baseline"] == "harmonic:appr"
    assert body["output_dir"] == "results"
    assert body["summary_csv"].count("\n") == 3


def test_experiment_rejects_bad_manifest(client):
    resp = client.post("/experiment", json={
        "manifest": "configs =\n", "subject": SUBJECT, "targets": "yes"})
    assert resp.status_code == 400


def test_analyze_round_trip(client):
    fuzz = client.post("/fuzz", json={
        "subject": SUBJECT, "targets": "yes", "rng_seed": 5,
        "budget": 50_000, "initial_seeds_hex": ["00"],
        "stop_on_first_poc": True}).json()
    resp = client.post("/analyze", json={"logs": {"r0": fuzz["log_csv"]}})
    assert resp.status_code == 200
    body = resp.json()
    assert body["pocs"] == 1
    assert body["lineage_csv"].startswith("run,poc_id,length,chain")
    assert "r0," in body["lineage_csv"]


def test_analyze_rejects_malformed_log(client):
    resp = client.post("/analyze", json={"logs": {"bad": "what,is,this"}})
    assert resp.status_code == 400
    assert "bad" in resp.json()["detail"]


def test_analyze_requires_logs(client):
    resp = client.post("/analyze", json={"logs": {}})
    assert resp.status_code == 400
