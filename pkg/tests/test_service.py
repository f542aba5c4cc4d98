import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from tabuq.errors import InputSchemaError
from tabuq.pipeline import RunConfig, run_calibrate, run_evaluate
from tabuq.service import ReviewStore, create_app


@pytest.fixture(scope="module")
def state_dir(tmp_path_factory, corpus_jobs) -> Path:
    out = tmp_path_factory.mktemp("state")
    jobs = corpus_jobs[:8]
    cfg = RunConfig()
    model = run_calibrate(jobs, cfg, out_dir=out, tune_tau=True)
    run_evaluate(jobs, model, cfg, out_dir=out)
    return out


@pytest.fixture()
def client(state_dir, tmp_path) -> TestClient:
    # fresh event log per test: copy artifacts into an isolated dir
    import shutil

    work = tmp_path / "svc"
    shutil.copytree(state_dir, work)
    return TestClient(create_app(work))


def queue_of(client, table_id):
    return client.get(f"/v1/tables/{table_id}/cells", params={"flagged": "true"}).json()["cells"]


def first_flagged_table(client):
    for t in client.get("/v1/tables").json():
        if t["remaining_flagged"] > 0:
            return t["table_id"]
    raise AssertionError("fixture corpus produced no flagged cells")


def test_tables_listing_has_flag_counts(client):
    tables = client.get("/v1/tables").json()
    assert tables == sorted(tables, key=lambda t: t["table_id"])
    assert all({"table_id", "domain", "cell_count", "flagged", "remaining_flagged"} <= set(t)
               for t in tables)
    assert sum(t["flagged"] for t in tables) > 0


def test_queue_sorted_by_uncertainty_desc(client):
    tid = first_flagged_table(client)
    queue = queue_of(client, tid)
    uncertainties = [c["uncertainty"] for c in queue]
    assert uncertainties == sorted(uncertainties, reverse=True)
    assert all(c["flagged"] for c in queue)


def test_cells_default_order_is_row_col(client):
    tid = first_flagged_table(client)
    cells = client.get(f"/v1/tables/{tid}/cells").json()["cells"]
    assert [(c["row"], c["col"]) for c in cells] == sorted((c["row"], c["col"]) for c in cells)


def test_accept_unflags_and_updates_metrics(client):
    tid = first_flagged_table(client)
    queue = queue_of(client, tid)
    item = queue[0]
    before = client.get("/v1/report/live").json()
    r = client.post(
        f"/v1/tables/{tid}/cells/{item['row']},{item['col']}/correction",
        json={"verdict": "accept"},
    )
    assert r.status_code == 200
    ack = r.json()
    assert ack["cell"]["status"] == "accepted"
    after = client.get("/v1/report/live").json()
    assert after["remaining_flagged"] == before["remaining_flagged"] - 1
    assert after["reviewed"] == before["reviewed"] + 1
    assert len(queue_of(client, tid)) == len(queue)  # queue lists flagged incl. resolved
    statuses = {(c["row"], c["col"]): c["status"] for c in queue_of(client, tid)}
    assert statuses[(item["row"], item["col"])] == "accepted"


def test_correct_verdict_improves_or_holds_error(client):
    tid = first_flagged_table(client)
    item = queue_of(client, tid)[0]
    before = client.get("/v1/report/live").json()["aggregate"]
    body = {"verdict": "correct", "reviewer_text": item["gt_text"] or "fixed"}
    r = client.post(f"/v1/tables/{tid}/cells/{item['row']},{item['col']}/correction", json=body)
    assert r.status_code == 200
    after = client.get("/v1/report/live").json()["aggregate"]
    assert after["error_rate_after_hc"] <= before["error_rate_after_hc"]


def test_wrong_text_correction_keeps_the_error(client):
    # a "correct" verdict whose text still mismatches ground truth must not
    # count as resolved-to-correct in the live report
    target = None
    for t in client.get("/v1/tables").json():
        for c in queue_of(client, t["table_id"]):
            if c["gt_matched"] and c["in_eval_split"] and c["gt_text"] != c["text"]:
                target = (t["table_id"], c)
                break
        if target:
            break
    assert target, "fixture corpus must contain a flagged incorrect eval-split cell"
    tid, cell = target
    before = client.get("/v1/report/live").json()["aggregate"]
    r = client.post(
        f"/v1/tables/{tid}/cells/{cell['row']},{cell['col']}/correction",
        json={"verdict": "correct", "reviewer_text": "###definitely wrong###"},
    )
    assert r.status_code == 200
    after = client.get("/v1/report/live").json()["aggregate"]
    assert after["error_rate_after_hc"] == before["error_rate_after_hc"]
    assert after["counts"]["corrected"] == before["counts"]["corrected"]


def test_correct_requires_reviewer_text(client):
    tid = first_flagged_table(client)
    item = queue_of(client, tid)[0]
    r = client.post(
        f"/v1/tables/{tid}/cells/{item['row']},{item['col']}/correction",
        json={"verdict": "correct"},
    )
    assert r.status_code == 422


def test_unknown_cell_404(client):
    r = client.post("/v1/tables/nope/cells/0,0/correction", json={"verdict": "accept"})
    assert r.status_code == 404
    tid = first_flagged_table(client)
    r = client.post(f"/v1/tables/{tid}/cells/99,99/correction", json={"verdict": "accept"})
    assert r.status_code == 404


def test_unflagged_cell_409(client):
    tid = first_flagged_table(client)
    cells = client.get(f"/v1/tables/{tid}/cells").json()["cells"]
    calm = next(c for c in cells if not c["flagged"])
    r = client.post(
        f"/v1/tables/{tid}/cells/{calm['row']},{calm['col']}/correction",
        json={"verdict": "accept"},
    )
    assert r.status_code == 409


def test_double_resolution_409(client):
    tid = first_flagged_table(client)
    item = queue_of(client, tid)[0]
    url = f"/v1/tables/{tid}/cells/{item['row']},{item['col']}/correction"
    assert client.post(url, json={"verdict": "accept"}).status_code == 200
    assert client.post(url, json={"verdict": "accept"}).status_code == 409


def test_idempotent_event_id(client):
    tid = first_flagged_table(client)
    item = queue_of(client, tid)[0]
    url = f"/v1/tables/{tid}/cells/{item['row']},{item['col']}/correction"
    body = {"verdict": "accept", "event_id": "evt-once"}
    first = client.post(url, json=body)
    second = client.post(url, json=body)
    assert first.status_code == 200 and second.status_code == 200
    assert first.json() == second.json()
    live = client.get("/v1/report/live").json()
    assert live["reviewed"] == 1  # applied once


def test_bad_coordinate_422(client):
    tid = first_flagged_table(client)
    r = client.post(f"/v1/tables/{tid}/cells/zero,one/correction", json={"verdict": "accept"})
    assert r.status_code == 422


def test_image_endpoint(client):
    tables = client.get("/v1/tables").json()
    with_image = next(t for t in tables if t["has_image"])
    r = client.get(f"/v1/tables/{with_image['table_id']}/image")
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    assert client.get("/v1/tables/ghost/image").status_code == 404


def test_batch_report_endpoint(client, state_dir):
    served = client.get("/v1/report").json()
    stored = json.loads((state_dir / "report.json").read_text())
    assert served == stored


def snapshot(client) -> bytes:
    payload = {
        "tables": client.get("/v1/tables").json(),
        "cells": {
            t["table_id"]: client.get(f"/v1/tables/{t['table_id']}/cells").json()
            for t in client.get("/v1/tables").json()
        },
        "live": client.get("/v1/report/live").json(),
    }
    return json.dumps(payload, sort_keys=True).encode()


def test_event_log_replay_reproduces_state(state_dir, tmp_path):
    import shutil

    work = tmp_path / "svc"
    shutil.copytree(state_dir, work)
    client = TestClient(create_app(work))
    # resolve a handful of cells across tables with mixed verdicts
    applied = 0
    for t in client.get("/v1/tables").json():
        for item in queue_of(client, t["table_id"])[:2]:
            verdict = (
                {"verdict": "correct", "reviewer_text": item["gt_text"]}
                if item["gt_matched"] and applied % 2 == 0
                else {"verdict": "accept"}
            )
            url = f"/v1/tables/{t['table_id']}/cells/{item['row']},{item['col']}/correction"
            assert client.post(url, json=verdict).status_code == 200
            applied += 1
    assert applied > 0
    snap_live = snapshot(client)

    replayed = TestClient(create_app(work))
    assert snapshot(replayed) == snap_live
    # the log itself is append-only JSONL with one record per applied event
    lines = (work / "events.jsonl").read_text().strip().splitlines()
    assert len(lines) == applied


def test_missing_state_rejected(tmp_path):
    with pytest.raises(InputSchemaError, match="review state"):
        ReviewStore(tmp_path)


def test_corrupt_event_log_rejected(state_dir, tmp_path):
    import shutil

    work = tmp_path / "svc"
    shutil.copytree(state_dir, work)
    (work / "events.jsonl").write_text("{broken\n")
    with pytest.raises(InputSchemaError, match="corrupt event log"):
        ReviewStore(work)
