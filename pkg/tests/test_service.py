import threading
import time
from concurrent.futures import ThreadPoolExecutor

import pytest
from conftest import GOLDEN_DIR, compiled
from fastapi.testclient import TestClient

from odsc.check import engine
from odsc.errors import DuplicateAdd, InvalidModel, MalformedDocument, ModelNotFound, StoreNotFound
from odsc.preferences import ServiceConfig
from odsc.rebac import export_model
from odsc.service import create_app, error_status

ALICE_MODEL = (GOLDEN_DIR / "alice_train.fga.json").read_bytes()
ALICE = {"user": "user:alice", "relation": "train_grant", "object": "asset:ds1"}


def _client(tmp_path, **options):
    return TestClient(create_app(ServiceConfig(data_dir=tmp_path / "data", **options)))


@pytest.fixture
def client(tmp_path):
    with _client(tmp_path) as test_client:
        yield test_client


def _new_store(client, name="demo"):
    response = client.post("/stores", json={"name": name})
    assert response.status_code == 201
    return response.json()["id"]


def _post_model(client, store_id, document=ALICE_MODEL):
    return client.post(f"/stores/{store_id}/authorization-models", content=document,
                       headers={"content-type": "application/json"})


def _check(client, store_id, user, relation="can_train", obj="asset:ds1", **extra):
    body = {"tuple_key": {"user": user, "relation": relation, "object": obj}, **extra}
    return client.post(f"/stores/{store_id}/check", json=body)


def test_create_store(client):
    response = client.post("/stores", json={"name": "tenant"})
    assert response.status_code == 201
    body = response.json()
    assert body["name"] == "tenant"
    assert len(body["id"]) == 26


def test_full_flow(client):
    store_id = _new_store(client)
    response = _post_model(client, store_id)
    assert response.status_code == 201
    assert response.json() == {"authorization_model_id": "00000001"}

    response = client.post(f"/stores/{store_id}/write", json={"writes": {"tuple_keys": [ALICE]}})
    assert response.status_code == 200
    assert response.json() == {}

    assert _check(client, store_id, "user:alice").json()["allowed"] is True
    assert _check(client, store_id, "user:bob").json()["allowed"] is False
    assert _check(client, store_id, "user:alice", authorization_model_id="00000001").json()["allowed"] is True


def test_delete_by_key(client):
    store_id = _new_store(client)
    _post_model(client, store_id)
    client.post(f"/stores/{store_id}/write", json={"writes": {"tuple_keys": [ALICE]}})
    response = client.post(f"/stores/{store_id}/write", json={"deletes": {"tuple_keys": [ALICE]}})
    assert response.status_code == 200
    assert _check(client, store_id, "user:alice").json()["allowed"] is False
    again = client.post(f"/stores/{store_id}/write", json={"deletes": {"tuple_keys": [ALICE]}})
    assert again.status_code == 409


def test_duplicate_write_conflicts(client):
    store_id = _new_store(client)
    _post_model(client, store_id)
    assert client.post(f"/stores/{store_id}/write", json={"writes": {"tuple_keys": [ALICE]}}).status_code == 200
    response = client.post(f"/stores/{store_id}/write", json={"writes": {"tuple_keys": [ALICE]}})
    assert response.status_code == 409
    assert response.json()["code"] == "write_failed_due_to_invalid_input"


def test_check_without_a_model(client):
    store_id = _new_store(client)
    response = _check(client, store_id, "user:alice")
    assert response.status_code == 404
    assert response.json()["code"] == "latest_authorization_model_not_found"


def test_unknown_store(client):
    response = _check(client, "01ARZ3NDEKTSV4RRFFQ69G5FAV", "user:alice")
    assert response.status_code == 404
    assert response.json()["code"] == "store_id_not_found"


def test_unknown_model_id(client):
    store_id = _new_store(client)
    _post_model(client, store_id)
    response = _check(client, store_id, "user:alice", authorization_model_id="00000009")
    assert response.status_code == 404


def test_invalid_model(client):
    store_id = _new_store(client)
    document = b'{"schema_version": "1.1", "type_definitions": [{"type": "doc", "relations": ' \
               b'{"viewer": {"computedUserset": {"relation": "nobody"}}}}]}'
    response = _post_model(client, store_id, document)
    assert response.status_code == 422
    assert response.json()["code"] == "invalid_authorization_model"


def test_malformed_bodies(client):
    store_id = _new_store(client)
    assert _post_model(client, store_id, b"{not json").status_code == 400
    _post_model(client, store_id)
    response = client.post(f"/stores/{store_id}/check", json={"tuple_key": {"user": "user:alice"}})
    assert response.status_code == 400
    assert response.json()["code"] == "validation_error"
    assert _check(client, store_id, "alice").status_code == 400


def test_tuple_outside_the_model(client):
    store_id = _new_store(client)
    _post_model(client, store_id)
    bad = {"user": "user:alice", "relation": "can_train", "object": "asset:ds1"}
    response = client.post(f"/stores/{store_id}/write", json={"writes": {"tuple_keys": [bad]}})
    assert response.status_code == 404
    assert response.json()["code"] == "relation_not_found"


def test_unsupported_routes(client):
    for response in (client.get("/stores"), client.get("/healthz"), client.delete("/stores/x")):
        assert response.status_code == 404
        assert response.json() == {"code": "undefined_endpoint", "message": "Route not supported"}


def test_bearer_token(tmp_path):
    with _client(tmp_path, bearer_token="s3cret") as guarded:
        assert guarded.post("/stores", json={}).status_code == 401
        wrong = guarded.post("/stores", json={}, headers={"Authorization": "Bearer nope"})
        assert wrong.status_code == 401
        assert wrong.json()["code"] == "unauthenticated"
        right = guarded.post("/stores", json={}, headers={"Authorization": "Bearer s3cret"})
        assert right.status_code == 201


def test_body_limit(tmp_path):
    with _client(tmp_path, request_body_limit=64) as small:
        store_id = _new_store(small)
        response = _post_model(small, store_id)
        assert response.status_code == 413
        assert response.json()["code"] == "request_too_large"


def test_conditioned_tuples_and_context(client):
    result = compiled("agreement_retention")
    store_id = _new_store(client)
    _post_model(client, store_id, export_model(result.model))
    writes = [t.to_record() for t in result.tuples]
    assert client.post(f"/stores/{store_id}/write", json={"writes": {"tuple_keys": writes}}).status_code == 200

    def allowed(context):
        response = _check(client, store_id, "user:alice", "can_use", "asset:ds2", context=context)
        assert response.status_code == 200
        return response.json()["allowed"]

    assert allowed({"current_time": "2025-06-01T00:00:00Z"}) is True
    assert allowed({"current_time": "2026-01-01T00:00:00Z"}) is True
    assert allowed({"current_time": "2026-01-01T00:00:01Z"}) is False
    assert allowed({}) is False


def test_contextual_tuples_are_not_stored(client):
    store_id = _new_store(client)
    _post_model(client, store_id)
    extra = {"contextual_tuples": {"tuple_keys": [ALICE]}}
    assert _check(client, store_id, "user:alice", **extra).json()["allowed"] is True
    assert _check(client, store_id, "user:alice").json()["allowed"] is False


def test_stores_survive_a_restart(tmp_path):
    with _client(tmp_path) as first:
        store_id = _new_store(first)
        _post_model(first, store_id)
        first.post(f"/stores/{store_id}/write", json={"writes": {"tuple_keys": [ALICE]}})
    with _client(tmp_path) as second:
        assert _check(second, store_id, "user:alice").json()["allowed"] is True


@pytest.mark.parametrize("error,expected", [
    (StoreNotFound("x"), 404),
    (ModelNotFound("x"), 404),
    (DuplicateAdd("x"), 409),
    (InvalidModel("x"), 422),
    (MalformedDocument("x"), 400),
])
def test_error_status_mapping(error, expected):
    assert error_status(error)[0] == expected


def test_service_limits_must_be_positive():
    with pytest.raises(ValueError):
        ServiceConfig(max_concurrent_checks=0)


def test_chunked_body_over_the_limit(tmp_path):
    with _client(tmp_path, request_body_limit=64) as small:
        store_id = _new_store(small)
        chunks = [ALICE_MODEL[i:i + 32] for i in range(0, len(ALICE_MODEL), 32)]
        response = small.post(f"/stores/{store_id}/authorization-models", content=iter(chunks),
                              headers={"content-type": "application/json"})
        assert response.status_code == 413
        assert response.json()["code"] == "request_too_large"


def test_chunked_body_under_the_limit(tmp_path):
    with _client(tmp_path, request_body_limit=64) as small:
        response = small.post("/stores", content=iter([b'{"name": ', b'"chunked"}']),
                              headers={"content-type": "application/json"})
        assert response.status_code == 201
        assert response.json()["name"] == "chunked"


def test_write_uses_the_named_model(client):
    store_id = _new_store(client)
    _post_model(client, store_id)
    assert _post_model(client, store_id, export_model(compiled("subscribe_prohibition").model)).status_code == 201

    latest = client.post(f"/stores/{store_id}/write", json={"writes": {"tuple_keys": [ALICE]}})
    assert latest.status_code == 404
    assert latest.json()["code"] == "relation_not_found"
    named = client.post(f"/stores/{store_id}/write",
                        json={"writes": {"tuple_keys": [ALICE]}, "authorization_model_id": "00000001"})
    assert named.status_code == 200
    assert _check(client, store_id, "user:alice", authorization_model_id="00000001").json()["allowed"] is True


def test_concurrent_checks_are_bounded(tmp_path, monkeypatch):
    lock = threading.Lock()
    active, peak = [0], [0]

    def slow_check(*args, **kwargs):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        try:
            time.sleep(0.05)
            return engine.check(*args, **kwargs)
        finally:
            with lock:
                active[0] -= 1

    monkeypatch.setattr("odsc.service.app.check", slow_check)
    with _client(tmp_path, max_concurrent_checks=2) as limited:
        store_id = _new_store(limited)
        _post_model(limited, store_id)
        with ThreadPoolExecutor(max_workers=8) as pool:
            responses = list(pool.map(lambda _: _check(limited, store_id, "user:alice"), range(8)))

    assert [r.status_code for r in responses] == [200] * 8
    assert 1 <= peak[0] <= 2
