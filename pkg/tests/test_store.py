import json
import os
import threading

import pytest
from conftest import compiled

from odsc.errors import (
    AbsentDelete,
    DuplicateAdd,
    InvalidModel,
    MalformedDocument,
    ModelNotFound,
    StoreBusy,
    StoreNotFound,
    UnknownTypeOrRelation,
)
from odsc.rebac import ComputedUserset, ObjectRef, RelationshipTuple, TypeDefinition, UserRef
from odsc.rebac.model import AuthorizationModel
from odsc.store import StoreState, TupleLog, create_store, init_store, open_or_init_store, open_store
from odsc.store.log import render_block
from odsc.store.tuple_store import LOG_FILE, META_FILE, MODELS_DIR

DS1 = ObjectRef("asset", "ds1")


def _tuple(user, relation="consumer", obj=DS1):
    return RelationshipTuple(UserRef(ObjectRef("user", user)), relation, obj)


@pytest.fixture
def store(tmp_path):
    with init_store(tmp_path / "store") as opened:
        opened.put_model(compiled("alice_train").model)
        yield opened


def test_new_store_layout(tmp_path):
    with init_store(tmp_path / "s", name="demo") as fresh:
        assert fresh.revision == 0
        assert len(fresh.store_id) == 26
        assert fresh.read() == []
        meta = json.loads((tmp_path / "s" / META_FILE).read_text())
        assert meta == {"store_id": fresh.store_id, "name": "demo", "revision": 0}
        assert (tmp_path / "s" / MODELS_DIR).is_dir()


def test_init_refuses_an_existing_store(tmp_path):
    init_store(tmp_path / "s").close()
    with pytest.raises(MalformedDocument):
        init_store(tmp_path / "s")


def test_open_missing_store(tmp_path):
    with pytest.raises(StoreNotFound):
        open_store(tmp_path / "nothing")


def test_model_ids_are_sequential(tmp_path):
    with init_store(tmp_path / "s") as fresh:
        first = fresh.put_model(compiled("alice_train").model)
        second = fresh.put_model(compiled("subscribe_prohibition").model)
        assert (first, second) == ("00000001", "00000002")
        assert fresh.snapshot().latest_model_id == "00000002"
        assert fresh.snapshot().model("00000001") == compiled("alice_train").model
        assert (tmp_path / "s" / MODELS_DIR / "00000002.fga.json").is_file()


def test_invalid_model_leaves_the_store_unchanged(tmp_path):
    with init_store(tmp_path / "s") as fresh:
        bad = AuthorizationModel((TypeDefinition("doc", {"viewer": ComputedUserset("nobody")}),))
        with pytest.raises(InvalidModel):
            fresh.put_model(bad)
        assert dict(fresh.snapshot().models) == {}
        assert list((tmp_path / "s" / MODELS_DIR).iterdir()) == []


def test_write_without_a_model(tmp_path):
    with init_store(tmp_path / "s") as fresh:
        with pytest.raises(ModelNotFound):
            fresh.write([_tuple("alice")])


def test_write_then_read(store):
    assert store.write([_tuple("alice"), _tuple("bob")]) == 1
    assert store.read() == [_tuple("alice"), _tuple("bob")]
    assert store.read(user=UserRef(ObjectRef("user", "bob"))) == [_tuple("bob")]
    assert store.read(relation="provider") == []
    assert store.read(object=DS1, relation="consumer") == [_tuple("alice"), _tuple("bob")]


def test_duplicate_add_changes_nothing(store):
    store.write([_tuple("alice")])
    with pytest.raises(DuplicateAdd):
        store.write([_tuple("bob"), _tuple("alice")])
    assert store.revision == 1
    assert store.read() == [_tuple("alice")]


def test_absent_delete(store):
    with pytest.raises(AbsentDelete):
        store.write(deletes=[_tuple("alice")])
    assert store.revision == 0


def test_delete_and_add_in_one_revision(store):
    store.write([_tuple("alice")])
    assert store.write(adds=[_tuple("alice", "provider")], deletes=[_tuple("alice")]) == 2
    assert store.read() == [_tuple("alice", "provider")]


def test_delete_then_re_add_of_the_same_tuple(store):
    store.write([_tuple("alice")])
    assert store.write(adds=[_tuple("alice")], deletes=[_tuple("alice")]) == 2
    assert store.read() == [_tuple("alice")]


def test_tuples_must_fit_the_model(store):
    with pytest.raises(UnknownTypeOrRelation):
        store.write([_tuple("alice", "can_train")])
    with pytest.raises(UnknownTypeOrRelation):
        store.write([_tuple("alice", "consumer", ObjectRef("folder", "x"))])
    assert store.revision == 0


def test_write_checks_against_the_named_model(store):
    first = store.snapshot().latest_model_id
    store.put_model(compiled("subscribe_prohibition").model)
    with pytest.raises(UnknownTypeOrRelation):
        store.write([_tuple("alice", "train_grant")])
    assert store.write([_tuple("alice", "train_grant")], model_id=first) == 1
    with pytest.raises(ModelNotFound):
        store.write([_tuple("bob", "train_grant")], model_id="00000009")


def test_empty_write_is_refused(store):
    with pytest.raises(MalformedDocument):
        store.write()


def test_snapshots_are_isolated(store):
    store.write([_tuple("alice")])
    before = store.snapshot()
    store.write([_tuple("bob")], deletes=[_tuple("alice")])
    assert before.revision == 1
    assert before.read() == [_tuple("alice")]
    assert store.snapshot().read() == [_tuple("bob")]


def test_writes_survive_reopen(tmp_path):
    path = tmp_path / "s"
    with init_store(path) as fresh:
        store_id = fresh.store_id
        fresh.put_model(compiled("alice_train").model)
        fresh.write([_tuple("alice")])
        fresh.write([_tuple("bob")])
        fresh.write(deletes=[_tuple("alice")])
    with open_store(path, writable=False) as reader:
        assert reader.store_id == store_id
        assert reader.revision == 3
        assert reader.read() == [_tuple("bob")]
        assert reader.snapshot().model() == compiled("alice_train").model


def test_writable_open_compacts_the_log(tmp_path):
    path = tmp_path / "s"
    with init_store(path) as fresh:
        fresh.put_model(compiled("alice_train").model)
        for name in ("alice", "bob", "carol"):
            fresh.write([_tuple(name)])
    with open_store(path) as reopened:
        assert reopened.revision == 3
    lines = (path / LOG_FILE).read_text().splitlines()
    assert lines[-1] == "3 COMMIT"
    assert all(line.startswith("3 ") for line in lines)
    assert len(lines) == 4
    with open_store(path) as again:
        assert again.read() == [_tuple("alice"), _tuple("bob"), _tuple("carol")]
        assert again.write([_tuple("dave")]) == 4


def test_second_writer_is_refused(store):
    with pytest.raises(StoreBusy):
        open_store(store.path)
    with open_store(store.path, writable=False) as reader:
        assert reader.revision == store.revision
        with pytest.raises(StoreBusy):
            reader.write([_tuple("alice")])


def test_lock_is_released_on_close(tmp_path):
    path = tmp_path / "s"
    init_store(path).close()
    open_store(path).close()
    open_store(path).close()


def test_open_or_init(tmp_path):
    with open_or_init_store(tmp_path / "s") as first:
        store_id = first.store_id
    with open_or_init_store(tmp_path / "s") as second:
        assert second.store_id == store_id


def test_create_store_uses_its_id_as_directory(tmp_path):
    with create_store(tmp_path, name="tenant") as created:
        assert created.path == tmp_path / created.store_id
        assert created.name == "tenant"


def test_concurrent_snapshots_see_whole_revisions(store):
    torn = []
    reads = [0] * 100
    start = threading.Barrier(len(reads) + 1)
    done = threading.Event()

    def reader(slot):
        start.wait()
        while True:
            snapshot = store.snapshot()
            consumers = snapshot.tuples_for(DS1, "consumer")
            reads[slot] += 1
            # one tuple per revision
            if not snapshot.revision == len(snapshot.tuples) == len(consumers):
                torn.append(snapshot.revision)
            if done.is_set():
                break

    threads = [threading.Thread(target=reader, args=(slot,)) for slot in range(len(reads))]
    for thread in threads:
        thread.start()
    start.wait()
    try:
        for index in range(50):
            store.write([_tuple(f"u{index}")])
    finally:
        done.set()
        for thread in threads:
            thread.join()
    assert torn == []
    assert all(reads)
    assert store.revision == 50


def test_state_of_detached_tuples():
    model = compiled("alice_train").model
    state = StoreState.of([_tuple("bob"), _tuple("alice")], model)
    assert state.model() == model
    assert state.tuples_for(DS1, "consumer") == (_tuple("alice"), _tuple("bob"))
    with pytest.raises(ModelNotFound):
        StoreState.of([]).model()


# --- Log durability ---

BLOCKS = [
    ([], [_tuple("alice"), _tuple("bob")]),
    ([_tuple("alice")], [_tuple("carol")]),
    ([_tuple("bob")], [_tuple("alice", "provider")]),
]


def _expected_states():
    states, current = [frozenset()], set()
    for deletes, adds in BLOCKS:
        current -= set(deletes)
        current |= set(adds)
        states.append(frozenset(current))
    return states


def test_replay_of_every_truncation_is_a_committed_prefix(tmp_path):
    data = b"".join(render_block(revision, *block) for revision, block in enumerate(BLOCKS, start=1))
    assert len(data) >= 100
    states = _expected_states()
    path = tmp_path / LOG_FILE
    log = TupleLog(path)
    for cut in range(len(data) + 1):
        path.write_bytes(data[:cut])
        replay = log.replay()
        assert replay.tuples == states[replay.revision], cut
        assert replay.committed_size <= cut
        assert replay.clean == (replay.committed_size == cut)
    assert log.replay().revision == len(BLOCKS)


def test_reopening_after_a_torn_append_recovers_the_prefix(tmp_path):
    path = tmp_path / "s"
    with init_store(path) as fresh:
        fresh.put_model(compiled("alice_train").model)
        fresh.write([_tuple("alice")])
        fresh.write([_tuple("bob")])
    log_path = path / LOG_FILE
    data = log_path.read_bytes()
    log_path.write_bytes(data[:-4])
    with open_store(path) as reopened:
        assert reopened.revision == 1
        assert reopened.read() == [_tuple("alice")]
        assert reopened.write([_tuple("carol")]) == 2
    with open_store(path, writable=False) as reader:
        assert reader.read() == [_tuple("alice"), _tuple("carol")]


def test_corrupt_complete_line(tmp_path):
    path = tmp_path / LOG_FILE
    path.write_bytes(b"1 ADD not json\n1 COMMIT\n")
    with pytest.raises(MalformedDocument):
        TupleLog(path).replay()


def test_missing_log_replays_empty(tmp_path):
    replay = TupleLog(tmp_path / LOG_FILE).replay()
    assert (replay.revision, replay.tuples, replay.clean) == (0, frozenset(), True)


def test_failed_append_is_cut_back_off_the_log(store, monkeypatch):
    store.write([_tuple("alice")])
    log_path = store.path / LOG_FILE
    before = log_path.read_bytes()
    real_fsync = os.fsync
    calls = []

    def failing_fsync(fd):
        calls.append(fd)
        if len(calls) == 1:
            raise OSError("disk full")
        real_fsync(fd)

    monkeypatch.setattr("odsc.store.log.os.fsync", failing_fsync)
    with pytest.raises(OSError):
        store.write([_tuple("bob")])
    assert log_path.read_bytes() == before
    assert store.revision == 1
    assert TupleLog(log_path).replay().revision == 1
    assert store.write([_tuple("bob")]) == 2
