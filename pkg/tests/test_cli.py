import json

import pytest
from conftest import CORPUS_DIR, GOLDEN_DIR, corpus_path

from odsc.cli import main
from odsc.policy import analyze_document
from odsc.policy.validation import has_errors

CONSUMERS = (
    '{"user": "user:bob", "relation": "consumer", "object": "asset:ds1"}\n'
    '{"user": "user:carol", "relation": "consumer", "object": "asset:ds1"}\n'
)


@pytest.fixture
def compiled_files(tmp_path):
    model, tuples = tmp_path / "model.fga.json", tmp_path / "tuples.jsonl"
    assert main([
        "compile", str(corpus_path("alice_train")),
        "--out-model", str(model), "--out-tuples", str(tuples),
    ]) == 0
    return model, tuples


@pytest.fixture
def store(tmp_path, compiled_files, capsys):
    """A store holding the alice_train model, its tuple and two consumers."""
    model, tuples = compiled_files
    extra = tmp_path / "consumers.jsonl"
    extra.write_text(CONSUMERS)
    path = tmp_path / "store"
    assert main(["--store", str(path), "write", "--model", str(model), str(tuples)]) == 0
    assert main(["--store", str(path), "write", str(extra)]) == 0
    capsys.readouterr()
    return path


# --- validate ---

def test_validate_conformant_policy(capsys):
    assert main(["validate", str(corpus_path("alice_train"))]) == 0
    assert capsys.readouterr().out == ""


def test_validate_unknown_action(capsys):
    assert main(["validate", str(corpus_path("ods002_unknown_action"))]) == 2
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("ERROR ODS002 /permission/0/action: ")


def test_validate_warning_only(capsys):
    assert main(["validate", str(corpus_path("ods101_missing_profile"))]) == 0
    assert capsys.readouterr().out.startswith("WARNING ODS101: ")


@pytest.mark.parametrize("path", sorted(CORPUS_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_validate_exit_status_over_the_corpus(path, capsys):
    try:
        _, diagnostics = analyze_document(path.read_bytes())
        expected = 2 if has_errors(diagnostics) else 0
    except Exception:
        expected = 2
    assert main(["validate", str(path)]) == expected


def test_validate_machine_format(capsys):
    assert main(["--format", "machine", "validate", str(corpus_path("ods103_monitor_permission"))]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["valid"] is True
    assert [d["code"] for d in record["diagnostics"]] == ["ODS103"]


def test_validate_several_files_prefixes_lines(capsys):
    files = [str(corpus_path("ods101_missing_profile")), str(corpus_path("ods104_unknown_key"))]
    assert main(["validate", *files]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split(": ", 1)[0] for line in lines] == files


def test_validate_unreadable_file(tmp_path):
    assert main(["validate", str(tmp_path / "missing.json")]) == 3


# --- compile ---

def test_compile_matches_golden_files(compiled_files):
    model, tuples = compiled_files
    assert model.read_bytes() == (GOLDEN_DIR / "alice_train.fga.json").read_bytes()
    assert tuples.read_bytes() == (GOLDEN_DIR / "alice_train.tuples.jsonl").read_bytes()


def test_recompile_is_byte_identical(tmp_path, compiled_files):
    model, tuples = compiled_files
    again = tmp_path / "again.fga.json"
    assert main(["compile", str(corpus_path("alice_train")), "--out-model", str(again)]) == 0
    assert again.read_bytes() == model.read_bytes()


def test_compile_prints_the_model_without_out_model(capsys):
    assert main(["compile", str(corpus_path("alice_train"))]) == 0
    assert capsys.readouterr().out == (GOLDEN_DIR / "alice_train.fga.json").read_text()


def test_compile_writes_obligations(tmp_path):
    out = tmp_path / "obligations.jsonl"
    assert main(["compile", str(corpus_path("kill_job_obligation")), "--out-model", str(tmp_path / "m.json"),
                 "--out-obligations", str(out)]) == 0
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["action"] for r in records] == ["ods:Kill_job", "ods:Retention"]


def test_compile_into_a_directory(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["compile", str(corpus_path("alice_train")), "--out-dir", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert sorted(p.name for p in out.iterdir()) == [
        "alice_train.fga.json", "alice_train.obligations.jsonl", "alice_train.tuples.jsonl",
    ]
    assert (out / "alice_train.fga.json").read_bytes() == (GOLDEN_DIR / "alice_train.fga.json").read_bytes()
    assert (out / "alice_train.tuples.jsonl").read_bytes() == (GOLDEN_DIR / "alice_train.tuples.jsonl").read_bytes()
    assert (out / "alice_train.obligations.jsonl").read_bytes() == b""


def test_explicit_paths_win_over_the_directory(tmp_path):
    model = tmp_path / "elsewhere.json"
    assert main(["compile", str(corpus_path("alice_train")), "--out-dir", str(tmp_path / "out"),
                 "--out-model", str(model)]) == 0
    assert model.read_bytes() == (GOLDEN_DIR / "alice_train.fga.json").read_bytes()
    assert not (tmp_path / "out" / "alice_train.fga.json").exists()
    assert (tmp_path / "out" / "alice_train.tuples.jsonl").exists()


def test_conflicting_policies(caplog):
    status = main(["compile", str(corpus_path("train_consumer")), str(corpus_path("alice_train"))])
    assert status == 2
    assert "MergeConflict" in caplog.text
    assert "can_train" in caplog.text


def test_compile_refuses_errors(capsys):
    assert main(["compile", str(corpus_path("ods005_role_assigner"))]) == 2
    assert "ERROR ODS005 /assigner" in capsys.readouterr().err


def test_compile_machine_summary(capsys):
    assert main(["--format", "machine", "compile", str(corpus_path("subscribe_prohibition"))]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["types"] == ["asset", "user"]
    assert record["tuples"] == 1


# --- write / read ---

def test_write_prints_the_revision(tmp_path, compiled_files, capsys):
    model, tuples = compiled_files
    three = tmp_path / "three.jsonl"
    three.write_text(tuples.read_text() + CONSUMERS)
    path = tmp_path / "fresh"
    assert main(["--store", str(path), "write", "--model", str(model), str(three)]) == 0
    assert capsys.readouterr().out.splitlines() == ["model 00000001", "revision 1"]
    assert main(["--store", str(path), "write", str(three)]) == 2


def test_write_needs_something_to_write(tmp_path):
    assert main(["--store", str(tmp_path / "s"), "write"]) == 2


def test_write_then_restart_then_read(store, capsys):
    assert main(["--store", str(store), "read"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [json.loads(line)["user"] for line in lines] == ["user:bob", "user:carol", "user:alice"]
    assert main(["--store", str(store), "read", "--relation", "train_grant"]) == 0
    assert json.loads(capsys.readouterr().out) == {
        "user": "user:alice", "relation": "train_grant", "object": "asset:ds1",
    }


def test_read_machine_format(store, capsys):
    assert main(["--store", str(store), "--format", "machine", "read", "--user", "user:bob"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["revision"] == 2
    assert record["tuples"] == [{"user": "user:bob", "relation": "consumer", "object": "asset:ds1"}]


def test_delete(store, tmp_path, capsys):
    gone = tmp_path / "gone.jsonl"
    gone.write_text(CONSUMERS.splitlines()[0] + "\n")
    assert main(["--store", str(store), "write", "--delete", str(gone)]) == 0
    assert capsys.readouterr().out == "revision 3\n"
    assert main(["--store", str(store), "write", "--delete", str(gone)]) == 2


def test_store_directory_from_the_environment(store, monkeypatch, capsys):
    monkeypatch.setenv("ODS_STORE_DIR", str(store))
    assert main(["check", "--user", "user:alice", "--relation", "can_train", "--object", "asset:ds1"]) == 0


# --- check / expand ---

def _check(store, *extra):
    return main(["--store", str(store), "check", "--relation", "can_train", "--object", "asset:ds1", *extra])


def test_check_allowed(store, capsys):
    assert _check(store, "--user", "user:alice") == 0
    assert capsys.readouterr().out == "allowed\n"


def test_check_denied(store, capsys):
    assert _check(store, "--user", "user:bob") == 1
    assert capsys.readouterr().out == "denied\n"


def test_check_always_zero(store, capsys):
    assert _check(store, "--user", "user:bob", "--exit-policy", "status_always_zero") == 0
    assert capsys.readouterr().out == "denied\n"


def test_check_machine_format(store, capsys):
    assert _check(store, "--user", "user:alice", "--format", "machine") == 0
    record = json.loads(capsys.readouterr().out)
    assert record["allowed"] is True
    assert set(record) >= {"allowed", "nodes_visited", "cycle_detected", "missing_context"}


def test_check_errors_are_not_denials(store):
    assert _check(store, "--user", "not-a-user") == 2
    assert main(["--store", str(store), "check", "--user", "user:alice", "--relation", "can_fly",
                 "--object", "asset:ds1", "--exit-policy", "status_always_zero"]) == 2


def test_check_without_a_store(tmp_path):
    assert _check(tmp_path / "nothing", "--user", "user:alice") == 2


def test_check_contextual_tuples(store, tmp_path, capsys):
    extra = tmp_path / "grant.jsonl"
    extra.write_text('{"user": "user:bob", "relation": "train_grant", "object": "asset:ds1"}\n')
    assert _check(store, "--user", "user:bob", "--contextual-tuples", str(extra)) == 0
    assert main(["--store", str(store), "read", "--user", "user:bob", "--relation", "train_grant"]) == 0
    assert capsys.readouterr().out == "allowed\n"


def test_check_from_model_and_tuple_files(tmp_path, capsys):
    model, tuples = tmp_path / "m.json", tmp_path / "t.jsonl"
    assert main(["compile", str(corpus_path("agreement_retention")),
                 "--out-model", str(model), "--out-tuples", str(tuples)]) == 0
    base = ["check", "--model", str(model), "--tuples", str(tuples),
            "--user", "user:alice", "--relation", "can_use", "--object", "asset:ds2"]
    capsys.readouterr()
    assert main([*base, "--context", "current_time=2025-06-01T00:00:00Z"]) == 0
    assert main(base) == 1
    assert capsys.readouterr().out.splitlines() == ["allowed", "denied (missing context: current_time)"]
    assert main([*base, "--context", "current_time"]) == 2


def test_expand(store, capsys):
    assert main(["--store", str(store), "--format", "machine", "expand",
                 "--relation", "can_train", "--object", "asset:ds1"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["users"] == ["user:alice"]
    assert record["tree"]["kind"] == "relation"
    assert main(["--store", str(store), "expand", "--relation", "consumer", "--object", "asset:ds1"]) == 0
    assert capsys.readouterr().out.splitlines() == [
        "relation asset:ds1#consumer",
        "  direct: user:bob, user:carol",
    ]


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.startswith("odsc ")


def test_unknown_output_format_in_the_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("ODS_OUTPUT_FORMAT", "yaml")
    assert main(["validate", str(corpus_path("alice_train"))]) == 2
