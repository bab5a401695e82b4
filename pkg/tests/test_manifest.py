"""Resumable run-state manifest: creation, resume contract, chunk hashing."""

import json

import pytest

from rmt_noise.errors import ResumeMismatchError, ValidationError
from rmt_noise.manifest import (
    CHUNK_DIR,
    MANIFEST_NAME,
    RunManifest,
    create_or_resume,
    write_if_changed,
)

PLAN = ("n64:0-10", "n64:10-20")


def fresh(tmp_path, **kw):
    args = dict(root=tmp_path, command="sweep", config_hash="abc123",
                master_seed=9, planned=PLAN, resume=False)
    args.update(kw)
    return create_or_resume(**args)


# --- write_if_changed -----------------------------------------------------------


def test_write_if_changed_skips_identical_content(tmp_path):
    p = tmp_path / "file.txt"
    assert write_if_changed(p, "hello\n") is True
    before = p.stat().st_mtime_ns
    assert write_if_changed(p, "hello\n") is False
    assert p.stat().st_mtime_ns == before
    assert write_if_changed(p, "changed\n") is True
    assert p.read_text() == "changed\n"


# --- creation and completion ------------------------------------------------------


def test_create_writes_manifest(tmp_path):
    man = fresh(tmp_path)
    assert man.path == tmp_path / MANIFEST_NAME
    assert man.path.exists()
    assert man.pending() == list(PLAN)
    assert not man.complete()
    obj = json.loads(man.path.read_text())
    assert obj["artifact"] == "run-manifest"
    assert obj["config"] == "abc123"
    assert obj["planned"] == list(PLAN)


def test_record_chunk_and_verify(tmp_path):
    man = fresh(tmp_path)
    man.record_chunk(PLAN[0], "chunk0.jsonl", "line1\nline2\n", count=2)
    assert man.verified_complete(PLAN[0])
    assert not man.verified_complete(PLAN[1])
    assert man.pending() == [PLAN[1]]
    chunk = tmp_path / CHUNK_DIR / "chunk0.jsonl"
    assert chunk.read_text() == "line1\nline2\n"
    assert man.chunk_path(PLAN[0]) == chunk
    man.record_chunk(PLAN[1], "chunk1.jsonl", "line3\n", count=1)
    assert man.complete()


def test_verified_complete_detects_tampering(tmp_path):
    man = fresh(tmp_path)
    man.record_chunk(PLAN[0], "chunk0.jsonl", "payload\n", count=1)
    chunk = tmp_path / CHUNK_DIR / "chunk0.jsonl"
    chunk.write_text("tampered\n")
    assert not man.verified_complete(PLAN[0])
    assert PLAN[0] in man.pending()
    chunk.unlink()
    assert not man.verified_complete(PLAN[0])


def test_record_chunk_rejects_unplanned_batch(tmp_path):
    man = fresh(tmp_path)
    with pytest.raises(ValidationError):
        man.record_chunk("n999:0-1", "x.jsonl", "", count=0)
    with pytest.raises(ValidationError):
        man.chunk_path("n999:0-1")


# --- resume contract -----------------------------------------------------------------


def test_resume_partial_requires_flag(tmp_path):
    man = fresh(tmp_path)
    man.record_chunk(PLAN[0], "chunk0.jsonl", "a\n", count=1)
    with pytest.raises(ResumeMismatchError) as err:
        fresh(tmp_path, resume=False)
    assert "--resume" in str(err.value)
    back = fresh(tmp_path, resume=True)
    assert back.pending() == [PLAN[1]]
    assert back.verified_complete(PLAN[0])


def test_finished_run_reopens_without_flag(tmp_path):
    man = fresh(tmp_path)
    for key, name in zip(PLAN, ("c0.jsonl", "c1.jsonl")):
        man.record_chunk(key, name, f"{key}\n", count=1)
    back = fresh(tmp_path, resume=False)
    assert back.complete()


@pytest.mark.parametrize(
    "change",
    [dict(command="variance"), dict(config_hash="000000"),
     dict(master_seed=10), dict(planned=("n64:0-10",))],
)
def test_mismatched_invocation_rejected(tmp_path, change):
    fresh(tmp_path)
    with pytest.raises(ResumeMismatchError):
        fresh(tmp_path, resume=True, **change)


def test_foreign_manifest_rejected(tmp_path):
    (tmp_path / MANIFEST_NAME).write_text(json.dumps({"artifact": "other"}))
    with pytest.raises(ResumeMismatchError):
        fresh(tmp_path)


def test_manifest_save_is_deterministic(tmp_path):
    man = fresh(tmp_path)
    man.record_chunk(PLAN[0], "c0.jsonl", "x\n", count=1)
    first = man.path.read_text()
    man.save()
    assert man.path.read_text() == first
