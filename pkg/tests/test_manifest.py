from __future__ import annotations

import pytest

from idris_harness.errors import ManifestError
from idris_harness.manifest import read_manifest, record_from_dict, record_to_dict, write_manifest

from conftest import make_record


def _sample_records():
    return [
        make_record("alpha", kinds=("initial", "compiler_fix", "test_fix"), solved=True, loc=7),
        make_record("beta", kinds=("initial", "extraction_fail", "compiler_fix"), solved=False),
        make_record("gamma", kinds=("initial",), solved=True, loc=3),
        make_record("delta", kinds=(), solved=False, error="ToolchainUnavailable: gone"),
    ]


def test_roundtrip_through_file(tmp_path):
    records = _sample_records()
    path = tmp_path / "manifest.jsonl"
    write_manifest(records, path)
    assert read_manifest(path) == records


def test_dict_roundtrip_preserves_everything():
    for record in _sample_records():
        assert record_from_dict(record_to_dict(record)) == record


def test_serialization_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_manifest(_sample_records(), a)
    write_manifest(_sample_records(), b)
    assert a.read_bytes() == b.read_bytes()


def test_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "manifest.jsonl"
    write_manifest(_sample_records()[:2], path)
    with path.open("a", encoding="utf-8") as fh:
        fh.write("{not json\n")
    with pytest.raises(ManifestError) as exc_info:
        read_manifest(path)
    assert exc_info.value.line_number == 3
    assert "line 3" in str(exc_info.value)


def test_missing_manifest(tmp_path):
    with pytest.raises(ManifestError):
        read_manifest(tmp_path / "absent.jsonl")
