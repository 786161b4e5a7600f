"""Run manifest persistence: JSON lines, one SolveRecord per line.

The manifest is the harness's primary product. Serialization is canonical
(sorted keys, compact separators) so identical runs produce byte-identical
files regardless of worker scheduling.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

from .errors import ManifestError
from .refinement import Attempt, SolveRecord, StrategyConfig, StrategyKind
from .toolchain import CompileOutcome, TestOutcome

MANIFEST_SCHEMA_VERSION = 1


def record_to_dict(record: SolveRecord) -> dict[str, Any]:
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "exercise_slug": record.exercise_slug,
        "strategy": {
            "kind": record.strategy.kind.value,
            "max_iterations": record.strategy.max_iterations,
            "doc_source": record.strategy.doc_source,
            "passages": record.strategy.passages,
        },
        "attempts": [_attempt_to_dict(a) for a in record.attempts],
        "solved": record.solved,
        "final_code": record.final_code,
        "compile_fix_count": record.compile_fix_count,
        "test_fix_count": record.test_fix_count,
        "error": record.error,
    }


def record_from_dict(data: dict[str, Any]) -> SolveRecord:
    strategy = StrategyConfig(
        kind=StrategyKind(data["strategy"]["kind"]),
        max_iterations=data["strategy"]["max_iterations"],
        doc_source=data["strategy"].get("doc_source"),
        passages=data["strategy"].get("passages", 4),
    )
    return SolveRecord(
        exercise_slug=data["exercise_slug"],
        strategy=strategy,
        attempts=tuple(_attempt_from_dict(a) for a in data["attempts"]),
        solved=data["solved"],
        final_code=data.get("final_code"),
        compile_fix_count=data["compile_fix_count"],
        test_fix_count=data["test_fix_count"],
        error=data.get("error"),
    )


def write_manifest(records: Iterable[SolveRecord], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), sort_keys=True, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
    tmp.replace(path)


def read_manifest(path: Path | str) -> list[SolveRecord]:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest {path} does not exist")
    records = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"malformed manifest line {line_no} in {path}: {exc}", line_number=line_no) from None
    return records


def _attempt_to_dict(attempt: Attempt) -> dict[str, Any]:
    out: dict[str, Any] = {
        "index": attempt.index,
        "prompt_digest": attempt.prompt_digest,
        "fix_kind": attempt.fix_kind,
        "code": attempt.code,
        "compile": None,
        "tests": None,
    }
    if attempt.compile is not None:
        out["compile"] = {
            "success": attempt.compile.success,
            "diagnostics": attempt.compile.diagnostics,
            "exit_code": attempt.compile.exit_code,
            "duration_ms": attempt.compile.duration_ms,
        }
    if attempt.tests is not None:
        out["tests"] = {
            "all_passed": attempt.tests.all_passed,
            "failures": list(attempt.tests.failures),
            "raw_output": attempt.tests.raw_output,
            "duration_ms": attempt.tests.duration_ms,
        }
    return out


def _attempt_from_dict(data: dict[str, Any]) -> Attempt:
    compile_out = None
    if data.get("compile") is not None:
        c = data["compile"]
        compile_out = CompileOutcome(
            success=c["success"],
            diagnostics=c["diagnostics"],
            exit_code=c["exit_code"],
            duration_ms=c["duration_ms"],
        )
    tests_out = None
    if data.get("tests") is not None:
        t = data["tests"]
        tests_out = TestOutcome(
            all_passed=t["all_passed"],
            failures=tuple(t["failures"]),
            raw_output=t["raw_output"],
            duration_ms=t["duration_ms"],
        )
    return Attempt(
        index=data["index"],
        prompt_digest=data["prompt_digest"],
        fix_kind=data["fix_kind"],
        code=data.get("code"),
        compile=compile_out,
        tests=tests_out,
    )
