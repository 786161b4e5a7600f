"""Materialize candidate code into isolated workspaces and build/test it.

An adapter is the language-specific part: a compile command, a test command,
and a rule for splitting test output into individual failures. Commands are
plain argv templates with ``{dir}``, ``{starter}``, ``{tests}`` and
``{slug}`` placeholders so new toolchains are a config entry, not code.

Every subprocess call carries a hard deadline. A timeout is reported as a
failed outcome with a synthetic diagnostic, never an exception, so the
refinement loop can react to generated code that loops forever.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .corpus import Exercise
from .errors import PathEscape, ToolchainUnavailable

DEFAULT_COMPILE_TIMEOUT_S = 60.0
DEFAULT_TEST_TIMEOUT_S = 60.0

TIMEOUT_DIAGNOSTIC = "TIMEOUT"


@dataclass(frozen=True)
class Workspace:
    """A fresh directory holding one exercise plus one candidate solution."""

    dir: Path
    exercise_slug: str
    candidate_path: str
    tests_path: str


@dataclass(frozen=True)
class CompileOutcome:
    success: bool
    diagnostics: str
    exit_code: int
    duration_ms: float


@dataclass(frozen=True)
class TestOutcome:
    all_passed: bool
    failures: tuple[str, ...]
    raw_output: str
    duration_ms: float


class ToolchainAdapter(Protocol):
    name: str

    def compile(self, ws: Workspace) -> CompileOutcome: ...

    def run_tests(self, ws: Workspace) -> TestOutcome: ...


def materialize(ex: Exercise, candidate: str, workspaces_root: Path | str | None = None) -> Workspace:
    """Write the exercise into a fresh directory with the starter file
    replaced by ``candidate``. Never edits in place: each attempt gets its
    own tree so diagnostics cannot be contaminated by earlier builds."""
    if not candidate:
        raise ValueError("candidate code must be non-empty")
    root = Path(workspaces_root) if workspaces_root else None
    ws_dir = Path(tempfile.mkdtemp(prefix=f"{ex.slug}-", dir=root))
    files: dict[str, str] = {"README.md": ex.statement}
    files.update(ex.extra_files)
    files[ex.tests.path] = ex.tests.text
    files[ex.starter.path] = candidate
    targets = {rel: _confined(ws_dir, rel) for rel, text in files.items()}
    for parent in {t.parent for t in targets.values()}:
        parent.mkdir(parents=True, exist_ok=True)
    for rel, text in files.items():
        with targets[rel].open("w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return Workspace(
        dir=ws_dir,
        exercise_slug=ex.slug,
        candidate_path=ex.starter.path,
        tests_path=ex.tests.path,
    )


def cleanup(ws: Workspace) -> None:
    try:
        # fast path for the flat trees materialize creates
        for entry in os.scandir(ws.dir):
            if entry.is_dir(follow_symlinks=False):
                shutil.rmtree(entry.path, ignore_errors=True)
            else:
                os.unlink(entry.path)
        os.rmdir(ws.dir)
    except OSError:
        shutil.rmtree(ws.dir, ignore_errors=True)


def _confined(ws_dir: Path, rel: str) -> Path:
    # Lexical check: the tree is freshly created from text writes (no
    # symlinks), so ".." traversal is the only escape vector.
    base = os.path.normpath(str(ws_dir))
    target = os.path.normpath(os.path.join(base, rel))
    if target != base and not target.startswith(base + os.sep):
        raise PathEscape(f"exercise path {rel!r} escapes workspace {ws_dir}")
    return Path(target)


def _split_whole(text: str) -> list[str]:
    return [text.strip()] if text.strip() else []


def _split_blocks(text: str) -> list[str]:
    blocks = [b.strip() for b in text.split("\n\n")]
    return [b for b in blocks if b]


def _split_lines(text: str) -> list[str]:
    return [line for line in text.splitlines() if line.strip()]


FAILURE_SPLIT_RULES: dict[str, Callable[[str], list[str]]] = {
    "whole": _split_whole,
    "blocks": _split_blocks,
    "lines": _split_lines,
}


class CommandAdapter:
    """Adapter that shells out to a real compiler and test runner."""

    def __init__(
        self,
        name: str,
        compile_cmd: Sequence[str],
        test_cmd: Sequence[str],
        failure_split: str = "blocks",
        compile_timeout_s: float = DEFAULT_COMPILE_TIMEOUT_S,
        test_timeout_s: float = DEFAULT_TEST_TIMEOUT_S,
    ):
        if failure_split not in FAILURE_SPLIT_RULES:
            raise ValueError(f"unknown failure-split rule {failure_split!r}")
        self.name = name
        self._compile_cmd = list(compile_cmd)
        self._test_cmd = list(test_cmd)
        self._split = FAILURE_SPLIT_RULES[failure_split]
        self._compile_timeout_s = compile_timeout_s
        self._test_timeout_s = test_timeout_s

    def compile(self, ws: Workspace) -> CompileOutcome:
        result = self._run(self._compile_cmd, ws, self._compile_timeout_s)
        if result is None:
            return CompileOutcome(False, TIMEOUT_DIAGNOSTIC, exit_code=-1, duration_ms=self._compile_timeout_s * 1000.0)
        output, exit_code, duration_ms = result
        success = exit_code == 0
        if not success and not output.strip():
            output = f"compile exited with code {exit_code} and no output"
        return CompileOutcome(success, output, exit_code, duration_ms)

    def run_tests(self, ws: Workspace) -> TestOutcome:
        result = self._run(self._test_cmd, ws, self._test_timeout_s)
        if result is None:
            return TestOutcome(
                False,
                failures=(TIMEOUT_DIAGNOSTIC,),
                raw_output=TIMEOUT_DIAGNOSTIC,
                duration_ms=self._test_timeout_s * 1000.0,
            )
        output, exit_code, duration_ms = result
        if exit_code == 0:
            return TestOutcome(True, failures=(), raw_output=output, duration_ms=duration_ms)
        failures = self._split(output)
        if not failures:
            failures = [f"tests exited with code {exit_code} and no output"]
        return TestOutcome(False, failures=tuple(failures), raw_output=output, duration_ms=duration_ms)

    def _run(self, template: Sequence[str], ws: Workspace, timeout_s: float) -> tuple[str, int, float] | None:
        cmd = [
            arg.format(
                dir=str(ws.dir),
                starter=ws.candidate_path,
                tests=ws.tests_path,
                slug=ws.exercise_slug,
            )
            for arg in template
        ]
        start = time.monotonic()
        try:
            proc = subprocess.run(
                cmd,
                cwd=ws.dir,
                capture_output=True,
                text=True,
                timeout=timeout_s,
            )
        except FileNotFoundError as exc:
            raise ToolchainUnavailable(f"adapter {self.name!r}: {exc}") from None
        except subprocess.TimeoutExpired:
            return None
        duration_ms = (time.monotonic() - start) * 1000.0
        parts = [p for p in (proc.stdout, proc.stderr) if p]
        return "\n".join(parts), proc.returncode, duration_ms


# Directives an in-process mock recognizes inside candidate code. Replay
# fixtures script outcomes by embedding these lines in the returned code.
MOCK_COMPILE_FAIL = "-- MOCK:COMPILE_FAIL"
MOCK_TEST_FAIL = "-- MOCK:TEST_FAIL"


class MockToolchain:
    """Deterministic in-process adapter driven by directives in the candidate.

    Lines starting with ``-- MOCK:COMPILE_FAIL <msg>`` make the compile fail
    with those messages as diagnostics; ``-- MOCK:TEST_FAIL <msg>`` lines
    each become one test failure. Code without directives compiles and
    passes. Durations are fixed at zero so runs serialize byte-identically.
    """

    name = "mock"

    def compile(self, ws: Workspace) -> CompileOutcome:
        messages = self._directives(ws, MOCK_COMPILE_FAIL)
        if messages:
            return CompileOutcome(False, "\n".join(messages), exit_code=1, duration_ms=0.0)
        return CompileOutcome(True, "", exit_code=0, duration_ms=0.0)

    def run_tests(self, ws: Workspace) -> TestOutcome:
        messages = self._directives(ws, MOCK_TEST_FAIL)
        if messages:
            return TestOutcome(False, failures=tuple(messages), raw_output="\n".join(messages), duration_ms=0.0)
        return TestOutcome(True, failures=(), raw_output="all tests passed", duration_ms=0.0)

    def _directives(self, ws: Workspace, marker: str) -> list[str]:
        text = (ws.dir / ws.candidate_path).read_text(encoding="utf-8")
        out = []
        for line in text.splitlines():
            stripped = line.strip()
            if stripped.startswith(marker):
                out.append(stripped[len(marker):].strip() or "unspecified failure")
        return out
