from __future__ import annotations

import json
import threading
from pathlib import Path

import pytest

from idris_harness.corpus import Exercise, ExerciseRef, load_exercise, scan_corpus
from idris_harness.provider import ProviderRequest, RawResponse, wrap_code
from idris_harness.refinement import (
    Attempt,
    SolveRecord,
    StrategyConfig,
    compile_test_loop_config,
)
from idris_harness.toolchain import (
    MOCK_COMPILE_FAIL,
    MOCK_TEST_FAIL,
    CompileOutcome,
    MockToolchain,
    TestOutcome,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

BOB_FINAL_SOLUTION = (FIXTURES / "solutions" / "Bob.idr").read_text(encoding="utf-8")


def good_code(slug: str = "ex") -> str:
    """Candidate the mock toolchain compiles and passes."""
    return f"module {_module_name(slug)}\n\nexport\nanswer : Nat\nanswer = 42\n"


def compile_fail_code(slug: str = "ex", message: str = "Error: Undefined name helper.") -> str:
    return f"module {_module_name(slug)}\n{MOCK_COMPILE_FAIL} {message}\n"


def failing_tests_code(slug: str = "ex", *messages: str) -> str:
    messages = messages or ("FAIL sample: expected 1, got 2",)
    lines = "\n".join(f"{MOCK_TEST_FAIL} {m}" for m in messages)
    return f"module {_module_name(slug)}\n{lines}\n"


def _module_name(slug: str) -> str:
    return "".join(part.capitalize() for part in slug.replace("-", "_").split("_")) or "Ex"


def make_exercise_dir(
    root: Path,
    slug: str,
    statement: str | None = None,
    starter: str | None = None,
    tests: str | None = None,
    extra: dict[str, str] | None = None,
) -> Path:
    """Write one stub exercise in the standard layout; returns its directory."""
    module = _module_name(slug)
    ex_dir = root / slug
    (ex_dir / "src").mkdir(parents=True)
    (ex_dir / "test").mkdir(parents=True)
    (ex_dir / "README.md").write_text(
        statement or f"# {slug}\n\nImplement the {slug} exercise.\n", encoding="utf-8"
    )
    (ex_dir / "src" / f"{module}.idr").write_text(
        starter or f"module {module}\n\nexport\nanswer : Nat\nanswer = ?answer_rhs\n",
        encoding="utf-8",
    )
    (ex_dir / "test" / "Main.idr").write_text(
        tests or f"module Main\n\nimport {module}\n\nmain : IO ()\nmain = putStrLn (show answer)\n",
        encoding="utf-8",
    )
    for rel, text in (extra or {}).items():
        target = ex_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    return ex_dir


def make_corpus(root: Path, slugs: list[str]) -> Path:
    corpus_root = root / "corpus"
    corpus_root.mkdir(parents=True, exist_ok=True)
    for slug in slugs:
        make_exercise_dir(corpus_root, slug)
    return corpus_root


class ScriptedProvider:
    """Provider returning per-exercise response sequences in call order.

    The last response repeats once a sequence is exhausted. Every prompt
    seen is retained so tests can assert on feedback content.
    """

    provider_id = "scripted"

    def __init__(self, scripts: dict[str, list[str]], default: list[str] | None = None):
        self._scripts = scripts
        self._default = default
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()
        self.seen: list[ProviderRequest] = []

    def complete(self, req: ProviderRequest) -> RawResponse:
        slug = req.prompt.exercise_slug
        with self._lock:
            self.seen.append(req)
            n = self._counts.get(slug, 0)
            self._counts[slug] = n + 1
        script = self._scripts.get(slug, self._default)
        if script is None:
            raise AssertionError(f"no script for exercise {slug!r}")
        text = script[min(n, len(script) - 1)]
        return RawResponse(text=text, provider_id=self.provider_id, latency_ms=0.0)


def write_replay_fixture(path: Path, entries: dict[str, str]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for digest, response in entries.items():
            fh.write(json.dumps({"digest": digest, "response": response}) + "\n")
    return path


def wrapped(code: str) -> str:
    return wrap_code(code)


def make_record(
    slug: str,
    kinds: tuple[str, ...] = ("initial",),
    solved: bool = True,
    loc: int = 5,
    strategy: StrategyConfig | None = None,
    diagnostics: str = "Error: Undefined name helper.",
    error: str | None = None,
) -> SolveRecord:
    """Fabricate a SolveRecord with the given attempt fix kinds.

    The last attempt succeeds iff ``solved``; earlier attempts carry a
    failed compile with ``diagnostics``. ``loc`` controls the number of
    code lines in the final solution.
    """
    strategy = strategy or compile_test_loop_config()
    attempts: list[Attempt] = []
    final_code = "\n".join(f"line{j} = {j}" for j in range(loc)) or None
    for i, kind in enumerate(kinds, start=1):
        if kind == "extraction_fail":
            attempts.append(Attempt(index=i, prompt_digest=f"{slug}-d{i}", fix_kind=kind))
            continue
        last = i == len(kinds)
        if last and solved:
            compile_out = CompileOutcome(True, "", 0, 0.0)
            tests_out = TestOutcome(True, (), "all tests passed", 0.0)
        else:
            compile_out = CompileOutcome(False, diagnostics, 1, 0.0)
            tests_out = None
        attempts.append(
            Attempt(
                index=i,
                prompt_digest=f"{slug}-d{i}",
                fix_kind=kind,
                code=final_code if last else f"-- draft {i}",
                compile=compile_out,
                tests=tests_out,
            )
        )
    has_code = any(k != "extraction_fail" for k in kinds)
    return SolveRecord(
        exercise_slug=slug,
        strategy=strategy,
        attempts=tuple(attempts),
        solved=solved and not error,
        final_code=final_code if has_code else None,
        compile_fix_count=sum(1 for k in kinds if k == "compiler_fix"),
        test_fix_count=sum(1 for k in kinds if k == "test_fix"),
        error=error,
    )


@pytest.fixture
def bob_ref() -> ExerciseRef:
    return scan_corpus(FIXTURES / "corpus")[0]


@pytest.fixture
def bob_exercise(bob_ref) -> Exercise:
    return load_exercise(bob_ref)


@pytest.fixture
def mock_toolchain() -> MockToolchain:
    return MockToolchain()
