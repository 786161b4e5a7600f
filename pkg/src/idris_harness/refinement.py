"""Strategy state machine: run one exercise to a SolveRecord.

Four strategies share one engine. The first attempt sends the plain (or
retrieval-augmented) solve request; feedback strategies then re-prompt with
the latest failure evidence until the candidate compiles and passes every
local test, or the iteration budget runs out. The solved gate is identical
for all strategies: final attempt compiled and all tests green.

Attempt labels record what each attempt was:

- ``initial``          first try from the solve prompt
- ``compiler_fix``     retry against compiler diagnostics
- ``test_fix``         retry against failing tests (only after a compile
                       succeeded, so test fixes never precede the first
                       successful compile)
- ``extraction_fail``  the model's answer yielded no usable code; the
                       attempt is consumed, the loop continues from the
                       last attempt that produced outcomes
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import toolchain as tc
from .corpus import Exercise, ExerciseRef, load_exercise
from .errors import CodeExtractionError, ConfigError, HarnessError
from .prompting import (
    FeedbackBundle,
    Prompt,
    build_augmented_query,
    build_baseline_query,
    build_feedback_query,
)
from .provider import Provider, ProviderRequest, extract_code
from .retrieval import DEFAULT_TOP_K, Index, search

log = logging.getLogger(__name__)

DEFAULT_COMPILE_TEST_LOOP_ITERATIONS = 20

FIX_INITIAL = "initial"
FIX_COMPILER = "compiler_fix"
FIX_TEST = "test_fix"
FIX_EXTRACTION = "extraction_fail"

# Sent when the loop must continue but no attempt has produced outcomes yet
# (every response so far failed extraction).
_FORMAT_NOTICE = (
    "The previous response could not be parsed: it was neither the required JSON object "
    "nor a fenced code block. No code was extracted."
)


class StrategyKind(str, Enum):
    BASELINE = "baseline"
    TEST_FEEDBACK = "test_feedback"
    DOC_AUGMENTED = "doc_augmented"
    COMPILE_TEST_LOOP = "compile_test_loop"


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind
    max_iterations: int = 1
    doc_source: str | None = None
    passages: int = DEFAULT_TOP_K

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.kind in (StrategyKind.BASELINE, StrategyKind.DOC_AUGMENTED) and self.max_iterations != 1:
            raise ConfigError(f"{self.kind.value} is single-attempt; max_iterations must be 1")
        if self.kind is StrategyKind.DOC_AUGMENTED and not self.doc_source:
            raise ConfigError("doc_augmented requires a doc_source index reference")

    def display_name(self) -> str:
        if self.kind is StrategyKind.BASELINE:
            return "Baseline"
        if self.kind is StrategyKind.TEST_FEEDBACK:
            return f"TestFeedback(k={self.max_iterations})"
        if self.kind is StrategyKind.DOC_AUGMENTED:
            return f"DocAugmented({self.doc_source})"
        return f"CompileTestLoop(max={self.max_iterations})"


def compile_test_loop_config(max_iterations: int = DEFAULT_COMPILE_TEST_LOOP_ITERATIONS) -> StrategyConfig:
    return StrategyConfig(kind=StrategyKind.COMPILE_TEST_LOOP, max_iterations=max_iterations)


@dataclass(frozen=True)
class Attempt:
    index: int
    prompt_digest: str
    fix_kind: str
    code: str | None = None
    compile: tc.CompileOutcome | None = None
    tests: tc.TestOutcome | None = None

    @property
    def succeeded(self) -> bool:
        return (
            self.compile is not None
            and self.compile.success
            and self.tests is not None
            and self.tests.all_passed
        )

    @property
    def has_outcomes(self) -> bool:
        return self.compile is not None


@dataclass(frozen=True)
class SolveRecord:
    exercise_slug: str
    strategy: StrategyConfig
    attempts: tuple[Attempt, ...]
    solved: bool
    final_code: str | None
    compile_fix_count: int
    test_fix_count: int
    error: str | None = None


@dataclass
class RunContext:
    """Everything a single-exercise run needs besides the exercise itself."""

    provider: Provider
    toolchain: tc.ToolchainAdapter
    model_name: str = "default"
    index: Index | None = None
    workspaces_root: Path | None = None
    retain_workspaces: bool = False
    temperature: float | None = None


def run_baseline(ex: Exercise, ctx: RunContext) -> SolveRecord:
    """Single plain attempt: prompt, extract, compile, test."""
    return _run_strategy(ex, StrategyConfig(kind=StrategyKind.BASELINE), ctx)


def run_test_feedback(ex: Exercise, ctx: RunContext, k: int) -> SolveRecord:
    """Baseline attempt plus failure-fed retries, at most ``k`` attempts.

    Feedback combines compile diagnostics and test failures into one bundle,
    standing in for platform-reported messages.
    """
    return _run_strategy(ex, StrategyConfig(kind=StrategyKind.TEST_FEEDBACK, max_iterations=k), ctx)


def run_doc_augmented(ex: Exercise, ctx: RunContext, doc_source: str = "manual") -> SolveRecord:
    """Single attempt whose prompt carries retrieved reference passages."""
    if ctx.index is None:
        raise ConfigError("doc_augmented run needs an index in the run context")
    return _run_strategy(ex, StrategyConfig(kind=StrategyKind.DOC_AUGMENTED, doc_source=doc_source), ctx)


def run_compile_test_loop(
    ex: Exercise, ctx: RunContext, max_iterations: int = DEFAULT_COMPILE_TEST_LOOP_ITERATIONS
) -> SolveRecord:
    """Compiler-driven loop: retry on compile errors first, then on failing
    tests, stopping immediately once both stages pass or the limit is hit."""
    return _run_strategy(ex, compile_test_loop_config(max_iterations), ctx)


def run_strategy(ex: Exercise, strategy: StrategyConfig, ctx: RunContext) -> SolveRecord:
    return _run_strategy(ex, strategy, ctx)


def _run_strategy(ex: Exercise, strategy: StrategyConfig, ctx: RunContext) -> SolveRecord:
    attempts: list[Attempt] = []
    while len(attempts) < strategy.max_iterations:
        prompt, fix_kind = _next_prompt(ex, strategy, ctx, attempts)
        attempt = _execute_attempt(ex, ctx, prompt, fix_kind, index=len(attempts) + 1)
        attempts.append(attempt)
        if attempt.succeeded:
            break
    return _build_record(ex, strategy, attempts)


def _next_prompt(
    ex: Exercise,
    strategy: StrategyConfig,
    ctx: RunContext,
    attempts: Sequence[Attempt],
) -> tuple[Prompt, str]:
    if not attempts:
        if strategy.kind is StrategyKind.DOC_AUGMENTED:
            assert ctx.index is not None
            hits = search(ctx.index, ex.statement, k=strategy.passages)
            return build_augmented_query(ex, [chunk for chunk, _ in hits]), FIX_INITIAL
        return build_baseline_query(ex), FIX_INITIAL

    latest = _latest_with_outcomes(attempts)
    iteration = len(attempts) + 1
    if latest is None:
        # Nothing but extraction failures so far: remind the model of the
        # required format through the diagnostics channel.
        fb = FeedbackBundle(prior_code="", compile_diagnostics=_FORMAT_NOTICE, iteration=iteration)
        return build_feedback_query(ex, fb), FIX_COMPILER

    assert latest.code is not None and latest.compile is not None
    compile_failed = not latest.compile.success
    test_failures = None
    if latest.tests is not None and not latest.tests.all_passed:
        test_failures = "\n\n".join(latest.tests.failures)

    if strategy.kind is StrategyKind.TEST_FEEDBACK:
        fb = FeedbackBundle(
            prior_code=latest.code,
            compile_diagnostics=latest.compile.diagnostics if compile_failed else None,
            test_failures=test_failures,
            iteration=iteration,
        )
    elif compile_failed:
        fb = FeedbackBundle(
            prior_code=latest.code,
            compile_diagnostics=latest.compile.diagnostics,
            iteration=iteration,
        )
    else:
        fb = FeedbackBundle(prior_code=latest.code, test_failures=test_failures, iteration=iteration)
    fix_kind = FIX_COMPILER if compile_failed else FIX_TEST
    return build_feedback_query(ex, fb), fix_kind


def _latest_with_outcomes(attempts: Sequence[Attempt]) -> Attempt | None:
    for attempt in reversed(attempts):
        if attempt.has_outcomes:
            return attempt
    return None


def _execute_attempt(ex: Exercise, ctx: RunContext, prompt: Prompt, fix_kind: str, index: int) -> Attempt:
    req = ProviderRequest(prompt=prompt, model_name=ctx.model_name, temperature=ctx.temperature)
    raw = ctx.provider.complete(req)
    try:
        code = extract_code(raw)
    except CodeExtractionError:
        return Attempt(index=index, prompt_digest=req.digest, fix_kind=FIX_EXTRACTION)
    ws = tc.materialize(ex, code, workspaces_root=ctx.workspaces_root)
    try:
        compile_out = ctx.toolchain.compile(ws)
        tests_out = ctx.toolchain.run_tests(ws) if compile_out.success else None
    finally:
        if not ctx.retain_workspaces:
            tc.cleanup(ws)
    return Attempt(
        index=index,
        prompt_digest=req.digest,
        fix_kind=fix_kind,
        code=code,
        compile=compile_out,
        tests=tests_out,
    )


def _build_record(ex: Exercise, strategy: StrategyConfig, attempts: list[Attempt]) -> SolveRecord:
    last = attempts[-1] if attempts else None
    solved = bool(last and last.succeeded)
    final_code = next((a.code for a in reversed(attempts) if a.code is not None), None)
    return SolveRecord(
        exercise_slug=ex.slug,
        strategy=strategy,
        attempts=tuple(attempts),
        solved=solved,
        final_code=final_code,
        compile_fix_count=sum(1 for a in attempts if a.fix_kind == FIX_COMPILER),
        test_fix_count=sum(1 for a in attempts if a.fix_kind == FIX_TEST),
    )


def run_suite(
    refs: Sequence[ExerciseRef],
    strategy: StrategyConfig,
    ctx: RunContext,
    parallelism: int = 1,
) -> list[SolveRecord]:
    """Run one strategy over a corpus; one record per exercise, slug order.

    Exercises run concurrently up to ``parallelism`` workers, each loop
    strictly sequential inside. A failing exercise yields an errored record
    and never aborts the rest of the suite.
    """
    if parallelism < 1:
        raise ConfigError("parallelism must be >= 1")

    def one(ref: ExerciseRef) -> SolveRecord:
        try:
            ex = load_exercise(ref)
            record = _run_strategy(ex, strategy, ctx)
            log.info("%s: %s after %d attempt(s)", ref.slug, "solved" if record.solved else "unsolved", len(record.attempts))
            return record
        except HarnessError as exc:
            log.warning("%s: errored: %s", ref.slug, exc)
            return SolveRecord(
                exercise_slug=ref.slug,
                strategy=strategy,
                attempts=(),
                solved=False,
                final_code=None,
                compile_fix_count=0,
                test_fix_count=0,
                error=f"{type(exc).__name__}: {exc}",
            )

    if parallelism == 1:
        records = [one(ref) for ref in refs]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(one, refs))
    return sorted(records, key=lambda r: r.exercise_slug)
