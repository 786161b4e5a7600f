"""Build the textual queries sent to the model.

Three prompt shapes exist: the plain solve request, the retry request that
carries failure feedback, and the retrieval-augmented solve request. All of
them end with the same response-format instruction so answers can be parsed
uniformly, and section headers are fixed uppercase sentinel lines so tests
can assert structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .corpus import Exercise
    from .retrieval import Chunk

RESPONSE_FORMAT_INSTRUCTION = (
    "Respond with a single JSON object containing exactly one key, \"code\", whose value is "
    "the complete text of the solution file. Do not include any other text."
)

COMPILER_ERRORS_HEADER = "COMPILER ERRORS"
FAILING_TESTS_HEADER = "FAILING TESTS"
REFERENCE_MATERIAL_HEADER = "REFERENCE MATERIAL"
EMPTY_REFERENCE_MARKER = f"{REFERENCE_MATERIAL_HEADER}: (none available)"

_TASK_FRAMING = (
    "You are solving a programming exercise in Idris, a dependently typed functional "
    "language. Write a solution that compiles with the Idris compiler and passes the "
    "exercise's test suite."
)

_REVISE_INSTRUCTION = (
    "Please revise the code specifically to address the reported compilation issues "
    "and failing tests shown above. Return the complete corrected file, not a diff."
)


@dataclass(frozen=True)
class Prompt:
    text: str
    kind: str  # "baseline" | "feedback" | "augmented"
    exercise_slug: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("prompt text must be non-empty")
        if not self.text.endswith(RESPONSE_FORMAT_INSTRUCTION):
            raise ValueError("prompt must end with the response-format instruction")


@dataclass(frozen=True)
class FeedbackBundle:
    """Failure evidence from one attempt, fed into the next query."""

    prior_code: str
    compile_diagnostics: str | None = None
    test_failures: str | None = None
    iteration: int = 1

    def __post_init__(self) -> None:
        if self.compile_diagnostics is None and self.test_failures is None:
            raise ValueError("feedback needs compile diagnostics or test failures")
        if self.iteration < 1:
            raise ValueError("iteration must be >= 1")


def build_baseline_query(ex: Exercise) -> Prompt:
    """Plain solve request: framing, statement, starter code, format instruction."""
    return Prompt(text=_render_solve(ex, reference_block=None), kind="baseline", exercise_slug=ex.slug)


def build_augmented_query(ex: Exercise, passages: Sequence[Chunk]) -> Prompt:
    """Solve request with retrieved reference passages ahead of the statement.

    With no passages the text degenerates to the baseline prompt plus a
    single marker line, so the two stay byte-comparable.
    """
    if passages:
        lines = [REFERENCE_MATERIAL_HEADER]
        for rank, chunk in enumerate(passages, start=1):
            lines.append(f"[{rank}] {chunk.text}")
        block = "\n\n".join(lines) + "\n\n"
    else:
        block = EMPTY_REFERENCE_MARKER + "\n"
    return Prompt(text=_render_solve(ex, reference_block=block), kind="augmented", exercise_slug=ex.slug)


def build_feedback_query(ex: Exercise, fb: FeedbackBundle) -> Prompt:
    """Retry request carrying the prior code and its failure evidence.

    Section order is fixed: prior code, compiler errors, failing tests.
    """
    parts = [
        f"Your previous solution to the Idris exercise \"{ex.slug}\" did not pass "
        f"(refinement round {fb.iteration}).",
        f"PREVIOUS CODE:\n{fb.prior_code}",
    ]
    if fb.compile_diagnostics is not None:
        parts.append(f"{COMPILER_ERRORS_HEADER}:\n{fb.compile_diagnostics}")
    if fb.test_failures is not None:
        parts.append(f"{FAILING_TESTS_HEADER}:\n{fb.test_failures}")
    parts.append(_REVISE_INSTRUCTION)
    parts.append(RESPONSE_FORMAT_INSTRUCTION)
    return Prompt(text="\n\n".join(parts), kind="feedback", exercise_slug=ex.slug)


def _render_solve(ex: Exercise, reference_block: str | None) -> str:
    ref = reference_block or ""
    return (
        f"{_TASK_FRAMING}\n"
        f"\n"
        f"{ref}"
        f"PROBLEM STATEMENT:\n"
        f"{ex.statement}\n"
        f"\n"
        f"STARTER CODE ({ex.starter.path}):\n"
        f"{ex.starter.text}\n"
        f"\n"
        f"{RESPONSE_FORMAT_INSTRUCTION}"
    )
