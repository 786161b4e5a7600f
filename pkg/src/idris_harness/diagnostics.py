"""Parse, classify and summarize Idris compiler diagnostics.

Raw compiler output is first segmented into per-error units, then each unit
is assigned exactly one category from a closed eleven-entry taxonomy by the
first matching pattern in a fixed priority order (specific phrases before
generic ones, so a unit carrying both "Expected 'else'" and a generic parse
header lands in the more specific bucket). Classification is deterministic
by construction; no model is involved.

The same categories feed the error-avoidance manual: a document of common
pitfalls, observed frequencies, sample diagnostics and curated guidelines
that can be indexed for retrieval-augmented prompting.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence


class ErrorCategory(Enum):
    UNDEFINED_NAME = "UndefinedName"
    AMBIGUOUS_ELABORATION = "AmbiguousElaboration"
    OTHER_NON_COMPILER = "OtherNonCompiler"
    PARSE_SYNTAX_GENERAL = "ParseSyntaxGeneral"
    PRIVACY_VISIBILITY = "PrivacyVisibility"
    EXPECTED_ELSE_PARSE = "ExpectedElseParse"
    MISSING_MODULE_IMPORT = "MissingModuleImport"
    TYPE_MISMATCH_UNIFICATION = "TypeMismatchUnification"
    UNKNOWN_OPERATOR = "UnknownOperator"
    ENTRYPOINT_MISSING = "EntrypointMissing"
    TOTALITY_TERMINATION = "TotalityTermination"


CATEGORY_LABELS: dict[ErrorCategory, str] = {
    ErrorCategory.UNDEFINED_NAME: "Undefined name",
    ErrorCategory.AMBIGUOUS_ELABORATION: "Ambiguous elaboration",
    ErrorCategory.OTHER_NON_COMPILER: "Other / non-compiler errors",
    ErrorCategory.PARSE_SYNTAX_GENERAL: "Parse / syntax error (general)",
    ErrorCategory.PRIVACY_VISIBILITY: "Privacy / visibility (not exported / private)",
    ErrorCategory.EXPECTED_ELSE_PARSE: "Expected `else' parse error",
    ErrorCategory.MISSING_MODULE_IMPORT: "Missing module / import not found",
    ErrorCategory.TYPE_MISMATCH_UNIFICATION: "Type mismatch / unification error",
    ErrorCategory.UNKNOWN_OPERATOR: "Unknown operator",
    ErrorCategory.ENTRYPOINT_MISSING: "Entrypoint missing (Main not found)",
    ErrorCategory.TOTALITY_TERMINATION: "Totality / termination error",
}

CATEGORY_DESCRIPTIONS: dict[ErrorCategory, str] = {
    ErrorCategory.UNDEFINED_NAME: "A referenced function, variable or constructor is not in scope.",
    ErrorCategory.AMBIGUOUS_ELABORATION: "The elaborator cannot pick a unique meaning for an overloaded name or interface use.",
    ErrorCategory.OTHER_NON_COMPILER: "Platform-level messages and execution artifacts that are not compiler diagnostics.",
    ErrorCategory.PARSE_SYNTAX_GENERAL: "The source text does not parse as Idris.",
    ErrorCategory.PRIVACY_VISIBILITY: "A definition is private or not exported from its module.",
    ErrorCategory.EXPECTED_ELSE_PARSE: "An `if` expression is missing its `else` branch; Idris conditionals are total expressions.",
    ErrorCategory.MISSING_MODULE_IMPORT: "An imported module does not exist or is not installed.",
    ErrorCategory.TYPE_MISMATCH_UNIFICATION: "Two types that must match cannot be unified.",
    ErrorCategory.UNKNOWN_OPERATOR: "An operator token has no fixity declaration or definition.",
    ErrorCategory.ENTRYPOINT_MISSING: "No `main` entry point was found for an executable build.",
    ErrorCategory.TOTALITY_TERMINATION: "A function cannot be shown total: possibly non-terminating or non-covering.",
}

# How to stay out of each bucket. Shipped statically so manual generation
# stays deterministic and offline.
CATEGORY_GUIDELINES: dict[ErrorCategory, str] = {
    ErrorCategory.UNDEFINED_NAME: (
        "Define every helper before use, check spelling against the standard library, and "
        "import the module that provides each library function (e.g. Data.String for trim)."
    ),
    ErrorCategory.AMBIGUOUS_ELABORATION: (
        "Qualify overloaded names (Prelude.length vs List.length), add type annotations on "
        "ambiguous expressions, and avoid reusing standard-library names for local definitions."
    ),
    ErrorCategory.OTHER_NON_COMPILER: (
        "These are not fixable in source; rerun the build and inspect the environment or "
        "platform output instead of editing code."
    ),
    ErrorCategory.PARSE_SYNTAX_GENERAL: (
        "Keep indentation consistent inside do blocks and where clauses, close every bracket, "
        "and terminate let bindings with `in` when used in expressions."
    ),
    ErrorCategory.PRIVACY_VISIBILITY: (
        "Mark definitions used by tests with `export` (or `public export` when their bodies "
        "must reduce at type level), and keep module names matching file paths."
    ),
    ErrorCategory.EXPECTED_ELSE_PARSE: (
        "Every `if` needs an `else`: write complete `if c then x else y` expressions, or use "
        "guards / pattern matching when a branch has nothing to return."
    ),
    ErrorCategory.MISSING_MODULE_IMPORT: (
        "Import only modules that exist in base or the exercise package; prefer Prelude "
        "functions over external libraries that are not installed."
    ),
    ErrorCategory.TYPE_MISMATCH_UNIFICATION: (
        "Read the expected vs actual types in the message, add explicit conversions "
        "(cast, fromInteger, pack/unpack), and annotate intermediate values."
    ),
    ErrorCategory.UNKNOWN_OPERATOR: (
        "Use only operators defined in scope; declare fixity for custom operators or replace "
        "them with named functions."
    ),
    ErrorCategory.ENTRYPOINT_MISSING: (
        "Executable builds need `main : IO ()` in module Main; keep the test runner's Main "
        "module intact and put solution code in its own module."
    ),
    ErrorCategory.TOTALITY_TERMINATION: (
        "Recurse on structurally smaller arguments, cover every constructor in pattern "
        "matches, and avoid `partial` helpers in total contexts."
    ),
}


@dataclass(frozen=True)
class ClassifiedError:
    category: ErrorCategory
    excerpt: str
    exercise_slug: str = ""
    attempt_index: int = 0


@dataclass(frozen=True)
class ErrorDistribution:
    counts: Mapping[ErrorCategory, int]
    total: int


# Priority-ordered classification rules; first match wins.
_RULES: tuple[tuple[ErrorCategory, re.Pattern[str]], ...] = (
    (
        ErrorCategory.ENTRYPOINT_MISSING,
        re.compile(r"entry ?point|no main function|main function not found|\bmain\b[^\n]{0,40}\bnot found\b", re.IGNORECASE),
    ),
    (
        ErrorCategory.TOTALITY_TERMINATION,
        re.compile(r"is not total|totality|possibly not terminating|not covering|missing cases", re.IGNORECASE),
    ),
    (
        ErrorCategory.EXPECTED_ELSE_PARSE,
        re.compile(r"expected\s+[`']else'?", re.IGNORECASE),
    ),
    (
        ErrorCategory.MISSING_MODULE_IMPORT,
        re.compile(r"module\s+\S+\s+not\s+found|can'?t find import|cannot find import|import\s+\S+\s+not\s+found", re.IGNORECASE),
    ),
    (
        ErrorCategory.PRIVACY_VISIBILITY,
        re.compile(r"is private|not exported|is not visible|no such public|visibility", re.IGNORECASE),
    ),
    (
        ErrorCategory.UNKNOWN_OPERATOR,
        re.compile(r"unknown operator", re.IGNORECASE),
    ),
    (
        ErrorCategory.UNDEFINED_NAME,
        re.compile(r"undefined name|out of scope|no such variable", re.IGNORECASE),
    ),
    (
        ErrorCategory.AMBIGUOUS_ELABORATION,
        re.compile(r"ambiguous elaboration|ambiguous name", re.IGNORECASE),
    ),
    (
        ErrorCategory.TYPE_MISMATCH_UNIFICATION,
        re.compile(r"mismatch between|can'?t unify|when unifying|unification|type mismatch", re.IGNORECASE),
    ),
    (
        ErrorCategory.PARSE_SYNTAX_GENERAL,
        re.compile(
            r"couldn'?t parse|parse error|syntax error|bracket is not properly closed|"
            r"lexer error|unexpected token|expected\b",
            re.IGNORECASE,
        ),
    ),
)

_ERROR_HEADER = re.compile(r"^\s*Error\s*:")
_LOCATION_HEADER = re.compile(r"^\s*\S+:\d+:\d+")


def split_diagnostics(raw: str) -> list[str]:
    """Segment raw compiler output into one unit per error.

    A unit starts at each "Error:" line. A bare file:line:col header starts
    a new unit only once the current unit already carries a complete error
    (header plus location), which keeps an error's own source excerpt
    attached to it. Output with no recognizable header at all becomes a
    single residue unit.
    """
    if not raw.strip():
        return []
    units: list[list[str]] = []
    current: list[str] = []

    def is_loc(line: str) -> bool:
        return bool(_LOCATION_HEADER.match(line)) and not _ERROR_HEADER.match(line)

    def flush() -> None:
        if any(line.strip() for line in current):
            units.append(current.copy())
        current.clear()

    for line in raw.splitlines():
        if _ERROR_HEADER.match(line):
            if any(_ERROR_HEADER.match(prev) for prev in current):
                flush()
        elif is_loc(line):
            if any(is_loc(prev) for prev in current):
                flush()
        current.append(line)
    flush()
    return ["\n".join(lines).strip() for lines in units]


def classify(unit: str, exercise_slug: str = "", attempt_index: int = 0) -> ClassifiedError:
    """Assign exactly one taxonomy category to a diagnostic unit."""
    for category, pattern in _RULES:
        match = pattern.search(unit)
        if match:
            excerpt = _line_of(unit, match.start())
            return ClassifiedError(category, excerpt, exercise_slug, attempt_index)
    first_line = next((line.strip() for line in unit.splitlines() if line.strip()), "")
    return ClassifiedError(ErrorCategory.OTHER_NON_COMPILER, first_line, exercise_slug, attempt_index)


def tally(errors: Iterable[ClassifiedError]) -> ErrorDistribution:
    """Count classified errors per category; zero-count categories stay present."""
    counter = Counter(err.category for err in errors)
    counts = {category: counter.get(category, 0) for category in ErrorCategory}
    return ErrorDistribution(counts=counts, total=sum(counts.values()))


def distribution_csv(dist: ErrorDistribution) -> str:
    """CSV rendering with ``category,count`` columns, ordered like the manual.

    Zero-count categories are omitted so an empty distribution renders as
    header plus total only.
    """
    lines = ["category,count"]
    for category, count in _by_frequency(dist):
        if count > 0:
            lines.append(f"{category.value},{count}")
    lines.append(f"total,{dist.total}")
    return "\n".join(lines) + "\n"


def generate_manual(
    dist: ErrorDistribution,
    samples: Mapping[ErrorCategory, Sequence[str]] | None = None,
    max_samples: int = 3,
) -> str:
    """Render the error-avoidance manual as Markdown.

    One section per category that actually occurred, most frequent first,
    carrying its description, frequency, sample diagnostics and guideline.
    """
    samples = samples or {}
    out = [
        "# Idris error-avoidance manual",
        "",
        "Common pitfalls observed while compiling generated Idris code, with",
        "guidance on how to avoid each one. Categories are ordered by how",
        f"often they occurred ({dist.total} diagnostics in total).",
        "",
    ]
    for category, count in _by_frequency(dist):
        if count == 0:
            continue
        out.append(f"## {CATEGORY_LABELS[category]}")
        out.append("")
        out.append(CATEGORY_DESCRIPTIONS[category])
        out.append("")
        out.append(f"- Occurrences: {count}")
        out.append(f"- How to avoid it: {CATEGORY_GUIDELINES[category]}")
        excerpts = list(samples.get(category, ()))[:max_samples]
        if excerpts:
            out.append("- Examples:")
            for excerpt in excerpts:
                out.append("")
                out.append("  ```")
                for line in excerpt.splitlines():
                    out.append(f"  {line}")
                out.append("  ```")
        out.append("")
    return "\n".join(out)


def _by_frequency(dist: ErrorDistribution) -> list[tuple[ErrorCategory, int]]:
    return sorted(dist.counts.items(), key=lambda kv: (-kv[1], CATEGORY_LABELS[kv[0]]))


def _line_of(text: str, offset: int) -> str:
    start = text.rfind("\n", 0, offset) + 1
    end = text.find("\n", offset)
    if end == -1:
        end = len(text)
    return text[start:end].strip()
