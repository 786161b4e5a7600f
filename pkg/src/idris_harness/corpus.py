"""Discover and load Exercism-style exercise directories.

Expected layout per exercise::

    <root>/<slug>/README.md       problem statement
    <root>/<slug>/src/*.idr       solution (starter) file
    <root>/<slug>/test/**         shipped test program

Starter discovery: the unique ``.idr`` file under ``src/``; failing that,
the unique root-level ``.idr`` whose name contains neither "Test" nor
"Main". Test discovery: the unique ``.idr`` under ``test/`` (or ``tests/``),
preferring ``Main.idr`` when several exist, with a root-level fallback on
files whose names contain "Test" or "Main".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Mapping

from .errors import CorpusError

STATEMENT_FILE = "README.md"

# Directories that never hold exercise sources.
_SKIP_DIRS = {"build", ".git", "__pycache__"}


def _read_text(path: Path) -> str:
    # newline="" keeps CRLF intact so statements round-trip byte for byte
    with path.open(encoding="utf-8", newline="") as fh:
        return fh.read()


@dataclass(frozen=True)
class SourceCode:
    """One exercise file: a root-relative POSIX path plus its full text."""

    path: str
    text: str

    def __post_init__(self) -> None:
        p = PurePosixPath(self.path)
        if p.is_absolute() or ".." in p.parts:
            raise CorpusError(f"source path must be relative, got {self.path!r}")


@dataclass(frozen=True)
class ExerciseRef:
    slug: str
    root: Path
    track: str = "idris"


@dataclass(frozen=True)
class Exercise:
    ref: ExerciseRef
    statement: str
    starter: SourceCode
    tests: SourceCode
    extra_files: Mapping[str, str] = field(default_factory=dict)

    @property
    def slug(self) -> str:
        return self.ref.slug


def scan_corpus(root: Path | str) -> list[ExerciseRef]:
    """List every exercise directory under ``root``, ordered by slug.

    A subdirectory counts as an exercise iff it contains a statement file.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a readable directory")
    refs = []
    for child in sorted(root.iterdir(), key=lambda p: p.name):
        if child.is_dir() and (child / STATEMENT_FILE).is_file():
            refs.append(ExerciseRef(slug=child.name, root=child))
    return refs


def load_exercise(ref: ExerciseRef) -> Exercise:
    """Read one exercise into memory: statement, starter, tests, extras."""
    statement_path = ref.root / STATEMENT_FILE
    if not statement_path.is_file():
        raise CorpusError(f"{ref.slug}: missing statement file {STATEMENT_FILE}")
    statement = _read_text(statement_path)

    starter_rel = _discover_starter(ref)
    tests_rel = _discover_tests(ref, exclude=starter_rel)
    starter = SourceCode(starter_rel, _read_text(ref.root / starter_rel))
    tests = SourceCode(tests_rel, _read_text(ref.root / tests_rel))

    claimed = {STATEMENT_FILE, starter_rel, tests_rel}
    extras: dict[str, str] = {}
    for path in sorted(_walk_files(ref.root)):
        if path in claimed:
            continue
        try:
            extras[path] = _read_text(ref.root / path)
        except UnicodeDecodeError:
            continue  # binary assets are never sent to the model
    return Exercise(ref=ref, statement=statement, starter=starter, tests=tests, extra_files=extras)


def count_loc(code: SourceCode) -> int:
    """Count lines that are neither blank nor comment-only.

    Idris line comments begin with ``--``. Block comments are not special-
    cased; the rule is fixed so size measurements stay reproducible.
    """
    count = 0
    for line in code.text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("--"):
            count += 1
    return count


def _walk_files(root: Path) -> list[str]:
    out: list[str] = []
    for path in root.rglob("*"):
        if not path.is_file():
            continue
        rel = path.relative_to(root)
        if any(part in _SKIP_DIRS or part.startswith(".") for part in rel.parts):
            continue
        out.append(rel.as_posix())
    return out


def _discover_starter(ref: ExerciseRef) -> str:
    src = ref.root / "src"
    if src.is_dir():
        candidates = sorted(p.name for p in src.glob("*.idr"))
        if len(candidates) == 1:
            return f"src/{candidates[0]}"
        if len(candidates) > 1:
            raise CorpusError(f"{ref.slug}: ambiguous starter, multiple .idr files under src/")
    candidates = sorted(
        p.name
        for p in ref.root.glob("*.idr")
        if "Test" not in p.name and "Main" not in p.name
    )
    if len(candidates) == 1:
        return candidates[0]
    role = "ambiguous" if candidates else "missing"
    raise CorpusError(f"{ref.slug}: {role} starter (solution) file")


def _discover_tests(ref: ExerciseRef, exclude: str) -> str:
    for dirname in ("test", "tests"):
        test_dir = ref.root / dirname
        if not test_dir.is_dir():
            continue
        found = sorted(p.relative_to(ref.root).as_posix() for p in test_dir.rglob("*.idr"))
        if len(found) == 1:
            return found[0]
        mains = [p for p in found if PurePosixPath(p).name == "Main.idr"]
        if len(mains) == 1:
            return mains[0]
        if found:
            raise CorpusError(f"{ref.slug}: ambiguous test file under {dirname}/")
    candidates = sorted(
        p.name
        for p in ref.root.glob("*.idr")
        if ("Test" in p.name or "Main" in p.name) and p.name != exclude
    )
    if len(candidates) == 1:
        return candidates[0]
    raise CorpusError(f"{ref.slug}: missing test file")
