"""Aggregate SolveRecords into solve-rate tables, attempt breakdowns,
error distributions and the size-vs-attempts regression.

All aggregation is pure and order-insensitive; report files are rendered
with canonical ordering so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import SourceCode, count_loc
from .diagnostics import (
    CATEGORY_LABELS,
    ClassifiedError,
    ErrorCategory,
    classify,
    split_diagnostics,
    tally,
)
from .errors import ConfigError, DegenerateInput
from .refinement import SolveRecord

REPORT_SUBDIR = "report"


@dataclass(frozen=True)
class SolveRateRow:
    method_name: str
    solved: int
    delta_vs_baseline: int | None
    percent: int


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    pearson_r: float
    r_squared: float
    n_points: int


@dataclass(frozen=True)
class BreakdownRow:
    exercise_slug: str
    total_attempts: int
    compiler_fixes: int
    test_fixes: int
    solved_by: tuple[str, ...]


def percent_half_up(solved: int, n: int) -> int:
    """Integer percentage with exact half-up rounding on the rational."""
    if n <= 0:
        raise ConfigError("corpus size must be positive")
    return (200 * solved + n) // (2 * n)


def solve_rate(
    records: Sequence[SolveRecord],
    n: int,
    baseline_solved: int | None = None,
    method_name: str | None = None,
) -> SolveRateRow:
    """One solve-rate table row over a single strategy's records."""
    if n <= 0:
        raise ConfigError("corpus size must be positive")
    solved = sum(1 for r in records if r.solved)
    if method_name is None:
        method_name = records[0].strategy.display_name() if records else "(empty)"
    delta = None if baseline_solved is None else solved - baseline_solved
    return SolveRateRow(
        method_name=method_name,
        solved=solved,
        delta_vs_baseline=delta,
        percent=percent_half_up(solved, n),
    )


def attempt_breakdown(records: Sequence[SolveRecord]) -> list[BreakdownRow]:
    """Per-exercise attempt decomposition, most attempts first.

    When several strategies ran the same exercise, the attempt counts come
    from the record with the most attempts (the refinement loop dominates)
    while ``solved_by`` collects every strategy that solved it.
    """
    by_slug: dict[str, list[SolveRecord]] = {}
    for record in records:
        by_slug.setdefault(record.exercise_slug, []).append(record)
    rows = []
    for slug, group in by_slug.items():
        primary = max(group, key=lambda r: (len(r.attempts), r.strategy.display_name()))
        solved_by = tuple(sorted({r.strategy.display_name() for r in group if r.solved}))
        rows.append(
            BreakdownRow(
                exercise_slug=slug,
                total_attempts=len(primary.attempts),
                compiler_fixes=primary.compile_fix_count,
                test_fixes=primary.test_fix_count,
                solved_by=solved_by,
            )
        )
    return sorted(rows, key=lambda r: (-r.total_attempts, r.exercise_slug))


def linear_regression(points: Sequence[tuple[float, float]]) -> RegressionResult:
    """Ordinary least squares through raw moment sums.

    Population covariance and variances are used throughout; the slope and
    correlation are invariant to that choice. Degenerate input (fewer than
    two points, or no variation in x) raises instead of returning NaNs.
    """
    n = len(points)
    if n < 2:
        raise DegenerateInput(f"regression needs at least 2 points, got {n}")
    xs = [float(x) for x, _ in points]
    ys = [float(y) for _, y in points]
    if min(xs) == max(xs):
        raise DegenerateInput("regression needs at least 2 distinct x values")
    sum_x = math.fsum(xs)
    sum_y = math.fsum(ys)
    sum_xx = math.fsum(x * x for x in xs)
    sum_yy = math.fsum(y * y for y in ys)
    sum_xy = math.fsum(x * y for x, y in zip(xs, ys))
    cov = sum_xy / n - (sum_x / n) * (sum_y / n)
    var_x = sum_xx / n - (sum_x / n) ** 2
    var_y = sum_yy / n - (sum_y / n) ** 2
    slope = cov / var_x
    intercept = sum_y / n - slope * (sum_x / n)
    if var_y <= 0.0:
        pearson_r = 0.0  # flat y: correlation undefined, reported as 0
    else:
        pearson_r = cov / math.sqrt(var_x * var_y)
        pearson_r = max(-1.0, min(1.0, pearson_r))
    return RegressionResult(
        slope=slope,
        intercept=intercept,
        pearson_r=pearson_r,
        r_squared=pearson_r * pearson_r,
        n_points=n,
    )


def classify_manifest_errors(records: Iterable[SolveRecord]) -> list[ClassifiedError]:
    """Split and classify every failed-compile diagnostic in the records."""
    out: list[ClassifiedError] = []
    for record in records:
        for attempt in record.attempts:
            if attempt.compile is None or attempt.compile.success:
                continue
            for unit in split_diagnostics(attempt.compile.diagnostics):
                out.append(classify(unit, exercise_slug=record.exercise_slug, attempt_index=attempt.index))
    return out


def error_report(classified: Sequence[ClassifiedError]) -> tuple[str, str]:
    """Render the error distribution as (table text, CSV text).

    Rows are ordered by descending count, then category label. The table
    uses human-readable labels; the CSV uses the category identifiers.
    """
    dist = tally(classified)
    ordered = [
        (category, count)
        for category, count in sorted(dist.counts.items(), key=lambda kv: (-kv[1], CATEGORY_LABELS[kv[0]]))
        if count > 0
    ]
    label_width = max(len(CATEGORY_LABELS[c]) for c in ErrorCategory)
    table_lines = [f"{'Error Type':<{label_width}}  Occurrences"]
    csv_lines = ["category,count"]
    for category, count in ordered:
        table_lines.append(f"{CATEGORY_LABELS[category]:<{label_width}}  {count}")
        csv_lines.append(f"{category.value},{count}")
    table_lines.append(f"{'Total':<{label_width}}  {dist.total}")
    csv_lines.append(f"total,{dist.total}")
    return "\n".join(table_lines) + "\n", "\n".join(csv_lines) + "\n"


def solve_rate_rows(
    records: Sequence[SolveRecord],
    baseline: Sequence[SolveRecord] | None = None,
    n: int | None = None,
) -> list[SolveRateRow]:
    """Group records by strategy and compute one row per strategy.

    The baseline records (when given) define the corpus size and the
    reference count for the delta column, and contribute the first row.
    """
    if not records and not baseline:
        return []  # an empty manifest still renders valid header-only tables
    if n is None:
        n = len(baseline) if baseline else len({r.exercise_slug for r in records})
    if n <= 0:
        raise ConfigError("cannot compute solve rates over an empty corpus")
    rows: list[SolveRateRow] = []
    baseline_solved: int | None = None
    if baseline:
        baseline_solved = sum(1 for r in baseline if r.solved)
        rows.append(solve_rate(baseline, n, method_name=_method_of(baseline)))
    groups: dict[str, list[SolveRecord]] = {}
    for record in records:
        groups.setdefault(record.strategy.display_name(), []).append(record)
    for name in sorted(groups):
        if baseline and name == rows[0].method_name:
            continue  # the baseline manifest already contributed this row
        rows.append(solve_rate(groups[name], n, baseline_solved=baseline_solved, method_name=name))
    return rows


def _method_of(records: Sequence[SolveRecord]) -> str:
    names = {r.strategy.display_name() for r in records}
    if len(names) != 1:
        raise ConfigError(f"expected a single-strategy manifest, found {sorted(names)}")
    return names.pop()


def regression_points(records: Iterable[SolveRecord]) -> list[tuple[float, float]]:
    """(solution LOC, attempts) pairs for every solved record with code."""
    points = []
    for record in records:
        if record.solved and record.final_code is not None:
            loc = count_loc(SourceCode(path="solution.idr", text=record.final_code))
            points.append((float(loc), float(len(record.attempts))))
    return points


def render_solve_rates_csv(rows: Sequence[SolveRateRow]) -> str:
    lines = ["method,solved,delta_vs_baseline,percent"]
    for row in rows:
        delta = "" if row.delta_vs_baseline is None else str(row.delta_vs_baseline)
        lines.append(f"{row.method_name},{row.solved},{delta},{row.percent}")
    return "\n".join(lines) + "\n"


def render_solve_rates_markdown(rows: Sequence[SolveRateRow]) -> str:
    lines = [
        "| Method | Solved | +Solved | % Solved |",
        "| --- | --- | --- | --- |",
    ]
    for row in rows:
        delta = "--" if row.delta_vs_baseline is None else f"{row.delta_vs_baseline:+d}"
        lines.append(f"| {row.method_name} | {row.solved} | {delta} | {row.percent} |")
    return "\n".join(lines) + "\n"


def render_breakdown_csv(rows: Sequence[BreakdownRow]) -> str:
    lines = ["slug,total_attempts,compiler_fixes,test_fixes,solved_by"]
    for row in rows:
        lines.append(
            f"{row.exercise_slug},{row.total_attempts},{row.compiler_fixes},"
            f"{row.test_fixes},{';'.join(row.solved_by)}"
        )
    return "\n".join(lines) + "\n"


def render_regression_json(records: Sequence[SolveRecord]) -> str:
    points = regression_points(records)
    try:
        result = linear_regression(points)
        payload: dict = {
            "slope": result.slope,
            "intercept": result.intercept,
            "pearson_r": result.pearson_r,
            "r_squared": result.r_squared,
            "n_points": result.n_points,
        }
    except DegenerateInput as exc:
        payload = {"error": "degenerate_input", "reason": str(exc), "n_points": len(points)}
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def emit_report(
    records: Sequence[SolveRecord],
    out_dir: Path | str,
    fmt: str = "csv",
    baseline: Sequence[SolveRecord] | None = None,
) -> list[Path]:
    """Write the report files for one run; returns the paths written.

    ``fmt`` picks the solve-rate table rendering (csv, markdown or json);
    the breakdown is always CSV and the regression summary always JSON.
    """
    if fmt not in ("csv", "markdown", "json"):
        raise ConfigError(f"unknown report format {fmt!r}")
    report_dir = Path(out_dir) / REPORT_SUBDIR
    report_dir.mkdir(parents=True, exist_ok=True)
    rows = solve_rate_rows(records, baseline=baseline)
    written = []

    if fmt == "csv":
        path = report_dir / "solve_rates.csv"
        path.write_text(render_solve_rates_csv(rows), encoding="utf-8")
    elif fmt == "markdown":
        path = report_dir / "solve_rates.md"
        path.write_text(render_solve_rates_markdown(rows), encoding="utf-8")
    else:
        path = report_dir / "solve_rates.json"
        payload = [
            {
                "method": row.method_name,
                "solved": row.solved,
                "delta_vs_baseline": row.delta_vs_baseline,
                "percent": row.percent,
            }
            for row in rows
        ]
        path.write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8")
    written.append(path)

    breakdown_path = report_dir / "breakdown.csv"
    breakdown_path.write_text(render_breakdown_csv(attempt_breakdown(records)), encoding="utf-8")
    written.append(breakdown_path)

    regression_path = report_dir / "regression.json"
    regression_path.write_text(render_regression_json(records), encoding="utf-8")
    written.append(regression_path)
    return written
