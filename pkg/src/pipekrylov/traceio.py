"""CSV serialization for iteration traces and cost tables.

The trace schema is fixed:

    iter,rnorm_natural,rnorm_true,relerr,nu_used,red_blocking,
    red_overlapped,overlap_tags,breakdown,restarted

Floats are written in shortest round-trip decimal form, booleans as 0/1,
absent values as empty strings, and tag sets as "+"-joined sorted names.
Every writer's output is readable by the matching reader with zero data
loss, and identical inputs serialize to identical bytes.
"""

from __future__ import annotations

import csv
from typing import Optional, Sequence, TextIO, Union

from .perfmodel import IterationCost
from .solvers import IterationTrace, TraceRow

__all__ = [
    "TRACE_COLUMNS",
    "PERFMODEL_COLUMNS",
    "write_trace_csv",
    "read_trace_csv",
    "write_compare_csv",
    "read_compare_csv",
    "write_perfmodel_csv",
    "read_perfmodel_csv",
]

TRACE_COLUMNS = (
    "iter", "rnorm_natural", "rnorm_true", "relerr", "nu_used",
    "red_blocking", "red_overlapped", "overlap_tags", "breakdown", "restarted",
)
PERFMODEL_COLUMNS = ("nodes", "method", "t_calc", "t_red", "t_total")


def _fmt_float(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _fmt_tags(tags: frozenset) -> str:
    return "+".join(sorted(tags))


def _fmt_bool(value: bool) -> str:
    return "1" if value else "0"


def _row_fields(row: TraceRow) -> list[str]:
    return [
        str(row.iter),
        _fmt_float(row.rnorm_natural),
        _fmt_float(row.rnorm_true),
        _fmt_float(row.relerr),
        str(row.nu_used),
        str(row.red_blocking),
        str(row.red_overlapped),
        _fmt_tags(row.overlap_tags),
        _fmt_bool(row.breakdown),
        _fmt_bool(row.restarted),
    ]


def _parse_row(fields: Sequence[str]) -> TraceRow:
    if len(fields) != len(TRACE_COLUMNS):
        raise ValueError(
            f"trace row has {len(fields)} fields, expected {len(TRACE_COLUMNS)}")
    return TraceRow(
        iter=int(fields[0]),
        rnorm_natural=float(fields[1]),
        rnorm_true=None if fields[2] == "" else float(fields[2]),
        relerr=None if fields[3] == "" else float(fields[3]),
        nu_used=int(fields[4]),
        red_blocking=int(fields[5]),
        red_overlapped=int(fields[6]),
        overlap_tags=frozenset(fields[7].split("+")) if fields[7] else frozenset(),
        breakdown=fields[8] == "1",
        restarted=fields[9] == "1",
    )


def _open_for_write(target: Union[str, TextIO]):
    if isinstance(target, str):
        return open(target, "w", encoding="utf-8", newline=""), True
    return target, False


def _write_lines(target: Union[str, TextIO], lines: list[str]) -> None:
    handle, owned = _open_for_write(target)
    try:
        handle.write("\n".join(lines) + "\n")
    finally:
        if owned:
            handle.close()


def _data_rows(path: str) -> list[list[str]]:
    """All CSV rows except blank lines and # comments, header included."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = []
        for fields in csv.reader(handle):
            if not fields:
                continue
            if fields[0].lstrip().startswith("#"):
                continue
            rows.append(fields)
    return rows


def _comment_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as handle:
        return [line.rstrip("\n") for line in handle
                if line.lstrip().startswith("#")]


def write_trace_csv(target: Union[str, TextIO], trace: IterationTrace) -> None:
    lines = [",".join(TRACE_COLUMNS)]
    lines.extend(",".join(_row_fields(row)) for row in trace)
    _write_lines(target, lines)


def read_trace_csv(path: str) -> IterationTrace:
    rows = _data_rows(path)
    if not rows or rows[0] != list(TRACE_COLUMNS):
        raise ValueError(f"{path!r} does not start with the trace header")
    trace = IterationTrace()
    for fields in rows[1:]:
        trace.append(_parse_row(fields))
    return trace


def write_compare_csv(target: Union[str, TextIO],
                      runs: Sequence[tuple[str, IterationTrace]]) -> None:
    """Long-format trace table: a method column plus the trace columns."""
    lines = [",".join(("method",) + TRACE_COLUMNS)]
    for method, trace in runs:
        for row in trace:
            lines.append(",".join([method] + _row_fields(row)))
    _write_lines(target, lines)


def read_compare_csv(path: str) -> list[tuple[str, IterationTrace]]:
    rows = _data_rows(path)
    if not rows or rows[0] != ["method"] + list(TRACE_COLUMNS):
        raise ValueError(f"{path!r} does not start with the comparison header")
    runs: list[tuple[str, IterationTrace]] = []
    for fields in rows[1:]:
        method = fields[0]
        if not runs or runs[-1][0] != method:
            runs.append((method, IterationTrace()))
        runs[-1][1].append(_parse_row(fields[1:]))
    return runs


def write_perfmodel_csv(target: Union[str, TextIO],
                        costs: Sequence[IterationCost],
                        notes: Sequence[str] = ()) -> None:
    """Cost table plus optional report lines appended as # comments."""
    lines = [",".join(PERFMODEL_COLUMNS)]
    for cost in costs:
        lines.append(",".join([
            str(cost.nodes),
            cost.method,
            repr(cost.t_calc),
            repr(cost.t_red),
            repr(cost.t_total),
        ]))
    lines.extend(f"# {note}" for note in notes)
    _write_lines(target, lines)


def read_perfmodel_csv(path: str) -> tuple[list[IterationCost], list[str]]:
    """Returns the cost rows and any # report lines (stripped of the #)."""
    rows = _data_rows(path)
    if not rows or rows[0] != list(PERFMODEL_COLUMNS):
        raise ValueError(f"{path!r} does not start with the cost-table header")
    costs = []
    for fields in rows[1:]:
        if len(fields) != len(PERFMODEL_COLUMNS):
            raise ValueError(
                f"cost row has {len(fields)} fields, expected {len(PERFMODEL_COLUMNS)}")
        nodes, method, calc, red, total = fields
        cost = IterationCost(method=method, nodes=int(nodes),
                             t_calc=float(calc), t_red=float(red))
        if float(total) != cost.t_total:
            raise ValueError(f"inconsistent t_total in row {fields!r}")
        costs.append(cost)
    notes = [line.lstrip()[1:].strip() for line in _comment_lines(path)]
    return costs, notes
