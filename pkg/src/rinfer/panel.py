"""Unit-by-day outcome panels, adoption times and analysis windows.

Periods are 1-based integers; period 1 is the panel's ``start`` date and each
period is one calendar day.
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Callable, Iterable, TextIO, Union

import numpy as np

__all__ = [
    "PanelSchema",
    "PanelDataset",
    "AdoptionTime",
    "WindowView",
    "UnitAverages",
    "PanelError",
    "load_panel",
    "window",
    "unit_averages",
]


class PanelError(ValueError):
    """Raised for malformed input rows or out-of-range windows."""


@dataclass(frozen=True)
class PanelSchema:
    unit: str = "unit"
    date: str = "date"
    count: str = "count"
    category: str | None = None


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Dense ``n x T`` grid of observed outcomes.

    ``outcomes[i, t - 1]`` is the outcome of ``unit_ids[i]`` in period ``t``,
    which falls on ``start + (t - 1)`` days.
    """

    unit_ids: tuple[str, ...]
    start: date
    outcomes: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.array(self.outcomes, dtype=float)
        if y.ndim != 2:
            raise PanelError("outcomes must be a 2-d array")
        if y.shape[0] != len(self.unit_ids):
            raise PanelError(
                f"{len(self.unit_ids)} unit ids for {y.shape[0]} outcome rows"
            )
        if y.shape[0] < 1 or y.shape[1] < 2:
            raise PanelError("a panel needs n >= 1 units and T >= 2 periods")
        if not np.all(np.isfinite(y)):
            raise PanelError("outcomes contain non-finite values")
        y.setflags(write=False)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "unit_ids", tuple(str(u) for u in self.unit_ids))

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def T(self) -> int:
        return self.outcomes.shape[1]

    @property
    def end(self) -> date:
        return self.date_of(self.T)

    def date_of(self, t: int) -> date:
        return self.start + timedelta(days=int(t) - 1)

    def period_of(self, day: date) -> int:
        return (day - self.start).days + 1

    def adoption(self, when: Union[date, str, int, "AdoptionTime"]) -> "AdoptionTime":
        """Resolve a date, ISO string or period index to an :class:`AdoptionTime`."""
        if isinstance(when, AdoptionTime):
            a0 = when.a0
        elif isinstance(when, (int, np.integer)) and not isinstance(when, bool):
            a0 = int(when)
        else:
            day = when if isinstance(when, date) else _parse_date(str(when))
            a0 = self.period_of(day)
        if not 1 < a0 <= self.T:
            raise PanelError(
                f"adoption period {a0} ({self.date_of(a0)}) needs a pre-period "
                f"inside the panel [{self.start}, {self.end}]"
            )
        return AdoptionTime(a0, self.date_of(a0))

    def with_outcomes(self, outcomes: np.ndarray, **metadata) -> "PanelDataset":
        return PanelDataset(
            self.unit_ids, self.start, outcomes, {**self.metadata, **metadata}
        )


@dataclass(frozen=True)
class AdoptionTime:
    a0: int
    calendar_date: date


@dataclass(frozen=True, eq=False)
class WindowView:
    """The ``2 * tau`` periods ``a0 - tau, ..., a0 + tau - 1`` of a panel."""

    tau: int
    a0: int
    periods: tuple[int, ...]
    slab: np.ndarray
    adjusted: bool = False

    @property
    def n(self) -> int:
        return self.slab.shape[0]


@dataclass(frozen=True, eq=False)
class UnitAverages:
    tau: int
    treated_mean: np.ndarray
    control_mean: np.ndarray
    treated_count: np.ndarray
    control_count: np.ndarray
    adjusted: bool = False

    @property
    def n(self) -> int:
        return len(self.treated_mean)


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise PanelError(f"not an ISO-8601 date: {text!r}") from None


def _sniff_delimiter(header: str) -> str:
    return "\t" if header.count("\t") > header.count(",") else ","


def load_panel(
    source: Union[str, TextIO, Iterable[str]],
    schema: PanelSchema | None = None,
    filters: Union[Callable[[str], bool], Iterable[str], None] = None,
    strict_missing: bool = False,
) -> PanelDataset:
    """Read a long-format ``unit, date, count[, category]`` table into a dense panel.

    Parameters
    ----------
    source : path, open text stream or iterable of lines
        Comma- or tab-delimited UTF-8 text with a header row.
    schema : PanelSchema, optional
        Column names. Defaults to ``unit``, ``date``, ``count``.
    filters : callable or collection of str, optional
        Keeps rows whose category value satisfies the predicate (or is in the
        collection). Requires ``schema.category``.
    strict_missing : bool
        If True, a (unit, day) cell absent from the input is an error instead
        of a zero count.

    Returns
    -------
    PanelDataset
        Units in sorted label order, periods covering every day from the
        earliest to the latest date in the (filtered) input. Duplicate cells
        are summed.
    """
    schema = schema or PanelSchema()
    if isinstance(source, str):
        with open(source, encoding="utf-8", newline="") as fh:
            panel = load_panel(fh, schema, filters, strict_missing)
        return panel.with_outcomes(panel.outcomes, source=source)

    lines = iter(source)
    header = next(lines, None)
    if header is None or not header.strip():
        raise PanelError("input is empty (header row required)")
    delim = _sniff_delimiter(header)
    reader = csv.reader(_chain(header, lines), delimiter=delim)
    columns = [c.strip() for c in next(reader)]

    def col(name, role):
        if name not in columns:
            raise PanelError(f"missing {role} column {name!r}; header has {columns}")
        return columns.index(name)

    iu, idt, ic = col(schema.unit, "unit"), col(schema.date, "date"), col(schema.count, "count")
    if filters is not None:
        if schema.category is None:
            raise PanelError("a category filter needs schema.category")
        icat = col(schema.category, "category")
        keep = filters if callable(filters) else frozenset(filters).__contains__
    else:
        icat, keep = None, None

    cells: dict[tuple[str, date], float] = defaultdict(float)
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(columns):
            raise PanelError(f"line {lineno}: expected {len(columns)} fields, got {len(row)}")
        if keep is not None and not keep(row[icat].strip()):
            continue
        try:
            day = date.fromisoformat(row[idt].strip())
        except ValueError:
            raise PanelError(f"line {lineno}: unparseable date {row[idt]!r}") from None
        try:
            value = float(row[ic])
        except ValueError:
            raise PanelError(f"line {lineno}: non-numeric count {row[ic]!r}") from None
        cells[(row[iu].strip(), day)] += value

    if not cells:
        raise PanelError("no rows left after filtering")
    units = sorted({u for u, _ in cells})
    days = [d for _, d in cells]
    start, stop = min(days), max(days)
    T = (stop - start).days + 1
    y = np.zeros((len(units), T))
    seen = np.zeros((len(units), T), dtype=bool)
    index = {u: i for i, u in enumerate(units)}
    for (u, d), v in cells.items():
        i, t = index[u], (d - start).days
        y[i, t] = v
        seen[i, t] = True
    if strict_missing and not seen.all():
        i, t = map(int, np.argwhere(~seen)[0])
        raise PanelError(
            f"{int((~seen).sum())} missing (unit, day) cells, first is "
            f"({units[i]}, {start + timedelta(days=t)})"
        )
    meta = {"zero_filled": int((~seen).sum())}
    if filters is not None:
        meta["filter"] = (
            getattr(filters, "__name__", "predicate")
            if callable(filters)
            else sorted(filters)
        )
    return PanelDataset(tuple(units), start, y, meta)


def _chain(first, rest):
    yield first
    yield from rest


def window(panel: PanelDataset, a0: Union[AdoptionTime, int], tau: int) -> WindowView:
    """Slice the symmetric window of half-length ``tau`` around ``a0``."""
    a0 = a0.a0 if isinstance(a0, AdoptionTime) else int(a0)
    tau = int(tau)
    if tau < 1:
        raise PanelError(f"tau must be a positive integer, got {tau}")
    lo, hi = a0 - tau, a0 + tau - 1
    gaps = []
    if lo < 1:
        gaps.append(f"{lo}..0")
    if hi > panel.T:
        gaps.append(f"{panel.T + 1}..{hi}")
    if gaps:
        raise PanelError(
            f"window tau={tau} around period {a0} needs periods {lo}..{hi}; "
            f"periods {', '.join(gaps)} are outside the panel 1..{panel.T}"
        )
    slab = panel.outcomes[:, lo - 1 : hi]
    return WindowView(
        tau, a0, tuple(range(lo, hi + 1)), slab, bool(panel.metadata.get("detrended"))
    )


def unit_averages(view: WindowView, draw) -> UnitAverages:
    """Per-unit treated and control means of the window under ``draw``."""
    from .assignment import expand

    d = expand(draw, view).D.astype(bool)
    n1 = d.sum(axis=1)
    n0 = d.shape[1] - n1
    if np.any(n1 == 0) or np.any(n0 == 0):
        bad = int(np.flatnonzero((n1 == 0) | (n0 == 0))[0])
        raise PanelError(f"degenerate assignment: unit {bad} has no treated or no control period")
    slab = view.slab
    treated = np.where(d, slab, 0.0).sum(axis=1) / n1
    control = np.where(d, 0.0, slab).sum(axis=1) / n0
    return UnitAverages(view.tau, treated, control, n1, n0, view.adjusted)


def panel_to_csv(panel: PanelDataset, value_name: str = "count") -> str:
    """Long-format CSV text of a panel (one row per unit-day)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", "date", value_name])
    for i, u in enumerate(panel.unit_ids):
        for t in range(panel.T):
            w.writerow([u, (panel.start + timedelta(days=t)).isoformat(), repr(float(panel.outcomes[i, t]))])
    return buf.getvalue()
