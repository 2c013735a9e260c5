"""Placebo-cutoff window selection and falsification scans at artificial adoption times."""
from __future__ import annotations

import calendar
import re
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Sequence

from .assignment import MechanismSpec
from .inference import DEFAULT_NSIM, _Record, randomization_test
from .panel import AdoptionTime, PanelDataset, PanelError
from .rng import derive_seed
from .statistics import StatisticConfig

__all__ = [
    "WindowSelectionResult",
    "FalsificationCell",
    "FalsificationReport",
    "select_window",
    "falsification_scan",
    "resolve_time",
    "artificial_date",
    "cell_seed",
    "DEFAULT_THRESHOLD",
]

DEFAULT_THRESHOLD = 0.15
_MECH_CODE = {"tr": 0, "at": 1}


@dataclass(frozen=True)
class WindowSelectionResult(_Record):
    placebo_period: int
    placebo_date: str
    threshold: float
    mechanism: str
    taus: tuple[int, ...]
    p_values: tuple[float, ...]
    estimates: tuple[float, ...]
    seeds: tuple[int, ...]
    tau_star: int


@dataclass(frozen=True)
class FalsificationCell(_Record):
    period: int
    date: str
    tau: int
    mechanism: str
    estimate: float
    p_value: float
    seed: int
    flagged: bool


@dataclass(frozen=True)
class FalsificationReport(_Record):
    mode: str
    alpha: float
    cells: tuple[FalsificationCell, ...]

    @classmethod
    def from_dict(cls, d):
        return cls(d["mode"], d["alpha"], tuple(FalsificationCell.from_dict(c) for c in d["cells"]))

    @property
    def flagged(self) -> list[FalsificationCell]:
        return [c for c in self.cells if c.flagged]


def cell_seed(seed: int, period: int, tau: int, kind: str) -> int:
    """Seed of one (time, tau, mechanism) cell; independent of the other cells."""
    return derive_seed(seed, period, tau, _MECH_CODE[kind])


_OFFSET = re.compile(r"^(?:([+-]\d+)d?|(\d+)d)$")


def resolve_time(panel: PanelDataset, when, adoption=None) -> AdoptionTime:
    """Resolve a date, period index or day offset like ``"-28d"`` (relative to ``adoption``)."""
    m = _OFFSET.match(when.strip()) if isinstance(when, str) else None
    if m:
        if adoption is None:
            raise PanelError(f"offset {when!r} needs the true adoption time")
        base = panel.adoption(adoption).a0
        return panel.adoption(base + int(m.group(1) or m.group(2)))
    return panel.adoption(when)


def select_window(
    panel: PanelDataset,
    placebo_time,
    tau_max: int,
    spec: MechanismSpec | None = None,
    *,
    threshold: float = DEFAULT_THRESHOLD,
    n_sim: int = DEFAULT_NSIM,
    seed: int = 0,
    adoption=None,
    statistic: StatisticConfig | None = None,
    mode: str = "auto",
    counting: str = "plain",
    workers: int = 1,
) -> WindowSelectionResult:
    """Test windows ``tau = 1..tau_max`` around a placebo cutoff and pick the largest valid one.

    ``tau_star`` is the largest ``tau`` such that every window up to and
    including it has ``p >= threshold`` (0 when the first window already
    fails). When the true ``adoption`` is given, the longest placebo window
    must end before it.
    """
    spec = spec or MechanismSpec("tr")
    placebo = resolve_time(panel, placebo_time, adoption)
    if adoption is not None:
        a0 = panel.adoption(adoption).a0
        last = placebo.a0 + tau_max - 1
        if last >= a0:
            raise PanelError(
                f"placebo window tau={tau_max} ends at period {last}, at or after "
                f"the true adoption period {a0}"
            )
    taus, ps, ests, seeds = [], [], [], []
    for tau in range(1, int(tau_max) + 1):
        s = cell_seed(seed, placebo.a0, tau, spec.kind)
        r = randomization_test(
            panel, placebo, tau, spec, statistic=statistic, n_sim=n_sim, seed=s,
            mode=mode, counting=counting, workers=workers,
        )
        taus.append(tau)
        ps.append(r.p_value)
        ests.append(r.observed_stat)
        seeds.append(s)
    star = 0
    for p in ps:
        if p < threshold:
            break
        star += 1
    return WindowSelectionResult(
        placebo.a0, placebo.calendar_date.isoformat(), float(threshold), spec.kind,
        tuple(taus), tuple(ps), tuple(ests), tuple(seeds), star,
    )


def artificial_date(true_date: date, year: int, mode: str) -> date:
    """Same calendar date, or same weekday ordinal in the month, in another year.

    In ``weekday`` mode an adoption on the k-th Wednesday of November maps to
    the k-th Wednesday of November of ``year``.
    """
    if mode in ("date", "same-date"):
        return true_date.replace(year=year)
    if mode in ("weekday", "same-weekday"):
        ordinal = (true_date.day - 1) // 7
        first = date(year, true_date.month, 1)
        shift = (true_date.weekday() - first.weekday()) % 7
        day = first + timedelta(days=shift + 7 * ordinal)
        if day.month != true_date.month:
            raise PanelError(f"{calendar.month_name[true_date.month]} {year} has no such weekday")
        return day
    raise ValueError(f"mode must be 'date' or 'weekday', got {mode!r}")


def falsification_scan(
    panel: PanelDataset,
    adoption,
    years: Sequence[int],
    tau_list: Sequence[int],
    specs: Sequence[MechanismSpec] = (MechanismSpec("tr"),),
    *,
    mode: str = "date",
    alpha: float = 0.05,
    n_sim: int = DEFAULT_NSIM,
    seed: int = 0,
    statistic: StatisticConfig | None = None,
    counting: str = "plain",
    test_mode: str = "auto",
    workers: int = 1,
) -> FalsificationReport:
    """Rerun the window tests at artificial adoption times in other years.

    A cell is flagged when ``p <= alpha``; its estimate keeps its sign so
    negative and positive rejections can be told apart. AT cells whose
    default support has a single adoption time (``tau = 1``) are left out.
    """
    true = panel.adoption(adoption)
    mode = {"same-date": "date", "same-weekday": "weekday"}.get(mode, mode)
    cells = []
    for year in years:
        t = panel.adoption(artificial_date(true.calendar_date, int(year), mode))
        for tau in tau_list:
            if t.a0 == true.a0 or (t.a0 - tau <= true.a0 - 1 and t.a0 + tau - 1 >= true.a0):
                raise PanelError(
                    f"artificial time {t.calendar_date} with tau={tau} overlaps the "
                    f"true adoption {true.calendar_date}"
                )
        for tau in tau_list:
            for spec in specs:
                if spec.cannot_vary(tau):
                    continue
                s = cell_seed(seed, t.a0, tau, spec.kind)
                r = randomization_test(
                    panel, t, tau, spec, statistic=statistic, n_sim=n_sim, seed=s,
                    mode=test_mode, counting=counting, workers=workers,
                )
                cells.append(
                    FalsificationCell(
                        t.a0, t.calendar_date.isoformat(), int(tau), spec.kind,
                        r.observed_stat, r.p_value, s, r.p_value <= alpha,
                    )
                )
    return FalsificationReport(mode, float(alpha), tuple(cells))

