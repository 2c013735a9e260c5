"""Run configuration, orchestration and report files (JSON, CSV, SVG)."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import svg
from .assignment import MechanismSpec, parse_mechanisms
from .diagnostics import (
    FalsificationReport,
    WindowSelectionResult,
    falsification_scan,
    select_window,
)
from .inference import (
    CIResult,
    JointResult,
    TestResult,
    _Record,
    confidence_interval,
    joint_tests,
    randomization_test,
)
from .panel import PanelSchema, load_panel, panel_to_csv
from .statistics import COMBINERS, StatisticConfig, detrend

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "RunConfig",
    "Summary",
    "DetrendSummary",
    "Report",
    "derive_summary",
    "summarize_result",
    "load_config",
    "load_report",
    "run",
]

SCHEMA_VERSION = "1.0"
COMMANDS = ("test", "ci", "joint", "select-window", "falsify", "detrend", "summarize")
SEED_ENV = "RINFER_SEED"
# execution details that cannot change any number in a report
_NOT_ECHOED = ("workers",)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    commands: tuple[str, ...] = ("test",)
    input: str | None = None
    unit_col: str = "unit"
    date_col: str = "date"
    count_col: str = "count"
    category_col: str | None = None
    categories: tuple[str, ...] | None = None
    strict_missing: bool = False
    adoption: str | None = None
    tau: tuple[int, ...] = (1, 7, 14)
    mechanisms: tuple[str, ...] = ("tr", "at")
    backdate: int | None = None
    at_support: tuple[int, ...] | None = None
    nsim: int = 10_000
    seed: int = 0
    sim_mode: str = "auto"
    counting: str = "plain"
    alpha: float = 0.05
    ci: bool = False
    grid_resolution: float = 1e-3
    statistic: str = "raw"
    detrend_halfwidth: int = 300
    detrend_preonly: bool = False
    combine: tuple[str, ...] = ("max", "hotelling", "mean")
    joint_tau_max: tuple[int, ...] = (7, 14)
    joint_coupled: bool = False
    placebo: str = "-28d"
    select_tau_max: int = 21
    select_mechanisms: tuple[str, ...] = ("tr",)
    threshold: float = 0.15
    falsify_mode: str = "date"
    years: tuple[int, ...] = (2015, 2016, 2018)
    theta: float | None = None
    baseline: float | None = None
    units: int | None = None
    days: int | None = None
    output: str | None = None
    formats: tuple[str, ...] = ("json", "csv", "svg")
    workers: int = 1

    def validate(self) -> "RunConfig":
        for c in self.commands:
            if c not in COMMANDS:
                raise ConfigError(f"commands: unknown command {c!r}; choose from {COMMANDS}")
        if self.adoption is not None:
            _field_check("adoption", lambda: _parse_when(self.adoption))
        if any(int(t) < 1 for t in self.tau):
            raise ConfigError(f"tau: window half-lengths must be positive, got {list(self.tau)}")
        for m in (*self.mechanisms, *self.select_mechanisms):
            if m not in ("tr", "at"):
                raise ConfigError(f"mechanisms: unknown mechanism {m!r}")
        for c in self.combine:
            if c not in COMBINERS:
                raise ConfigError(f"combine: unknown combiner {c!r}")
        if self.sim_mode not in ("auto", "exact", "monte-carlo", "mc"):
            raise ConfigError(f"sim_mode: {self.sim_mode!r} is not auto, exact or mc")
        if self.counting not in ("plain", "add-one"):
            raise ConfigError(f"counting: {self.counting!r} is not plain or add-one")
        if self.statistic not in ("raw", "detrended"):
            raise ConfigError(f"statistic: {self.statistic!r} is not raw or detrended")
        if not 0 < self.alpha <= 0.5:
            raise ConfigError(f"alpha: must lie in (0, 0.5], got {self.alpha}")
        if self.falsify_mode not in ("date", "weekday"):
            raise ConfigError(f"falsify_mode: {self.falsify_mode!r} is not date or weekday")
        if self.nsim < 1:
            raise ConfigError("nsim: must be positive")
        for f in self.formats:
            if f not in ("json", "csv", "svg"):
                raise ConfigError(f"formats: unknown format {f!r}")
        needs_data = set(self.commands) - {"summarize"}
        if needs_data and self.input is None:
            raise ConfigError("input: a panel file is required")
        if needs_data - {"detrend"} and self.adoption is None:
            raise ConfigError("adoption: the adoption date is required")
        return self

    def to_dict(self) -> dict:
        d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}
        for k in _NOT_ECHOED:
            d.pop(k)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in known:
                raise ConfigError(f"{k}: unknown configuration key")
            if isinstance(v, list):
                v = tuple(v)
            kw[k] = v
        try:
            return cls(**kw)
        except TypeError as e:
            raise ConfigError(str(e)) from None


def _field_check(name, fn):
    try:
        return fn()
    except ValueError as e:
        raise ConfigError(f"{name}: {e}") from None


def _parse_when(value):
    if isinstance(value, int):
        return value
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value).strip())


# TOML aliases: flag-style names and per-command sections
_ALIASES = {
    "mechanism": "mechanisms",
    "command": "commands",
    "format": "formats",
    "combiner": "combine",
    "mode": "sim_mode",
    "category": "categories",
    "n_sim": "nsim",
}
_SECTIONS = {
    "joint": {"tau_max": "joint_tau_max", "coupled": "joint_coupled", "combine": "combine"},
    "select-window": {"tau_max": "select_tau_max", "mechanism": "select_mechanisms",
                      "mechanisms": "select_mechanisms", "placebo": "placebo", "threshold": "threshold"},
    "falsify": {"mode": "falsify_mode", "years": "years"},
    "detrend": {"halfwidth": "detrend_halfwidth", "preonly": "detrend_preonly"},
}
_LISTY = {"commands", "mechanisms", "select_mechanisms", "formats", "combine", "categories",
          "tau", "joint_tau_max", "years", "at_support"}
_INTS = {"tau", "joint_tau_max", "years", "at_support"}


def normalize(raw: dict) -> dict:
    """Flatten a config document into :class:`RunConfig` keyword names."""
    out = {}
    for k, v in raw.items():
        k = k.replace("-", "_") if k not in _SECTIONS else k
        if k in _SECTIONS and isinstance(v, dict):
            for sk, sv in v.items():
                sk = sk.replace("-", "_")
                if sk not in _SECTIONS[k]:
                    raise ConfigError(f"[{k}] {sk}: unknown key")
                out[_SECTIONS[k][sk]] = sv
            continue
        out[_ALIASES.get(k, k)] = v
    for k in _LISTY & out.keys():
        v = out[k]
        if isinstance(v, str):
            v = [s.strip() for s in v.split(",") if s.strip()]
        elif not isinstance(v, (list, tuple)):
            v = [v]
        if k in _INTS:
            v = [_field_check(k, lambda x=x: int(x)) for x in v]
        out[k] = v
    if isinstance(out.get("adoption"), date):
        out["adoption"] = out["adoption"].isoformat()
    return out


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return RunConfig.from_dict(normalize(raw))


# ---------------------------------------------------------------- summaries


@dataclass(frozen=True)
class Summary(_Record):
    """Effect on the original scale: totals over ``n_units`` units and ``days`` days per side."""

    theta: float
    baseline: float
    n_units: int
    days: int
    relative_effect_pct: float | None
    pre_total: float
    post_total: float
    pre_total_rounded: int
    post_total_rounded: int
    tau: int | None = None


def derive_summary(theta: float, baseline: float, n_units: int, days_per_side: int, tau=None) -> Summary:
    """Relative effect in percent and pre/post totals (rounded for display only)."""
    pre = baseline * n_units * days_per_side
    post = (baseline + theta) * n_units * days_per_side
    rel = None if baseline == 0 else 100.0 * theta / baseline
    return Summary(float(theta), float(baseline), int(n_units), int(days_per_side), rel,
                   pre, post, int(round(pre)), int(round(post)), tau)


def summarize_result(result: TestResult, n_units: int, days_per_side: int | None = None) -> Summary:
    days = result.tau if days_per_side is None else days_per_side
    return derive_summary(result.observed_stat, result.control_baseline, n_units, days, result.tau)


@dataclass(frozen=True)
class DetrendSummary(_Record):
    halfwidth: int
    preonly: bool
    fit_start: str
    fit_end: str
    residual_start: str
    residual_end: str
    n_units: int
    mean_slope: float


# ---------------------------------------------------------------- report

_KINDS = {
    cls.__name__: cls
    for cls in (TestResult, CIResult, JointResult, WindowSelectionResult,
                FalsificationReport, Summary, DetrendSummary)
}


@dataclass
class Report:
    config: dict
    results: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    def add(self, command: str, record) -> None:
        self.results.append((command, record))

    def of(self, cls) -> list:
        return [r for _, r in self.results if isinstance(r, cls)]

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "notes": list(self.notes),
            "results": [
                {"command": c, "kind": type(r).__name__, "data": r.to_dict()}
                for c, r in self.results
            ],
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        rep = cls(d["config"], [], list(d.get("notes", [])), d["schema_version"])
        for block in d["results"]:
            rep.add(block["command"], _KINDS[block["kind"]].from_dict(block["data"]))
        return rep


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def load_report(path: str | os.PathLike) -> Report:
    with open(path, encoding="utf-8") as fh:
        return Report.from_dict(json.load(fh))


# ---------------------------------------------------------------- CSV tables


def _num(v) -> str:
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def effects_table(report: Report) -> str:
    """Per-window estimates with p-values and CIs per mechanism (main results layout)."""
    tests = report.of(TestResult)
    cis = report.of(CIResult)
    mechs = [m for m in ("tr", "at") if any(t.mechanism == m for t in tests)]
    if not mechs:
        mechs = [m for m in ("tr", "at") if any(c.mechanism == m for c in cis)]
    header = ["tau", "theta_hat", "control_mean"]
    for m in mechs:
        header += [f"p_{m}", f"ci_{m}_lower", f"ci_{m}_upper"]
    rows = []
    for tau in sorted({t.tau for t in tests} | {c.tau for c in cis}):
        t0 = next((t for t in tests if t.tau == tau), None)
        c0 = next((c for c in cis if c.tau == tau), None)
        row = [tau, t0.observed_stat if t0 else c0.estimate, t0 and t0.control_baseline]
        for m in mechs:
            t = next((t for t in tests if t.tau == tau and t.mechanism == m), None)
            c = next((c for c in cis if c.tau == tau and c.mechanism == m), None)
            row += [t and t.p_value, c and c.lower, c and c.upper]
        rows.append(row)
    return _csv(header, rows)


def joint_table(report: Report) -> str:
    res = report.of(JointResult)
    combiners = list(dict.fromkeys(r.combiner for r in res))
    header = ["mechanism", "taus"]
    for c in combiners:
        header += [f"{c}_statistic", f"{c}_p"]
    rows = []
    for key in dict.fromkeys((r.mechanism, r.taus) for r in res):
        row = [key[0], f"{key[1][0]}-{key[1][-1]}"]
        for c in combiners:
            r = next((r for r in res if (r.mechanism, r.taus) == key and r.combiner == c), None)
            row += [r and r.observed, r and r.p_value]
        rows.append(row)
    return _csv(header, rows)


def falsification_table(rep: FalsificationReport) -> str:
    """Wide layout: one row per tau, estimate and per-mechanism p for each artificial date."""
    dates = list(dict.fromkeys(c.date for c in rep.cells))
    mechs = list(dict.fromkeys(c.mechanism for c in rep.cells))
    header = ["tau"]
    for d in dates:
        header += [f"{d}_theta"] + [f"{d}_p_{m}" for m in mechs]
    rows = []
    for tau in dict.fromkeys(c.tau for c in rep.cells):
        row = [tau]
        for d in dates:
            cell = [c for c in rep.cells if c.date == d and c.tau == tau]
            row.append(cell[0].estimate if cell else None)
            for m in mechs:
                x = next((c for c in cell if c.mechanism == m), None)
                row.append(x and x.p_value)
        rows.append(row)
    return _csv(header, rows)


# ---------------------------------------------------------------- run


def _schema(cfg: RunConfig) -> PanelSchema:
    return PanelSchema(cfg.unit_col, cfg.date_col, cfg.count_col, cfg.category_col)


def _statistic(cfg: RunConfig) -> StatisticConfig:
    return StatisticConfig(cfg.statistic, cfg.detrend_halfwidth, cfg.detrend_preonly)


def _specs(cfg: RunConfig, names) -> list[MechanismSpec]:
    return parse_mechanisms(list(names), cfg.backdate, cfg.at_support)


def _run_tests(cfg, panel, report, files, command, with_ci):
    stat = _statistic(cfg)
    specs = _specs(cfg, cfg.mechanisms)
    for tau in cfg.tau:
        for spec in specs:
            if spec.cannot_vary(tau):
                report.notes.append(f"AT skipped at tau={tau}: adoption time cannot vary")
                continue
            kw = dict(statistic=stat, n_sim=cfg.nsim, seed=cfg.seed, mode=cfg.sim_mode,
                      counting=cfg.counting, workers=cfg.workers)
            if command == "test":
                report.add(command, randomization_test(panel, cfg.adoption, tau, spec, **kw))
            if with_ci:
                report.add(command, confidence_interval(
                    panel, cfg.adoption, tau, spec, alpha=cfg.alpha,
                    grid_resolution=cfg.grid_resolution, **kw))
    if command == "test":
        for t in report.of(TestResult):
            if t.mechanism == specs[0].kind:
                report.add(command, summarize_result(t, panel.n))
    tests = [t for t in report.of(TestResult) if t.mechanism == "tr"] or report.of(TestResult)
    files["effects.csv"] = effects_table(report)
    if tests:
        files["effects.svg"] = svg.effect_bars(
            [t.tau for t in tests], [t.observed_stat for t in tests],
            [t.p_value for t in tests], f"Estimates by window ({tests[0].mechanism.upper()} p-values)")


def run(config: RunConfig) -> Report:
    """Execute the configured commands and write the report files.

    Files are written only after every command has succeeded.
    """
    cfg = config.validate()
    report = Report(cfg.to_dict())
    files: dict[str, str] = {}
    panel = None
    if set(cfg.commands) - {"summarize"}:
        cats = None if cfg.categories is None else list(cfg.categories)
        panel = load_panel(cfg.input, _schema(cfg), cats, cfg.strict_missing)
        if panel.metadata.get("zero_filled"):
            report.notes.append(
                f"{panel.metadata['zero_filled']} absent unit-days were filled with 0"
            )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for command in cfg.commands:
            _dispatch(command, cfg, panel, report, files)
    for w in caught:
        msg = str(w.message)
        if msg not in report.notes:
            report.notes.append(msg)

    if cfg.output is not None:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        if "json" in cfg.formats:
            files["report.json"] = report.to_json()
        for name, text in files.items():
            ext = name.rsplit(".", 1)[-1]
            if ext in cfg.formats:
                _atomic_write(out / name, text)
    return report


def _dispatch(command, cfg, panel, report, files):
    stat = _statistic(cfg)
    if command in ("test", "ci"):
        _run_tests(cfg, panel, report, files, command, with_ci=cfg.ci or command == "ci")
    elif command == "joint":
        for spec in _specs(cfg, cfg.mechanisms):
            for K in cfg.joint_tau_max:
                start = 2 if spec.kind == "at" and spec.support is None else 1
                for r in joint_tests(
                    panel, cfg.adoption, range(start, int(K) + 1), spec, cfg.combine,
                    statistic=stat, n_sim=cfg.nsim, seed=cfg.seed, counting=cfg.counting,
                    coupled=cfg.joint_coupled, workers=cfg.workers,
                ):
                    report.add(command, r)
        files["joint.csv"] = joint_table(report)
    elif command == "select-window":
        for spec in _specs(cfg, cfg.select_mechanisms):
            r = select_window(
                panel, cfg.placebo, cfg.select_tau_max, spec, threshold=cfg.threshold,
                n_sim=cfg.nsim, seed=cfg.seed, adoption=cfg.adoption, statistic=stat,
                mode=cfg.sim_mode, counting=cfg.counting, workers=cfg.workers,
            )
            report.add(command, r)
            files[f"window_selection_{spec.kind}.csv"] = _csv(["tau", "p_value"], zip(r.taus, r.p_values))
            files[f"window_selection_{spec.kind}.svg"] = svg.pvalue_curve(
                r.taus, r.p_values, r.threshold,
                f"Placebo cutoff {r.placebo_date} ({spec.kind.upper()}), tau* = {r.tau_star}",
                r.tau_star,
            )
    elif command == "falsify":
        rep = falsification_scan(
            panel, cfg.adoption, cfg.years, cfg.tau, _specs(cfg, cfg.mechanisms),
            mode=cfg.falsify_mode, alpha=cfg.alpha, n_sim=cfg.nsim, seed=cfg.seed,
            statistic=stat, counting=cfg.counting, test_mode=cfg.sim_mode, workers=cfg.workers,
        )
        report.add(command, rep)
        files["falsification.csv"] = falsification_table(rep)
    elif command == "detrend":
        anchor = cfg.adoption if cfg.adoption is not None else panel.T // 2 + 1
        resid, fit = detrend(panel, panel.adoption(anchor), cfg.detrend_halfwidth, cfg.detrend_preonly)
        report.add(command, DetrendSummary(
            fit.halfwidth, fit.preonly, panel.date_of(fit.fit_periods[0]).isoformat(),
            panel.date_of(fit.fit_periods[1]).isoformat(), resid.start.isoformat(),
            resid.end.isoformat(), panel.n, float(fit.slopes.mean()),
        ))
        files["residuals.csv"] = panel_to_csv(resid, "residual")
        files["detrend_fit.csv"] = _csv(
            ["unit", "intercept", "slope"],
            zip(panel.unit_ids, map(float, fit.intercepts), map(float, fit.slopes)),
        )
    elif command == "summarize":
        missing = [k for k in ("theta", "baseline", "units", "days") if getattr(cfg, k) is None]
        if missing:
            raise ConfigError(f"{missing[0]}: required by summarize")
        s = derive_summary(cfg.theta, cfg.baseline, cfg.units, cfg.days)
        report.add(command, s)
        files["summary.csv"] = _csv(list(s.to_dict()), [list(s.to_dict().values())])


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}: not an integer: {raw!r}") from None
