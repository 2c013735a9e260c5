"""``rinfer`` command line."""
from __future__ import annotations

import argparse
import sys
import warnings

from .assignment import AssignmentError
from .inference import InferenceError
from .panel import PanelError
from .report import ConfigError, RunConfig, default_seed, load_config, normalize, run


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _words(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input")
    g.add_argument("--config", help="TOML run configuration; flags override it")
    g.add_argument("--input", "-i", help="long-format panel file (CSV or TSV)")
    g.add_argument("--unit-col", dest="unit_col")
    g.add_argument("--date-col", dest="date_col")
    g.add_argument("--count-col", dest="count_col")
    g.add_argument("--category-col", dest="category_col")
    g.add_argument("--category", dest="categories", type=_words,
                   help="keep only rows with these category values")
    g.add_argument("--strict-missing", dest="strict_missing", action="store_true", default=None,
                   help="error on absent unit-days instead of filling 0")
    g.add_argument("--adoption", help="adoption date (YYYY-MM-DD)")

    g = p.add_argument_group("inference")
    g.add_argument("--tau", type=_ints, help="window half-lengths, e.g. 1,7,14")
    g.add_argument("--backdate", type=int, help="AT support {-k..0}; default tau-1 per window")
    g.add_argument("--at-support", dest="at_support", type=_ints, help="explicit AT offsets")
    g.add_argument("--nsim", type=int)
    g.add_argument("--seed", type=int, help="master seed (default $RINFER_SEED or 0)")
    g.add_argument("--sim-mode", dest="sim_mode", choices=["auto", "exact", "mc"])
    g.add_argument("--counting", choices=["plain", "add-one"])
    g.add_argument("--alpha", type=float)
    g.add_argument("--grid-resolution", dest="grid_resolution", type=float)
    g.add_argument("--statistic", choices=["raw", "detrended"])
    g.add_argument("--detrend-halfwidth", dest="detrend_halfwidth", type=int)
    g.add_argument("--detrend-preonly", dest="detrend_preonly", action="store_true", default=None)
    g.add_argument("--workers", type=int)

    g = p.add_argument_group("output")
    g.add_argument("--output", "-o", help="directory for report files")
    g.add_argument("--format", dest="formats", type=_words, help="any of json,csv,svg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rinfer",
        description="Randomization inference for before-and-after panel studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the commands listed in --config")
    _common(p)
    p.add_argument("--mechanism", dest="mechanisms", type=_words)

    for name, helptext in (("test", "randomization p-values per window"),
                           ("ci", "confidence intervals by test inversion")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--mechanism", dest="mechanisms", type=_words, help="tr, at or tr,at")
        if name == "test":
            p.add_argument("--ci", action="store_true", default=None, help="also invert the test")

    p = sub.add_parser("joint", help="joint tests over windows 1..K")
    _common(p)
    p.add_argument("--mechanism", dest="mechanisms", type=_words)
    p.add_argument("--tau-max", dest="joint_tau_max", type=_ints, help="K values, e.g. 7,14")
    p.add_argument("--combine", type=_words, help="any of max,mean,hotelling")
    p.add_argument("--joint-coupled", dest="joint_coupled", action="store_true", default=None,
                   help="reuse one draw across all windows of a simulation")

    p = sub.add_parser("select-window", help="placebo-cutoff window selection")
    _common(p)
    p.add_argument("--mechanism", dest="select_mechanisms", type=_words)
    p.add_argument("--placebo", help="date or offset from adoption, e.g. -28d")
    p.add_argument("--tau-max", dest="select_tau_max", type=int)
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("falsify", help="tests at artificial adoption times in other years")
    _common(p)
    p.add_argument("--mechanism", dest="mechanisms", type=_words)
    p.add_argument("--mode", dest="falsify_mode", choices=["date", "weekday"])
    p.add_argument("--years", type=_ints)

    p = sub.add_parser("detrend", help="write per-unit linear-trend residuals")
    _common(p)

    p = sub.add_parser("summarize", help="relative effect and pre/post totals")
    _common(p)
    p.add_argument("--theta", type=float)
    p.add_argument("--baseline", type=float)
    p.add_argument("--units", type=int)
    p.add_argument("--days", type=int)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config).to_dict() if args.config else {}
    if "seed" not in base:
        base["seed"] = default_seed()
    overrides = {
        k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config")
    }
    if args.command == "run":
        if "commands" not in base:
            raise ConfigError("commands: 'run' needs a config listing commands")
    else:
        overrides["commands"] = [args.command]
    if overrides.get("sim_mode") == "mc":
        overrides["sim_mode"] = "monte-carlo"
    merged = {**base, **normalize(overrides)}
    return RunConfig.from_dict(merged)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = run(cfg)
    except (ConfigError, PanelError, AssignmentError, InferenceError, OSError, ValueError) as e:
        print(f"rinfer: error: {e}", file=sys.stderr)
        return 2
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    if cfg.output is None:
        sys.stdout.write(report.to_json())
    else:
        print(f"wrote {', '.join(cfg.formats)} outputs to {cfg.output}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
