"""Write a synthetic neighborhood-by-day count panel in the long CSV format.

Counts are Poisson with a unit-specific level, an optional weekly cycle and
an optional constant effect from the adoption date on. Days with zero
reports are omitted from the file, as in incident-level source data, so the
loader's zero-fill path is exercised.

    python scripts/make_synthetic_panel.py out.csv --units 62 \
        --start 2015-01-01 --end 2018-12-31 --adoption 2017-11-01 --effect 0.4
"""
import argparse
import csv
from datetime import date, timedelta

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("path")
    ap.add_argument("--units", type=int, default=62)
    ap.add_argument("--start", default="2015-01-01")
    ap.add_argument("--end", default="2018-12-31")
    ap.add_argument("--adoption", default="2017-11-01")
    ap.add_argument("--level", type=float, default=5.0)
    ap.add_argument("--effect", type=float, default=0.0)
    ap.add_argument("--weekly", type=float, default=0.0, help="relative weekend bump")
    ap.add_argument("--categories", default="", help="comma list; splits counts across categories")
    ap.add_argument("--seed", type=int, default=2017)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    start, end = date.fromisoformat(args.start), date.fromisoformat(args.end)
    adopt = date.fromisoformat(args.adoption)
    days = [start + timedelta(days=k) for k in range((end - start).days + 1)]
    levels = rng.gamma(8.0, args.level / 8.0, size=args.units)
    cats = [c for c in args.categories.split(",") if c] or [None]

    with open(args.path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["unit", "date", "count"] + (["category"] if cats[0] else []))
        for i, lam in enumerate(levels):
            unit = f"N{i + 1:02d}"
            for d in days:
                rate = lam * (1 + args.weekly * (d.weekday() >= 5)) + args.effect * (d >= adopt)
                for c in cats:
                    k = rng.poisson(max(rate, 0.0) / len(cats))
                    if k:
                        w.writerow([unit, d.isoformat(), k] + ([c] if c else []))


if __name__ == "__main__":
    main()
