"""Randomization p-values, test-inversion confidence intervals and joint tests.

Every reference statistic is recomputed from the observed window under a
hypothetical assignment; under the sharp nulls this is all the imputation
that is needed. Monte Carlo draws come from the counter-based generator in
:mod:`rinfer.rng`, and simulation indices are processed in fixed-size chunks,
so results are bit-identical for any number of worker threads.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .assignment import (
    DEFAULT_CAP,
    MechanismSpec,
    _factual_index,
    check_cap,
    draw_indices,
    enumerate_indices,
    space_size,
)
from .panel import AdoptionTime, PanelDataset, window
from .statistics import (
    StatisticConfig,
    combine_many,
    contrast_table,
    detrend,
    stats_from_indices,
)

__all__ = [
    "TestResult",
    "CIResult",
    "JointResult",
    "InferenceError",
    "randomization_test",
    "confidence_interval",
    "joint_test",
    "joint_tests",
    "DEFAULT_NSIM",
]

DEFAULT_NSIM = 10_000
CHUNK = 4096
# mathematically tied statistics may differ in the last bits
TIE_RTOL = 1e-10


class InferenceError(ValueError):
    pass


class _Record:
    """Round-trips through plain dicts (and so JSON)."""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict):
        kw = {}
        for f in fields(cls):
            if f.name not in d:
                continue
            v = d[f.name]
            if isinstance(v, list) and "tuple" in str(f.type):
                v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
            kw[f.name] = v
        return cls(**kw)


@dataclass(frozen=True)
class TestResult(_Record):
    __test__ = False

    tau: int
    mechanism: str
    support: tuple[int, ...] | None
    adoption_period: int
    adoption_date: str
    observed_stat: float
    control_baseline: float
    p_value: float
    count: int
    mode: str
    n_simulations: int | None
    space_size: int | None
    seed: int
    counting: str
    statistic: str
    reference_sd: float


@dataclass(frozen=True)
class CIResult(_Record):
    tau: int
    mechanism: str
    support: tuple[int, ...] | None
    alpha: float
    estimate: float
    lower: float
    upper: float
    grid_resolution: float
    lower_status: str
    upper_status: str
    search: str
    mode: str
    n_simulations: int | None
    seed: int
    counting: str
    statistic: str


@dataclass(frozen=True)
class JointResult(_Record):
    taus: tuple[int, ...]
    mechanism: str
    supports: tuple | None
    combiner: str
    observed: float
    p_value: float
    count: int
    window_stats: tuple[float, ...]
    n_simulations: int
    seed: int
    counting: str
    coupled: bool
    statistic: str


@dataclass
class _Prepared:
    spec: MechanismSpec
    tau: int
    a0: AdoptionTime
    slab: np.ndarray
    C: np.ndarray
    fact: int
    statistic: StatisticConfig

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def table(self, theta0: float = 0.0) -> np.ndarray:
        if theta0 == 0.0:
            return self.C
        adj = self.slab.copy()
        adj[:, self.tau :] -= theta0
        return contrast_table(adj, self.tau, self.spec)


def _prepare(panel, a0, tau, spec, statistic) -> _Prepared:
    statistic = statistic or StatisticConfig()
    a0 = panel.adoption(a0)
    tau = int(tau)
    if statistic.kind == "detrended":
        anchor = a0.a0 if statistic.anchor is None else int(statistic.anchor)
        resid, fit = detrend(panel, anchor, statistic.halfwidth, statistic.preonly)
        view = window(resid, a0.a0 - fit.residual_periods[0] + 1, tau)
    else:
        view = window(panel, a0, tau)
    spec = spec.for_tau(tau)
    fact = _factual_index(spec)
    if spec.J == 1:
        warnings.warn(
            f"AT support {list(spec.options)} has a single adoption time; the test "
            "is degenerate and its p-value is 1 by construction",
            stacklevel=3,
        )
    slab = np.array(view.slab, dtype=float)
    return _Prepared(spec, tau, a0, slab, contrast_table(slab, tau, spec), fact, statistic)


def _chunked(total: int, job, workers: int) -> np.ndarray:
    starts = range(0, total, CHUNK)
    if workers <= 1 or total <= CHUNK:
        parts = [job(s, min(s + CHUNK, total)) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: job(s, min(s + CHUNK, total)), starts))
    return np.concatenate(parts, axis=0)


def _index_dtype(K: int):
    return np.int8 if K <= 127 else np.int32


def _mc_indices(spec, n, seed, n_sim, stream, workers) -> np.ndarray:
    dt = _index_dtype(spec.J)
    return _chunked(
        n_sim,
        lambda a, b: draw_indices(spec, n, seed, np.arange(a, b), stream).astype(dt),
        workers,
    )


def _exact_indices(spec, n, size, workers) -> np.ndarray:
    dt = _index_dtype(spec.J)
    return _chunked(size, lambda a, b: enumerate_indices(spec.J, n, a, b).astype(dt), workers)


def _resolve_mode(mode: str, spec: MechanismSpec, n: int, cap: int) -> str:
    mode = {"mc": "monte-carlo", "montecarlo": "monte-carlo"}.get(mode, mode)
    if mode == "auto":
        return "exact" if space_size(spec, n) <= cap else "monte-carlo"
    if mode not in ("exact", "monte-carlo"):
        raise InferenceError(f"mode must be auto, exact or monte-carlo, got {mode!r}")
    return mode


def _pvalue(count: int, total: int, mode: str, counting: str) -> float:
    if mode == "exact" or counting == "plain":
        return count / total
    if counting == "add-one":
        return (1 + count) / (1 + total)
    raise InferenceError(f"counting must be 'plain' or 'add-one', got {counting!r}")


def _scale(C: np.ndarray) -> float:
    return float(np.abs(C).max()) if C.size else 0.0


def _count_extreme(values: np.ndarray, observed: float, scale: float) -> int:
    """Number of reference values at least as extreme as ``observed``; ties count."""
    return int(np.count_nonzero(values >= observed - TIE_RTOL * scale))


def _check_nsim(n_sim: int):
    if n_sim < 1:
        raise InferenceError("n_sim must be positive")
    if n_sim < 100:
        warnings.warn(f"only {n_sim} simulations; p-values will be coarse", stacklevel=3)


class _Reference:
    """Cached draws for one window, evaluated for any outcome adjustment."""

    def __init__(self, prep: _Prepared, mode, n_sim, seed, stream, workers, cap):
        self.prep = prep
        self.mode = _resolve_mode(mode, prep.spec, prep.n, cap)
        if self.mode == "exact":
            self.total = check_cap(prep.spec, prep.n, cap)
            self.idx = _exact_indices(prep.spec, prep.n, self.total, workers)
        else:
            _check_nsim(n_sim)
            self.total = int(n_sim)
            self.idx = _mc_indices(prep.spec, prep.n, seed, self.total, stream, workers)
        self.fact_idx = np.full((1, prep.n), prep.fact)

    def evaluate(self, theta0: float = 0.0):
        C = self.prep.table(theta0)
        s_obs = float(stats_from_indices(C, self.fact_idx)[0])
        ref = stats_from_indices(C, self.idx)
        return s_obs, ref, _count_extreme(np.abs(ref), abs(s_obs), _scale(C))


def randomization_test(
    panel: PanelDataset,
    a0,
    tau: int,
    spec: MechanismSpec | None = None,
    *,
    statistic: StatisticConfig | None = None,
    n_sim: int = DEFAULT_NSIM,
    seed: int = 0,
    mode: str = "auto",
    counting: str = "plain",
    workers: int = 1,
    cap: int = DEFAULT_CAP,
    stream: int = 0,
) -> TestResult:
    """Two-sided randomization p-value of the no-effect null in one window.

    Parameters
    ----------
    panel : PanelDataset
    a0 : AdoptionTime, date, ISO string or period index
        Actual (or artificial) adoption time.
    tau : int
        Window half-length.
    spec : MechanismSpec
        Assignment mechanism; TR by default.
    n_sim, seed : int
        Monte Carlo size and master seed (ignored in exact mode).
    mode : {"auto", "exact", "monte-carlo"}
        ``auto`` enumerates every assignment when the space has at most
        ``cap`` draws.
    counting : {"plain", "add-one"}
        Monte Carlo p is ``count / n_sim`` or ``(1 + count) / (1 + n_sim)``,
        where ``count`` is the number of draws with ``|S| >= |s_obs|``.
        Ties count; values within ``TIE_RTOL`` of the largest per-unit
        contrast are treated as ties so that mathematically equal
        statistics summed in a different order still tie.

    Returns
    -------
    TestResult
    """
    spec = spec or MechanismSpec("tr")
    prep = _prepare(panel, a0, tau, spec, statistic)
    ref = _Reference(prep, mode, n_sim, seed, stream, workers, cap)
    s_obs, stats, count = ref.evaluate()
    return TestResult(
        tau=prep.tau,
        mechanism=prep.spec.kind,
        support=prep.spec.support,
        adoption_period=prep.a0.a0,
        adoption_date=prep.a0.calendar_date.isoformat(),
        observed_stat=s_obs,
        control_baseline=float(prep.slab[:, : prep.tau].mean(axis=1).mean()),
        p_value=_pvalue(count, ref.total, ref.mode, counting),
        count=count,
        mode=ref.mode,
        n_simulations=None if ref.mode == "exact" else ref.total,
        space_size=ref.total if ref.mode == "exact" else None,
        seed=int(seed),
        counting="plain" if ref.mode == "exact" else counting,
        statistic=prep.statistic.kind,
        reference_sd=float(np.std(stats)),
    )


def confidence_interval(
    panel: PanelDataset,
    a0,
    tau: int,
    spec: MechanismSpec | None = None,
    *,
    statistic: StatisticConfig | None = None,
    alpha: float = 0.05,
    n_sim: int = DEFAULT_NSIM,
    seed: int = 0,
    mode: str = "auto",
    counting: str = "plain",
    grid_resolution: float = 1e-3,
    span_sds: float = 10.0,
    coarse_points: int = 201,
    search: str = "bisection",
    workers: int = 1,
    cap: int = DEFAULT_CAP,
) -> CIResult:
    """Invert the randomization test under a constant additive effect.

    Each candidate ``theta0`` is subtracted from every factually treated
    (post-adoption) cell and the test is rerun on the same draws; the
    interval spans the kept points of the grid
    ``estimate + k * grid_resolution`` with ``|k * grid_resolution|`` up to
    ``span_sds`` reference standard deviations. A coarse pass locates the
    boundaries and integer bisection refines each to one grid step. If the
    coarse acceptance pattern is not a single run around the estimate, every
    grid point is evaluated instead (``search="exhaustive"`` forces this).
    An endpoint is ``"open"`` when it sits on the edge of the grid.
    """
    if not 0 < alpha <= 0.5:
        raise InferenceError(f"alpha must lie in (0, 0.5], got {alpha}")
    spec = spec or MechanismSpec("tr")
    prep = _prepare(panel, a0, tau, spec, statistic)
    ref = _Reference(prep, mode, n_sim, seed, 0, workers, cap)
    estimate, stats0, _ = ref.evaluate()
    sd = float(np.std(stats0))
    res = float(grid_resolution)
    span = span_sds * (sd if sd > 0 else max(abs(estimate), 1.0))
    kmax = max(1, math.ceil(span / res))

    cache: dict[int, bool] = {}

    def accept(k: int) -> bool:
        if k not in cache:
            _, _, count = ref.evaluate(estimate + k * res)
            cache[k] = _pvalue(count, ref.total, ref.mode, counting) > alpha
        return cache[k]

    how = search
    if search == "bisection":
        step = max(1, kmax // max(1, (coarse_points - 1) // 2))
        ks = sorted(set(range(0, kmax + 1, step)) | set(range(0, -kmax - 1, -step)) | {-kmax, kmax})
        flags = [accept(k) for k in ks]
        zero = ks.index(0)
        hi = zero
        while hi + 1 < len(ks) and flags[hi + 1]:
            hi += 1
        lo = zero
        while lo > 0 and flags[lo - 1]:
            lo -= 1
        if not flags[zero] or any(flags[:lo]) or any(flags[hi + 1 :]):
            how = "exhaustive"
        else:
            def refine(inside, outside):
                while abs(outside - inside) > 1:
                    mid = (inside + outside) // 2
                    if accept(mid):
                        inside = mid
                    else:
                        outside = mid
                return inside

            k_hi = ks[hi] if hi == len(ks) - 1 else refine(ks[hi], ks[hi + 1])
            k_lo = ks[lo] if lo == 0 else refine(ks[lo], ks[lo - 1])
    elif search != "exhaustive":
        raise InferenceError(f"search must be 'bisection' or 'exhaustive', got {search!r}")
    if how == "exhaustive":
        kept = [k for k in range(-kmax, kmax + 1) if accept(k)]
        if not kept:
            raise InferenceError(
                "no grid value is accepted; use a finer grid or more simulations"
            )
        k_lo, k_hi = kept[0], kept[-1]

    return CIResult(
        tau=prep.tau,
        mechanism=prep.spec.kind,
        support=prep.spec.support,
        alpha=float(alpha),
        estimate=estimate,
        lower=estimate + k_lo * res,
        upper=estimate + k_hi * res,
        grid_resolution=res,
        lower_status="open" if k_lo == -kmax else "closed",
        upper_status="open" if k_hi == kmax else "closed",
        search=how,
        mode=ref.mode,
        n_simulations=None if ref.mode == "exact" else ref.total,
        seed=int(seed),
        counting="plain" if ref.mode == "exact" else counting,
        statistic=prep.statistic.kind,
    )


def _joint_stats(panel, a0, taus, spec, statistic, n_sim, seed, coupled, workers):
    taus = [int(t) for t in taus]
    if not taus:
        raise InferenceError("tau_list must be nonempty")
    if taus != sorted(set(taus)):
        raise InferenceError(f"tau_list must be strictly ascending, got {taus}")
    if spec.kind == "at" and spec.support is None and taus[0] < 2:
        raise InferenceError("joint AT tests need tau >= 2 in every window")
    _check_nsim(n_sim)
    preps = [_prepare(panel, a0, t, spec, statistic) for t in taus]
    n = preps[0].n
    obs = np.array([stats_from_indices(p.C, np.full((1, n), p.fact))[0] for p in preps])

    def job(a, b):
        sims = np.arange(a, b)
        cols = []
        for l, p in enumerate(preps):
            idx = draw_indices(p.spec, n, seed, sims, 0 if coupled else l)
            cols.append(stats_from_indices(p.C, idx))
        return np.column_stack(cols)

    return preps, obs, _chunked(int(n_sim), job, workers)


def joint_tests(
    panel: PanelDataset,
    a0,
    taus: Sequence[int],
    spec: MechanismSpec | None = None,
    combiners: Sequence[str] = ("max", "mean", "hotelling"),
    *,
    statistic: StatisticConfig | None = None,
    n_sim: int = DEFAULT_NSIM,
    seed: int = 0,
    counting: str = "plain",
    coupled: bool = False,
    workers: int = 1,
) -> list[JointResult]:
    """Joint no-effect tests over several windows, one result per combiner.

    Each simulation draws one assignment per window, from independent
    sub-streams (window ``l`` uses stream ``l``) unless ``coupled``, in which
    case all windows share the unit-level random words.
    """
    spec = spec or MechanismSpec("tr")
    if "hotelling" in combiners and n_sim < len(taus) + 2:
        raise InferenceError(f"hotelling needs n_sim >= L+2 = {len(taus) + 2}")
    preps, obs, sims = _joint_stats(panel, a0, taus, spec, statistic, n_sim, seed, coupled, workers)
    supports = None if spec.kind == "tr" else tuple(p.spec.support for p in preps)
    out = []
    for method in combiners:
        observed = float(combine_many(obs[None, :], sims, method)[0])
        ref = combine_many(sims, sims, method)
        if method == "hotelling":
            scale = max(abs(observed), 1.0)
        else:
            scale = max(_scale(p.C) for p in preps)
        count = _count_extreme(ref, observed, scale)
        out.append(
            JointResult(
                taus=tuple(p.tau for p in preps),
                mechanism=spec.kind,
                supports=supports,
                combiner=method,
                observed=observed,
                p_value=_pvalue(count, int(n_sim), "monte-carlo", counting),
                count=count,
                window_stats=tuple(float(v) for v in obs),
                n_simulations=int(n_sim),
                seed=int(seed),
                counting=counting,
                coupled=bool(coupled),
                statistic=preps[0].statistic.kind,
            )
        )
    return out


def joint_test(panel, a0, taus, spec=None, combiner: str = "max", **kwargs) -> JointResult:
    """Single-combiner form of :func:`joint_tests`."""
    return joint_tests(panel, a0, taus, spec, (combiner,), **kwargs)[0]
