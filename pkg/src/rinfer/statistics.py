"""Test statistics: difference in means, linear detrending and joint combiners."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .assignment import MechanismSpec
from .panel import AdoptionTime, PanelDataset, PanelError, UnitAverages

__all__ = [
    "StatisticValue",
    "StatisticConfig",
    "DetrendFit",
    "diff_in_means",
    "detrend",
    "combine",
    "combine_many",
    "COMBINERS",
]

COMBINERS = ("max", "mean", "hotelling")
PINV_RTOL = 1e-10


@dataclass(frozen=True)
class StatisticValue:
    value: float
    tau: int
    adjusted: bool = False

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"non-finite statistic {self.value}")


@dataclass(frozen=True)
class StatisticConfig:
    """Which outcome the difference in means is computed on.

    ``kind="detrended"`` replaces outcomes by residuals of per-unit linear
    trend fits over ``halfwidth`` periods each side of ``anchor`` (the
    tested adoption period when None).
    """

    kind: str = "raw"
    halfwidth: int = 300
    preonly: bool = False
    anchor: int | None = None

    def __post_init__(self):
        if self.kind not in ("raw", "detrended"):
            raise ValueError(f"statistic must be 'raw' or 'detrended', got {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "halfwidth": self.halfwidth,
                "preonly": self.preonly, "anchor": self.anchor}


@dataclass(frozen=True, eq=False)
class DetrendFit:
    intercepts: np.ndarray
    slopes: np.ndarray
    halfwidth: int
    fit_periods: tuple[int, int]
    residual_periods: tuple[int, int]
    preonly: bool = False


def diff_in_means(avgs: UnitAverages) -> StatisticValue:
    """Mean treated average minus mean control average across units."""
    value = float(np.mean(avgs.treated_mean) - np.mean(avgs.control_mean))
    return StatisticValue(value, avgs.tau, avgs.adjusted)


def detrend(
    panel: PanelDataset,
    a0: AdoptionTime | int,
    halfwidth: int = 300,
    preonly: bool = False,
) -> tuple[PanelDataset, DetrendFit]:
    """Residuals from per-unit OLS of the outcome on an intercept and a linear trend.

    The fit uses periods ``a0 - halfwidth .. a0 + halfwidth - 1`` (only the
    pre-adoption half when ``preonly``), clipped to the panel with a warning.
    Residuals are returned over the whole clipped window as a new panel whose
    metadata records the shifted adoption period.
    """
    a0 = a0.a0 if isinstance(a0, AdoptionTime) else int(a0)
    H = int(halfwidth)
    if H < 2:
        raise PanelError(f"detrend halfwidth must be >= 2, got {H}")
    lo, hi = a0 - H, a0 + H - 1
    if lo < 1 or hi > panel.T:
        warnings.warn(
            f"detrend window {lo}..{hi} clipped to the panel 1..{panel.T}", stacklevel=2
        )
        lo, hi = max(lo, 1), min(hi, panel.T)
    fit_hi = min(hi, a0 - 1) if preonly else hi
    m = fit_hi - lo + 1
    if m < 3:
        raise PanelError(f"detrend fit window has {m} periods; at least 3 are needed")

    t = np.arange(lo, hi + 1, dtype=float)
    y = panel.outcomes[:, lo - 1 : hi]
    t_fit = t[:m]
    center = t_fit.mean()
    X = np.column_stack([np.ones(m), t_fit - center])
    coef, _, rank, _ = np.linalg.lstsq(X, y[:, :m].T, rcond=None)
    if rank < 2:
        raise PanelError("rank-deficient detrend design")
    a_c, slope = coef
    resid = y - (a_c[:, None] + slope[:, None] * (t - center)[None, :])
    out = PanelDataset(
        panel.unit_ids,
        panel.date_of(lo),
        resid,
        {**panel.metadata, "detrended": True, "detrend_anchor": a0 - lo + 1},
    )
    fit = DetrendFit(a_c - slope * center, slope, H, (lo, fit_hi), (lo, hi), preonly)
    return out, fit


def contrast_table(slab: np.ndarray, tau: int, spec: MechanismSpec) -> np.ndarray:
    """``C[i, k]``: unit i's treated-minus-control mean under option k.

    Under TR, option 0 treats the pre block and option 1 the post block.
    Under AT, option k switches treatment on at column ``tau + offset_k``.
    """
    width = 2 * tau
    P = np.concatenate([np.zeros((slab.shape[0], 1)), np.cumsum(slab, axis=1)], axis=1)
    total = P[:, width]

    def split(c):
        before = P[:, c] / c
        after = (total - P[:, c]) / (width - c)
        return after - before

    if spec.kind == "tr":
        post = split(tau)
        return np.column_stack([-post, post])
    return np.column_stack([split(tau + d) for d in spec.options])


def stats_from_indices(C: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Difference-in-means statistic for each row of option indices.

    Units are summed in a fixed order so equal draws give bit-equal values.
    """
    idx = np.atleast_2d(idx)
    out = np.zeros(idx.shape[0])
    for j in range(C.shape[0]):
        out += C[j, idx[:, j]]
    return out / C.shape[0]


def _hotelling_form(reference: np.ndarray):
    ref = np.asarray(reference, dtype=float)
    if ref.ndim == 1:
        ref = ref[:, None]
    L = ref.shape[1]
    if ref.shape[0] < L + 2:
        raise ValueError(f"hotelling needs at least L+2={L + 2} reference draws, got {ref.shape[0]}")
    mu = ref.mean(axis=0)
    cov = np.atleast_2d(np.cov(ref, rowvar=False, ddof=1))
    w, V = np.linalg.eigh(cov)
    top = w.max()
    if not top > 0:
        raise ValueError("degenerate reference distribution: covariance is zero")
    keep = w > PINV_RTOL * top
    Q = (V[:, keep] / w[keep]) @ V[:, keep].T
    return mu, Q


def combine_many(vectors: np.ndarray, reference: np.ndarray | None, method: str) -> np.ndarray:
    """Apply a joint combiner to each row of ``vectors`` (shape ``(m, L)``)."""
    x = np.atleast_2d(np.asarray(vectors, dtype=float))
    if method == "max":
        return np.abs(x).max(axis=1)
    if method == "mean":
        return np.abs(x.mean(axis=1))
    if method == "hotelling":
        mu, Q = _hotelling_form(reference)
        dev = x - mu
        return np.einsum("ij,jk,ik->i", dev, Q, dev)
    raise ValueError(f"unknown combiner {method!r}; choose from {COMBINERS}")


def combine(stat_vector, reference_draws, method: str) -> float:
    """Joint statistic of one L-vector.

    ``max`` is ``max |s_l|``, ``mean`` is ``|mean s_l|`` and ``hotelling`` is
    ``(s - mu)' pinv(Sigma) (s - mu)`` with ``mu`` and ``Sigma`` the mean and
    covariance of ``reference_draws``.
    """
    s = np.atleast_1d(np.asarray(stat_vector, dtype=float))
    if s.size < 1:
        raise ValueError("need at least one statistic")
    return float(combine_many(s[None, :], reference_draws, method)[0])
