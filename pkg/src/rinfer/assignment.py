"""Treatment Reversal (TR) and Adoption Timing (AT) assignment mechanisms.

A draw is stored as one option index per unit. For TR the options are the
reversal bits ``(0, 1)``; for AT they are the sorted adoption offsets of the
support, relative to the actual adoption period.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import rng
from .panel import WindowView

__all__ = [
    "MechanismSpec",
    "AssignmentDraw",
    "AssignmentMatrix",
    "AssignmentError",
    "DEFAULT_CAP",
    "factual_draw",
    "sample_draw",
    "enumerate_draws",
    "expand",
    "space_size",
]

DEFAULT_CAP = 2**20


class AssignmentError(ValueError):
    pass


@dataclass(frozen=True)
class MechanismSpec:
    """Assignment mechanism.

    ``kind`` is ``"tr"`` or ``"at"``. An AT spec either lists its ``support``
    (offsets from the adoption period) or gives ``backdate = k``, shorthand for
    ``{-k, ..., 0}``. With neither, :meth:`for_tau` uses ``backdate = tau - 1``.
    """

    kind: str = "tr"
    support: tuple[int, ...] | None = None
    backdate: int | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in ("tr", "at"):
            raise AssignmentError(f"mechanism must be 'tr' or 'at', got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "tr" and (self.support is not None or self.backdate is not None):
            raise AssignmentError("the TR mechanism takes no support or backdate")
        if self.support is not None and self.backdate is not None:
            raise AssignmentError("give either an AT support or a backdate, not both")
        if self.support is not None:
            if len(self.support) == 0:
                raise AssignmentError("AT support must be nonempty")
            object.__setattr__(self, "support", tuple(sorted({int(s) for s in self.support})))
        if self.backdate is not None and int(self.backdate) < 0:
            raise AssignmentError(f"backdate must be >= 0, got {self.backdate}")

    @property
    def resolved(self) -> bool:
        return self.kind == "tr" or self.support is not None

    @property
    def options(self) -> tuple[int, ...]:
        if self.kind == "tr":
            return (0, 1)
        if self.support is None:
            raise AssignmentError("AT support unknown; call for_tau(tau) first")
        return self.support

    @property
    def J(self) -> int:
        return len(self.options)

    def for_tau(self, tau: int) -> "MechanismSpec":
        """Concrete spec for a window of half-length ``tau``.

        AT offsets must lie in ``[-tau + 1, tau - 1]`` so every unit keeps at
        least one treated and one control period. A requested offset of
        exactly ``+tau`` is dropped with a warning; anything else out of range
        is an error.
        """
        if self.kind == "tr":
            return self
        lo, hi = -tau + 1, tau - 1
        if self.support is not None:
            support = list(self.support)
            if tau in support:
                warnings.warn(
                    f"AT offset +{tau} leaves no treated period in a window of "
                    f"tau={tau}; dropping it (forward-dating is capped at tau-1)",
                    stacklevel=2,
                )
                support.remove(tau)
            bad = [s for s in support if not lo <= s <= hi]
            if bad:
                raise AssignmentError(
                    f"AT offsets {bad} fall outside [{lo}, {hi}] for tau={tau}"
                )
            if not support:
                raise AssignmentError(f"AT support is empty for tau={tau}")
            return MechanismSpec("at", tuple(support))
        back = tau - 1 if self.backdate is None else int(self.backdate)
        if back > tau - 1:
            raise AssignmentError(f"backdate {back} exceeds tau-1={tau - 1}")
        return MechanismSpec("at", tuple(range(-back, 1)))

    def cannot_vary(self, tau: int) -> bool:
        """True for the default AT rule at ``tau = 1``, where only offset 0 is admissible."""
        return self.kind == "at" and self.support is None and self.for_tau(tau).J == 1

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.support is not None:
            d["support"] = list(self.support)
        if self.backdate is not None:
            d["backdate"] = self.backdate
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MechanismSpec":
        s = d.get("support")
        return cls(d["kind"], None if s is None else tuple(s), d.get("backdate"))


@dataclass(frozen=True)
class AssignmentDraw:
    """Reversal bits (TR) or adoption offsets (AT), one per unit."""

    kind: str
    values: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class AssignmentMatrix:
    D: np.ndarray


def space_size(spec: MechanismSpec, n: int) -> int:
    return spec.J**n


def _factual_index(spec: MechanismSpec) -> int:
    if spec.kind == "tr":
        return 1
    if 0 not in spec.options:
        raise AssignmentError(
            f"AT support {list(spec.options)} excludes offset 0, so the observed "
            "assignment has probability zero and the p-value is undefined"
        )
    return spec.options.index(0)


def factual_draw(spec: MechanismSpec, n: int) -> AssignmentDraw:
    """The realized assignment: every unit untreated before the adoption period."""
    if spec.kind == "at" and spec.support is None:
        return AssignmentDraw("at", (0,) * n)
    return AssignmentDraw(spec.kind, (spec.options[_factual_index(spec)],) * n)


def draw_indices(spec: MechanismSpec, n: int, seed: int, sims, stream: int = 0) -> np.ndarray:
    """Option indices of shape ``(len(sims), n)`` for the given simulation indices."""
    return rng.bounded(rng.words(seed, sims, n, stream), spec.J)


def sample_draw(spec: MechanismSpec, n: int, seed: int, sim_index: int = 0, stream: int = 0) -> AssignmentDraw:
    """Draw number ``sim_index`` of the seeded stream; identical to the engine's."""
    idx = draw_indices(spec, n, seed, [sim_index], stream)[0]
    opts = spec.options
    return AssignmentDraw(spec.kind, tuple(opts[k] for k in idx))


def enumerate_indices(K: int, n: int, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the lexicographic enumeration of ``{0..K-1}**n``."""
    codes = np.arange(start, stop, dtype=np.int64)
    out = np.empty((len(codes), n), dtype=np.int64)
    for j in range(n - 1, -1, -1):
        out[:, j] = codes % K
        codes //= K
    return out


def check_cap(spec: MechanismSpec, n: int, cap: int = DEFAULT_CAP) -> int:
    size = space_size(spec, n)
    if size > cap:
        raise AssignmentError(
            f"assignment space has {spec.J}^{n} = {size} draws, above the exact-mode "
            f"cap of {cap}; use Monte Carlo mode"
        )
    return size


def enumerate_draws(spec: MechanismSpec, n: int, cap: int = DEFAULT_CAP) -> Iterator[AssignmentDraw]:
    """Every admissible draw once, in lexicographic order. Lazy."""
    check_cap(spec, n, cap)
    opts = spec.options

    def gen():
        for combo in itertools.product(opts, repeat=n):
            yield AssignmentDraw(spec.kind, combo)

    return gen()


def expand(draw: AssignmentDraw, view: WindowView) -> AssignmentMatrix:
    """``n x 2tau`` treatment matrix of a draw over the window's periods."""
    if draw.n != view.n:
        raise AssignmentError(f"draw has {draw.n} units, window has {view.n}")
    t = np.asarray(view.periods)[None, :]
    v = np.asarray(draw.values)[:, None]
    if draw.kind == "tr":
        post = t >= view.a0
        D = np.where(v == 1, post, ~post)
    else:
        D = t >= view.a0 + v
    return AssignmentMatrix(D.astype(np.int8))


def as_indices(spec: MechanismSpec, draw: AssignmentDraw) -> np.ndarray:
    opts = spec.options
    try:
        return np.array([opts.index(v) for v in draw.values], dtype=np.int64)
    except ValueError:
        raise AssignmentError(f"draw {draw.values} has values outside {list(opts)}") from None


def parse_mechanisms(names: Sequence[str] | str, backdate=None, support=None) -> list[MechanismSpec]:
    if isinstance(names, str):
        names = [s for s in names.split(",") if s.strip()]
    out = []
    for name in names:
        name = name.strip().lower()
        if name == "at":
            out.append(MechanismSpec("at", None if support is None else tuple(support), backdate))
        else:
            out.append(MechanismSpec(name))
    return out
