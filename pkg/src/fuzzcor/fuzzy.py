"""Trapezoidal fuzzy numbers, granule banks and inclusion degrees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySample, InvalidFuzzyNumber, PartitionInvalid


@dataclass(frozen=True)
class FuzzyNumber:
    """Trapezoid (x_l, c_1, c_2, x_u); triangles, rectangles and points are special cases."""

    xl: float
    c1: float
    c2: float
    xu: float

    def __post_init__(self):
        vals = (self.xl, self.c1, self.c2, self.xu)
        if not all(np.isfinite(vals)):
            raise InvalidFuzzyNumber(f"non-finite parameter in {vals}")
        if not (self.xl <= self.c1 <= self.c2 <= self.xu):
            raise InvalidFuzzyNumber(f"need xl <= c1 <= c2 <= xu, got {vals}")

    @classmethod
    def crisp(cls, value: float) -> "FuzzyNumber":
        v = float(value)
        return cls(v, v, v, v)

    @classmethod
    def triangular(cls, lo: float, mode: float, hi: float) -> "FuzzyNumber":
        return cls(lo, mode, mode, hi)

    @classmethod
    def rectangular(cls, lo: float, hi: float) -> "FuzzyNumber":
        return cls(lo, lo, hi, hi)

    @property
    def is_degenerate(self) -> bool:
        return self.xl == self.xu

    @property
    def is_triangular(self) -> bool:
        return self.c1 == self.c2

    @property
    def is_rectangular(self) -> bool:
        return self.xl == self.c1 and self.c2 == self.xu

    @property
    def support(self) -> tuple[float, float]:
        return self.xl, self.xu

    @property
    def length(self) -> float:
        return self.xu - self.xl

    @property
    def knots(self) -> tuple[float, float, float, float]:
        return self.xl, self.c1, self.c2, self.xu

    def __call__(self, x):
        return membership(self, x)

    def to_dict(self) -> dict:
        if self.is_degenerate:
            return {"crisp": self.xl}
        return {"xl": self.xl, "c1": self.c1, "c2": self.c2, "xu": self.xu}

    @classmethod
    def from_obj(cls, obj) -> "FuzzyNumber":
        """Parse a JSON record, the ``{"crisp": v}`` shorthand, or a bare number."""
        if isinstance(obj, FuzzyNumber):
            return obj
        if isinstance(obj, (int, float)) and not isinstance(obj, bool):
            return cls.crisp(obj)
        if isinstance(obj, dict):
            if "crisp" in obj:
                return cls.crisp(obj["crisp"])
            try:
                return cls(float(obj["xl"]), float(obj["c1"]), float(obj["c2"]), float(obj["xu"]))
            except KeyError as exc:
                raise InvalidFuzzyNumber(f"fuzzy number record missing key {exc}") from None
        if isinstance(obj, (list, tuple)) and len(obj) == 4:
            return cls(*map(float, obj))
        raise InvalidFuzzyNumber(f"cannot interpret {obj!r} as a fuzzy number")


def membership(f: FuzzyNumber, x):
    """Piecewise-linear trapezoid membership; exact 1 on the plateau, 0 off support."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    out[(x >= f.c1) & (x <= f.c2)] = 1.0
    if f.c1 > f.xl:
        left = (x > f.xl) & (x < f.c1)
        out[left] = (x[left] - f.xl) / (f.c1 - f.xl)
    if f.xu > f.c2:
        right = (x > f.c2) & (x < f.xu)
        out[right] = (f.xu - x[right]) / (f.xu - f.c2)
    return float(out) if out.ndim == 0 else out


def cardinality(f: FuzzyNumber) -> float:
    """Area under the membership function (sigma-count of the continuous set)."""
    return ((f.xu - f.xl) + (f.c2 - f.c1)) / 2.0


def _min_integral(a: FuzzyNumber, g: FuzzyNumber) -> float:
    """Exact integral of min(a, g): trapezoid rule on knots plus leg crossings."""
    lo, hi = max(a.xl, g.xl), min(a.xu, g.xu)
    if hi <= lo:
        return 0.0
    pts = sorted({p for p in (*a.knots, *g.knots) if lo <= p <= hi} | {lo, hi})
    xs = [pts[0]]
    for x0, x1 in zip(pts[:-1], pts[1:]):
        d0 = membership(a, x0) - membership(g, x0)
        d1 = membership(a, x1) - membership(g, x1)
        if d0 * d1 < 0:
            xs.append(x0 + (x1 - x0) * d0 / (d0 - d1))
        xs.append(x1)
    xs = np.array(xs)
    ys = np.minimum(membership(a, xs), membership(g, xs))
    return float(np.sum((ys[1:] + ys[:-1]) * np.diff(xs)) / 2.0)


def inclusion_degree(a: FuzzyNumber, g: FuzzyNumber) -> float:
    """|min(a, g)| / max(1, |a|), clamped to [0, 1].

    A degenerate observation has zero area, so the ratio would always be 0;
    instead it takes the granule's membership at the observed point, which is
    the limit of shrinking trapezoids around that point.
    """
    if a.is_degenerate:
        return float(membership(g, a.xl))
    eps = _min_integral(a, g) / max(1.0, cardinality(a))
    return float(min(1.0, max(0.0, eps)))


def inclusion_degrees(sample: Sequence[FuzzyNumber], g: FuzzyNumber) -> np.ndarray:
    return np.array([inclusion_degree(a, g) for a in sample])


def sample_range(sample: Sequence[FuzzyNumber], literal: bool = False) -> tuple[float, float]:
    """Range of a fuzzy sample.

    Default is the hull of the supports.  ``literal=True`` takes both endpoints
    from the support infima, as in the printed definition.
    """
    if len(sample) == 0:
        raise EmptySample("sample_range needs at least one observation")
    lows = [a.xl for a in sample]
    if literal:
        return min(lows), max(lows)
    return min(lows), max(a.xu for a in sample)


@dataclass(frozen=True)
class PartitionReport:
    max_deviation: float
    worst_x: float
    length_ok: bool | None
    max_obs_length: float | None = None
    min_granule_length: float | None = None


class FuzzyPartition:
    """Ordered bank of granules over a closed domain."""

    def __init__(self, granules: Sequence[FuzzyNumber], domain: tuple[float, float] | None = None):
        self.granules = tuple(FuzzyNumber.from_obj(g) for g in granules)
        if not self.granules:
            raise PartitionInvalid("a partition needs at least one granule")
        if domain is None:
            domain = (min(g.xl for g in self.granules), max(g.xu for g in self.granules))
        self.domain = (float(domain[0]), float(domain[1]))

    def __len__(self):
        return len(self.granules)

    def __iter__(self):
        return iter(self.granules)

    def __getitem__(self, i):
        return self.granules[i]

    def memberships(self, x) -> np.ndarray:
        """Array (n_granules, len(x)) of memberships."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([membership(g, x) for g in self.granules])

    def to_list(self) -> list:
        return [g.to_dict() for g in self.granules]

    @classmethod
    def from_list(cls, items, domain=None) -> "FuzzyPartition":
        return cls([FuzzyNumber.from_obj(o) for o in items], domain)

    def __repr__(self):
        return f"FuzzyPartition({len(self.granules)} granules over {self.domain})"


def validate_partition(
    p: FuzzyPartition,
    tol: float = 1e-8,
    sample: Sequence[FuzzyNumber] | None = None,
    n_grid: int = 1000,
    raise_on_error: bool = True,
) -> PartitionReport:
    """Check sum-to-one on a grid over the domain, the left-endpoint order and,
    when a sample is supplied, the observation-length condition."""
    lefts = [g.xl for g in p.granules]
    if any(b <= a for a, b in zip(lefts[:-1], lefts[1:])):
        if raise_on_error:
            raise PartitionInvalid(f"granule left endpoints not strictly increasing: {lefts}")
    grid = np.linspace(p.domain[0], p.domain[1], n_grid)
    dev = np.abs(p.memberships(grid).sum(axis=0) - 1.0)
    i = int(np.argmax(dev))
    length_ok = None
    max_obs = min_gran = None
    if sample is not None and len(sample) > 0:
        max_obs = max(a.length for a in sample)
        min_gran = min(g.length for g in p.granules)
        length_ok = max_obs <= min_gran
    report = PartitionReport(float(dev[i]), float(grid[i]), length_ok, max_obs, min_gran)
    if raise_on_error:
        if dev[i] > tol:
            raise PartitionInvalid(
                f"memberships sum to {1.0 + (p.memberships(grid[i]).sum() - 1.0):.6g} at x={grid[i]:.6g} "
                f"(deviation {dev[i]:.3g} > {tol:g})",
                worst_x=float(grid[i]),
                deviation=float(dev[i]),
            )
        if length_ok is False:
            raise PartitionInvalid(
                f"longest observation support {max_obs:.6g} exceeds shortest granule {min_gran:.6g}"
            )
    return report
