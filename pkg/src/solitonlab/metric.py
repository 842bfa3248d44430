"""Charts (metric component expressions on a coordinate box) and their jets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import dsl

PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
MAX_ORDER = 3
MAX_CONDITION = 1e8


class DomainError(ValueError):
    pass


class MetricError(ValueError):
    """The metric is singular, indefinite or badly conditioned at a point."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = False

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above & below

    def covers(self, lo: float, hi: float) -> bool:
        """True when the open interval (lo, hi) lies inside this one."""
        return lo >= self.lo and hi <= self.hi and lo < hi


REAL_LINE = Interval(-math.inf, math.inf)


@dataclass(frozen=True)
class Domain:
    axes: tuple[Interval, Interval, Interval] = (REAL_LINE, REAL_LINE, REAL_LINE)

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for k, iv in enumerate(self.axes):
            ok &= iv.contains(pts[..., k])
        return ok


@dataclass(frozen=True)
class MetricSpec:
    """A single chart: six component expressions g_ij (i <= j) on a box."""

    name: str
    components: Mapping[tuple[int, int], dsl.Expr]
    domain: Domain = Domain()
    parameters: Mapping[str, float] = field(default_factory=dict)
    coords: tuple[str, str, str] = dsl.COORDS

    def __post_init__(self):
        keys = set(self.components)
        if keys != set(PAIRS):
            missing = sorted(set(PAIRS) - keys)
            extra = sorted(keys - set(PAIRS))
            raise MetricError(f"metric needs components {PAIRS}; missing {missing}, unexpected {extra}")
        for pair, expr in self.components.items():
            unbound = dsl.free_parameters(expr) - set(self.parameters)
            if unbound:
                raise MetricError(f"component g{pair} uses undeclared parameters {sorted(unbound)}")

    @classmethod
    def from_strings(
        cls,
        name: str,
        components: Mapping[str, str] | Mapping[tuple[int, int], str],
        domain: Domain = Domain(),
        parameters: Mapping[str, float] | None = None,
        coords: Sequence[str] = dsl.COORDS,
    ) -> "MetricSpec":
        """Build a spec from DSL strings keyed ``"g00"``-style or by index pair.

        Omitted off-diagonal entries default to zero.
        """
        parameters = dict(parameters or {})
        parsed: dict[tuple[int, int], dsl.Expr] = {}
        for key, src in components.items():
            if isinstance(key, str):
                digits = key[1:] if key.startswith("g") else key
                if len(digits) != 2 or not digits.isdigit():
                    raise MetricError(f"bad component key {key!r}")
                i, j = int(digits[0]), int(digits[1])
            else:
                i, j = key
            i, j = min(i, j), max(i, j)
            if (i, j) not in PAIRS:
                raise MetricError(f"component index {(i, j)} out of range")
            if (i, j) in parsed:
                raise MetricError(f"component g{i}{j} given twice")
            parsed[(i, j)] = dsl.parse_expression(str(src), tuple(parameters), tuple(coords))
        for pair in PAIRS:
            if pair not in parsed:
                if pair[0] == pair[1]:
                    raise MetricError(f"diagonal component g{pair[0]}{pair[1]} is required")
                parsed[pair] = dsl.ZERO
        return cls(name, parsed, domain, parameters, tuple(coords))

    def parse(self, source: str) -> dsl.Expr:
        """Parse an auxiliary expression (e.g. a potential) in this chart's coordinates."""
        return dsl.parse_expression(source, tuple(self.parameters), self.coords)

    @cached_property
    def derivative_table(self) -> dict[tuple[int, int], dict[tuple[int, ...], dsl.Expr]]:
        table = {}
        for pair, expr in self.components.items():
            entry = {(): expr}
            for order in range(1, MAX_ORDER + 1):
                for axes in itertools.combinations_with_replacement(range(3), order):
                    entry[axes] = dsl.differentiate(entry[axes[:-1]], axes[-1])
            table[pair] = entry
        return table


@dataclass(frozen=True)
class MetricJet:
    """g and its coordinate partials up to ``order`` at one point or a batch.

    Index layout: ``dg[..., i, j, k] = d_k g_ij``,
    ``d2g[..., i, j, k, l] = d_k d_l g_ij`` and so on.  Slots above ``order``
    are zero-filled.
    """

    point: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    d3g: np.ndarray
    order: int

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.g.shape[:-2]

    def take(self, index) -> "MetricJet":
        return MetricJet(
            self.point[index], self.g[index], self.dg[index], self.d2g[index], self.d3g[index], self.order
        )


def check_positive_definite(g: np.ndarray) -> None:
    """Leading-minor test plus a condition-number cap."""
    m1 = g[..., 0, 0]
    m2 = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    m3 = np.linalg.det(g)
    if not (np.all(m1 > 0) and np.all(m2 > 0) and np.all(m3 > 0)):
        raise MetricError("metric is not positive-definite (leading-minor test failed)")
    eig = np.linalg.eigvalsh(g)
    cond = eig[..., -1] / eig[..., 0]
    if np.any(cond > MAX_CONDITION):
        raise MetricError(f"metric condition number {float(np.max(cond)):.3g} exceeds {MAX_CONDITION:g}")


def metric_jet(spec: MetricSpec, point, order: int = 2) -> MetricJet:
    """Evaluate the exact symbolic jet of ``spec`` at ``point`` (``(3,)`` or ``(N, 3)``)."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be in 0..{MAX_ORDER}")
    pts = np.asarray(point, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError("points must have a trailing axis of length 3")
    inside = spec.domain.contains(pts)
    if not np.all(inside):
        bad = pts[~inside] if pts.ndim > 1 else pts
        raise DomainError(f"point {np.asarray(bad).reshape(-1, 3)[0].tolist()} is outside the domain of {spec.name}")

    batch = pts.shape[:-1]
    slots = [np.zeros(batch + (3, 3) + (3,) * k) for k in range(MAX_ORDER + 1)]
    table = spec.derivative_table
    for (i, j), entry in table.items():
        for axes, expr in entry.items():
            k = len(axes)
            if k > order:
                continue
            value = dsl.evaluate(expr, pts, spec.parameters)
            for perm in set(itertools.permutations(axes)):
                slots[k][(Ellipsis, i, j) + perm] = value
                slots[k][(Ellipsis, j, i) + perm] = value
    check_positive_definite(slots[0])
    return MetricJet(pts, slots[0], slots[1], slots[2], slots[3], order)
