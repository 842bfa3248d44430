"""Built-in charts for the model geometries and test fixtures, and grid sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import dsl
from .metric import Domain, DomainError, Interval, MetricSpec, REAL_LINE

ConstantCurvature = "ConstantCurvature"
SemiSymmetric = "SemiSymmetric"
PseudoSymmetricConstantType = "PseudoSymmetricConstantType"
PseudoSymmetricVariable = "PseudoSymmetricVariable"
NotPseudoSymmetric = "NotPseudoSymmetric"


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class KnownSoliton:
    kind: str  # "ricci" or "yamabe"
    potential: str
    lam: float


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    spec: MetricSpec
    box: tuple[tuple[float, float], ...]
    ricci_eigenvalues: tuple[str, str, str]  # ascending, DSL in chart coordinates
    scalar: str
    verdict: str
    solitons: tuple[KnownSoliton, ...] = ()
    description: str = ""

    def expected_eigenvalues(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        cols = [
            np.broadcast_to(dsl.evaluate(self.spec.parse(src), pts, self.spec.parameters), pts.shape[:-1])
            for src in self.ricci_eigenvalues
        ]
        return np.stack(cols, axis=-1)

    def expected_scalar(self, points):
        return dsl.evaluate(self.spec.parse(self.scalar), points, self.spec.parameters)

    def random_points(self, n: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return lo + (hi - lo) * rng.uniform(0.02, 0.98, size=(n, 3))


def _positive(name: str, value: float) -> float:
    if not value > 0:
        raise CatalogError(f"parameter {name} must be positive, got {value}")
    return float(value)


def _euclidean(p):
    spec = MetricSpec.from_strings("euclidean", {"g00": "1", "g11": "1", "g22": "1"})
    return CatalogEntry(
        "euclidean", spec, ((-1, 1),) * 3, ("0", "0", "0"), "0", ConstantCurvature,
        (
            KnownSoliton("ricci", "(x0^2 + x1^2 + x2^2)/2", 1.0),
            KnownSoliton("yamabe", "(x0^2 + x1^2 + x2^2)/2", 1.0),
        ),
        "flat R^3",
    )


def _sphere3(p):
    k = _positive("kappa", p.get("kappa", 1.0))
    c = "4/(1 + kappa*(x0^2 + x1^2 + x2^2))^2"
    spec = MetricSpec.from_strings("sphere3", {"g00": c, "g11": c, "g22": c}, parameters={"kappa": k})
    return CatalogEntry(
        "sphere3", spec, ((-1, 1),) * 3, ("2*kappa",) * 3, "6*kappa", ConstantCurvature,
        (KnownSoliton("ricci", "0", 2 * k),),
        "round S^3 in stereographic coordinates, sectional curvature kappa",
    )


def _hyperbolic3(p):
    k = _positive("kappa", p.get("kappa", 1.0))
    c = "1/(kappa*x2^2)"
    domain = Domain((REAL_LINE, REAL_LINE, Interval(0.0, math.inf)))
    spec = MetricSpec.from_strings(
        "hyperbolic3", {"g00": c, "g11": c, "g22": c}, domain, {"kappa": k}
    )
    return CatalogEntry(
        "hyperbolic3", spec, ((-1, 1), (-1, 1), (0.5, 2.0)), ("-2*kappa",) * 3, "-6*kappa",
        ConstantCurvature, (KnownSoliton("ricci", "0", -2 * k),),
        "upper half-space model of H^3, sectional curvature -kappa",
    )


def _r_x_s2(p):
    k = _positive("kappa", p.get("kappa", 1.0))
    domain = Domain((REAL_LINE, Interval(0.2, math.pi - 0.2), REAL_LINE))
    spec = MetricSpec.from_strings(
        "r_x_s2",
        {"g00": "1", "g11": "1/kappa", "g22": "sin(theta)^2/kappa"},
        domain, {"kappa": k}, ("t", "theta", "phi"),
    )
    return CatalogEntry(
        "r_x_s2", spec, ((-1, 1), (0.3, math.pi - 0.3), (0, 3)), ("0", "kappa", "kappa"), "2*kappa",
        SemiSymmetric,
        (KnownSoliton("ricci", f"{k!r}*t^2/2", k), KnownSoliton("yamabe", "t", 2 * k)),
        "round cylinder R x S^2",
    )


def _r_x_h2(p):
    k = _positive("kappa", p.get("kappa", 1.0))
    domain = Domain((REAL_LINE, REAL_LINE, Interval(0.0, math.inf)))
    spec = MetricSpec.from_strings(
        "r_x_h2",
        {"g00": "1", "g11": "1/(kappa*y^2)", "g22": "1/(kappa*y^2)"},
        domain, {"kappa": k}, ("t", "x", "y"),
    )
    return CatalogEntry(
        "r_x_h2", spec, ((-1, 1), (-1, 1), (0.5, 2.0)), ("-kappa", "-kappa", "0"), "-2*kappa",
        SemiSymmetric,
        (KnownSoliton("ricci", f"-{k!r}*t^2/2", -k), KnownSoliton("yamabe", "t", -2 * k)),
        "hyperbolic cylinder R x H^2",
    )


def _nil3(p):
    spec = MetricSpec.from_strings(
        "nil3", {"g00": "1", "g11": "1 + x^2", "g12": "-x", "g22": "1"}, coords=("x", "y", "z")
    )
    return CatalogEntry(
        "nil3", spec, ((-1, 1),) * 3, ("-1/2", "-1/2", "1/2"), "-1/2", PseudoSymmetricConstantType, (),
        "Heisenberg group, dx^2 + dy^2 + (dz - x dy)^2",
    )


def _sol3(p):
    spec = MetricSpec.from_strings(
        "sol3", {"g00": "exp(2*z)", "g11": "exp(-2*z)", "g22": "1"}, coords=("x", "y", "z")
    )
    return CatalogEntry(
        "sol3", spec, ((-1, 1),) * 3, ("-2", "0", "0"), "-2", PseudoSymmetricConstantType, (),
        "Sol geometry, e^{2z} dx^2 + e^{-2z} dy^2 + dz^2",
    )


def _r_x_cigar(p):
    c = "1/(1 + x^2 + y^2)"
    spec = MetricSpec.from_strings("r_x_cigar", {"g00": "1", "g11": c, "g22": c}, coords=("t", "x", "y"))
    return CatalogEntry(
        "r_x_cigar", spec, ((-1, 1),) * 3, ("0", "2/(1 + x^2 + y^2)", "2/(1 + x^2 + y^2)"),
        "4/(1 + x^2 + y^2)", SemiSymmetric,
        (KnownSoliton("ricci", "-log(1 + x^2 + y^2)", 0.0),),
        "R x cigar; the cigar factor is a steady gradient Ricci soliton",
    )


_BUILDERS = {
    "euclidean": (_euclidean, ()),
    "sphere3": (_sphere3, ("kappa",)),
    "hyperbolic3": (_hyperbolic3, ("kappa",)),
    "r_x_s2": (_r_x_s2, ("kappa",)),
    "r_x_h2": (_r_x_h2, ("kappa",)),
    "nil3": (_nil3, ()),
    "sol3": (_sol3, ()),
    "r_x_cigar": (_r_x_cigar, ()),
}

CATALOG_NAMES = tuple(_BUILDERS)


def catalog_lookup(name: str, params: Mapping[str, float] | None = None) -> CatalogEntry:
    try:
        builder, accepted = _BUILDERS[name]
    except KeyError:
        raise CatalogError(f"unknown catalog entry {name!r}; choose from {', '.join(CATALOG_NAMES)}") from None
    params = dict(params or {})
    unknown = set(params) - set(accepted)
    if unknown:
        raise CatalogError(f"{name} does not take parameters {sorted(unknown)}")
    return builder(params)


# -- grids -------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Interior lattice: ``counts[k]`` points strictly inside ``box[k]``.

    Points sit at ``lo + (m + 1) * (hi - lo) / (n + 1)`` for ``m = 0..n-1``.
    """

    box: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    counts: tuple[int, int, int]

    def __post_init__(self):
        if len(self.box) != 3 or len(self.counts) != 3:
            raise ValueError("grid needs three axes")
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"empty grid interval ({lo}, {hi})")
        if any(int(n) < 1 for n in self.counts):
            raise ValueError("grid counts must be positive")

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n + 1) for (lo, hi), n in zip(self.box, self.counts)])

    def axes(self) -> list[np.ndarray]:
        return [lo + (np.arange(n) + 1) * (hi - lo) / (n + 1) for (lo, hi), n in zip(self.box, self.counts)]

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.counts)

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same box, spacing divided by ``factor``."""
        return GridSpec(self.box, tuple(factor * (n + 1) - 1 for n in self.counts))


def sample_grid(grid: GridSpec, domain: Domain | None = None, for_fitting: bool = False) -> np.ndarray:
    """Row-major (last axis fastest) array of shape ``(N, 3)``."""
    if for_fitting and min(grid.counts) < 3:
        raise ValueError("fitting grids need at least 3 points per axis")
    if domain is not None:
        for k, ((lo, hi), iv) in enumerate(zip(grid.box, domain.axes)):
            if not iv.covers(lo, hi):
                raise DomainError(f"grid axis {k} range ({lo}, {hi}) leaves the chart domain ({iv.lo}, {iv.hi})")
    mesh = np.meshgrid(*grid.axes(), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def parse_grid(text: str) -> GridSpec:
    """Parse the compact grid syntax ``"(-1,1)^3:5"`` or ``"(a,b)x(c,d)x(e,f):n1,n2,n3"``."""
    try:
        box_part, count_part = text.replace(" ", "").rsplit(":", 1)
        if box_part.endswith("^3"):
            lo, hi = (float(v) for v in box_part[:-2].strip("()").split(","))
            box = ((lo, hi),) * 3
        else:
            pieces = box_part.split(")x(")
            box = tuple(tuple(float(v) for v in piece.strip("()").split(",")) for piece in pieces)
        counts = [int(c) for c in count_part.split(",")]
        if len(counts) == 1:
            counts = counts * 3
        return GridSpec(tuple(box), tuple(counts))
    except ValueError as exc:
        raise ValueError(f"cannot parse grid {text!r}: {exc}") from None


def box_diameter(box: Sequence[Sequence[float]]) -> float:
    return float(math.sqrt(sum((hi - lo) ** 2 for lo, hi in box)))
