"""Pseudo-symmetry: the derivation actions R.T and Q(g, T), L estimation, classification.

Two independent routes give the pseudo-symmetry function L at a point:

* tensor route: least-squares projection of R.R onto Q(g, R);
* spectral route: the simple Ricci eigenvalue halved (Ricci eigenvalues of a
  pseudo-symmetric 3-manifold off the constant-curvature set are
  ``(mu, mu, 2L)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import eigen3
from .catalog import (
    ConstantCurvature,
    NotPseudoSymmetric,
    PseudoSymmetricConstantType,
    PseudoSymmetricVariable,
    SemiSymmetric,
)
from .tensors import CurvatureBundle, G_tensor, orthonormal_frame, take, tensor_norm, to_frame

ALL_EQUAL = "all-equal"
PAIR = "pair"
ALL_DISTINCT = "all-distinct"


@dataclass(frozen=True)
class Tolerances:
    constant_curvature: float = 1e-8  # |R - (r/6) G| relative to max(1, |R|)
    multiplicity: float = 1e-6  # eigenvalue gap relative to max(1, spectral radius)
    semi: float = 1e-8  # |L| below which a pair pattern is semi-symmetric
    degenerate: float = 1e-9  # |Q(g, R)| below which L is not estimated
    cross_check: float = 1e-6  # |L_tensor - L_spectral| relative to max(1, |L|)
    semi_condition: float = 1e-6  # eigenvalue condition relative to scale^2
    region: float = 1e-6  # stdev(L) / max(1, |mean L|) for constant type

    def updated(self, **overrides: float) -> "Tolerances":
        for name, value in overrides.items():
            if name not in self.__dataclass_fields__:
                raise ValueError(f"unknown tolerance {name!r}")
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive")
        return Tolerances(**{**self.__dict__, **{k: float(v) for k, v in overrides.items()}})


DEFAULT_TOLERANCES = Tolerances()


# -- derivation actions -----------------------------------------------------

def _act(endo: np.ndarray, T: np.ndarray, k: int) -> np.ndarray:
    """``-sum_s T(..., A(X, Y) X_s, ...)`` with ``endo[m, x, y, a]`` the components of A(d_x, d_y) d_a."""
    if k not in (2, 4):
        raise ValueError(f"unsupported tensor rank {k}; expected 2 or 4")
    if k == 2:
        out = np.einsum("...mxya,...mb->...abxy", endo, T) + np.einsum("...mxyb,...am->...abxy", endo, T)
    else:
        out = (
            np.einsum("...mxya,...mbcd->...abcdxy", endo, T)
            + np.einsum("...mxyb,...amcd->...abcdxy", endo, T)
            + np.einsum("...mxyc,...abmd->...abcdxy", endo, T)
            + np.einsum("...mxyd,...abcm->...abcdxy", endo, T)
        )
    return -out


def curvature_action(T: np.ndarray, bundle: CurvatureBundle, k: int) -> np.ndarray:
    """R.T: the curvature endomorphisms R(X, Y) acting as derivations; (X, Y) are the last two slots."""
    return _act(bundle.riemann13, T, k)


def wedge_endomorphisms(g: np.ndarray) -> np.ndarray:
    """``W[m, x, y, a]``: components of ``(d_x ^_g d_y) d_a = g_ya d_x - g_xa d_y``."""
    eye = np.broadcast_to(np.eye(3), g.shape)
    return np.einsum("...mx,...ya->...mxya", eye, g) - np.einsum("...my,...xa->...mxya", eye, g)


def q_tensor(T: np.ndarray, g: np.ndarray, k: int) -> np.ndarray:
    """Q(g, T): the metric wedges acting as derivations."""
    return _act(wedge_endomorphisms(g), T, k)


def g_inner(A: np.ndarray, B: np.ndarray, g: np.ndarray, rank: int) -> np.ndarray:
    E = orthonormal_frame(g)
    a = to_frame(A, E, rank)
    b = to_frame(B, E, rank)
    return np.sum(a * b, axis=tuple(range(-rank, 0)))


@dataclass(frozen=True)
class LEstimate:
    L: float | None
    residual: float
    degenerate: bool
    norm_RR: float
    norm_Q: float


def estimate_L(RdotR: np.ndarray, QgR: np.ndarray, g: np.ndarray, scale: float = 1.0,
               tol: float = DEFAULT_TOLERANCES.degenerate) -> LEstimate:
    """Project R.R onto Q(g, R) in the g-inner product (single point).

    ``scale`` is the curvature norm |R|; the residual denominator is
    ``max(|R.R|, |R|^2)`` so that semi-symmetric points do not divide noise by noise.
    """
    rr = float(np.sqrt(g_inner(RdotR, RdotR, g, 6)))
    qq = float(np.sqrt(g_inner(QgR, QgR, g, 6)))
    denom = max(rr, scale**2, 1e-300)
    if qq <= tol * max(1.0, scale):
        return LEstimate(None, rr / denom, True, rr, qq)
    L = float(g_inner(RdotR, QgR, g, 6)) / qq**2
    E = orthonormal_frame(g)
    diff = to_frame(RdotR - L * QgR, E, 6)
    return LEstimate(L, float(np.sqrt(np.sum(diff**2))) / denom, False, rr, qq)


# -- spectra ------------------------------------------------------------------

@dataclass(frozen=True)
class RicciSpectrum:
    eigenvalues: tuple[float, float, float]  # ascending
    pattern: str
    simple_index: int | None
    tolerance: float
    ambiguous: bool = False

    @property
    def scale(self) -> float:
        return max(1.0, max(abs(v) for v in self.eigenvalues))

    @property
    def simple(self) -> float | None:
        return None if self.simple_index is None else self.eigenvalues[self.simple_index]

    @property
    def mu(self) -> float | None:
        """The double eigenvalue (mean of the merged pair, which keeps full precision)."""
        if self.pattern == ALL_EQUAL:
            return sum(self.eigenvalues) / 3.0
        if self.pattern != PAIR:
            return None
        pair = [v for i, v in enumerate(self.eigenvalues) if i != self.simple_index]
        return 0.5 * (pair[0] + pair[1])

    @property
    def L_spectral(self) -> float | None:
        return None if self.simple is None else 0.5 * self.simple


def normalized_ricci(bundle: CurvatureBundle) -> np.ndarray:
    """Ricci tensor in the Cholesky orthonormal frame (a symmetric matrix)."""
    return to_frame(bundle.ricci, orthonormal_frame(bundle.g), 2)


def group_eigenvalues(values, tol: float) -> RicciSpectrum:
    mu1, mu2, mu3 = (float(v) for v in values)
    scale = max(1.0, abs(mu1), abs(mu2), abs(mu3))
    thr = tol * scale
    low = mu2 - mu1 <= thr
    high = mu3 - mu2 <= thr
    if low and high:
        return RicciSpectrum((mu1, mu2, mu3), ALL_EQUAL, None, tol, ambiguous=mu3 - mu1 > thr)
    if low:
        return RicciSpectrum((mu1, mu2, mu3), PAIR, 2, tol)
    if high:
        return RicciSpectrum((mu1, mu2, mu3), PAIR, 0, tol)
    return RicciSpectrum((mu1, mu2, mu3), ALL_DISTINCT, None, tol)


def ricci_spectrum(bundle: CurvatureBundle, tol: float = DEFAULT_TOLERANCES.multiplicity) -> RicciSpectrum:
    return group_eigenvalues(eigen3.symmetric_eigenvalues(normalized_ricci(bundle)), tol)


def semi_symmetry_condition(spectrum: RicciSpectrum, r: float,
                            tol: float = DEFAULT_TOLERANCES.semi_condition) -> bool:
    """``(mu_i - mu_j)(2(mu_i + mu_j) - r) == 0`` for every pair, within ``tol * scale^2``."""
    mus = spectrum.eigenvalues
    bound = tol * spectrum.scale**2
    for i in range(3):
        for j in range(i + 1, 3):
            if abs((mus[i] - mus[j]) * (2.0 * (mus[i] + mus[j]) - r)) > bound:
                return False
    return True


# -- classification -------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryVerdict:
    cls: str
    L_tensor: float | None
    L_spectral: float | None
    dependence_residual: float
    in_set_U: bool
    spectrum: RicciSpectrum
    scalar: float
    deviation: float  # |R - (r/6) G|
    semi_symmetric_condition: bool
    routes_agree: bool | None = None

    @property
    def L(self) -> float | None:
        if self.cls in (SemiSymmetric, PseudoSymmetricVariable, PseudoSymmetricConstantType):
            return self.L_spectral
        return None

    @property
    def mu(self) -> float | None:
        return self.spectrum.mu


def classify_point(bundle: CurvatureBundle, tolerances: Tolerances = DEFAULT_TOLERANCES) -> SymmetryVerdict:
    if bundle.batch_shape != ():
        raise ValueError("classify_point expects a single-point bundle; use classify_points")
    g, R = bundle.g, bundle.riemann04
    r = float(bundle.scalar)
    normR = float(tensor_norm(R, g, 4))
    deviation = float(tensor_norm(R - (r / 6.0) * G_tensor(g), g, 4))
    in_U = deviation > tolerances.constant_curvature * max(1.0, normR)

    spectrum = ricci_spectrum(bundle, tolerances.multiplicity)
    semi_cond = semi_symmetry_condition(spectrum, r, tolerances.semi_condition)
    RR = curvature_action(R, bundle, 4)
    Q = q_tensor(R, g, 4)
    est = estimate_L(RR, Q, g, normR, tolerances.degenerate)

    if not in_U or spectrum.pattern == ALL_EQUAL:
        # Einstein in dimension 3 is constant curvature; L is undefined there.
        return SymmetryVerdict(ConstantCurvature, None, None, est.residual, in_U, spectrum, r, deviation, semi_cond)
    if spectrum.pattern == ALL_DISTINCT:
        return SymmetryVerdict(NotPseudoSymmetric, est.L, None, est.residual, True, spectrum, r, deviation, semi_cond)

    L_spec = spectrum.L_spectral
    agree = None
    if est.L is not None:
        agree = abs(est.L - L_spec) <= tolerances.cross_check * max(1.0, abs(L_spec))
    cls = SemiSymmetric if abs(L_spec) <= tolerances.semi * spectrum.scale else PseudoSymmetricVariable
    return SymmetryVerdict(cls, est.L, L_spec, est.residual, True, spectrum, r, deviation, semi_cond, agree)


def classify_points(bundle: CurvatureBundle, tolerances: Tolerances = DEFAULT_TOLERANCES) -> list[SymmetryVerdict]:
    if bundle.batch_shape == ():
        return [classify_point(bundle, tolerances)]
    n = int(np.prod(bundle.batch_shape))
    flat = _flatten(bundle)
    return [classify_point(take(flat, i), tolerances) for i in range(n)]


def _flatten(bundle: CurvatureBundle) -> CurvatureBundle:
    nb = len(bundle.batch_shape)
    values = {}
    for name, value in vars(bundle).items():
        if isinstance(value, np.ndarray):
            values[name] = value.reshape((-1,) + value.shape[nb:])
        else:
            values[name] = value
    return CurvatureBundle(**values)


@dataclass(frozen=True)
class RegionVerdict:
    cls: str
    count: int
    class_counts: dict[str, int] = field(default_factory=dict)
    mean_L: float | None = None
    stdev_L: float | None = None
    min_residual: float | None = None
    max_residual: float | None = None
    min_mu: float | None = None
    max_mu: float | None = None
    max_route_gap: float | None = None


MIN_REGION_POINTS = 8


def classify_region(verdicts: list[SymmetryVerdict], tolerances: Tolerances = DEFAULT_TOLERANCES) -> RegionVerdict:
    """Aggregate point verdicts in the given (row-major) order."""
    if len(verdicts) < MIN_REGION_POINTS:
        raise ValueError(f"region classification needs at least {MIN_REGION_POINTS} points, got {len(verdicts)}")
    counts: dict[str, int] = {}
    for v in verdicts:
        counts[v.cls] = counts.get(v.cls, 0) + 1
    residuals = [v.dependence_residual for v in verdicts]
    mus = [v.mu for v in verdicts if v.mu is not None]
    base = dict(
        count=len(verdicts),
        class_counts=dict(sorted(counts.items())),
        min_residual=min(residuals),
        max_residual=max(residuals),
        min_mu=min(mus) if mus else None,
        max_mu=max(mus) if mus else None,
    )
    if len(counts) > 1:
        return RegionVerdict("mixed", **base)
    cls = verdicts[0].cls
    Ls = [v.L for v in verdicts if v.L is not None]
    if not Ls:
        return RegionVerdict(cls, **base)
    n = len(Ls)
    mean = 0.0
    for value in Ls:
        mean += value
    mean /= n
    var = 0.0
    for value in Ls:
        var += (value - mean) ** 2
    stdev = math.sqrt(var / n)
    gaps = [abs(v.L_tensor - v.L_spectral) for v in verdicts if v.L_tensor is not None and v.L_spectral is not None]
    base.update(mean_L=mean, stdev_L=stdev, max_route_gap=max(gaps) if gaps else None)
    if cls == PseudoSymmetricVariable and stdev / max(1.0, abs(mean)) <= tolerances.region:
        cls = PseudoSymmetricConstantType
    return RegionVerdict(cls, **base)
