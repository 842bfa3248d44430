"""Gradient Ricci and Yamabe solitons: residuals, derived identities, potential fitting.

Defining equations checked here::

    ricci:   Hess f + Ric = lambda g
    yamabe:  Hess f = (lambda - r) g

Pointwise residuals are g-operator norms (largest |eigenvalue| of the
g-self-adjoint endomorphism), so a residual of ``c * g`` has norm ``|c|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsmr

from . import dsl
from .catalog import GridSpec, sample_grid
from .metric import MetricSpec, metric_jet
from .tensors import (
    CurvatureBundle,
    ScalarFieldJet,
    curvature,
    gradient,
    hessian,
    inverse_metric,
    laplacian,
    operator_norm,
    scalar_field_jet,
    tensor_norm,
)

RICCI = "ricci"
YAMABE = "yamabe"
KINDS = (RICCI, YAMABE)
DIM = 3

CONVENTION_NOTE = (
    "lambda > 0 is labelled expanding and lambda < 0 shrinking for both Ricci and "
    "Yamabe solitons; note the Ricci labels are the reverse of the more common usage."
)
YAMABE_NOTE = (
    "Yamabe identities are reported twice: as literally stated "
    "(-Ric(grad f, X) = (n-1) X(r); grad |grad f|^2 = 2 r grad f) and as re-derived from "
    "Hess f = (lambda - r) g (Ric(grad f, X) = (n-1) X(r); grad |grad f|^2 = 2 (lambda - r) grad f)."
)

RICCI_IDENTITIES = (
    "R(X,Y)grad f = (nabla_Y S)X - (nabla_X S)Y",
    "Delta f = n lambda - r",
    "grad f (r) = 2 Ric(grad f, grad f)",
    "Delta_f r = 2 lambda r - 2 |Ric|^2",
)
YAMABE_LITERAL = (
    "-Ric(grad f, X) = (n-1) X(r)  [as stated]",
    "grad |grad f|^2 = 2 r grad f  [as stated]",
)
YAMABE_DERIVED = (
    "Ric(grad f, X) = (n-1) X(r)  [re-derived]",
    "grad |grad f|^2 = 2 (lambda - r) grad f  [re-derived]",
)

# Step of the fourth-order stencil that differences the exact gradient of r.
LAPLACIAN_STEP = 1e-3


def soliton_type(lam: float, kind: str = RICCI, tol: float = 0.0) -> str:
    if kind not in KINDS:
        raise ValueError(f"unknown soliton kind {kind!r}")
    if lam > tol:
        return "expanding"
    if lam < -tol:
        return "shrinking"
    return "steady"


@dataclass(frozen=True)
class SolitonCandidate:
    kind: str
    spec: MetricSpec
    lam: float
    potential: dsl.Expr

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown soliton kind {self.kind!r}")

    @classmethod
    def parse(cls, kind: str, spec: MetricSpec, potential: str, lam: float) -> "SolitonCandidate":
        return cls(kind, spec, float(lam), spec.parse(potential))


@dataclass
class _PointData:
    bundle: CurvatureBundle
    f: ScalarFieldJet
    hess: np.ndarray
    grad_up: np.ndarray


def _point_data(candidate: SolitonCandidate, points, order: int = 2) -> _PointData:
    pts = np.asarray(points, dtype=float)
    bundle = curvature(metric_jet(candidate.spec, pts, order))
    f = scalar_field_jet(candidate.potential, pts, candidate.spec.parameters)
    return _PointData(bundle, f, hessian(f, bundle.gamma), gradient(f, bundle.ginv))


def _defining_tensor(candidate: SolitonCandidate, data: _PointData) -> np.ndarray:
    b = data.bundle
    if candidate.kind == RICCI:
        return data.hess + b.ricci - candidate.lam * b.g
    return data.hess - (candidate.lam - b.scalar)[..., None, None] * b.g


def ricci_residual(candidate: SolitonCandidate, points) -> np.ndarray:
    """|Hess f + Ric - lambda g| per point."""
    if candidate.kind != RICCI:
        raise ValueError("ricci_residual needs a Ricci candidate")
    data = _point_data(candidate, points)
    return operator_norm(_defining_tensor(candidate, data), data.bundle.g)


def yamabe_residual(candidate: SolitonCandidate, points) -> np.ndarray:
    """|Hess f - (lambda - r) g| per point."""
    if candidate.kind != YAMABE:
        raise ValueError("yamabe_residual needs a Yamabe candidate")
    data = _point_data(candidate, points)
    return operator_norm(_defining_tensor(candidate, data), data.bundle.g)


def defining_residual(candidate: SolitonCandidate, points) -> np.ndarray:
    data = _point_data(candidate, points)
    return operator_norm(_defining_tensor(candidate, data), data.bundle.g)


def _covector_norm(w: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    return np.sqrt(np.abs(np.einsum("...i,...ij,...j->...", w, ginv, w)))


def scalar_curvature_laplacian(spec: MetricSpec, points, bundle: CurvatureBundle,
                               step: float = LAPLACIAN_STEP) -> np.ndarray:
    """Delta r from a fourth-order central difference of the exact gradient of r."""
    pts = np.asarray(points, dtype=float)
    H = np.zeros(pts.shape[:-1] + (3, 3))

    def dr(offset):
        return curvature(metric_jet(spec, pts + offset, 3)).d_scalar

    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        H[..., k, :] = (8.0 * (dr(e) - dr(-e)) - (dr(2 * e) - dr(-2 * e))) / (12.0 * step)
    H = 0.5 * (H + np.swapaxes(H, -1, -2))
    hess_r = H - np.einsum("...kij,...k->...ij", bundle.gamma, bundle.d_scalar)
    return np.einsum("...ij,...ij->...", bundle.ginv, hess_r)


def ricci_identity_suite(candidate: SolitonCandidate, points) -> dict[str, np.ndarray]:
    """Residuals of the standard consequences of Hess f + Ric = lambda g."""
    data = _point_data(candidate, points, order=3)
    b, lam = data.bundle, candidate.lam
    df = data.f.grad
    gf = data.grad_up

    # R(d_i, d_j) grad f versus (nabla_j S) d_i - (nabla_i S) d_j, lowered for a g-norm
    lhs = np.einsum("...lijk,...k->...lij", b.riemann13, gf)
    rhs = np.einsum("...jli->...lij", b.nabla_S) - np.einsum("...ilj->...lij", b.nabla_S)
    diff = np.einsum("...ml,...lij->...ijm", b.g, lhs - rhs)
    r32 = tensor_norm(diff, b.g, 3)

    lap_f = np.einsum("...ij,...ij->...", b.ginv, data.hess)
    r33 = np.abs(lap_f - (DIM * lam - b.scalar))

    dr_along = np.einsum("...i,...i->...", gf, b.d_scalar)
    ric_ff = np.einsum("...ij,...i,...j->...", b.ricci, gf, gf)
    r34 = np.abs(dr_along - 2.0 * ric_ff)

    lap_r = scalar_curvature_laplacian(candidate.spec, points, b)
    ric_sq = np.einsum("...ij,...ji->...", b.ricci_op, b.ricci_op)
    r35 = np.abs(lap_r - dr_along - (2.0 * lam * b.scalar - 2.0 * ric_sq))
    return dict(zip(RICCI_IDENTITIES, (r32, r33, r34, r35)))


def yamabe_identity_suite(candidate: SolitonCandidate, points) -> dict[str, np.ndarray]:
    """Both the literal and the re-derived forms of the two Yamabe identities."""
    pts = np.asarray(points, dtype=float)
    jet = metric_jet(candidate.spec, pts, 3)
    b = curvature(jet)
    f = scalar_field_jet(candidate.potential, pts, candidate.spec.parameters)
    gf = gradient(f, b.ginv)
    ric_f = np.einsum("...ij,...j->...i", b.ricci, gf)

    # d_k |grad f|^2 = d_k g^ij f_i f_j + 2 g^ij f_ik f_j, independent of the Christoffel path
    ginv = inverse_metric(jet.g)
    dginv = -np.einsum("...ka,...abm,...bl->...klm", ginv, jet.dg, ginv)
    dG = np.einsum("...ijk,...i,...j->...k", dginv, f.grad, f.grad) + 2.0 * np.einsum(
        "...ij,...ik,...j->...k", ginv, f.hess, f.grad
    )
    lam = candidate.lam
    r = b.scalar[..., None]
    residuals = (
        _covector_norm(-ric_f - (DIM - 1) * b.d_scalar, b.ginv),
        _covector_norm(dG - 2.0 * r * f.grad, b.ginv),
        _covector_norm(ric_f - (DIM - 1) * b.d_scalar, b.ginv),
        _covector_norm(dG - 2.0 * (lam - r) * f.grad, b.ginv),
    )
    return dict(zip(YAMABE_LITERAL + YAMABE_DERIVED, residuals))


def identity_suite(candidate: SolitonCandidate, points) -> dict[str, np.ndarray]:
    if candidate.kind == RICCI:
        return ricci_identity_suite(candidate, points)
    return yamabe_identity_suite(candidate, points)


@dataclass(frozen=True)
class ResidualStats:
    sup: float
    rms: float

    @classmethod
    def of(cls, values) -> "ResidualStats":
        v = np.atleast_1d(np.asarray(values, dtype=float))
        return cls(float(np.max(v)), float(np.sqrt(np.mean(v**2))))


@dataclass(frozen=True)
class SolitonReport:
    kind: str
    lam: float
    type_label: str
    points: int
    defining: ResidualStats
    identities: dict[str, ResidualStats]
    consistent_forms: tuple[str, ...] = ()
    degenerate_fit: bool = False
    notes: tuple[str, ...] = field(default=(CONVENTION_NOTE,))

    def passed(self, defining_tol: float, identity_tol: float) -> bool:
        if self.defining.sup > defining_tol:
            return False
        names = self.consistent_forms if self.kind == YAMABE else tuple(self.identities)
        required = YAMABE_DERIVED if self.kind == YAMABE else RICCI_IDENTITIES
        return all(self.identities[n].sup <= identity_tol for n in required) and set(required) <= set(names)


def verify_soliton(candidate: SolitonCandidate, points, identity_tol: float = 1e-6) -> SolitonReport:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    defining = ResidualStats.of(defining_residual(candidate, pts))
    suite = {name: ResidualStats.of(v) for name, v in identity_suite(candidate, pts).items()}
    consistent = tuple(name for name, stats in suite.items() if stats.sup <= identity_tol)
    notes = (CONVENTION_NOTE, YAMABE_NOTE) if candidate.kind == YAMABE else (CONVENTION_NOTE,)
    return SolitonReport(
        candidate.kind, candidate.lam, soliton_type(candidate.lam, candidate.kind), len(pts),
        defining, suite, consistent, False, notes,
    )


# -- fitting --------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    kind: str
    grid: GridSpec
    f_values: np.ndarray  # grid-shaped, f(center) = 0
    lam: float
    residual: float  # |A x - b| / |b|
    degenerate: bool
    lam_sensitivity: float  # distance of the lambda column from the range of the f-block, relative
    type_label: str
    note: str = ""
    interior_points: np.ndarray | None = None  # (M, 3), row-major over the grid interior
    point_residuals: np.ndarray | None = None  # weighted equation residual per interior point


DEGENERATE_THRESHOLD = 1e-6


def _assemble(kind: str, spec: MetricSpec, grid: GridSpec):
    shape = grid.shape
    pts = sample_grid(grid, spec.domain, for_fitting=True).reshape(shape + (3,))
    h = grid.spacing
    interior = pts[1:-1, 1:-1, 1:-1].reshape(-1, 3)
    bundle = curvature(metric_jet(spec, interior, 2))
    gam, g = bundle.gamma, bundle.g
    rhs_tensor = -bundle.ricci if kind == RICCI else -bundle.scalar[:, None, None] * g

    idx = np.arange(int(np.prod(shape))).reshape(shape)
    ii, jj, kk = np.meshgrid(*(np.arange(1, n - 1) for n in shape), indexing="ij")
    centre_ijk = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=-1)
    n_int = len(centre_ijk)
    n_f = idx.size

    def at(offset):
        o = centre_ijk + np.asarray(offset)
        return idx[o[:, 0], o[:, 1], o[:, 2]]

    unit = np.eye(3, dtype=int)
    rows, cols, vals, b = [], [], [], []
    row = 0
    for i in range(3):
        for j in range(i, 3):
            weight = 1.0 if i == j else math.sqrt(2.0)
            r_ids = row + np.arange(n_int)
            entries: list[tuple[np.ndarray, np.ndarray]] = []
            if i == j:
                entries += [
                    (at(unit[i]), np.full(n_int, 1.0 / h[i] ** 2)),
                    (at(-unit[i]), np.full(n_int, 1.0 / h[i] ** 2)),
                    (at((0, 0, 0)), np.full(n_int, -2.0 / h[i] ** 2)),
                ]
            else:
                c = 1.0 / (4.0 * h[i] * h[j])
                entries += [
                    (at(unit[i] + unit[j]), np.full(n_int, c)),
                    (at(unit[i] - unit[j]), np.full(n_int, -c)),
                    (at(-unit[i] + unit[j]), np.full(n_int, -c)),
                    (at(-unit[i] - unit[j]), np.full(n_int, c)),
                ]
            for k in range(3):
                coef = gam[:, k, i, j] / (2.0 * h[k])
                entries += [(at(unit[k]), -coef), (at(-unit[k]), coef)]
            for c_ids, v in entries:
                rows.append(r_ids)
                cols.append(c_ids)
                vals.append(weight * v)
            # lambda column
            rows.append(r_ids)
            cols.append(np.full(n_int, n_f))
            vals.append(-weight * g[:, i, j])
            b.append(weight * rhs_tensor[:, i, j])
            row += n_int
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(row, n_f + 1)
    ).tocsc()
    centre = int(idx[tuple(n // 2 for n in shape)])
    keep = np.array([c for c in range(n_f + 1) if c != centre])
    return A[:, keep], np.concatenate(b), keep, centre, n_f, interior


def fit_potential(kind: str, spec: MetricSpec, grid: GridSpec, *, tol: float = 1e-13,
                  max_iter: int | None = None) -> FitResult:
    """Least-squares fit of grid values of f and the constant lambda.

    f is pinned to zero at the grid centre; every other null direction stays
    in the system and is only reported, through the lambda sensitivity.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown soliton kind {kind!r}")
    A, b, keep, centre, n_f, interior = _assemble(kind, spec, grid)
    # column scaling keeps lsmr well conditioned across grid spacings
    scale = np.sqrt(np.asarray(A.multiply(A).sum(axis=0)).ravel())
    scale[scale == 0] = 1.0
    As = A @ sp.diags(1.0 / scale)
    iters = max_iter or 20 * A.shape[1]
    sol = lsmr(As, b, atol=tol, btol=tol, maxiter=iters)[0] / scale
    res = A @ sol - b
    bnorm = float(np.linalg.norm(b))
    rel = float(np.linalg.norm(res)) / bnorm if bnorm > 0 else float(np.linalg.norm(res))

    # sensitivity of lambda: min_y |A_f y - a_lambda| / |a_lambda|
    a_lam = A[:, -1].toarray().ravel()
    Af = As[:, :-1]
    y = lsmr(Af, a_lam, atol=tol, btol=tol, maxiter=iters)[0]
    sens = float(np.linalg.norm(Af @ y - a_lam) / np.linalg.norm(a_lam))
    degenerate = sens < DEGENERATE_THRESHOLD

    f_full = np.zeros(n_f + 1)
    f_full[keep] = sol
    lam = float(f_full[n_f])
    note = ""
    if degenerate:
        note = (
            "lambda is not determined: the lambda column lies in the range of the Hessian block, "
            "so every lambda pairs with some potential (e.g. f = lambda |x|^2 / 2 on flat space)."
        )
    return FitResult(
        kind, grid, f_full[:n_f].reshape(grid.shape), lam, rel, degenerate, sens,
        soliton_type(lam, kind), note, interior,
        np.sqrt(np.sum(res.reshape(6, len(interior)) ** 2, axis=0)),
    )
