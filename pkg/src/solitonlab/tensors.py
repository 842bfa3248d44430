"""Curvature of a 3-metric from its coordinate jet.

Conventions (fixed so the unit round sphere has sectional curvature +1):

* ``gamma[k, i, j] = Gamma^k_ij``
* ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``,
  ``riemann13[l, i, j, k] = R^l_ijk`` with ``R(d_i, d_j) d_k = R^l_ijk d_l``
* ``riemann04[i, j, k, l] = g(R(d_i, d_j) d_k, d_l)``
* ``ricci[j, k] = R^i_ijk``, ``ricci_op[i, j] = g^ik Ric_kj``, ``scalar = tr S``
* ``nabla_R[m, i, j, k, l] = (nabla_m R)_ijkl``

Every array carries optional leading batch axes, so one call handles a single
point or a whole grid.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import dsl
from .metric import MAX_CONDITION, MetricError, MetricJet


class JetOrderError(ValueError):
    pass


def inverse_metric(g: np.ndarray) -> np.ndarray:
    """Closed-form adjugate inverse of a batch of 3x3 matrices."""
    a, b, c = g[..., 0, 0], g[..., 0, 1], g[..., 0, 2]
    d, e, f = g[..., 1, 0], g[..., 1, 1], g[..., 1, 2]
    p, q, s = g[..., 2, 0], g[..., 2, 1], g[..., 2, 2]
    adj = np.empty_like(g)
    adj[..., 0, 0] = e * s - f * q
    adj[..., 0, 1] = -(b * s - c * q)
    adj[..., 0, 2] = b * f - c * e
    adj[..., 1, 0] = -(d * s - f * p)
    adj[..., 1, 1] = a * s - c * p
    adj[..., 1, 2] = -(a * f - c * d)
    adj[..., 2, 0] = d * q - e * p
    adj[..., 2, 1] = -(a * q - b * p)
    adj[..., 2, 2] = a * e - b * d
    det = a * adj[..., 0, 0] + b * adj[..., 1, 0] + c * adj[..., 2, 0]
    if np.any(det == 0):
        raise MetricError("metric is singular")
    return adj / det[..., None, None]


def condition_number(g: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(g)
    return eig[..., -1] / eig[..., 0]


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Columns form a g-orthonormal basis: ``E.T @ g @ E == I``."""
    chol = np.linalg.cholesky(g)
    return np.swapaxes(np.linalg.inv(chol), -1, -2)


def to_frame(tensor: np.ndarray, frame: np.ndarray, rank: int) -> np.ndarray:
    """Components of a covariant rank-``rank`` tensor in the frame given by columns of ``frame``."""
    letters = string.ascii_lowercase
    src = letters[:rank]
    dst = letters[rank: 2 * rank]
    operands = [tensor] + [frame] * rank
    subs = ["..." + src] + [f"...{s}{d}" for s, d in zip(src, dst)]
    return np.einsum(",".join(subs) + "->..." + dst, *operands, optimize=True)


def tensor_norm(tensor: np.ndarray, g: np.ndarray, rank: int) -> np.ndarray:
    """g-norm of a covariant tensor (Frobenius norm of orthonormal-frame components)."""
    comps = to_frame(tensor, orthonormal_frame(g), rank)
    return np.sqrt(np.sum(comps**2, axis=tuple(range(-rank, 0))))


def operator_norm(tensor2: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Largest |eigenvalue| of the g-self-adjoint endomorphism of a symmetric (0,2) tensor."""
    comps = to_frame(tensor2, orthonormal_frame(g), 2)
    comps = 0.5 * (comps + np.swapaxes(comps, -1, -2))
    return np.max(np.abs(np.linalg.eigvalsh(comps)), axis=-1)


# -- connection and curvature ---------------------------------------------

def _first_kind(dg: np.ndarray) -> np.ndarray:
    # [l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    return 0.5 * (
        np.einsum("...jli->...lij", dg) + np.einsum("...ilj->...lij", dg) - np.einsum("...ijl->...lij", dg)
    )


def _require(jet: MetricJet, order: int, what: str) -> None:
    if jet.order < order:
        raise JetOrderError(f"{what} needs a metric jet of order >= {order}, got {jet.order}")


def christoffel(jet: MetricJet, ginv: np.ndarray | None = None) -> np.ndarray:
    _require(jet, 1, "christoffel")
    if ginv is None:
        ginv = inverse_metric(jet.g)
    return np.einsum("...kl,...lij->...kij", ginv, _first_kind(jet.dg))


def G_tensor(g: np.ndarray) -> np.ndarray:
    """``G_ijkl = g((d_i ^ d_j) d_k, d_l) = g_jk g_il - g_ik g_jl``."""
    return np.einsum("...jk,...il->...ijkl", g, g) - np.einsum("...ik,...jl->...ijkl", g, g)


def wedge(X, Y, g) -> np.ndarray:
    """Matrix of ``Z -> g(Y, Z) X - g(X, Z) Y``."""
    X, Y, g = (np.asarray(a, dtype=float) for a in (X, Y, g))
    gX = np.einsum("...ab,...b->...a", g, X)
    gY = np.einsum("...ab,...b->...a", g, Y)
    return np.einsum("...m,...a->...ma", X, gY) - np.einsum("...m,...a->...ma", Y, gX)


@dataclass(frozen=True)
class CurvatureBundle:
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riemann13: np.ndarray
    riemann04: np.ndarray
    ricci: np.ndarray
    ricci_op: np.ndarray
    scalar: np.ndarray
    condition: np.ndarray
    order: int
    # filled only from order-3 jets
    nabla_R: np.ndarray | None = None
    d_ricci: np.ndarray | None = None  # [j, k, n] = d_n Ric_jk
    d_scalar: np.ndarray | None = None  # [n] = d_n r
    nabla_S: np.ndarray | None = None  # [n, i, j] = (nabla_n S)^i_j

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.g.shape[:-2]


def curvature(jet: MetricJet) -> CurvatureBundle:
    _require(jet, 2, "curvature")
    g, dg, d2g = jet.g, jet.dg, jet.d2g
    cond = condition_number(g)
    if np.any(cond > MAX_CONDITION):
        raise MetricError(f"metric condition number {float(np.max(cond)):.3g} exceeds {MAX_CONDITION:g}")
    ginv = inverse_metric(g)
    gam1 = _first_kind(dg)
    gam = np.einsum("...kl,...lij->...kij", ginv, gam1)

    dginv = -np.einsum("...ka,...abm,...bl->...klm", ginv, dg, ginv)
    dgam1 = 0.5 * (
        np.einsum("...jlim->...lijm", d2g) + np.einsum("...iljm->...lijm", d2g) - np.einsum("...ijlm->...lijm", d2g)
    )
    dgam = np.einsum("...klm,...lij->...kijm", dginv, gam1) + np.einsum("...kl,...lijm->...kijm", ginv, dgam1)

    r13 = (
        np.einsum("...ljki->...lijk", dgam)
        - np.einsum("...likj->...lijk", dgam)
        + np.einsum("...lim,...mjk->...lijk", gam, gam)
        - np.einsum("...ljm,...mik->...lijk", gam, gam)
    )
    r04 = np.einsum("...lm,...mijk->...ijkl", g, r13)
    ric = np.einsum("...iijk->...jk", r13)
    S = np.einsum("...ik,...kj->...ij", ginv, ric)
    scalar = np.einsum("...ii->...", S)

    extra = {}
    if jet.order >= 3:
        d3g = jet.d3g
        d2ginv = -(
            np.einsum("...kan,...abm,...bl->...klmn", dginv, dg, ginv)
            + np.einsum("...ka,...abmn,...bl->...klmn", ginv, d2g, ginv)
            + np.einsum("...ka,...abm,...bln->...klmn", ginv, dg, dginv)
        )
        d2gam1 = 0.5 * (
            np.einsum("...jlimn->...lijmn", d3g)
            + np.einsum("...iljmn->...lijmn", d3g)
            - np.einsum("...ijlmn->...lijmn", d3g)
        )
        d2gam = (
            np.einsum("...klmn,...lij->...kijmn", d2ginv, gam1)
            + np.einsum("...klm,...lijn->...kijmn", dginv, dgam1)
            + np.einsum("...kln,...lijm->...kijmn", dginv, dgam1)
            + np.einsum("...kl,...lijmn->...kijmn", ginv, d2gam1)
        )
        dr13 = (
            np.einsum("...ljkin->...lijkn", d2gam)
            - np.einsum("...likjn->...lijkn", d2gam)
            + np.einsum("...limn,...mjk->...lijkn", dgam, gam)
            + np.einsum("...lim,...mjkn->...lijkn", gam, dgam)
            - np.einsum("...ljmn,...mik->...lijkn", dgam, gam)
            - np.einsum("...ljm,...mikn->...lijkn", gam, dgam)
        )
        dr04 = np.einsum("...lmn,...mijk->...ijkln", dg, r13) + np.einsum("...lm,...mijkn->...ijkln", g, dr13)
        nabla_R = (
            np.einsum("...ijklm->...mijkl", dr04)
            - np.einsum("...pmi,...pjkl->...mijkl", gam, r04)
            - np.einsum("...pmj,...ipkl->...mijkl", gam, r04)
            - np.einsum("...pmk,...ijpl->...mijkl", gam, r04)
            - np.einsum("...pml,...ijkp->...mijkl", gam, r04)
        )
        dric = np.einsum("...iijkn->...jkn", dr13)
        dscalar = np.einsum("...jkn,...jk->...n", dginv, ric) + np.einsum("...jk,...jkn->...n", ginv, dric)
        dS = np.einsum("...ikn,...kj->...ijn", dginv, ric) + np.einsum("...ik,...kjn->...ijn", ginv, dric)
        nabla_S = (
            np.einsum("...ijn->...nij", dS)
            + np.einsum("...inp,...pj->...nij", gam, S)
            - np.einsum("...pnj,...ip->...nij", gam, S)
        )
        extra = dict(nabla_R=nabla_R, d_ricci=dric, d_scalar=dscalar, nabla_S=nabla_S)

    return CurvatureBundle(g, ginv, gam, r13, r04, ric, S, scalar, cond, jet.order, **extra)


def reconstruct_curvature_3d(bundle: CurvatureBundle) -> np.ndarray:
    """(0,4) form of ``R(X, Y) = SX ^ Y + X ^ SY - (r/2) X ^ Y`` built from Ric, r and g."""
    g, ric, r = bundle.g, bundle.ricci, bundle.scalar
    t = (
        np.einsum("...jk,...il->...ijkl", g, ric)
        - np.einsum("...ik,...jl->...ijkl", ric, g)
        + np.einsum("...jk,...il->...ijkl", ric, g)
        - np.einsum("...ik,...jl->...ijkl", g, ric)
    )
    return t - 0.5 * r[..., None, None, None, None] * G_tensor(g)


def first_bianchi_residual(bundle: CurvatureBundle) -> np.ndarray:
    R = bundle.riemann04
    cyc = R + np.einsum("...jkil->...ijkl", R) + np.einsum("...kijl->...ijkl", R)
    return np.max(np.abs(cyc), axis=(-4, -3, -2, -1))


def covariant_derivative_R(bundle: CurvatureBundle) -> np.ndarray:
    if bundle.nabla_R is None:
        raise JetOrderError("nabla R needs a metric jet of order 3")
    return bundle.nabla_R


def second_bianchi_residual(bundle: CurvatureBundle) -> np.ndarray:
    """max |nabla_m R_ijkl + nabla_i R_jmkl + nabla_j R_mikl| per point."""
    D = covariant_derivative_R(bundle)
    cyc = D + np.einsum("...ijmkl->...mijkl", D) + np.einsum("...jmikl->...mijkl", D)
    return np.max(np.abs(cyc), axis=(-5, -4, -3, -2, -1))


def sectional_curvature(bundle: CurvatureBundle, X, Y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    num = np.einsum("...ijkl,...i,...j,...k,...l->...", bundle.riemann04, X, Y, Y, X)
    gXX = np.einsum("...ij,...i,...j->...", bundle.g, X, X)
    gYY = np.einsum("...ij,...i,...j->...", bundle.g, Y, Y)
    gXY = np.einsum("...ij,...i,...j->...", bundle.g, X, Y)
    return num / (gXX * gYY - gXY**2)


# -- scalar fields -----------------------------------------------------------

@dataclass(frozen=True)
class ScalarFieldJet:
    value: np.ndarray
    grad: np.ndarray  # coordinate partials d_i f
    hess: np.ndarray  # d_i d_j f


@lru_cache(maxsize=256)
def _scalar_derivatives(expr: dsl.Expr):
    first = tuple(dsl.differentiate(expr, i) for i in range(3))
    second = tuple(tuple(dsl.differentiate(first[i], j) for j in range(3)) for i in range(3))
    return first, second


def scalar_field_jet(expr: dsl.Expr, points, params=None) -> ScalarFieldJet:
    pts = np.asarray(points, dtype=float)
    batch = pts.shape[:-1]
    first, second = _scalar_derivatives(expr)
    value = np.broadcast_to(dsl.evaluate(expr, pts, params), batch).astype(float)
    grad = np.zeros(batch + (3,))
    hess = np.zeros(batch + (3, 3))
    for i in range(3):
        grad[..., i] = dsl.evaluate(first[i], pts, params)
        for j in range(i, 3):
            hess[..., i, j] = hess[..., j, i] = dsl.evaluate(second[i][j], pts, params)
    return ScalarFieldJet(value, grad, hess)


def hessian(f: ScalarFieldJet, gamma: np.ndarray) -> np.ndarray:
    """Covariant Hessian ``d_i d_j f - Gamma^k_ij d_k f``."""
    return f.hess - np.einsum("...kij,...k->...ij", gamma, f.grad)


def gradient(f: ScalarFieldJet, ginv: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", ginv, f.grad)


def laplacian(f: ScalarFieldJet, bundle: CurvatureBundle) -> np.ndarray:
    return np.einsum("...ij,...ij->...", bundle.ginv, hessian(f, bundle.gamma))


def take(bundle: CurvatureBundle, index) -> CurvatureBundle:
    """Slice one point (or sub-batch) out of a batched bundle."""
    values = {}
    for name, value in vars(bundle).items():
        values[name] = value[index] if isinstance(value, np.ndarray) else value
    return CurvatureBundle(**values)
