"""Ricci eigenframes, their connection coefficients, and frame-level curvature checks.

On a region where the Ricci operator has eigenvalues ``(2L, mu, mu)`` the frame
is ``e0`` along the simple eigenvector and ``e1, e2`` spanning the double
eigenspace.  ``B[i, j, k] = g(nabla_{e_i} e_j, e_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import eigen3
from .catalog import box_diameter
from .metric import MetricSpec, metric_jet
from .symmetry import DEFAULT_TOLERANCES, PAIR, RicciSpectrum, normalized_ricci, ricci_spectrum
from .tensors import CurvatureBundle, G_tensor, curvature, orthonormal_frame, to_frame

# Relative step for frame differencing, as a fraction of the box diameter.
STEP_FRACTION = 1e-3
# Minimum |g(e, e_centre)| accepted when matching stencil frames to the centre.
MIN_ALIGNMENT = 0.5
# Fourth-order central-difference weights for offsets +-1, +-2.
_W1, _W2 = 8.0 / 12.0, -1.0 / 12.0

BIANCHI_RELATIONS = (
    "e0(mu - L) = (2L - mu)(B101 + B202)",
    "e1(L) = (mu - 2L) B010",
    "e2(L) = (mu - 2L) B020",
)
CURVATURE_FORMS = (
    "R(e1,e2) = (mu - L) e1^e2",
    "R(e1,e0) = L e1^e0",
    "R(e2,e0) = L e2^e0",
    "r = 2(mu + L)",
    "reassembled R",
)


class FrameError(ValueError):
    """The eigenframe is undefined (no pair pattern) or not smooth across a stencil."""


@dataclass(frozen=True)
class FrameData:
    point: np.ndarray
    vectors: np.ndarray  # rows e0, e1, e2 in coordinate components
    spectrum: RicciSpectrum
    B: np.ndarray | None = None

    @property
    def e0(self) -> np.ndarray:
        return self.vectors[0]

    @property
    def e1(self) -> np.ndarray:
        return self.vectors[1]

    @property
    def e2(self) -> np.ndarray:
        return self.vectors[2]

    @property
    def mu(self) -> float:
        return self.spectrum.mu

    @property
    def L(self) -> float:
        return self.spectrum.L_spectral

    @property
    def eigenvalues(self) -> tuple[float, float, float]:
        return (2.0 * self.L, self.mu, self.mu)


def _unit(v, g):
    return v / np.sqrt(v @ g @ v)


def ricci_eigenframe(bundle: CurvatureBundle, tol: float = DEFAULT_TOLERANCES.multiplicity,
                     reference: np.ndarray | None = None, point=None) -> FrameData:
    """Orthonormal Ricci eigenframe at a single point.

    Without ``reference`` the gauge is: e0 has positive inner product with the
    coordinate axis it is most aligned with, e1 is the normalized projection of
    the first coordinate axis onto the double eigenspace, and (e0, e1, e2) is
    positively oriented.  With ``reference`` (rows e0, e1, e2 of a nearby frame)
    e0 is signed and e1 projected from the reference instead.
    """
    if bundle.batch_shape != ():
        raise ValueError("ricci_eigenframe expects a single-point bundle")
    spectrum = ricci_spectrum(bundle, tol)
    if spectrum.pattern != PAIR:
        raise FrameError(f"Ricci spectrum is {spectrum.pattern}; the eigenframe needs a simple eigenvalue")
    g = bundle.g
    E = orthonormal_frame(g)
    v = eigen3.eigenvector(normalized_ricci(bundle), spectrum.simple)
    e0 = E @ v
    if reference is None:
        cov = g @ e0
        k = int(np.argmax(np.abs(cov)))
        sign = np.sign(cov[k])
        seeds = list(np.eye(3))
    else:
        sign = np.sign(e0 @ g @ reference[0])
        seeds = [reference[1]] + list(np.eye(3))
    e0 = sign * e0

    e1 = None
    for seed in seeds:
        u = seed - (seed @ g @ e0) * e0
        if np.sqrt(u @ g @ u) > 1e-3 * np.sqrt(seed @ g @ seed):
            e1 = _unit(u, g)
            break
    # orthonormal components are C^T v with g = C C^T; E = C^{-T}
    C = np.linalg.cholesky(g)
    e2 = E @ np.cross(C.T @ e0, C.T @ e1)
    pt = np.full(3, np.nan) if point is None else np.asarray(point, dtype=float)
    return FrameData(pt, np.stack([e0, e1, e2]), spectrum)


def frame_at(spec: MetricSpec, point, tol: float = DEFAULT_TOLERANCES.multiplicity,
             reference: np.ndarray | None = None, order: int = 2) -> tuple[FrameData, CurvatureBundle]:
    point = np.asarray(point, dtype=float)
    bundle = curvature(metric_jet(spec, point, order))
    return ricci_eigenframe(bundle, tol, reference, point), bundle


def frame_residuals(frame: FrameData, bundle: CurvatureBundle) -> dict[str, float]:
    """Orthonormality and eigen-equation residuals of a frame."""
    g = bundle.g
    F = frame.vectors
    gram = F @ g @ F.T
    S = bundle.ricci_op
    eig = np.array(frame.eigenvalues)
    eq = np.array([np.sqrt(np.abs(w @ g @ w)) for w in (S @ F.T - F.T * eig).T])
    out = {"orthonormality": float(np.max(np.abs(gram - np.eye(3)))), "eigen_equation": float(np.max(eq))}
    if frame.B is not None:
        out["B_antisymmetry"] = float(np.max(np.abs(frame.B + np.swapaxes(frame.B, 1, 2))))
    return out


def _matched(spec, point, centre: FrameData, tol):
    frame, _ = frame_at(spec, point, tol, reference=centre.vectors)
    if frame.spectrum.pattern != PAIR:
        raise FrameError("pair pattern lost on the stencil")
    return frame


def _check_alignment(frame: FrameData, centre: FrameData, g: np.ndarray) -> None:
    align = np.abs(np.einsum("ai,ij,aj->a", frame.vectors, g, centre.vectors))
    if np.min(align) < MIN_ALIGNMENT:
        raise FrameError(f"gauge flip across the stencil (alignment {float(np.min(align)):.3g})")


def default_step(box) -> float:
    return STEP_FRACTION * box_diameter(box)


def connection_coefficients(spec: MetricSpec, point, step: float,
                            tol: float = DEFAULT_TOLERANCES.multiplicity) -> FrameData:
    """Eigenframe at ``point`` with ``B`` filled in.

    Frame components are differenced along the coordinate axes with a
    fourth-order central stencil; stencil frames are gauge-matched to the centre.
    """
    point = np.asarray(point, dtype=float)
    centre, bundle = frame_at(spec, point, tol)
    g = bundle.g
    dF = np.zeros((3, 3, 3))  # dF[m, a, k] = d_m e_a^k
    for m in range(3):
        h = np.zeros(3)
        h[m] = step
        frames = {}
        for s in (-2, -1, 1, 2):
            f = _matched(spec, point + s * h, centre, tol)
            _check_alignment(f, centre, g)
            frames[s] = f.vectors
        dF[m] = (_W1 * (frames[1] - frames[-1]) + _W2 * (frames[2] - frames[-2])) / step
    return replace(centre, B=frame_connection(centre.vectors, dF, bundle.gamma, g))


def frame_connection(F: np.ndarray, dF: np.ndarray, gamma: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``B[i, j, k] = g(nabla_{e_i} e_j, e_k)`` from frame rows ``F`` and ``dF[m, a, k] = d_m e_a^k``."""
    # (nabla_{e_i} e_j)^k = e_i^m (d_m e_j^k + Gamma^k_{ml} e_j^l)
    cov = dF + np.einsum("kml,al->mak", gamma, F)
    nabla = np.einsum("im,mak->iak", F, cov)
    return np.einsum("iak,kl,cl->iac", nabla, g, F)


def _spectral_values(spec, point, tol):
    s = ricci_spectrum(curvature(metric_jet(spec, point, 2)), tol)
    if s.pattern != PAIR:
        raise FrameError("pair pattern lost on the stencil")
    return np.array([s.mu, s.L_spectral])


def frame_derivatives(spec: MetricSpec, frame: FrameData, step: float,
                      tol: float = DEFAULT_TOLERANCES.multiplicity) -> np.ndarray:
    """``D[a] = (e_a(mu), e_a(L))`` by central differences along the frame directions."""
    D = np.zeros((3, 2))
    for a in range(3):
        h = step * frame.vectors[a]
        vals = {s: _spectral_values(spec, frame.point + s * h, tol) for s in (-2, -1, 1, 2)}
        D[a] = (_W1 * (vals[1] - vals[-1]) + _W2 * (vals[2] - vals[-2])) / step
    return D


def bianchi_frame_check(frame: FrameData, derivatives: np.ndarray) -> np.ndarray:
    """Residuals of the three Bianchi-derived frame relations."""
    if frame.B is None:
        raise ValueError("frame has no connection coefficients")
    B, mu, L = frame.B, frame.mu, frame.L
    (d0mu, d0L), (_, d1L), (_, d2L) = derivatives
    return np.abs(np.array([
        (d0mu - d0L) - (2 * L - mu) * (B[1, 0, 1] + B[2, 0, 2]),
        d1L - (mu - 2 * L) * B[0, 1, 0],
        d2L - (mu - 2 * L) * B[0, 2, 0],
    ]))


def eigenframe_curvature_check(frame: FrameData, bundle: CurvatureBundle) -> np.ndarray:
    """Residuals of the curvature forms in the eigenframe (see ``CURVATURE_FORMS``)."""
    mu, L = frame.mu, frame.L
    R = to_frame(bundle.riemann04, frame.vectors.T, 4)
    G = G_tensor(np.eye(3))
    K = np.array([[0.0, L, L], [L, 0.0, mu - L], [L, mu - L, 0.0]])
    blocks = [np.linalg.norm(R[a, b] - K[a, b] * G[a, b]) for a, b in ((1, 2), (1, 0), (2, 0))]
    assembled = K[:, :, None, None] * G
    scale = max(1.0, float(np.linalg.norm(R)))
    return np.array(blocks + [
        abs(float(bundle.scalar) - 2.0 * (mu + L)),
        float(np.linalg.norm(assembled - R)) / scale,
    ])


@dataclass(frozen=True)
class FrameReport:
    point: np.ndarray
    frame: FrameData
    bianchi: np.ndarray
    curvature_forms: np.ndarray
    frame_residuals: dict


def diagnose_point(spec: MetricSpec, point, step: float,
                   tol: float = DEFAULT_TOLERANCES.multiplicity) -> FrameReport:
    frame = connection_coefficients(spec, point, step, tol)
    bundle = curvature(metric_jet(spec, frame.point, 2))
    D = frame_derivatives(spec, frame, step, tol)
    return FrameReport(
        frame.point, frame, bianchi_frame_check(frame, D),
        eigenframe_curvature_check(frame, bundle), frame_residuals(frame, bundle),
    )
