"""Closed-form eigen-decomposition of real symmetric 3x3 matrices."""

from __future__ import annotations

import numpy as np


def symmetric_eigenvalues(A: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues via the trigonometric solution of the characteristic cubic.

    Works on batches ``(..., 3, 3)``.  A double root is resolved to roughly
    ``sqrt(eps)`` relative accuracy per member, but the pair's mean and the
    simple root keep full precision because the trace is enforced exactly.
    """
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    q = np.trace(A, axis1=-2, axis2=-1) / 3.0
    off = A[..., 0, 1] ** 2 + A[..., 0, 2] ** 2 + A[..., 1, 2] ** 2
    diag = np.diagonal(A, axis1=-2, axis2=-1) - q[..., None]
    p2 = np.sum(diag**2, axis=-1) + 2.0 * off
    p = np.sqrt(p2 / 6.0)
    flat = p <= 1e-300 + 1e-15 * np.abs(q)
    safe_p = np.where(flat, 1.0, p)
    B = (A - q[..., None, None] * np.eye(3)) / safe_p[..., None, None]
    half_det = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    phi = np.arccos(half_det) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    out = np.stack([lo, mid, hi], axis=-1)
    out = np.where(flat[..., None], q[..., None], out)
    return np.sort(out, axis=-1)


def eigenvector(A: np.ndarray, eigenvalue: float) -> np.ndarray:
    """Unit eigenvector for a simple eigenvalue of a single symmetric 3x3 matrix.

    Takes the largest cross product of two rows of ``A - eigenvalue * I``.
    """
    M = np.asarray(A, dtype=float) - eigenvalue * np.eye(3)
    candidates = [np.cross(M[0], M[1]), np.cross(M[0], M[2]), np.cross(M[1], M[2])]
    norms = [np.linalg.norm(c) for c in candidates]
    best = int(np.argmax(norms))
    if norms[best] == 0.0:
        raise ValueError("eigenvalue is not simple; eigenvector undefined")
    return candidates[best] / norms[best]
