import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solitonlab.catalog import CATALOG_NAMES, catalog_lookup
from solitonlab.metric import Domain, Interval, MetricSpec, REAL_LINE, metric_jet
from solitonlab.tensors import (
    G_tensor,
    JetOrderError,
    christoffel,
    covariant_derivative_R,
    curvature,
    first_bianchi_residual,
    inverse_metric,
    laplacian,
    operator_norm,
    orthonormal_frame,
    reconstruct_curvature_3d,
    scalar_field_jet,
    second_bianchi_residual,
    sectional_curvature,
    take,
    tensor_norm,
    wedge,
)

# flat space in spherical coordinates: curvature must vanish identically
SPHERICAL = MetricSpec.from_strings(
    "spherical",
    {"g00": "1", "g11": "r^2", "g22": "r^2*sin(th)^2"},
    Domain((Interval(0, math.inf), Interval(0, math.pi), REAL_LINE)),
    coords=("r", "th", "ph"),
)
# dt^2 + cosh(t)^2 (round S^2): K(d_t, X) = -1, K on the sphere = (1 - sinh^2 t) / cosh^2 t
WARPED = MetricSpec.from_strings(
    "warped", {"g00": "1", "g11": "cosh(t)^2", "g22": "cosh(t)^2*sin(th)^2"}, coords=("t", "th", "ph")
)


def _bundle(spec, p, order=2):
    return curvature(metric_jet(spec, np.asarray(p, dtype=float), order))


def test_inverse_metric_matches_numpy():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(10, 3, 3))
    g = A @ np.swapaxes(A, 1, 2) + 3 * np.eye(3)
    assert np.allclose(inverse_metric(g), np.linalg.inv(g), rtol=1e-13, atol=1e-14)


def test_orthonormal_frame():
    g = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, -0.2], [0.1, -0.2, 1.5]])
    E = orthonormal_frame(g)
    assert np.allclose(E.T @ g @ E, np.eye(3), atol=1e-14)


def test_spherical_christoffels():
    r, th = 1.7, 0.8
    gam = christoffel(metric_jet(SPHERICAL, [r, th, 0.3], 1))
    assert gam[0, 1, 1] == pytest.approx(-r)
    assert gam[1, 0, 1] == pytest.approx(1 / r)
    assert gam[2, 1, 2] == pytest.approx(math.cos(th) / math.sin(th))
    assert gam[0, 2, 2] == pytest.approx(-r * math.sin(th) ** 2)
    assert np.allclose(gam, np.swapaxes(gam, 1, 2))


def test_flat_space_in_curvilinear_chart():
    b = _bundle(SPHERICAL, [[1.3, 0.7, 2.0], [0.4, 2.1, -1.0]], 3)
    assert np.max(np.abs(b.riemann04)) < 1e-12
    assert np.max(np.abs(b.nabla_R)) < 1e-11
    f = scalar_field_jet(SPHERICAL.parse("r^2"), [[1.3, 0.7, 2.0]])
    assert laplacian(f, _bundle(SPHERICAL, [[1.3, 0.7, 2.0]]))[0] == pytest.approx(6.0)


def test_warped_product_sectional_curvatures():
    t = 0.6
    b = _bundle(WARPED, [t, 1.1, 0.4])
    assert sectional_curvature(b, [1, 0, 0], [0, 1, 0]) == pytest.approx(-1.0)
    assert sectional_curvature(b, [1, 0, 0], [0, 0.3, 1]) == pytest.approx(-1.0)
    expected = (1 - math.sinh(t) ** 2) / math.cosh(t) ** 2
    assert sectional_curvature(b, [0, 1, 0], [0, 0, 1]) == pytest.approx(expected)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 3.0])
def test_space_forms_are_kappa_G(kappa):
    for name, sign in (("sphere3", 1), ("hyperbolic3", -1)):
        entry = catalog_lookup(name, {"kappa": kappa})
        pts = entry.random_points(6, seed=4)
        b = _bundle(entry.spec, pts)
        assert np.allclose(b.riemann04, sign * kappa * G_tensor(b.g), atol=1e-11)
        assert np.allclose(sectional_curvature(b, np.ones(3), [1, -2, 0.5]), sign * kappa)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_catalog_golden_values(name):
    entry = catalog_lookup(name)
    pts = entry.random_points(30, seed=11)
    b = _bundle(entry.spec, pts)
    assert np.allclose(b.scalar, entry.expected_scalar(pts), atol=1e-10)
    eig = np.sort(np.linalg.eigvalsh(to_orthonormal(b)), axis=-1)
    assert np.allclose(eig, entry.expected_eigenvalues(pts), atol=1e-10)


def to_orthonormal(b):
    E = orthonormal_frame(b.g)
    return np.swapaxes(E, -1, -2) @ b.ricci @ E


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_curvature_identities_on_catalog(name):
    entry = catalog_lookup(name)
    pts = entry.random_points(10, seed=5)
    b = _bundle(entry.spec, pts, 3)
    R = b.riemann04
    assert np.max(np.abs(R + np.swapaxes(R, -4, -3))) < 1e-13
    assert np.max(np.abs(R + np.swapaxes(R, -2, -1))) < 1e-13
    assert np.max(np.abs(R - np.transpose(R, (0, 3, 4, 1, 2)))) < 1e-12
    assert np.max(first_bianchi_residual(b)) < 1e-12
    assert np.max(second_bianchi_residual(b)) < 1e-11
    assert np.max(np.abs(reconstruct_curvature_3d(b) - R)) < 1e-12
    # contracted Bianchi: (nabla_i S)^i_j = d_j r / 2
    div_S = np.einsum("...iij->...j", b.nabla_S)
    assert np.allclose(div_S, 0.5 * b.d_scalar, atol=1e-11)


def test_scalar_gradient_matches_finite_difference():
    entry = catalog_lookup("r_x_cigar")
    p = np.array([0.2, 0.4, -0.3])
    b = _bundle(entry.spec, p, 3)
    h = 1e-5
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (_bundle(entry.spec, p + e).scalar - _bundle(entry.spec, p - e).scalar) / (2 * h)
        assert b.d_scalar[k] == pytest.approx(float(fd), abs=1e-8)


def test_order_three_required_for_nabla_R():
    b = _bundle(catalog_lookup("nil3").spec, [0, 0, 0], 2)
    with pytest.raises(JetOrderError):
        covariant_derivative_R(b)
    with pytest.raises(JetOrderError):
        curvature(metric_jet(catalog_lookup("nil3").spec, [0, 0, 0], 1))


def test_wedge_and_norms():
    g = np.diag([1.0, 4.0, 9.0])
    W = wedge([1, 0, 0], [0, 1, 0], g)
    # (X ^ Y) Z = g(Y, Z) X - g(X, Z) Y
    assert np.allclose(W @ np.array([0, 1, 0]), [4, 0, 0])
    assert np.allclose(W @ np.array([1, 0, 0]), [0, -1, 0])
    assert tensor_norm(g, g, 2) == pytest.approx(math.sqrt(3))
    assert operator_norm(2.5 * g, g) == pytest.approx(2.5)


def test_take_slices_batches():
    entry = catalog_lookup("sol3")
    b = _bundle(entry.spec, entry.random_points(4, seed=0), 3)
    one = take(b, 2)
    assert one.batch_shape == () and one.nabla_R.shape == (3,) * 5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_identities_on_random_perturbed_metrics(seed):
    rng = np.random.default_rng(seed)
    terms = {}
    for i in range(3):
        for j in range(i, 3):
            a, b, c = np.round(rng.uniform(-0.15, 0.15, 3), 3)
            base = "1" if i == j else "0"
            terms[f"g{i}{j}"] = f"{base} + {a}*x0^2 + {b}*x1*x2 + {c}*sin(x{(i + j) % 3})"
    spec = MetricSpec.from_strings("random", terms)
    p = rng.uniform(-0.5, 0.5, 3)
    b = _bundle(spec, p, 3)
    scale = max(1.0, float(np.max(np.abs(b.riemann04))))
    assert first_bianchi_residual(b) <= 1e-12 * scale
    assert second_bianchi_residual(b) <= 1e-10 * scale
    assert np.max(np.abs(reconstruct_curvature_3d(b) - b.riemann04)) <= 1e-12 * scale
