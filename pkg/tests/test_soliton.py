import numpy as np
import pytest

from solitonlab.catalog import catalog_lookup, parse_grid
from solitonlab.metric import metric_jet
from solitonlab.soliton import (
    RICCI,
    RICCI_IDENTITIES,
    YAMABE,
    YAMABE_DERIVED,
    YAMABE_LITERAL,
    SolitonCandidate,
    defining_residual,
    fit_potential,
    ricci_residual,
    scalar_curvature_laplacian,
    soliton_type,
    verify_soliton,
    yamabe_residual,
)
from solitonlab.tensors import curvature

RICCI_FIXTURES = [
    ("euclidean", "(x0^2 + x1^2 + x2^2)/2", 1.0),
    ("r_x_s2", "t^2/2", 1.0),
    ("r_x_h2", "-t^2/2", -1.0),
    ("r_x_cigar", "-log(1 + x^2 + y^2)", 0.0),
    ("sphere3", "0", 2.0),
    ("hyperbolic3", "0", -2.0),
]
YAMABE_FIXTURES = [
    ("euclidean", "(x0^2 + x1^2 + x2^2)/2", 1.0),
    ("r_x_s2", "t", 2.0),
    ("r_x_h2", "t", -2.0),
]


def _candidate(kind, name, f, lam, params=None):
    entry = catalog_lookup(name, params)
    return SolitonCandidate.parse(kind, entry.spec, f, lam), entry.random_points(20, seed=6)


@pytest.mark.parametrize("name, f, lam", RICCI_FIXTURES)
def test_ricci_fixtures(name, f, lam):
    cand, pts = _candidate(RICCI, name, f, lam)
    rep = verify_soliton(cand, pts)
    assert rep.defining.sup <= 1e-9
    for ident in RICCI_IDENTITIES:
        assert rep.identities[ident].sup <= 1e-6, ident
    assert rep.passed(1e-9, 1e-6)


@pytest.mark.parametrize("name, f, lam", YAMABE_FIXTURES)
def test_yamabe_fixtures_rederived_forms(name, f, lam):
    cand, pts = _candidate(YAMABE, name, f, lam)
    rep = verify_soliton(cand, pts)
    assert rep.defining.sup <= 1e-9
    for ident in YAMABE_DERIVED:
        assert rep.identities[ident].sup <= 1e-6
    assert set(YAMABE_DERIVED) <= set(rep.consistent_forms)
    assert rep.passed(1e-9, 1e-6)


def test_yamabe_literal_forms_fail_where_expected():
    # the literal sign/right-hand side is inconsistent with Hess f = (lambda - r) g
    cand, pts = _candidate(YAMABE, "euclidean", "(x0^2 + x1^2 + x2^2)/2", 1.0)
    rep = verify_soliton(cand, pts)
    assert rep.identities[YAMABE_LITERAL[1]].sup > 1e-2
    cand, pts = _candidate(YAMABE, "r_x_s2", "t", 2.0)
    rep = verify_soliton(cand, pts)
    assert rep.identities[YAMABE_LITERAL[1]].sup == pytest.approx(4.0)


def test_kappa_scaled_cylinder():
    cand, pts = _candidate(RICCI, "r_x_s2", "2.5*t^2/2", 2.5, {"kappa": 2.5})
    assert verify_soliton(cand, pts).passed(1e-9, 1e-6)


def test_off_by_lambda_residual_is_exactly_the_gap():
    entry = catalog_lookup("r_x_s2")
    pts = entry.random_points(10, seed=2)
    cand = SolitonCandidate.parse(RICCI, entry.spec, "t^2/2", 2.0)
    assert np.allclose(ricci_residual(cand, pts), 1.0, atol=1e-12)
    rep = verify_soliton(cand, pts)
    assert rep.defining.sup == pytest.approx(1.0) and not rep.passed(1e-9, 1e-6)


def test_wrong_potential_fails():
    cand, pts = _candidate(RICCI, "r_x_cigar", "-log(1 + x^2)", 0.0)
    assert np.max(defining_residual(cand, pts)) > 1e-2


def test_residual_kind_guards():
    cand, pts = _candidate(RICCI, "r_x_s2", "t^2/2", 1.0)
    with pytest.raises(ValueError):
        yamabe_residual(cand, pts)
    with pytest.raises(ValueError):
        SolitonCandidate.parse("gradient", cand.spec, "t", 1.0)


def test_soliton_type_labels():
    assert soliton_type(1.0) == "expanding"
    assert soliton_type(-1.0) == "shrinking"
    assert soliton_type(0.0) == "steady"
    assert soliton_type(1e-12, YAMABE, tol=1e-9) == "steady"
    with pytest.raises(ValueError):
        soliton_type(1.0, "kahler")


def test_scalar_laplacian_on_cigar():
    # r = 4/s with s = 1 + x^2 + y^2; the factor metric is (dx^2 + dy^2)/s, so Delta = s * flat Laplacian
    entry = catalog_lookup("r_x_cigar")
    pts = entry.random_points(10, seed=8)
    b = curvature(metric_jet(entry.spec, pts, 3))
    x, y = pts[:, 1], pts[:, 2]
    s = 1 + x**2 + y**2
    exact = s * 16 * (x**2 + y**2 - 1) / s**3
    assert np.allclose(scalar_curvature_laplacian(entry.spec, pts, b), exact, atol=1e-8)


def test_fit_recovers_cylinder():
    fit = fit_potential(RICCI, catalog_lookup("r_x_s2").spec, parse_grid("(-1,1)x(0.5,2.6)x(0,3):9"))
    assert abs(fit.lam - 1.0) <= 1e-3
    assert fit.residual <= 1e-3
    assert not fit.degenerate
    assert fit.f_values.shape == (9, 9, 9)
    assert fit.f_values[4, 4, 4] == 0.0
    # recovered f is t^2/2 up to the gauge (a constant)
    t = np.linspace(-1, 1, 11)[1:-1]
    profile = fit.f_values[:, 4, 4]
    assert np.allclose(profile - profile[4], t**2 / 2, atol=1e-6)


def test_fit_flags_degenerate_flat_space():
    fit = fit_potential(RICCI, catalog_lookup("euclidean").spec, parse_grid("(-1,1)^3:7"))
    assert fit.degenerate and fit.note
    assert fit.residual <= 1e-10


@pytest.mark.parametrize("name", ["nil3", "sol3"])
def test_fit_fails_on_pseudo_symmetric_geometries(name):
    fit = fit_potential(RICCI, catalog_lookup(name).spec, parse_grid("(-1,1)^3:7"))
    assert fit.residual > 0.1


def test_fit_yamabe_cylinder():
    fit = fit_potential(YAMABE, catalog_lookup("r_x_s2").spec, parse_grid("(-1,1)x(0.5,2.6)x(0,3):7"))
    assert fit.residual <= 1e-8
    assert not fit.degenerate
    assert fit.lam == pytest.approx(2.0, abs=1e-6)


def test_fit_point_residuals_align_with_interior():
    fit = fit_potential(RICCI, catalog_lookup("sol3").spec, parse_grid("(-1,1)^3:5"))
    assert fit.interior_points.shape == (27, 3)
    assert fit.point_residuals.shape == (27,)
    assert np.all(fit.point_residuals >= 0)


def test_fit_lambda_converges_on_cigar():
    # the cigar potential is not polynomial, so the stencil carries real truncation error
    entry = catalog_lookup("r_x_cigar")
    grid = parse_grid("(-1,1)^3:9")
    coarse = fit_potential(RICCI, entry.spec, grid)
    fine = fit_potential(RICCI, entry.spec, grid.refined(2))
    assert abs(fine.lam) < abs(coarse.lam) / 4
    assert fine.residual < coarse.residual
