"""Task execution for manifests and report serialization (JSON, text, CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from . import __version__
from .catalog import CATALOG_NAMES, GridSpec, catalog_lookup, sample_grid
from .frames import BIANCHI_RELATIONS, CURVATURE_FORMS, FrameError, default_step, diagnose_point
from .manifest import FIT, Manifest, ManifestError, build_metric
from .metric import metric_jet
from .soliton import (
    CONVENTION_NOTE,
    RICCI,
    RICCI_IDENTITIES,
    YAMABE_DERIVED,
    YAMABE_NOTE,
    SolitonCandidate,
    defining_residual,
    fit_potential,
    identity_suite,
    verify_soliton,
)
from .symmetry import (
    PseudoSymmetricConstantType,
    PseudoSymmetricVariable,
    SemiSymmetric,
    SymmetryVerdict,
    classify_points,
    classify_region,
)
from .tensors import curvature, laplacian, scalar_field_jet

SCHEMA = 1
EXIT_OK, EXIT_INPUT, EXIT_FAILED = 0, 1, 2

CURVATURE_NOTE = (
    "R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]; R_ijkl = g(R(d_i,d_j)d_k, d_l), so the unit sphere "
    "has sectional curvature +1 and a space form has R = kappa G with G_ijkl = g_jk g_il - g_ik g_jl."
)
RESIDUAL_NOTE = (
    "Soliton residuals are g-operator norms (largest |eigenvalue| of g^-1 T); identity residuals are "
    "g-norms of the difference of both sides. The pseudo-symmetry dependence residual is "
    "|R.R - L Q(g,R)| / max(|R.R|, |R|^2)."
)
NOTES = (CURVATURE_NOTE, CONVENTION_NOTE, YAMABE_NOTE, RESIDUAL_NOTE)


def _clean(value):
    """Plain JSON-ready data: numpy scalars and arrays unpacked, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def _check(name: str, value: float, tol: float) -> dict:
    return {"name": name, "value": value, "tolerance": tol, "passed": bool(value <= tol)}


def _resolved_grid(manifest: Manifest, entry) -> GridSpec:
    """The manifest grid, or the catalog box at 5 points per axis."""
    return manifest.grid if manifest.grid is not None else GridSpec(entry.box, (5, 5, 5))


def _points(manifest: Manifest, spec, entry) -> np.ndarray:
    grid = _resolved_grid(manifest, entry)
    if manifest.random_points:
        rng = np.random.default_rng(manifest.seed)
        lo = np.array([b[0] for b in grid.box])
        hi = np.array([b[1] for b in grid.box])
        return lo + (hi - lo) * rng.uniform(0.02, 0.98, size=(manifest.random_points, 3))
    return sample_grid(grid, spec.domain)


def _chunks(points: np.ndarray, workers: int) -> list[np.ndarray]:
    return [c for c in np.array_split(points, max(1, workers)) if len(c)]


def _ordered_map(fn, items, workers: int) -> list:
    """``map`` that keeps input order, optionally across processes."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _classify_chunk(spec, tolerances, pts) -> list[SymmetryVerdict]:
    return classify_points(curvature(metric_jet(spec, pts, 2)), tolerances)


def _verdict_record(point, v: SymmetryVerdict) -> dict:
    return {
        "point": point,
        "eigenvalues": list(v.spectrum.eigenvalues),
        "pattern": v.spectrum.pattern,
        "verdict": v.cls,
        "L": v.L,
        "L_tensor": v.L_tensor,
        "L_spectral": v.L_spectral,
        "mu": v.mu,
        "scalar": v.scalar,
        "residual": v.dependence_residual,
        "deviation": v.deviation,
        "semi_symmetry_condition": v.semi_symmetric_condition,
        "routes_agree": v.routes_agree,
    }


def _run_classify(manifest, spec, entry, workers):
    pts = _points(manifest, spec, entry)
    tol = manifest.symmetry_tolerances()
    verdicts = [v for chunk in _ordered_map(partial(_classify_chunk, spec, tol), _chunks(pts, workers), workers)
                for v in chunk]
    records = [_verdict_record(p, v) for p, v in zip(pts, verdicts)]
    region = None
    if len(verdicts) >= 8:
        r = classify_region(verdicts, tol)
        region = dict(vars(r))
    dep_tol = manifest.check_tolerance("dependence")
    pseudo = [v for v in verdicts if v.cls in (SemiSymmetric, PseudoSymmetricVariable, PseudoSymmetricConstantType)]
    checks = [
        {
            "name": "L routes agree",
            "value": sum(1 for v in verdicts if v.routes_agree is False),
            "tolerance": 0,
            "passed": all(v.routes_agree is not False for v in verdicts),
        },
        _check("dependence residual on pair-pattern points",
               max((v.dependence_residual for v in pseudo), default=0.0), dep_tol),
    ]
    return {"points": records, "region": region}, checks


def _fitted_lambda(candidate: SolitonCandidate, pts) -> float:
    """Least-squares lambda for a given potential: the trace part of the defining equation."""
    bundle = curvature(metric_jet(candidate.spec, pts, 2))
    f = scalar_field_jet(candidate.potential, pts, candidate.spec.parameters)
    lap = laplacian(f, bundle)
    if candidate.kind == RICCI:
        lam = (lap + bundle.scalar) / 3.0
    else:
        lam = lap / 3.0 + bundle.scalar
    return float(np.mean(lam))


def _run_verify(manifest, spec, entry, workers):
    block = manifest.soliton
    pts = _points(manifest, spec, entry)
    lam = block.lam
    if lam == FIT:
        lam = _fitted_lambda(SolitonCandidate.parse(block.kind, spec, block.f, 0.0), pts)
    candidate = SolitonCandidate.parse(block.kind, spec, block.f, lam)
    ident_tol = manifest.check_tolerance("identity")
    def_tol = manifest.check_tolerance("defining")
    rep = verify_soliton(candidate, pts, ident_tol)
    defining = defining_residual(candidate, pts)
    suite = identity_suite(candidate, pts)
    records = [
        {"point": p, "residual": d, "identities": {k: v[i] for k, v in suite.items()}}
        for i, (p, d) in enumerate(zip(pts, defining))
    ]
    soliton = {
        "kind": rep.kind,
        "lambda": rep.lam,
        "lambda_fitted": block.lam == FIT,
        "type": rep.type_label,
        "points": rep.points,
        "defining": vars(rep.defining),
        "identities": {k: vars(v) for k, v in rep.identities.items()},
        "consistent_forms": list(rep.consistent_forms),
    }
    checks = [_check("defining residual (sup)", rep.defining.sup, def_tol)]
    required = RICCI_IDENTITIES if block.kind == RICCI else YAMABE_DERIVED
    checks += [_check(f"identity: {name}", rep.identities[name].sup, ident_tol) for name in required]
    return {"points": records, "soliton": soliton}, checks


def _run_fit(manifest, spec, entry, workers):
    if manifest.random_points:
        raise ManifestError("fit-soliton needs a regular grid; drop random_points")
    grid = _resolved_grid(manifest, entry)
    fit = fit_potential(manifest.soliton.kind, spec, grid)
    f_int = fit.f_values[1:-1, 1:-1, 1:-1].ravel()
    records = [
        {"point": p, "f": f, "residual": r}
        for p, f, r in zip(fit.interior_points, f_int, fit.point_residuals)
    ]
    soliton = {
        "kind": fit.kind,
        "lambda": fit.lam,
        "type": fit.type_label,
        "relative_residual": fit.residual,
        "degenerate": fit.degenerate,
        "lambda_sensitivity": fit.lam_sensitivity,
        "note": fit.note,
        "grid": {"box": [list(b) for b in grid.box], "counts": list(grid.counts)},
        "f_values": fit.f_values.ravel(),
    }
    checks = [_check("fit relative residual", fit.residual, manifest.check_tolerance("fit_residual"))]
    return {"points": records, "soliton": soliton}, checks


def _diagnose(spec, step, tol, point) -> dict:
    try:
        rep = diagnose_point(spec, point, step, tol)
    except FrameError as exc:
        return {"point": point, "error": str(exc)}
    return {
        "point": point,
        "frame": rep.frame.vectors,
        "mu": rep.frame.mu,
        "L": rep.frame.L,
        "B": rep.frame.B,
        "bianchi": dict(zip(BIANCHI_RELATIONS, rep.bianchi)),
        "curvature_forms": dict(zip(CURVATURE_FORMS, rep.curvature_forms)),
        "frame_residuals": rep.frame_residuals,
        "residual": float(np.max(rep.bianchi)),
    }


def _run_diagnostics(manifest, spec, entry, workers):
    pts = _points(manifest, spec, entry)
    grid = _resolved_grid(manifest, entry)
    step = manifest.step or default_step(grid.box)
    tol = manifest.symmetry_tolerances().multiplicity
    records = _ordered_map(partial(_diagnose, spec, step, tol), list(pts), workers)
    ok = [r for r in records if "error" not in r]
    checks = [
        {"name": "frame defined at every point", "value": len(records) - len(ok), "tolerance": 0,
         "passed": len(ok) == len(records)},
        _check("Bianchi frame relations (sup)",
               max((max(r["bianchi"].values()) for r in ok), default=0.0), manifest.check_tolerance("bianchi_frame")),
        _check("eigenframe curvature forms (sup)",
               max((max(r["curvature_forms"].values()) for r in ok), default=0.0),
               manifest.check_tolerance("curvature_forms")),
        _check("frame orthonormality (sup)",
               max((r["frame_residuals"]["orthonormality"] for r in ok), default=0.0), 1e-10),
        _check("B antisymmetry (sup)",
               max((r["frame_residuals"]["B_antisymmetry"] for r in ok), default=0.0), 1e-6),
    ]
    return {"points": records, "step": step}, checks


_RUNNERS = {
    "classify": _run_classify,
    "verify-soliton": _run_verify,
    "fit-soliton": _run_fit,
    "diagnostics": _run_diagnostics,
}


def run_manifest(manifest: Manifest, workers: int = 1, timing: bool = False) -> tuple[dict, int]:
    """Execute ``manifest``; returns the report and the exit code (0 passed, 2 a check failed)."""
    start = time.perf_counter()
    spec, entry = build_metric(manifest.metric)
    body, checks = _RUNNERS[manifest.task](manifest, spec, entry, workers)
    passed = all(c["passed"] for c in checks)
    report = {
        "schema": SCHEMA,
        "version": __version__,
        "manifest": manifest.echo(),
        "coords": list(spec.coords),
        "task": manifest.task,
        "passed": passed,
        "checks": checks,
        "region": body.get("region"),
        "soliton": body.get("soliton"),
        "points": body["points"],
        "notes": list(NOTES),
        "timing": {"seconds": time.perf_counter() - start, "workers": workers} if timing else None,
    }
    if "step" in body:
        report["diagnostics"] = {"step": body["step"]}
    return _clean(report), EXIT_OK if passed else EXIT_FAILED


def catalog_report() -> dict:
    entries = []
    for name in CATALOG_NAMES:
        e = catalog_lookup(name)
        entries.append({
            "name": name,
            "coords": list(e.spec.coords),
            "parameters": dict(e.spec.parameters),
            "box": [list(b) for b in e.box],
            "ricci_eigenvalues": list(e.ricci_eigenvalues),
            "scalar": e.scalar,
            "verdict": e.verdict,
            "solitons": [{"kind": s.kind, "f": s.potential, "lambda": s.lam} for s in e.solitons],
            "description": e.description,
        })
    return _clean({"schema": SCHEMA, "version": __version__, "entries": entries})


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def to_text(report: dict) -> str:
    if "entries" in report:
        lines = [f"{'name':<12} {'ricci eigenvalues':<44} {'r':<18} verdict"]
        for e in report["entries"]:
            lines.append(f"{e['name']:<12} {', '.join(e['ricci_eigenvalues']):<44} {e['scalar']:<18} {e['verdict']}")
        return "\n".join(lines) + "\n"

    out = io.StringIO()
    m = report["manifest"]
    metric = m["metric"].get("catalog", m["metric"].get("name"))
    out.write(f"solitonlab {report['version']}  task={report['task']}  metric={metric}\n")
    coords = report["coords"]
    task = report["task"]
    if task == "classify":
        out.write(f"{'point':<30} {'eigenvalues':<36} {'class':<28} {'L':>12} {'residual':>10}\n")
        for r in report["points"]:
            pt = "(" + ", ".join(f"{x:.4g}" for x in r["point"]) + ")"
            ev = ", ".join(f"{x:.6g}" for x in r["eigenvalues"])
            out.write(f"{pt:<30} {ev:<36} {r['verdict']:<28} {_fmt(r['L']):>12} {_fmt(r['residual']):>10}\n")
        if report["region"]:
            reg = report["region"]
            out.write(f"region: {reg['cls']}  L = {_fmt(reg['mean_L'])} (stdev {_fmt(reg['stdev_L'])})\n")
    elif task in ("verify-soliton", "fit-soliton"):
        s = report["soliton"]
        out.write(f"{s['kind']} soliton, lambda = {_fmt(s['lambda'])} ({s['type']})\n")
        if task == "verify-soliton":
            out.write(f"defining residual: sup {_fmt(s['defining']['sup'])}, rms {_fmt(s['defining']['rms'])}\n")
            for name, st in s["identities"].items():
                out.write(f"  {name:<56} sup {_fmt(st['sup'])}\n")
        else:
            out.write(f"relative residual {_fmt(s['relative_residual'])}, degenerate {_fmt(s['degenerate'])}\n")
            if s["note"]:
                out.write(f"note: {s['note']}\n")
    else:
        out.write(f"{'point':<30} {'mu':>10} {'L':>10} {'bianchi':>10} {'forms':>10}\n")
        for r in report["points"]:
            pt = "(" + ", ".join(f"{x:.4g}" for x in r["point"]) + ")"
            if "error" in r:
                out.write(f"{pt:<30} error: {r['error']}\n")
                continue
            forms = max(r["curvature_forms"].values())
            out.write(f"{pt:<30} {_fmt(r['mu']):>10} {_fmt(r['L']):>10} {_fmt(r['residual']):>10} {_fmt(forms):>10}\n")
    for c in report["checks"]:
        mark = "PASS" if c["passed"] else "FAIL"
        out.write(f"[{mark}] {c['name']}: {_fmt(c['value'])} (tol {_fmt(c['tolerance'])})\n")
    out.write(f"coords: {', '.join(coords)}\n")
    return out.getvalue()


def to_csv(report: dict) -> str:
    """Plot data: one row per point with L (when defined) and the task's residual."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(report["coords"]) + ["L", "residual"])
    for r in report["points"]:
        writer.writerow([repr(x) for x in r["point"]] + [
            "" if r.get("L") is None else repr(r["L"]),
            "" if r.get("residual") is None else repr(r["residual"]),
        ])
    return out.getvalue()
