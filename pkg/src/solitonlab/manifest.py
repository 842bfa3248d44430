"""Run manifests: a small YAML (or JSON) document describing one task.

Schema::

    metric:                      # either a catalog entry ...
      catalog: r_x_s2
      params: {kappa: 1.0}
    metric:                      # ... or an inline chart
      name: custom
      coords: [x, y, z]          # optional, default x0 x1 x2
      components: {g00: "1", g11: "exp(2*x)", g22: "1"}
      parameters: {a: 0.5}       # optional
      domain: [[null, null], [null, null], [0, null]]   # optional open intervals
    task: classify | verify-soliton | fit-soliton | diagnostics
    grid: "(-1,1)^3:5"           # or {box: [[lo, hi], ...], counts: [n0, n1, n2]}
    random_points: 0             # >0: sample this many seeded points in the grid box instead
    seed: 0
    tolerances: {multiplicity: 1e-6, defining: 1e-9, ...}
    soliton: {kind: ricci, f: "t^2/2", lambda: 1.0}   # f / lambda may be "fit"
    diagnostics: {step: 0.003}   # optional frame-differencing step
    output: {path: report.json, format: json, csv: points.csv}
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from . import dsl
from .catalog import CatalogEntry, GridSpec, catalog_lookup, parse_grid
from .metric import Domain, Interval, MetricSpec, REAL_LINE
from .symmetry import DEFAULT_TOLERANCES, Tolerances

TASKS = ("classify", "verify-soliton", "fit-soliton", "diagnostics")
FORMATS = ("json", "text")
FIT = "fit"
TOP_LEVEL = ("metric", "task", "grid", "random_points", "seed", "tolerances", "soliton", "diagnostics", "output")

# Task-level thresholds, overridable through ``tolerances`` next to the classifier ones.
CHECK_TOLERANCES = {
    "defining": 1e-9,  # sup of the soliton defining residual
    "identity": 1e-6,  # sup of each required soliton identity
    "fit_residual": 1e-3,  # relative least-squares residual of a fitted potential
    "bianchi_frame": 1e-5,  # frame relations from the second Bianchi identity
    "curvature_forms": 1e-7,  # eigenframe curvature blocks and r = 2(mu + L)
    "dependence": 1e-8,  # |R.R - L Q(g, R)| relative, on pseudo-symmetric points
}


class ManifestError(ValueError):
    """The manifest is unreadable or violates the schema."""


@dataclass(frozen=True)
class SolitonBlock:
    kind: str
    f: str  # expression or "fit"
    lam: float | str  # number or "fit"


@dataclass(frozen=True)
class Manifest:
    task: str
    metric: dict
    grid: GridSpec | None
    tolerances: dict[str, float] = field(default_factory=dict)
    soliton: SolitonBlock | None = None
    random_points: int = 0
    seed: int = 0
    step: float | None = None
    output_path: str | None = None
    output_format: str | None = None  # None means json
    csv_path: str | None = None

    def symmetry_tolerances(self) -> Tolerances:
        names = {f.name for f in fields(Tolerances)}
        return DEFAULT_TOLERANCES.updated(**{k: v for k, v in self.tolerances.items() if k in names})

    def check_tolerance(self, name: str) -> float:
        return self.tolerances.get(name, CHECK_TOLERANCES[name])

    def echo(self) -> dict:
        """Normalized manifest as plain data (what the report embeds)."""
        out: dict[str, Any] = {"task": self.task, "metric": copy.deepcopy(self.metric)}
        if self.grid is not None:
            out["grid"] = {"box": [list(b) for b in self.grid.box], "counts": list(self.grid.counts)}
        out["random_points"] = self.random_points
        out["seed"] = self.seed
        out["tolerances"] = dict(sorted(self.tolerances.items()))
        if self.soliton is not None:
            out["soliton"] = {"kind": self.soliton.kind, "f": self.soliton.f, "lambda": self.soliton.lam}
        if self.step is not None:
            out["diagnostics"] = {"step": self.step}
        out["output"] = {"path": self.output_path, "format": self.output_format, "csv": self.csv_path}
        return out


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ManifestError(f"{what} must be a number, got {value!r}")
    try:
        out = float(value)
    except ValueError:
        raise ManifestError(f"{what} must be a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ManifestError(f"{what} must be finite")
    return out


def _parse_grid(raw) -> GridSpec:
    if isinstance(raw, str):
        try:
            return parse_grid(raw)
        except ValueError as exc:
            raise ManifestError(str(exc)) from None
    if isinstance(raw, dict):
        try:
            box = tuple(tuple(_number(v, "grid box bound") for v in pair) for pair in raw["box"])
            counts = raw["counts"]
            if isinstance(counts, int):
                counts = [counts] * 3
            return GridSpec(box, tuple(int(c) for c in counts))
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad grid block: {exc}") from None
    raise ManifestError("grid must be a string like '(-1,1)^3:5' or a {box, counts} mapping")


def _parse_tolerances(raw) -> dict[str, float]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ManifestError("tolerances must be a mapping of name to positive number")
    known = {f.name for f in fields(Tolerances)} | set(CHECK_TOLERANCES)
    out = {}
    for name, value in raw.items():
        if name not in known:
            raise ManifestError(f"unknown tolerance {name!r}; known: {', '.join(sorted(known))}")
        v = _number(value, f"tolerance {name}")
        if v <= 0:
            raise ManifestError(f"tolerance {name} must be positive, got {v}")
        out[name] = v
    return out


def _parse_metric(raw) -> dict:
    if not isinstance(raw, dict):
        raise ManifestError("metric block must be a mapping")
    if "catalog" in raw:
        extra = set(raw) - {"catalog", "params"}
        if extra:
            raise ManifestError(f"catalog metric takes only 'catalog' and 'params', got {sorted(extra)}")
        params = raw.get("params") or {}
        if not isinstance(params, dict):
            raise ManifestError("metric params must be a mapping")
        return {"catalog": str(raw["catalog"]), "params": {k: _number(v, f"param {k}") for k, v in params.items()}}
    if "components" not in raw:
        raise ManifestError("metric block needs 'catalog' or 'components'")
    extra = set(raw) - {"name", "coords", "components", "parameters", "domain"}
    if extra:
        raise ManifestError(f"unknown keys in inline metric: {sorted(extra)}")
    comps = raw["components"]
    if not isinstance(comps, dict):
        raise ManifestError("metric components must be a mapping like {g00: '1', ...}")
    out = {
        "name": str(raw.get("name", "inline")),
        "coords": [str(c) for c in raw.get("coords", dsl.COORDS)],
        "components": {str(k): str(v) for k, v in comps.items()},
        "parameters": {k: _number(v, f"parameter {k}") for k, v in (raw.get("parameters") or {}).items()},
    }
    if len(out["coords"]) != 3:
        raise ManifestError("coords must name exactly three coordinates")
    if raw.get("domain") is not None:
        dom = raw["domain"]
        if not isinstance(dom, list) or len(dom) != 3:
            raise ManifestError("domain must be three [lo, hi] pairs (null for unbounded)")
        out["domain"] = [[None if v is None else _number(v, "domain bound") for v in pair] for pair in dom]
    return out


def _parse_soliton(raw, task: str) -> SolitonBlock | None:
    if raw is None:
        if task in ("verify-soliton", "fit-soliton"):
            raise ManifestError(f"task {task} needs a soliton block")
        return None
    if not isinstance(raw, dict):
        raise ManifestError("soliton block must be a mapping")
    extra = set(raw) - {"kind", "f", "lambda"}
    if extra:
        raise ManifestError(f"unknown keys in soliton block: {sorted(extra)}")
    kind = raw.get("kind", "ricci")
    if kind not in ("ricci", "yamabe"):
        raise ManifestError(f"soliton kind must be ricci or yamabe, got {kind!r}")
    f = raw.get("f", FIT if task == "fit-soliton" else None)
    lam = raw.get("lambda", FIT)
    if f is None:
        raise ManifestError("soliton block needs a potential f (an expression or 'fit')")
    f = str(f)
    lam = FIT if lam == FIT else _number(lam, "soliton lambda")
    if task == "verify-soliton" and f == FIT:
        raise ManifestError("verify-soliton needs an explicit potential; use task fit-soliton to fit f")
    if task == "fit-soliton" and (f != FIT or lam != FIT):
        raise ManifestError("fit-soliton fits both f and lambda; set f: fit and lambda: fit")
    return SolitonBlock(kind, f, lam)


def parse_manifest(data) -> Manifest:
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a mapping")
    unknown = set(data) - set(TOP_LEVEL)
    if unknown:
        raise ManifestError(f"unknown manifest keys {sorted(unknown)}")
    task = data.get("task")
    if task not in TASKS:
        raise ManifestError(f"task must be one of {', '.join(TASKS)}, got {task!r}")
    if "metric" not in data:
        raise ManifestError("manifest needs a metric block")
    metric = _parse_metric(data["metric"])
    grid = _parse_grid(data["grid"]) if data.get("grid") is not None else None
    if grid is None and "catalog" not in metric:
        raise ManifestError("inline metrics need an explicit grid")
    output = data.get("output") or {}
    if not isinstance(output, dict):
        raise ManifestError("output block must be a mapping")
    extra = set(output) - {"path", "format", "csv"}
    if extra:
        raise ManifestError(f"unknown keys in output block: {sorted(extra)}")
    fmt = output.get("format")
    if fmt is not None and fmt not in FORMATS:
        raise ManifestError(f"output format must be json or text, got {fmt!r}")
    diag = data.get("diagnostics") or {}
    if not isinstance(diag, dict) or set(diag) - {"step"}:
        raise ManifestError("diagnostics block takes only 'step'")
    step = _number(diag["step"], "diagnostics step") if "step" in diag else None
    if step is not None and step <= 0:
        raise ManifestError("diagnostics step must be positive")
    try:
        n_random = int(data.get("random_points", 0) or 0)
        seed = int(data.get("seed", 0) or 0)
    except (TypeError, ValueError):
        raise ManifestError("random_points and seed must be integers") from None
    if n_random < 0:
        raise ManifestError("random_points must be non-negative")
    return Manifest(
        task=task,
        metric=metric,
        grid=grid,
        tolerances=_parse_tolerances(data.get("tolerances")),
        soliton=_parse_soliton(data.get("soliton"), task),
        random_points=n_random,
        seed=seed,
        step=step,
        output_path=output.get("path"),
        output_format=fmt,
        csv_path=output.get("csv"),
    )


def load_manifest(path) -> Manifest:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ManifestError(f"manifest {path} is not valid YAML: {exc}") from None
    return parse_manifest(data)


def build_metric(block: dict) -> tuple[MetricSpec, CatalogEntry | None]:
    if "catalog" in block:
        entry = catalog_lookup(block["catalog"], block.get("params"))
        return entry.spec, entry
    domain = Domain()
    if "domain" in block:
        axes = []
        for lo, hi in block["domain"]:
            lo = -math.inf if lo is None else lo
            hi = math.inf if hi is None else hi
            axes.append(REAL_LINE if (lo, hi) == (-math.inf, math.inf) else Interval(lo, hi))
        domain = Domain(tuple(axes))
    spec = MetricSpec.from_strings(
        block["name"], block["components"], domain, block["parameters"], tuple(block["coords"])
    )
    return spec, None
