"""Experiment sweeps over perturbation ladders, power-law fitting, and
report emission (CSV + JSON + self-contained SVG).

A sweep solves one problem per ladder value eps, records the deficit, the
symmetry diagnostics, the critical plane position and the uniform-bound
diagnostics (sup norm, linear-growth ratio), and fits the exponent alpha of
asymmetry ~ C * deficit^alpha on the records that sit above the grid noise
floor.  Identical config + seed reproduces identical bytes: no timestamps
enter the emitted files.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import deficits, domains, movingplanes, solver, symmetry
from .errors import ValidationError
from .fields import FieldSpec, NonlinearitySpec, angular_harmonic, axial_linear
from .grid import DiskGrid, build_grid

SCHEMA_VERSION = "1"

CSV_COLUMNS = (
    "eps",
    "deficit_total",
    "deficit_zeroth",
    "asymmetry",
    "monotonicity_defect",
    "lambda_star",
    "sup_norm",
    "inf_ratio",
    "failed",
)

KAPPA_FAMILIES = ("axial-linear", "angular-harmonic")
MAP_FAMILIES = ("ellipsoid", "normal-perturbation")


def pool_width(requested: int | None) -> int:
    """Worker count for the ladder pool, capped by GNNLAB_THREADS."""
    width = requested if requested else (os.cpu_count() or 1)
    cap = os.environ.get("GNNLAB_THREADS")
    if cap:
        width = min(width, max(1, int(cap)))
    return max(1, width)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str  # "kappa" | "map"
    family: str
    ladder: tuple
    nonlinearity: NonlinearitySpec
    n_r: int = 129
    n_theta: int = 256
    family_params: dict = dc_field(default_factory=dict)
    solver_params: solver.SolverParams = solver.SolverParams()
    scan_step: float | None = None
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.kind not in ("kappa", "map"):
            raise ValidationError(f"unknown sweep kind {self.kind!r}")
        families = KAPPA_FAMILIES if self.kind == "kappa" else MAP_FAMILIES
        if self.family not in families:
            raise ValidationError(
                f"family {self.family!r} not available for kind {self.kind!r}"
            )
        lad = np.asarray(self.ladder, dtype=np.float64)
        if len(lad) < 3:
            raise ValidationError("ladder needs at least 3 values for fitting")
        if np.any(lad < 0.0):
            raise ValidationError("ladder values must be nonnegative")
        if np.any(np.diff(lad) <= 0.0):
            raise ValidationError("ladder must be strictly increasing")

    @property
    def grid(self) -> DiskGrid:
        return build_grid(self.n_r, self.n_theta)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "family": self.family,
            "family_params": dict(self.family_params),
            "nonlinearity": self.nonlinearity.to_json(),
            "ladder": list(self.ladder),
            "grid": {"n_r": self.n_r, "n_theta": self.n_theta},
            "solver": {
                "newton_tol": self.solver_params.newton_tol,
                "max_newton_iters": self.solver_params.max_newton_iters,
            },
            "scan_step": self.scan_step,
            "seed": self.seed,
            "threads": self.threads,
        }

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        if isinstance(obj, str):
            obj = json.loads(obj)
        grid = obj.get("grid", {})
        sp = obj.get("solver", {})
        params = solver.SolverParams(
            newton_tol=sp.get("newton_tol", 1e-10),
            max_newton_iters=sp.get("max_newton_iters", 50),
        )
        return cls(
            kind=obj["kind"],
            family=obj["family"],
            ladder=tuple(obj["ladder"]),
            nonlinearity=NonlinearitySpec.from_json(obj["nonlinearity"]),
            n_r=grid.get("n_r", 129),
            n_theta=grid.get("n_theta", 256),
            family_params=dict(obj.get("family_params", {})),
            solver_params=params,
            scan_step=obj.get("scan_step"),
            seed=obj.get("seed", 0),
            threads=obj.get("threads"),
        )


def kappa_for_eps(cfg: ExperimentConfig, eps: float) -> FieldSpec:
    if cfg.family == "axial-linear":
        return axial_linear(eps, base=cfg.family_params.get("base", 1.0))
    return angular_harmonic(
        eps,
        k=cfg.family_params.get("k", 2),
        m=cfg.family_params.get("m"),
        base=cfg.family_params.get("base", 1.0),
    )


def map_for_eps(cfg: ExperimentConfig, eps: float) -> domains.DomainMap:
    profile = None
    if cfg.family == "normal-perturbation":
        profile = domains.CircleProfile.from_json(
            cfg.family_params.get("profile", {"cos_coeffs": [0.0, 1.0]})
        )
    return domains.make_map(cfg.family, eps, profile)


@dataclass
class SweepRecord:
    eps: float
    deficit_total: float = math.nan
    deficit_zeroth: float = math.nan
    asymmetry: float = math.nan
    monotonicity_defect: float = math.nan
    lambda_star: float = math.nan
    sup_norm: float = math.nan
    inf_ratio: float = math.nan
    failed: bool = False
    failure_reason: str = ""

    def row(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list
    alpha: float
    intercept: float
    fit_residual: float
    fit_window: list
    noise_floor: float

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_json(),
            "records": [r.row() for r in self.records],
            "fit": {
                "alpha": self.alpha,
                "intercept": self.intercept,
                "residual": self.fit_residual,
                "window": self.fit_window,
            },
            "noise_floor": self.noise_floor,
        }


def fit_alpha(points) -> tuple[float, float, float]:
    """Least-squares slope of log(asymmetry) against log(deficit).

    ``points`` is a sequence of (deficit, asymmetry) pairs, all positive;
    returns (slope, intercept, rms residual).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValidationError("fit needs at least 3 (deficit, asymmetry) pairs")
    if np.any(pts <= 0.0):
        raise ValidationError("fit requires strictly positive deficits and asymmetries")
    lx = np.log(pts[:, 0])
    ly = np.log(pts[:, 1])
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return float(coef[0]), float(coef[1]), rms


def _solve_record(cfg: ExperimentConfig, eps: float) -> SweepRecord:
    rec = SweepRecord(eps=eps)
    grid = cfg.grid
    try:
        if cfg.kind == "kappa":
            kappa = kappa_for_eps(cfg, eps)
            report = solver.solve_semilinear(
                kappa, cfg.nonlinearity, grid, cfg.solver_params
            )
            rec.deficit_total = deficits.deficit_kappa(kappa).total
            rec.deficit_zeroth = deficits.deficit_zeroth(kappa)
        else:
            dmap = map_for_eps(cfg, eps)
            problem = domains.pullback(dmap, cfg.nonlinearity)
            report = solver.solve_general(
                problem.op, problem.rhs, grid, cfg.solver_params
            )
            rec.deficit_total = deficits.deficit_general(
                problem.op, problem.rhs, U=max(report.sup_norm, 1e-6)
            ).total
        if not report.converged:
            rec.failed = True
            return rec
        sym = symmetry.asymmetry(report.field, n_directions=4)
        rec.asymmetry = sym.asymmetry
        rec.monotonicity_defect = sym.monotonicity_defect
        scan = movingplanes.lambda_star(
            report.field, slack=rec.deficit_total, scan_step=cfg.scan_step
        )
        rec.lambda_star = scan.lambda_star
        rec.sup_norm = report.sup_norm
        rec.inf_ratio = report.inf_ratio
    except (ValidationError, solver.SingularJacobianError) as exc:
        rec.failed = True
        rec.failure_reason = str(exc)
    return rec


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """One solve + deficit + symmetry + plane-scan record per ladder value.

    A baseline solve at eps = 0 sets the grid noise floor (its measured
    asymmetry plus 10x solver tolerance); fitting uses records with positive
    deficit and asymmetry above 10x that floor.  Fewer than 3 usable records
    is an error.
    """
    baseline = _solve_record(cfg, 0.0)
    if baseline.failed:
        raise ValidationError("baseline (eps = 0) solve failed")
    noise_floor = baseline.asymmetry + 10.0 * cfg.solver_params.newton_tol

    width = pool_width(cfg.threads)
    eps_values = list(cfg.ladder)
    if width > 1:
        with ThreadPoolExecutor(max_workers=width) as pool:
            records = list(pool.map(lambda e: _solve_record(cfg, e), eps_values))
    else:
        records = [_solve_record(cfg, e) for e in eps_values]

    usable = [
        i
        for i, r in enumerate(records)
        if not r.failed
        and r.deficit_total > 0.0
        and r.asymmetry > 10.0 * noise_floor
    ]
    if len(usable) < 3:
        raise ValidationError(
            f"sweep produced {len(usable)} usable records; need at least 3 "
            f"(noise floor {noise_floor:g})"
        )
    alpha, intercept, resid = fit_alpha(
        [(records[i].deficit_total, records[i].asymmetry) for i in usable]
    )
    return SweepResult(
        config=cfg,
        records=records,
        alpha=alpha,
        intercept=intercept,
        fit_residual=resid,
        fit_window=usable,
        noise_floor=noise_floor,
    )


# -- report emission --------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def results_csv(result: SweepResult) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for rec in result.records:
        row = rec.row()
        lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _svg_plot(result: SweepResult) -> str:
    """Log-log scatter of (deficit, asymmetry) with the fitted line.

    Hand-rolled SVG so the output is byte-deterministic and free of external
    assets.
    """
    pts = [
        (r.deficit_total, r.asymmetry)
        for r in result.records
        if not r.failed and r.deficit_total > 0 and r.asymmetry > 0
    ]
    w, h, margin = 640, 480, 60
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
    ]
    if pts:
        lx = [math.log10(p[0]) for p in pts]
        ly = [math.log10(p[1]) for p in pts]
        x0, x1 = min(lx), max(lx)
        y0, y1 = min(ly), max(ly)
        xpad = 0.05 * max(x1 - x0, 1e-9)
        ypad = 0.05 * max(y1 - y0, 1e-9)
        x0, x1 = x0 - xpad, x1 + xpad
        y0, y1 = y0 - ypad, y1 + ypad

        def sx(v):
            return margin + (v - x0) / (x1 - x0) * (w - 2 * margin)

        def sy(v):
            return h - margin - (v - y0) / (y1 - y0) * (h - 2 * margin)

        ln10 = math.log(10.0)
        ya = (result.alpha * x0 * ln10 + result.intercept) / ln10
        yb = (result.alpha * x1 * ln10 + result.intercept) / ln10
        parts.append(
            f'<line x1="{sx(x0):.2f}" y1="{sy(ya):.2f}" x2="{sx(x1):.2f}" '
            f'y2="{sy(yb):.2f}" stroke="#888" stroke-width="1.5"/>'
        )
        for px, py in zip(lx, ly):
            parts.append(
                f'<circle cx="{sx(px):.2f}" cy="{sy(py):.2f}" r="4" fill="#1f4e8c"/>'
            )
        parts.append(
            f'<text x="{w / 2:.0f}" y="{h - 15}" text-anchor="middle" '
            f'font-family="monospace" font-size="13">log10 deficit '
            f"(alpha = {result.alpha:.4f})</text>"
        )
        parts.append(
            f'<text x="18" y="{h / 2:.0f}" text-anchor="middle" '
            f'font-family="monospace" font-size="13" '
            f'transform="rotate(-90 18 {h / 2:.0f})">log10 asymmetry</text>'
        )
    axis = (
        f'<path d="M {margin} {margin} L {margin} {h - margin} '
        f'L {w - margin} {h - margin}" stroke="black" fill="none"/>'
    )
    parts.append(axis)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(result: SweepResult, out_dir: str) -> dict:
    """Write results.csv, results.json and plot.svg; returns the paths."""
    if not out_dir:
        raise ValidationError("output directory path is empty")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out_dir!r}: {exc}")
    paths = {
        "csv": os.path.join(out_dir, "results.csv"),
        "json": os.path.join(out_dir, "results.json"),
        "svg": os.path.join(out_dir, "plot.svg"),
    }
    try:
        with open(paths["csv"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(results_csv(result))
        with open(paths["json"], "w", encoding="utf-8", newline="\n") as fh:
            json.dump(result.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(paths["svg"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_svg_plot(result))
    except OSError as exc:
        raise ValidationError(f"write failed under {out_dir!r}: {exc}")
    return paths
