"""Finite-difference Newton solver on the polar disk grid.

Two problem forms share one discretization substrate and one Newton driver:

    semilinear   -lap(u) = kappa(x) f(u)
    general      -Tr(A D^2 u) + b . grad u = g(x, u)

The Laplacian is the 5-point polar stencil u_rr + u_r/r + u_tt/r^2 with the
averaged-neighbor origin stencil 4*(mean(u(r1)) - u(0))/r1^2, which keeps the
discrete problem exactly equivariant under integer angular shifts.  The
general operator is discretized through the polar-to-Cartesian chain rule
(mixed term by centered cross-differences); when the sampled coefficients
equal the identity exactly, assembly routes through the very same Laplacian
matrix as the semilinear path, so the two entry points produce identical
iterates.

Unknown layout: index 0 is the origin value; index 1 + (i-1)*n_theta + j is
ring i = 1..n_r-2, angle j.  The boundary ring carries the homogeneous
Dirichlet value and is eliminated.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    GridMismatchError,
    SingularJacobianError,
    ValidationError,
)
from .fields import FieldSpec, NonlinearitySpec, RHSSpec, _as_points
from .grid import DiskGrid, ScalarField

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SolverParams:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    min_damping: float = 1.0 / 64.0
    linear_tol: float = 1e-12
    positivity_floor: float = 0.0

    def __post_init__(self):
        if self.newton_tol <= 0 or self.linear_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.max_newton_iters < 1:
            raise ValidationError("max_newton_iters must be at least 1")


@dataclass(frozen=True)
class OperatorSpec:
    """Elliptic operator L[v] = -Tr(A D^2 v) + b . grad v.

    ``a_fn`` maps an (N, 2) point array to (N, 2, 2) symmetric matrices,
    ``b_fn`` to (N, 2) vectors.  ``lam`` is the ellipticity constant
    Lambda >= 1 with xi^T A xi >= |xi|^2 / Lambda.
    """

    a_fn: object
    b_fn: object
    lam: float = 1.0
    tag: str = "custom"

    @classmethod
    def identity(cls) -> "OperatorSpec":
        def a_fn(pts):
            pts = _as_points(pts)
            out = np.zeros((len(pts), 2, 2))
            out[:, 0, 0] = 1.0
            out[:, 1, 1] = 1.0
            return out

        def b_fn(pts):
            return np.zeros_like(_as_points(pts))

        return cls(a_fn, b_fn, lam=1.0, tag="identity")

    @classmethod
    def constant_diagonal(cls, a11: float, a22: float) -> "OperatorSpec":
        if a11 <= 0 or a22 <= 0:
            raise ValidationError("diagonal entries must be positive")

        def a_fn(pts):
            pts = _as_points(pts)
            out = np.zeros((len(pts), 2, 2))
            out[:, 0, 0] = a11
            out[:, 1, 1] = a22
            return out

        def b_fn(pts):
            return np.zeros_like(_as_points(pts))

        lam = max(1.0, 1.0 / min(a11, a22), a11, a22)
        return cls(a_fn, b_fn, lam=lam, tag=f"diag({a11},{a22})")


def min_eigenvalue_2x2(a: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a batch of symmetric 2x2 matrices (N, 2, 2)."""
    half_tr = 0.5 * (a[:, 0, 0] + a[:, 1, 1])
    half_diff = 0.5 * (a[:, 0, 0] - a[:, 1, 1])
    return half_tr - np.sqrt(half_diff**2 + a[:, 0, 1] * a[:, 1, 0])


def validate_operator(op: OperatorSpec, pts: np.ndarray) -> None:
    """Symmetry to 1e-12 and sampled ellipticity against op.lam."""
    a = op.a_fn(pts)
    asym = np.abs(a[:, 0, 1] - a[:, 1, 0]).max()
    if asym > 1e-12:
        raise ValidationError(f"operator matrix not symmetric: |A12 - A21| = {asym}")
    if op.lam < 1.0:
        raise ValidationError(f"ellipticity constant must be >= 1, got {op.lam}")
    min_eig = float(min_eigenvalue_2x2(a).min())
    if min_eig < 1.0 / op.lam - 1e-9:
        raise ValidationError(
            f"operator not elliptic: sampled min eigenvalue {min_eig} "
            f"< 1/Lambda = {1.0 / op.lam}"
        )


@dataclass(frozen=True)
class SemilinearProblem:
    kappa: FieldSpec
    f: NonlinearitySpec
    grid: DiskGrid | None = None


@dataclass(frozen=True)
class GeneralProblem:
    op: OperatorSpec
    g: RHSSpec
    grid: DiskGrid | None = None


@dataclass
class SolveReport:
    field: ScalarField
    residual_sup: float
    iterations: int
    converged: bool
    positive_interior: bool
    sup_norm: float
    inf_ratio: float
    init_hash: str
    failure: str | None = None


# -- unknown vector <-> field --------------------------------------------


def n_unknowns(grid: DiskGrid) -> int:
    return 1 + (grid.n_r - 2) * grid.n_theta


def unknown_points(grid: DiskGrid) -> np.ndarray:
    """Cartesian coordinates of the unknown nodes, ordered like the vector."""
    x, y = grid.cartesian()
    pts = np.empty((n_unknowns(grid), 2))
    pts[0] = 0.0
    pts[1:, 0] = x[1:-1, :].ravel()
    pts[1:, 1] = y[1:-1, :].ravel()
    return pts


def field_to_vector(field: ScalarField) -> np.ndarray:
    v = field.values
    out = np.empty(n_unknowns(field.grid))
    out[0] = v[0, 0]
    out[1:] = v[1:-1, :].ravel()
    return out


def vector_to_field(grid: DiskGrid, x: np.ndarray) -> ScalarField:
    vals = np.zeros(grid.shape())
    vals[0, :] = x[0]
    vals[1:-1, :] = x[1:].reshape(grid.n_r - 2, grid.n_theta)
    return ScalarField(grid, vals)


# -- operator assembly -----------------------------------------------------


@lru_cache(maxsize=8)
def _laplacian_csr(n_r: int, n_theta: int):
    """Sparse matrix of the discrete Laplacian on the unknown vector."""
    grid = DiskGrid(n_r, n_theta)
    nt = grid.n_theta
    dr = grid.dr
    dth = grid.dtheta
    rows, cols, vals = [], [], []

    # origin row: 4 * (mean(u(r1)) - u0) / dr^2
    rows.append(np.array([0]))
    cols.append(np.array([0]))
    vals.append(np.array([-4.0 / dr**2]))
    rows.append(np.zeros(nt, dtype=np.int64))
    cols.append(1 + np.arange(nt))
    vals.append(np.full(nt, 4.0 / (nt * dr**2)))

    i = np.arange(1, n_r - 1)
    j = np.arange(nt)
    ii, jj = np.meshgrid(i, j, indexing="ij")
    idx = 1 + (ii - 1) * nt + jj
    r = ii * dr

    def add(r_, c_, v_):
        rows.append(r_.ravel())
        cols.append(c_.ravel())
        vals.append(v_.ravel())

    # center
    add(idx, idx, -2.0 / dr**2 - 2.0 / (dth**2 * r**2))
    # radial neighbors
    inner = ii - 1 == 0
    col_im = np.where(inner, 0, idx - nt)
    add(idx, col_im, 1.0 / dr**2 - 1.0 / (2.0 * dr * r))
    outer = ii + 1 == n_r - 1
    keep = ~outer
    add(idx[keep], (idx + nt)[keep], (1.0 / dr**2 + 1.0 / (2.0 * dr * r))[keep])
    # angular neighbors
    col_jp = 1 + (ii - 1) * nt + (jj + 1) % nt
    col_jm = 1 + (ii - 1) * nt + (jj - 1) % nt
    add(idx, col_jp, 1.0 / (dth**2 * r**2))
    add(idx, col_jm, 1.0 / (dth**2 * r**2))

    m = n_unknowns(grid)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    )
    return mat.tocsr()


def laplacian_matrix(grid: DiskGrid):
    return _laplacian_csr(grid.n_r, grid.n_theta)


def _operator_is_identity(op: OperatorSpec, pts: np.ndarray) -> bool:
    a = op.a_fn(pts)
    b = op.b_fn(pts)
    return (
        np.all(a[:, 0, 0] == 1.0)
        and np.all(a[:, 1, 1] == 1.0)
        and np.all(a[:, 0, 1] == 0.0)
        and np.all(a[:, 1, 0] == 0.0)
        and np.all(b == 0.0)
    )


def general_matrix(grid: DiskGrid, op: OperatorSpec):
    """Sparse matrix of L = -Tr(A D^2 .) + b . grad on the unknown vector.

    Cartesian derivatives come from polar ones via the chain rule; the mixed
    derivative uses centered cross-differences.  At the origin the second
    derivatives are extracted from the first ring by discrete harmonic
    projection (mean for the Laplacian part, second harmonics for the
    deviatoric part, first harmonics for the gradient).
    """
    nt = grid.n_theta
    n_r = grid.n_r
    dr = grid.dr
    dth = grid.dtheta
    pts = unknown_points(grid)
    a = op.a_fn(pts)
    b = op.b_fn(pts)

    i = np.arange(1, n_r - 1)
    j = np.arange(nt)
    ii, jj = np.meshgrid(i, j, indexing="ij")
    idx = 1 + (ii - 1) * nt + jj
    r = ii * dr
    th = jj * dth
    c, s = np.cos(th), np.sin(th)

    a11 = a[1:, 0, 0].reshape(ii.shape)
    a12 = a[1:, 0, 1].reshape(ii.shape)
    a22 = a[1:, 1, 1].reshape(ii.shape)
    b1 = b[1:, 0].reshape(ii.shape)
    b2 = b[1:, 1].reshape(ii.shape)

    coef_rr = -(a11 * c**2 + 2.0 * a12 * c * s + a22 * s**2)
    coef_tt = -(a11 * s**2 - 2.0 * a12 * c * s + a22 * c**2) / r**2
    coef_rt = -(2.0 * c * s * (a22 - a11) + 2.0 * a12 * (c**2 - s**2)) / r
    coef_r = -(a11 * s**2 - 2.0 * a12 * c * s + a22 * c**2) / r + (b1 * c + b2 * s)
    coef_t = (
        -(2.0 * c * s * (a11 - a22) - 2.0 * a12 * (c**2 - s**2)) / r**2
        + (-b1 * s + b2 * c) / r
    )

    rows, cols, vals = [], [], []

    def add(r_, c_, v_):
        rows.append(np.asarray(r_).ravel())
        cols.append(np.asarray(c_).ravel())
        vals.append(np.asarray(v_).ravel())

    inner = ii - 1 == 0
    outer = ii + 1 == n_r - 1
    col_im = np.where(inner, 0, idx - nt)
    col_ip = idx + nt
    col_jp = 1 + (ii - 1) * nt + (jj + 1) % nt
    col_jm = 1 + (ii - 1) * nt + (jj - 1) % nt

    # u_rr and u_r
    add(idx, idx, -2.0 * coef_rr / dr**2)
    add(idx, col_im, coef_rr / dr**2 - coef_r / (2.0 * dr))
    keep = ~outer
    add(idx[keep], col_ip[keep], (coef_rr / dr**2 + coef_r / (2.0 * dr))[keep])
    # u_tt and u_t
    add(idx, idx, -2.0 * coef_tt / dth**2)
    add(idx, col_jp, coef_tt / dth**2 + coef_t / (2.0 * dth))
    add(idx, col_jm, coef_tt / dth**2 - coef_t / (2.0 * dth))
    # u_rt by centered cross-differences
    cross = coef_rt / (4.0 * dr * dth)
    col_ipjp = 1 + ii * nt + (jj + 1) % nt
    col_ipjm = 1 + ii * nt + (jj - 1) % nt
    col_imjp = np.where(inner, 0, 1 + (ii - 2) * nt + (jj + 1) % nt)
    col_imjm = np.where(inner, 0, 1 + (ii - 2) * nt + (jj - 1) % nt)
    add(idx[keep], col_ipjp[keep], cross[keep])
    add(idx[keep], col_ipjm[keep], -cross[keep])
    add(idx, col_imjp, -cross)
    add(idx, col_imjm, cross)

    # origin row: harmonic extraction from the first ring
    a0 = a[0]
    b0 = b[0]
    thj = j * dth
    cos1, sin1 = np.cos(thj), np.sin(thj)
    cos2, sin2 = np.cos(2.0 * thj), np.sin(2.0 * thj)
    ring = 1 + j
    # u_xx = (2/dr^2)(mean + A2 - u0), u_yy = (2/dr^2)(mean - A2 - u0),
    # u_xy = (2/dr^2) B2, grad = (A1, B1)/dr, with A_m, B_m the discrete
    # cosine/sine moments of the first ring.
    w_mean = np.full(nt, 1.0 / nt)
    w_a2 = (2.0 / nt) * cos2
    w_b2 = (2.0 / nt) * sin2
    w_a1 = (2.0 / nt) * cos1
    w_b1 = (2.0 / nt) * sin1
    coeff_ring = (
        -a0[0, 0] * (2.0 / dr**2) * (w_mean + w_a2)
        - a0[1, 1] * (2.0 / dr**2) * (w_mean - w_a2)
        - 2.0 * a0[0, 1] * (2.0 / dr**2) * w_b2
        + b0[0] * w_a1 / dr
        + b0[1] * w_b1 / dr
    )
    coeff_origin = (a0[0, 0] + a0[1, 1]) * 2.0 / dr**2
    add(np.zeros(nt, dtype=np.int64), ring, coeff_ring)
    add([0], [0], [coeff_origin])

    m = n_unknowns(grid)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    )
    return mat.tocsr()


# -- Newton driver ---------------------------------------------------------


def _solve_linear(J, rhs, linear_tol):
    try:
        lu = spla.splu(J.tocsc())
        delta = lu.solve(rhs)
    except RuntimeError as exc:
        delta, info = spla.lgmres(J, rhs, rtol=linear_tol, maxiter=2000)
        if info != 0:
            raise SingularJacobianError(
                f"direct factorization failed ({exc}) and the iterative "
                f"fallback did not converge (info={info})"
            ) from exc
    if not np.all(np.isfinite(delta)):
        raise SingularJacobianError("linear solve produced non-finite values")
    return delta


def _init_hash(x0: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x0).tobytes()).hexdigest()[:12]


def torsion_field(grid: DiskGrid) -> ScalarField:
    """Discrete solution of -lap(u) = 1 with zero boundary values."""
    lap = laplacian_matrix(grid)
    x = _solve_linear(lap, -np.ones(n_unknowns(grid)), 1e-12)
    return vector_to_field(grid, x)


def _default_init(grid: DiskGrid, rhs_at_zero: np.ndarray) -> np.ndarray:
    scale = float(rhs_at_zero.max())
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    return field_to_vector(torsion_field(grid)) * scale


def _report(grid: DiskGrid, x, res_sup, iters, converged, params, init_hash, failure):
    fld = vector_to_field(grid, x)
    r_nodes = grid.r_nodes
    interior_vals = fld.values[:-1, :]
    one_minus_r = (1.0 - r_nodes[:-1])[:, None]
    inf_ratio = float((interior_vals / one_minus_r).min())
    return SolveReport(
        field=fld,
        residual_sup=float(res_sup),
        iterations=iters,
        converged=converged,
        positive_interior=bool(interior_vals.min() > params.positivity_floor),
        sup_norm=float(np.abs(fld.values).max()),
        inf_ratio=inf_ratio,
        init_hash=init_hash,
        failure=failure,
    )


def _newton(grid, mat, g: RHSSpec, params: SolverParams, init):
    """Solve mat @ x + g(points, x) = 0 (sup-norm residual <= newton_tol)."""
    pts = unknown_points(grid)

    def res_vec(x):
        return mat @ x + g.value(pts, x)

    if init is None:
        x = _default_init(grid, g.value(pts, np.zeros(len(pts))))
    else:
        if init.grid != grid:
            raise GridMismatchError("init field lives on a different grid")
        x = field_to_vector(init)
    ih = _init_hash(x)

    res = res_vec(x)
    res_sup = float(np.abs(res).max())
    best_x, best_sup = x, res_sup
    iters = 0
    failure = None
    while res_sup > params.newton_tol:
        if iters >= params.max_newton_iters:
            failure = "max_iterations"
            break
        jac = mat + sp.diags(g.ds(pts, x))
        delta = _solve_linear(jac, -res, params.linear_tol)
        t = 1.0
        while True:
            x_new = x + t * delta
            res_new = res_vec(x_new)
            sup_new = float(np.abs(res_new).max())
            if sup_new < res_sup or t <= params.min_damping:
                break
            t *= 0.5
        iters += 1
        if sup_new >= res_sup:
            failure = "stagnation"
            break
        x, res, res_sup = x_new, res_new, sup_new
        if res_sup < best_sup:
            best_x, best_sup = x, res_sup

    converged = res_sup <= params.newton_tol
    if not converged:
        x, res_sup = best_x, best_sup
    return _report(grid, x, res_sup, iters, converged, params, ih, failure)


# -- public operations -----------------------------------------------------


def solve_semilinear(
    kappa: FieldSpec,
    f: NonlinearitySpec,
    grid: DiskGrid,
    params: SolverParams = SolverParams(),
    init: ScalarField | None = None,
) -> SolveReport:
    """Solve -lap(u) = kappa(x) f(u), u = 0 on the boundary ring."""
    g = RHSSpec.product(kappa, f)
    return _newton(grid, laplacian_matrix(grid), g, params, init)


def solve_general(
    op: OperatorSpec,
    g: RHSSpec,
    grid: DiskGrid,
    params: SolverParams = SolverParams(),
    init: ScalarField | None = None,
) -> SolveReport:
    """Solve L[u] = g(x, u) for L = -Tr(A D^2 .) + b . grad."""
    pts = unknown_points(grid)
    validate_operator(op, pts)
    if _operator_is_identity(op, pts):
        mat = laplacian_matrix(grid)
    else:
        mat = -general_matrix(grid, op)
    return _newton(grid, mat, g, params, init)


def residual(field: ScalarField, problem) -> float:
    """Sup-norm of the discrete residual over interior nodes and origin."""
    grid = field.grid
    if problem.grid is not None and problem.grid != grid:
        raise GridMismatchError("field and problem grids differ")
    x = field_to_vector(field)
    pts = unknown_points(grid)
    if isinstance(problem, SemilinearProblem):
        g = RHSSpec.product(problem.kappa, problem.f)
        mat = laplacian_matrix(grid)
    elif isinstance(problem, GeneralProblem):
        g = problem.g
        if _operator_is_identity(problem.op, pts):
            mat = laplacian_matrix(grid)
        else:
            mat = -general_matrix(grid, problem.op)
    else:
        raise ValidationError(f"unknown problem type {type(problem)!r}")
    return float(np.abs(mat @ x + g.value(pts, x)).max())


# -- solution persistence ---------------------------------------------------


def _spec_hash(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True).encode("utf-8")
    ).hexdigest()[:12]


def dump_solution(report: SolveReport, out_dir, spec_json: dict | None = None) -> dict:
    """Write solution.csv (i, j, r, theta, value) and a JSON sidecar.

    Returns the sidecar dict.  The CSV covers every node including the
    boundary ring; the sidecar records grid dims, residual, iterations and
    spec hashes so runs can be matched to their configuration.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    grid = report.field.grid
    vals = report.field.values
    csv_path = os.path.join(out_dir, "solution.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,r,theta,value\n")
        for i in range(grid.n_r):
            r = i * grid.dr
            for j in range(grid.n_theta):
                fh.write(f"{i},{j},{r:.17g},{j * grid.dtheta:.17g},{vals[i, j]:.17g}\n")
    sidecar = {
        "grid": {"n_r": grid.n_r, "n_theta": grid.n_theta},
        "residual_sup": report.residual_sup,
        "iterations": report.iterations,
        "converged": report.converged,
        "sup_norm": report.sup_norm,
        "inf_ratio": report.inf_ratio,
        "init_hash": report.init_hash,
        "spec_hash": _spec_hash(spec_json) if spec_json is not None else None,
    }
    with open(
        os.path.join(out_dir, "solution.json"), "w", encoding="utf-8", newline="\n"
    ) as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
