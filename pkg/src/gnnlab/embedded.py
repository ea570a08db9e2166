"""Embedded-boundary Poisson solver on a Cartesian grid.

Independent reference route for cross-checking the pullback solver: solves
-lap(w) = f with zero Dirichlet data on a domain given by a level set,
using Shortley-Weller cut-cell stencils at the boundary (second order).
Deliberately shares nothing with the polar discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ValidationError


def _cut_fraction(phi, p, q, iters: int = 60) -> np.ndarray:
    """Fraction s in (0, 1] with phi(p + s (q - p)) = 0, for rows where phi
    changes sign between p (inside) and q (outside).  Vectorized bisection."""
    lo = np.zeros(len(p))
    hi = np.ones(len(p))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        vals = phi(p + mid[:, None] * (q - p))
        neg = vals < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return np.maximum(hi, 1e-12)


@dataclass
class EmbeddedSolution:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (nx, ny); ghost-extrapolated outside the domain
    inside: np.ndarray

    def interp(self, points: np.ndarray) -> np.ndarray:
        """Bilinear interpolation at (N, 2) points inside the bounding box."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        hx = self.xs[1] - self.xs[0]
        hy = self.ys[1] - self.ys[0]
        fx = (pts[:, 0] - self.xs[0]) / hx
        fy = (pts[:, 1] - self.ys[0]) / hy
        ix = np.clip(np.floor(fx).astype(np.int64), 0, len(self.xs) - 2)
        iy = np.clip(np.floor(fy).astype(np.int64), 0, len(self.ys) - 2)
        tx = fx - ix
        ty = fy - iy
        v = self.values
        return (1 - tx) * ((1 - ty) * v[ix, iy] + ty * v[ix, iy + 1]) + tx * (
            (1 - ty) * v[ix + 1, iy] + ty * v[ix + 1, iy + 1]
        )


def solve_poisson_embedded(phi, rhs, bbox, n: int) -> EmbeddedSolution:
    """Solve -lap(w) = rhs(x), w = 0 on {phi = 0}, phi < 0 inside.

    ``bbox`` is (xmin, xmax, ymin, ymax) and must strictly contain the
    domain; ``n`` is the node count per axis.
    """
    xmin, xmax, ymin, ymax = bbox
    if n < 16:
        raise ValidationError("embedded grid too coarse")
    xs = np.linspace(xmin, xmax, n)
    ys = np.linspace(ymin, ymax, n)
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    inside = (phi(pts) < 0.0).reshape(n, n)
    if inside[0, :].any() or inside[-1, :].any() or inside[:, 0].any() or inside[:, -1].any():
        raise ValidationError("domain touches the bounding box")

    index = -np.ones((n, n), dtype=np.int64)
    ii, jj = np.nonzero(inside)
    index[ii, jj] = np.arange(len(ii))
    m = len(ii)

    # fractional distances to the cut along each of the four directions
    # (1 where the neighbor is interior)
    frac = {}
    for name, (di, dj) in {"e": (1, 0), "w": (-1, 0), "n": (0, 1), "s": (0, -1)}.items():
        nbr_inside = inside[ii + di, jj + dj]
        theta = np.ones(m)
        cut = ~nbr_inside
        if cut.any():
            p = np.column_stack([xs[ii[cut]], ys[jj[cut]]])
            q = np.column_stack([xs[ii[cut] + di], ys[jj[cut] + dj]])
            theta[cut] = _cut_fraction(phi, p, q)
        frac[name] = (theta, nbr_inside)

    rows, cols, vals = [], [], []

    def couple(theta_p, theta_m, h, di, dj):
        # Shortley-Weller second difference with spacings theta_p*h, theta_m*h
        center = 2.0 / (theta_p * theta_m * h * h)
        plus = -2.0 / (theta_p * (theta_p + theta_m) * h * h)
        minus = -2.0 / (theta_m * (theta_p + theta_m) * h * h)
        return center, plus, minus

    th_e, in_e = frac["e"]
    th_w, in_w = frac["w"]
    th_n, in_n = frac["n"]
    th_s, in_s = frac["s"]

    cx, px, mx = couple(th_e, th_w, hx, 1, 0)
    cy, py, my = couple(th_n, th_s, hy, 0, 1)
    me = np.arange(m)
    rows.append(me)
    cols.append(me)
    vals.append(cx + cy)
    for th_pair, nbr_in, coeff, (di, dj) in (
        (th_e, in_e, px, (1, 0)),
        (th_w, in_w, mx, (-1, 0)),
        (th_n, in_n, py, (0, 1)),
        (th_s, in_s, my, (0, -1)),
    ):
        keep = nbr_in
        rows.append(me[keep])
        cols.append(index[ii[keep] + di, jj[keep] + dj])
        vals.append(coeff[keep] if isinstance(coeff, np.ndarray) else np.full(keep.sum(), coeff))

    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    ).tocsr()
    b = rhs(np.column_stack([xs[ii], ys[jj]]))
    sol = spla.splu(mat.tocsc()).solve(np.asarray(b, dtype=np.float64))

    values = np.zeros((n, n))
    values[ii, jj] = sol

    # ghost values outside the domain for interpolation in cut cells: linear
    # extension through the zero boundary value along each axis, averaged
    # over the contributing interior neighbors
    ghost_sum = np.zeros((n, n))
    ghost_cnt = np.zeros((n, n))
    for (theta, nbr_in), (di, dj) in (
        (frac["e"], (1, 0)),
        (frac["w"], (-1, 0)),
        (frac["n"], (0, 1)),
        (frac["s"], (0, -1)),
    ):
        cut = ~nbr_in
        gi, gj = ii[cut] + di, jj[cut] + dj
        g = sol[cut] * (1.0 - 1.0 / theta[cut])
        np.add.at(ghost_sum, (gi, gj), g)
        np.add.at(ghost_cnt, (gi, gj), 1.0)
    has_ghost = ghost_cnt > 0
    values[has_ghost] = ghost_sum[has_ghost] / ghost_cnt[has_ghost]

    return EmbeddedSolution(xs=xs, ys=ys, values=values, inside=inside)
