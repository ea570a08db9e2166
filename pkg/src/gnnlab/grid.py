"""Polar grid on the closed unit disk, scalar fields, and reflections.

The grid places radial nodes r_i = i/(n_r - 1) (so r = 0 and r = 1 are exact
nodes) and equispaced angular nodes theta_j = 2*pi*j/n_theta.  n_theta must
be even so that theta and theta + pi are both nodes, which keeps antipodal
reflections exact on the node set.  The origin is a single degree of freedom
replicated across the angular index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import OutOfDomainError, ValidationError

TWO_PI = 2.0 * np.pi

# Radius clamp for boundary queries: reflections of near-boundary points may
# overshoot |x| = 1 by rounding.
RADIUS_TOL = 1e-12


@dataclass(frozen=True)
class DiskGrid:
    """Polar discretization of the closed unit disk (2D)."""

    n_r: int
    n_theta: int
    dimension: int = field(default=2, init=False)

    def __post_init__(self):
        if self.n_r < 3:
            raise ValidationError(f"n_r must be at least 3, got {self.n_r}")
        if self.n_theta < 8:
            raise ValidationError(f"n_theta must be at least 8, got {self.n_theta}")
        if self.n_theta % 2 != 0:
            raise ValidationError(
                f"n_theta must be even (antipodal nodes), got {self.n_theta}"
            )

    @property
    def dr(self) -> float:
        return 1.0 / (self.n_r - 1)

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def r_nodes(self) -> np.ndarray:
        return np.arange(self.n_r) / (self.n_r - 1)

    @property
    def theta_nodes(self) -> np.ndarray:
        return np.arange(self.n_theta) * (TWO_PI / self.n_theta)

    def cartesian(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (n_r, n_theta) arrays (x, y)."""
        r = self.r_nodes[:, None]
        th = self.theta_nodes[None, :]
        return r * np.cos(th), r * np.sin(th)

    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)


def build_grid(n_r: int, n_theta: int) -> DiskGrid:
    """Construct a polar grid; rejects odd n_theta and counts below minimums."""
    return DiskGrid(int(n_r), int(n_theta))


class ScalarField:
    """Grid-sampled function with bilinear interpolation in (r, theta).

    Values are stored as an (n_r, n_theta) array; the row at r = 0 holds a
    single shared value replicated across the angular index.  Instances are
    immutable after construction and safe to share across workers.
    """

    def __init__(self, grid: DiskGrid, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape():
            raise ValidationError(
                f"values shape {values.shape} does not match grid {grid.shape()}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("field values must be finite")
        if not np.all(values[0, :] == values[0, 0]):
            raise ValidationError("values at r = 0 must be identical across theta")
        self.grid = grid
        self.values = values.copy()
        self.values.setflags(write=False)

    @classmethod
    def from_function(cls, grid: DiskGrid, fn) -> "ScalarField":
        """Sample fn(points) over the nodes; fn takes an (N, 2) array."""
        x, y = grid.cartesian()
        pts = np.column_stack([x.ravel(), y.ravel()])
        vals = np.asarray(fn(pts), dtype=np.float64).reshape(grid.shape())
        vals[0, :] = vals[0, 0]
        return cls(grid, vals)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def shifted(self, k: int) -> "ScalarField":
        """Field rotated by k angular steps (theta -> theta + k*dtheta)."""
        return ScalarField(self.grid, np.roll(self.values, k, axis=1))

    def interpolate_many(self, points: np.ndarray) -> np.ndarray:
        """Interpolate at an (N, 2) array of Cartesian points."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        x = pts[:, 0]
        y = pts[:, 1]
        r = np.sqrt(x * x + y * y)
        if np.any(r > 1.0 + RADIUS_TOL):
            worst = float(r.max())
            raise OutOfDomainError(f"query radius {worst} exceeds 1 + {RADIUS_TOL}")
        np.minimum(r, 1.0, out=r)
        th = np.arctan2(y, x)
        th = np.where(th < 0.0, th + TWO_PI, th)
        g = self.grid
        return _backend.interp_fractional(
            self.values, r * (g.n_r - 1), th * (g.n_theta / TWO_PI)
        )

    def __call__(self, point) -> float:
        return float(self.interpolate_many(np.asarray(point)[None, :])[0])


def interpolate(field: ScalarField, x) -> float:
    """Bilinear interpolation of a field at a point of the closed disk."""
    return field(x)


def reflect_plane(x, lam: float) -> np.ndarray:
    """Reflection across the horizontal plane {x_n = lam}: (x', 2*lam - x_n)."""
    x = np.asarray(x, dtype=np.float64)
    out = x.copy()
    out[..., -1] = 2.0 * lam - x[..., -1]
    return out


def reflect_direction(x, e) -> np.ndarray:
    """Reflection across the hyperplane through the origin orthogonal to e."""
    x = np.asarray(x, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    norm = float(np.sqrt((e * e).sum()))
    if abs(norm - 1.0) > 1e-12:
        raise ValidationError(f"direction must be a unit vector, |e| = {norm}")
    dot = (x * e).sum(axis=-1, keepdims=True)
    return x - 2.0 * dot * e


@dataclass(frozen=True)
class Dome:
    """Spherical cap Sigma_lambda = B_1 inter {x_n > lambda} and its
    delta-interior (points at distance more than delta from the cap
    boundary)."""

    lam: float
    delta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValidationError(f"lambda must lie in [0, 1), got {self.lam}")
        if self.delta < 0.0:
            raise ValidationError(f"delta must be nonnegative, got {self.delta}")

    def contains(self, x) -> np.ndarray:
        """Membership test; vectorized over an (N, 2) array."""
        pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
        r = np.sqrt((pts * pts).sum(axis=1))
        inside = (r < 1.0) & (pts[:, -1] > self.lam)
        if self.delta > 0.0:
            inside &= self.boundary_distance(pts) > self.delta
        return inside if np.ndim(x) > 1 else bool(inside[0])

    def boundary_distance(self, x) -> np.ndarray:
        """Distance from points of the cap to the cap boundary.

        The boundary is the flat part {x_n = lam} plus the spherical part;
        for points whose radial projection lands outside the cap the nearest
        spherical point is the rim {|x| = 1, x_n = lam}.
        """
        pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
        r = np.sqrt((pts * pts).sum(axis=1))
        d_flat = pts[:, -1] - self.lam
        with np.errstate(invalid="ignore", divide="ignore"):
            proj_n = np.where(r > 0, pts[:, -1] / np.maximum(r, 1e-300), 0.0)
        d_sph = 1.0 - r
        rim_half_width = np.sqrt(max(1.0 - self.lam**2, 0.0))
        rim = np.stack(
            [np.full(len(pts), rim_half_width), np.full(len(pts), self.lam)], axis=1
        )
        horiz = np.abs(pts[:, 0])
        d_rim = np.sqrt((horiz - rim[:, 0]) ** 2 + (pts[:, 1] - rim[:, 1]) ** 2)
        d_round = np.where(proj_n >= self.lam, d_sph, d_rim)
        return np.minimum(d_flat, d_round)


def node_mask_in_dome(grid: DiskGrid, lam: float, plane_tol: float = 1e-14):
    """Boolean (n_r, n_theta) mask of nodes strictly inside Sigma_lambda.

    Strictness x_n > lam + plane_tol avoids plane-node ambiguity; the
    boundary ring r = 1 is excluded.
    """
    x, y = grid.cartesian()
    mask = y > lam + plane_tol
    mask[-1, :] = False
    return mask
