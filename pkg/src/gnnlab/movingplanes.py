"""Moving-planes diagnostics: reflection differences across horizontal
planes and the critical plane position.

For a plane height lambda the comparison function on the dome
Sigma_lambda = B_1 inter {x_n > lambda} is

    w_lambda(x) = u(x', 2*lambda - x_n) - u(x),

with the reflected value interpolated.  The critical position is found by a
full scan over a uniform ladder of plane heights rather than bisection: the
admissible set is an upper tail only up to discretization noise, and a scan
makes the tail property checkable instead of assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ValidationError
from .grid import ScalarField, node_mask_in_dome

# Nodes with x_n <= lambda + PLANE_TOL are treated as on-plane, not in the dome.
PLANE_TOL = 1e-14

# Numeric floor added to the comparison slack: with an exactly zero slack a
# discretely radial field would fail admissibility on interpolation roundoff
# alone (~1e-16), which is noise, not geometry.
DEFAULT_GUARD = 1e-12


@dataclass(frozen=True)
class WLambdaField:
    """Reflection difference on the dome nodes; NaN outside the dome."""

    lam: float
    values: np.ndarray
    mask: np.ndarray

    @property
    def empty(self) -> bool:
        return not bool(self.mask.any())

    @property
    def min(self) -> float | None:
        if self.empty:
            return None
        return float(self.values[self.mask].min())


@dataclass(frozen=True)
class PlaneScan:
    lambdas: np.ndarray
    min_w: np.ndarray
    counts: np.ndarray
    lambda_star: float
    slack: float
    no_admissible_tail: bool

    @property
    def admissible(self) -> np.ndarray:
        """Tail-admissibility mask over the ladder.

        Ladder values whose dome is empty carry no information (the
        continuum domes are never empty below 1) and are ignored: a value is
        admissible when every nonempty dome at or above it has
        min w >= -(slack + guard), and at least one nonempty dome exists.
        """
        return _admissible_mask(self.min_w, self.counts, self._threshold)

    @property
    def _threshold(self) -> float:
        return self.slack + DEFAULT_GUARD

    def to_json(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "min_w": self.min_w.tolist(),
            "counts": self.counts.tolist(),
            "lambda_star": self.lambda_star,
            "slack": self.slack,
            "flag": self.no_admissible_tail,
        }


def _admissible_mask(min_w, counts, threshold) -> np.ndarray:
    nonempty = counts > 0
    ok = np.zeros(len(min_w), dtype=bool)
    if not nonempty.any():
        return ok
    last = int(np.nonzero(nonempty)[0][-1])
    head = min_w[: last + 1]
    suffix = np.minimum.accumulate(head[::-1])[::-1]
    ok[: last + 1] = suffix >= -threshold
    return ok


def w_lambda(u: ScalarField, lam: float) -> WLambdaField:
    """Reflection difference at grid nodes strictly inside the dome.

    Nodes outside carry NaN and are excluded from minima; an entirely empty
    dome is signaled through the ``empty`` property.
    """
    if not 0.0 <= lam < 1.0:
        raise ValidationError(f"lambda must lie in [0, 1), got {lam}")
    grid = u.grid
    mask = node_mask_in_dome(grid, lam, PLANE_TOL)
    vals = np.full(grid.shape(), np.nan)
    if mask.any():
        x, y = grid.cartesian()
        pts = np.column_stack([x[mask], 2.0 * lam - y[mask]])
        vals[mask] = u.interpolate_many(pts) - u.values[mask]
    return WLambdaField(lam=lam, values=vals, mask=mask)


def lambda_star(
    u: ScalarField,
    slack: float,
    scan_step: float | None = None,
) -> PlaneScan:
    """Scan plane heights and locate the smallest tail-admissible one.

    A ladder value is admissible when every ladder value above it has
    min w >= -(slack + guard); empty domes are vacuously admissible.  When
    no ladder value qualifies, lambda_star is the largest ladder value and
    the no_admissible_tail flag is set.
    """
    if slack < 0.0:
        raise ValidationError(f"slack must be nonnegative, got {slack}")
    grid = u.grid
    if scan_step is None:
        scan_step = grid.dr
    if scan_step > grid.dr + 1e-15:
        raise ValidationError(
            f"scan_step {scan_step} exceeds the grid radial spacing {grid.dr}"
        )
    lambdas = np.arange(0.0, 1.0 - 0.5 * scan_step, scan_step)

    x, y = grid.cartesian()
    interior = slice(1, grid.n_r - 1)
    px = x[interior, :].ravel()
    py = y[interior, :].ravel()
    pu = u.values[interior, :].ravel()
    min_w, counts = _backend.plane_scan_min(
        u.values, px, py, pu, lambdas, PLANE_TOL
    )

    ok = _admissible_mask(min_w, counts, slack + DEFAULT_GUARD)
    if ok.any():
        star = float(lambdas[int(np.argmax(ok))])
        flag = False
    else:
        star = float(lambdas[-1])
        flag = True
    return PlaneScan(
        lambdas=lambdas,
        min_w=min_w,
        counts=counts,
        lambda_star=star,
        slack=float(slack),
        no_admissible_tail=flag,
    )
