"""Deficit functionals measuring how far the data is from the radial,
radially non-increasing configuration.

Three functionals:

  * first-order deficit of a coefficient field: sup |angular gradient| plus
    sup of the positive part of the radial derivative; zero exactly when the
    field is radial and radially non-increasing;
  * zero-th order deficit: largest oscillation over a centered circle plus
    the largest outward increase along a ray;
  * operator deficit: C^{0,1} distance of the diffusion matrix from the
    identity, plus the C^{0,1} size of the drift, plus the x-asymmetry of
    the right-hand side uniformly over s in [0, U].

Suprema are computed analytically per family where a closed form exists and
by dense polar sampling otherwise; reports carry a method tag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .fields import FieldSpec, RHSSpec
from .solver import OperatorSpec

TWO_PI = 2.0 * np.pi

DEFAULT_RESOLUTION = (512, 1024)


@dataclass(frozen=True)
class DeficitReport:
    angular_term: float
    radial_term: float
    method: str

    @property
    def total(self) -> float:
        return self.angular_term + self.radial_term

    def to_json(self) -> dict:
        return {
            "angular": self.angular_term,
            "radial": self.radial_term,
            "total": self.total,
            "method": self.method,
        }


@dataclass(frozen=True)
class GeneralDeficitReport:
    a_term: float
    b_term: float
    g_term: float

    @property
    def total(self) -> float:
        return self.a_term + self.b_term + self.g_term

    def to_json(self) -> dict:
        return {
            "a_term": self.a_term,
            "b_term": self.b_term,
            "g_term": self.g_term,
            "total": self.total,
        }


def _sample_points(resolution, include_origin=False):
    n_r, n_t = resolution
    r = np.linspace(0.0, 1.0, n_r)
    if not include_origin:
        r = r[1:]
    th = np.arange(n_t) * (TWO_PI / n_t)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    return pts, rr.shape


def _radial_poly_sup_plus(coeffs: np.ndarray) -> float:
    """sup over [0, 1] of the positive part of d/dr sum c_k r^(2k)."""
    # derivative polynomial in r: sum_{k>=1} 2k c_k r^(2k-1)
    deg = 2 * (len(coeffs) - 1)
    p = np.zeros(deg + 1)
    for k in range(1, len(coeffs)):
        p[2 * k - 1] = 2 * k * coeffs[k]
    poly = np.polynomial.Polynomial(p)
    candidates = [0.0, 1.0]
    dp = poly.deriv()
    if dp.degree() >= 1:
        roots = dp.roots()
        for z in roots:
            if abs(z.imag) < 1e-12 and 0.0 < z.real < 1.0:
                candidates.append(float(z.real))
    best = max(float(poly(c)) for c in candidates)
    return max(best, 0.0)


def deficit_kappa(
    spec: FieldSpec, resolution: tuple[int, int] = DEFAULT_RESOLUTION
) -> DeficitReport:
    """First-order deficit: sup |angular gradient| + sup (radial derivative)_+."""
    fam = spec.family
    if fam == "constant":
        return DeficitReport(0.0, 0.0, "analytic")
    if fam == "axial-linear":
        e = abs(spec.params["eps"])
        return DeficitReport(e, e, "analytic")
    if fam == "angular-harmonic":
        e = abs(spec.params["eps"])
        m, k = spec.params.get("m", 1), spec.params.get("k", 1)
        return DeficitReport(e * k, e * m, "analytic")
    if fam == "radial-polynomial":
        coeffs = np.asarray(spec.params["coeffs"], dtype=np.float64)
        return DeficitReport(0.0, _radial_poly_sup_plus(coeffs), "analytic")
    pts, _ = _sample_points(resolution)
    angular = float(spec.angular_magnitude(pts).max())
    radial = float(np.maximum(spec.radial_derivative(pts), 0.0).max())
    return DeficitReport(angular, radial, "sampled")


def deficit_zeroth(
    spec: FieldSpec, resolution: tuple[int, int] = DEFAULT_RESOLUTION
) -> float:
    """Zero-th order deficit: sup_r osc over the circle of radius r, plus the
    largest positive increase of the field outward along any ray."""
    pts, shape = _sample_points(resolution, include_origin=True)
    vals = spec.value(pts).reshape(shape)
    osc = float((vals.max(axis=1) - vals.min(axis=1)).max())
    running_min = np.minimum.accumulate(vals, axis=0)
    ray = float(np.maximum(vals - running_min, 0.0).max())
    return osc + ray


def _c01_norm(samples: np.ndarray, pts_shape, r_step: float, n_t: int) -> float:
    """sup |.| plus sampled Lipschitz seminorm over near-neighbor pairs.

    ``samples`` has shape (n_r, n_t, ...) on the polar sample lattice; the
    seminorm uses radially and angularly adjacent pairs (distance <= 2h).
    """
    sup = float(np.abs(samples).max())
    dr_q = np.abs(np.diff(samples, axis=0)) / r_step
    n_r = samples.shape[0]
    r = np.linspace(0.0, 1.0, n_r)
    chord = 2.0 * r * np.sin(np.pi / n_t)
    dth_diff = np.abs(samples - np.roll(samples, 1, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        shape = [1] * samples.ndim
        shape[0] = n_r
        dth_q = dth_diff / np.maximum(chord, 1e-300).reshape(shape)
    dth_q = dth_q[1:]  # radius 0 pairs are degenerate
    semi = 0.0
    if dr_q.size:
        semi = max(semi, float(dr_q.max()))
    if dth_q.size:
        semi = max(semi, float(dth_q.max()))
    return sup + semi


def deficit_general(
    op: OperatorSpec,
    g: RHSSpec,
    U: float,
    resolution: tuple[int, int] = (128, 256),
) -> GeneralDeficitReport:
    """Operator deficit  ||A - I||_{C^{0,1}} + ||b||_{C^{0,1}} + G(g, U)."""
    if U <= 0:
        raise ValidationError(f"U must be positive, got {U}")
    n_r, n_t = resolution
    pts, shape = _sample_points((n_r, n_t), include_origin=True)
    r_step = 1.0 / (n_r - 1)

    a = op.a_fn(pts).reshape(shape + (2, 2))
    eye = np.eye(2)
    a_term = _c01_norm(a - eye, shape, r_step, n_t)
    b = op.b_fn(pts).reshape(shape + (2,))
    b_term = _c01_norm(b, shape, r_step, n_t)

    # s-supremum over a uniform grid of 64 values (the families are
    # polynomial in s, so a coarse grid bounds the miss tightly)
    interior = pts[np.sqrt((pts * pts).sum(axis=1)) > 0]
    ang_sup = 0.0
    rad_sup = 0.0
    for s in np.linspace(0.0, U, 64):
        svec = np.full(len(interior), s)
        ang_sup = max(ang_sup, float(g.angular_magnitude_x(interior, svec).max()))
        rad_sup = max(
            rad_sup,
            float(np.maximum(g.radial_derivative_x(interior, svec), 0.0).max()),
        )
    return GeneralDeficitReport(a_term, b_term, ang_sup + rad_sup)
