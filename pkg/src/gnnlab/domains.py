"""Perturbed-domain machinery: maps from the unit disk onto nearby domains,
their inverses and Jacobians, and the pulled-back elliptic problem.

Two map kinds:

  * ellipsoid: (y1, y2) -> (y1, a*y2) with a = 1 + eps;
  * normal-perturbation: x -> (1 + eps * eta(|x|) * phi(theta)) x, where phi
    is a trigonometric profile on the circle and eta a smooth cutoff
    vanishing on [0, 1/4] and equal to 1 on [1/2, infinity), so the map is
    the identity near the origin and a pure normal perturbation outside
    radius 1/2.

Pulling a semilinear problem back through a map produces a variable
coefficient operator whose diffusion matrix comes from the inverse Jacobian
and whose drift is the Laplacian of the inverse map components.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .fields import NonlinearitySpec, RHSSpec, constant_field
from .grid import ScalarField
from .solver import OperatorSpec, min_eigenvalue_2x2
from .symmetry import oscillation_profile

TWO_PI = 2.0 * np.pi

FD_STEP = 1e-4  # step of the 4th-order differences for the drift coefficients


@dataclass(frozen=True)
class CircleProfile:
    """Trigonometric polynomial phi(theta) with analytic derivatives."""

    const: float = 0.0
    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def derivative(self, th, order: int = 0) -> np.ndarray:
        th = np.asarray(th, dtype=np.float64)
        out = np.full(th.shape, self.const if order == 0 else 0.0)
        for k, a in enumerate(self.cos_coeffs, start=1):
            if a:
                out = out + a * k**order * np.cos(k * th + order * np.pi / 2.0)
        for k, b in enumerate(self.sin_coeffs, start=1):
            if b:
                out = out + b * k**order * np.sin(k * th + order * np.pi / 2.0)
        return out

    def value(self, th) -> np.ndarray:
        return self.derivative(th, 0)

    def sup_norm(self, n_samples: int = 4096) -> float:
        th = np.arange(n_samples) * (TWO_PI / n_samples)
        return float(np.abs(self.value(th)).max())

    def c3_norm_sampled(self, n_samples: int = 4096) -> float:
        """max over derivative orders 0..3 of the sampled sup norm."""
        th = np.arange(n_samples) * (TWO_PI / n_samples)
        return max(
            float(np.abs(self.derivative(th, o)).max()) for o in range(4)
        )

    def to_json(self) -> dict:
        return {
            "const": self.const,
            "cos_coeffs": list(self.cos_coeffs),
            "sin_coeffs": list(self.sin_coeffs),
        }

    @classmethod
    def from_json(cls, obj) -> "CircleProfile":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(
            const=obj.get("const", 0.0),
            cos_coeffs=tuple(obj.get("cos_coeffs", ())),
            sin_coeffs=tuple(obj.get("sin_coeffs", ())),
        )


def cutoff(t) -> np.ndarray:
    """Quintic smoothstep rescaled to rise on [1/4, 1/2]."""
    s = np.clip((np.asarray(t, dtype=np.float64) - 0.25) * 4.0, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def cutoff_prime(t) -> np.ndarray:
    s = np.clip((np.asarray(t, dtype=np.float64) - 0.25) * 4.0, 0.0, 1.0)
    return 30.0 * s**2 * (1.0 - s) ** 2 * 4.0


def _as_pts(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class DomainMap:
    """Invertible map of the closed unit disk onto a perturbed domain."""

    kind: str
    eps: float
    profile: CircleProfile | None = None
    c3_norm: float = 0.0

    def forward(self, y) -> np.ndarray:
        pts = _as_pts(y)
        if self.kind == "ellipsoid":
            out = pts.copy()
            out[:, 1] *= 1.0 + self.eps
            return out
        r = np.sqrt((pts * pts).sum(axis=1))
        th = np.arctan2(pts[:, 1], pts[:, 0])
        m = 1.0 + self.eps * cutoff(r) * self.profile.value(th)
        return m[:, None] * pts

    def inverse(self, x) -> np.ndarray:
        pts = _as_pts(x)
        if self.kind == "ellipsoid":
            out = pts.copy()
            out[:, 1] /= 1.0 + self.eps
            return out
        radius = np.sqrt((pts * pts).sum(axis=1))
        th = np.arctan2(pts[:, 1], pts[:, 0])
        c = self.eps * self.profile.value(th)
        # per-ray Newton for rho * (1 + c * eta(rho)) = radius
        rho = radius.copy()
        for _ in range(100):
            g = rho * (1.0 + c * cutoff(rho)) - radius
            gp = 1.0 + c * (cutoff(rho) + rho * cutoff_prime(rho))
            step = g / gp
            rho = np.maximum(rho - step, 0.0)
            if np.abs(step).max() < 1e-15:
                break
        resid = np.abs(rho * (1.0 + c * cutoff(rho)) - radius).max()
        if resid > 1e-10:
            raise ValidationError(
                f"ray inversion did not converge (residual {resid})"
            )
        scale = np.where(radius > 0.0, rho / np.maximum(radius, 1e-300), 1.0)
        return scale[:, None] * pts

    def jacobian(self, y) -> np.ndarray:
        """Forward Jacobian, shape (N, 2, 2)."""
        pts = _as_pts(y)
        n = len(pts)
        out = np.zeros((n, 2, 2))
        if self.kind == "ellipsoid":
            out[:, 0, 0] = 1.0
            out[:, 1, 1] = 1.0 + self.eps
            return out
        r = np.sqrt((pts * pts).sum(axis=1))
        th = np.arctan2(pts[:, 1], pts[:, 0])
        phi = self.profile.value(th)
        dphi = self.profile.derivative(th, 1)
        m = 1.0 + self.eps * cutoff(r) * phi
        rpos = np.maximum(r, 1e-300)
        cth, sth = np.cos(th), np.sin(th)
        # grad m = eps * (eta'(r) phi e_r + eta(r) phi'(theta)/r e_theta)
        gm_r = self.eps * cutoff_prime(r) * phi
        gm_t = self.eps * cutoff(r) * dphi / rpos
        gmx = gm_r * cth - gm_t * sth
        gmy = gm_r * sth + gm_t * cth
        gmx = np.where(r > 0, gmx, 0.0)
        gmy = np.where(r > 0, gmy, 0.0)
        out[:, 0, 0] = m + pts[:, 0] * gmx
        out[:, 0, 1] = pts[:, 0] * gmy
        out[:, 1, 0] = pts[:, 1] * gmx
        out[:, 1, 1] = m + pts[:, 1] * gmy
        return out

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "eps": self.eps}
        if self.profile is not None:
            obj["profile"] = self.profile.to_json()
        return obj

    @classmethod
    def from_json(cls, obj) -> "DomainMap":
        if isinstance(obj, str):
            obj = json.loads(obj)
        profile = (
            CircleProfile.from_json(obj["profile"]) if "profile" in obj else None
        )
        return make_map(obj["kind"], obj["eps"], profile)


def make_map(kind: str, eps: float, profile: CircleProfile | None = None) -> DomainMap:
    """Build a domain map; rejects out-of-range eps, profiles with sup norm
    above 1, and (eps, profile) pairs for which the radial map loses
    monotonicity (the per-ray inverse would stop being unique)."""
    if kind not in ("ellipsoid", "normal-perturbation"):
        raise ValidationError(f"unknown map kind {kind!r}")
    if not 0.0 <= eps <= 0.5:
        raise ValidationError(f"eps must lie in [0, 1/2], got {eps}")
    if kind == "ellipsoid":
        return DomainMap(kind=kind, eps=float(eps))
    if profile is None:
        raise ValidationError("normal-perturbation needs a profile")
    sup = profile.sup_norm()
    if sup > 1.0 + 1e-9:
        raise ValidationError(f"profile norm violation: sup |phi| = {sup} > 1")
    c3 = profile.c3_norm_sampled()
    if eps > 0.0:
        rho = np.linspace(0.0, 1.5, 2048)
        slope_shape = cutoff(rho) + rho * cutoff_prime(rho)
        th = np.arange(512) * (TWO_PI / 512)
        phi_min = float(profile.value(th).min())
        worst = 1.0 + eps * phi_min * float(slope_shape.max())
        if worst <= 1e-6:
            raise ValidationError(
                f"map not invertible: radial slope reaches {worst} "
                f"for eps={eps}"
            )
    return DomainMap(kind=kind, eps=float(eps), profile=profile, c3_norm=c3)


@dataclass(frozen=True)
class PullbackProblem:
    """Variable-coefficient problem on the disk equivalent to the semilinear
    problem on the mapped domain."""

    op: OperatorSpec
    rhs: RHSSpec
    map: DomainMap


def _inverse_laplacian_fd(dmap: DomainMap, x: np.ndarray) -> np.ndarray:
    """Laplacian of each inverse-map component at points x, by 4th-order
    central differences with step FD_STEP."""
    h = FD_STEP
    n = len(x)
    out = np.zeros((n, 2))
    weights = ((-1.0, 2.0), (16.0, 1.0), (16.0, -1.0), (-1.0, -2.0))
    for axis in range(2):
        acc = np.zeros((n, 2))
        for w, k in weights:
            shifted = x.copy()
            shifted[:, axis] += k * h
            acc += w * dmap.inverse(shifted)
        acc -= 30.0 * dmap.inverse(x)
        out += acc / (12.0 * h * h)
    return out


def pullback(dmap: DomainMap, f: NonlinearitySpec) -> PullbackProblem:
    """Coefficients of the pulled-back operator.

    The diffusion matrix at y is Jinv Jinv^T with Jinv the inverse of the
    forward Jacobian; the drift is minus the Laplacian of the inverse map
    evaluated at the image point (analytically zero for the linear ellipsoid
    map, finite differences otherwise).  The ellipticity constant is
    estimated from sampled eigenvalues; its loss is reported as an error.
    """
    rhs = RHSSpec.product(constant_field(1.0), f)
    if dmap.eps == 0.0:
        return PullbackProblem(op=OperatorSpec.identity(), rhs=rhs, map=dmap)
    if dmap.kind == "ellipsoid":
        a = 1.0 + dmap.eps
        op = OperatorSpec.constant_diagonal(1.0, 1.0 / a**2)
        return PullbackProblem(op=op, rhs=rhs, map=dmap)

    def a_fn(pts):
        pts = _as_pts(pts)
        jac = dmap.jacobian(pts)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1]
        inv[:, 0, 1] = -jac[:, 0, 1]
        inv[:, 1, 0] = -jac[:, 1, 0]
        inv[:, 1, 1] = jac[:, 0, 0]
        inv /= det[:, None, None]
        return np.einsum("nij,nkj->nik", inv, inv)

    def b_fn(pts):
        pts = _as_pts(pts)
        return -_inverse_laplacian_fd(dmap, dmap.forward(pts))

    th = np.arange(256) * (TWO_PI / 256)
    r = np.linspace(0.0, 1.0, 128)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    sample = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    eigs = min_eigenvalue_2x2(a_fn(sample))
    min_eig = float(eigs.min())
    if min_eig <= 1e-9:
        raise ValidationError(
            f"loss of ellipticity: sampled min eigenvalue {min_eig} (eps too large)"
        )
    lam = max(1.0 / min_eig, 1.0) * (1.0 + 1e-9)
    op = OperatorSpec(a_fn, b_fn, lam=lam, tag=f"pullback({dmap.kind},{dmap.eps})")
    return PullbackProblem(op=op, rhs=rhs, map=dmap)


def mapped_asymmetry(u_on_ball: ScalarField, dmap: DomainMap) -> np.ndarray:
    """Per-radius oscillation of the pulled-back solution over exact angular
    nodes.  The circle of radius r in ball coordinates corresponds to the
    dilation r * (boundary of the mapped domain), so this is the asymmetry of
    the original solution measured along those level curves."""
    return oscillation_profile(u_on_ball)
