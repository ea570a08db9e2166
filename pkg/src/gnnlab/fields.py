"""Closed-form parametric families for coefficient fields and nonlinearities.

Only closed-form families are supported (no runtime expression parser): the
experiments need controlled one-parameter perturbations with exact
derivatives, and the hypothesis checker stays sound.

Field families (kappa, perturbation profiles):
    constant           kappa = c
    radial-polynomial  kappa = sum_k c_k |x|^(2k)
    axial-linear       kappa = base + eps * x_n
    angular-harmonic   kappa = base + eps * |x|^m * cos(k*theta - phase)
    sum                pointwise sum of sub-specs

Nonlinearity families:
    constant       f(s) = c
    power          f(s) = coef * s^exponent
    affine-power   f(s) = const + coef * s^exponent
    custom-table   piecewise-linear interpolation of (s, f) samples
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * np.pi

_FIELD_FAMILIES = (
    "constant",
    "radial-polynomial",
    "axial-linear",
    "angular-harmonic",
    "sum",
)
_NONLIN_FAMILIES = ("constant", "power", "affine-power", "custom-table")


def _as_points(x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if pts.shape[1] != 2:
        raise ValidationError(f"points must have shape (N, 2), got {pts.shape}")
    return pts


@dataclass(frozen=True)
class FieldSpec:
    """Parametric scalar field on the closed unit disk with analytic
    derivatives.  Immutable; evaluation is reentrant."""

    family: str
    params: dict
    nonneg: bool = False
    terms: tuple = dc_field(default=(), repr=False)

    def __post_init__(self):
        if self.family not in _FIELD_FAMILIES:
            raise ValidationError(f"unknown field family {self.family!r}")
        if self.family == "sum":
            if not self.terms:
                raise ValidationError("sum family needs at least one term")
        elif self.family == "radial-polynomial":
            coeffs = np.asarray(self.params.get("coeffs", ()), dtype=np.float64)
            if coeffs.size == 0:
                raise ValidationError("radial-polynomial needs coeffs")
        elif self.family == "angular-harmonic":
            if self.params.get("m", 1) < 1:
                raise ValidationError("angular-harmonic needs m >= 1")
            if self.params.get("k", 1) < 1:
                raise ValidationError("angular-harmonic needs k >= 1")

    # -- evaluation ---------------------------------------------------------

    def value(self, x) -> np.ndarray:
        pts = _as_points(x)
        out = self._value(pts)
        if self.nonneg and np.any(out < 0.0):
            raise ValidationError(
                f"field flagged nonneg evaluated to {out.min()} < 0"
            )
        return out

    def _value(self, pts: np.ndarray) -> np.ndarray:
        fam, p = self.family, self.params
        if fam == "constant":
            return np.full(len(pts), float(p["value"]))
        if fam == "radial-polynomial":
            r2 = (pts * pts).sum(axis=1)
            coeffs = np.asarray(p["coeffs"], dtype=np.float64)
            out = np.zeros(len(pts))
            for k in range(coeffs.size - 1, -1, -1):
                out = out * r2 + coeffs[k]
            return out
        if fam == "axial-linear":
            return p.get("base", 1.0) + p["eps"] * pts[:, 1]
        if fam == "angular-harmonic":
            r = np.sqrt((pts * pts).sum(axis=1))
            th = np.arctan2(pts[:, 1], pts[:, 0])
            m, k = p.get("m", 1), p.get("k", 1)
            phase = p.get("phase", 0.0)
            return p.get("base", 1.0) + p["eps"] * r**m * np.cos(k * th - phase)
        return sum(t._value(pts) for t in self.terms)

    def gradient(self, x) -> np.ndarray:
        """Cartesian gradient, shape (N, 2)."""
        pts = _as_points(x)
        return self._gradient(pts)

    def _gradient(self, pts: np.ndarray) -> np.ndarray:
        fam, p = self.family, self.params
        if fam == "constant":
            return np.zeros_like(pts)
        if fam == "radial-polynomial":
            r2 = (pts * pts).sum(axis=1)
            coeffs = np.asarray(p["coeffs"], dtype=np.float64)
            # d/dx sum c_k (r^2)^k = (sum 2k c_k r^(2k-2)) x
            s = np.zeros(len(pts))
            for k in range(coeffs.size - 1, 0, -1):
                s = s * r2 + 2 * k * coeffs[k]
            return s[:, None] * pts
        if fam == "axial-linear":
            g = np.zeros_like(pts)
            g[:, 1] = p["eps"]
            return g
        if fam == "angular-harmonic":
            r = np.sqrt((pts * pts).sum(axis=1))
            th = np.arctan2(pts[:, 1], pts[:, 0])
            m, k = p.get("m", 1), p.get("k", 1)
            eps = p["eps"]
            phase = p.get("phase", 0.0)
            c = np.cos(k * th - phase)
            s = np.sin(k * th - phase)
            rpos = np.maximum(r, 1e-300)
            dr = eps * m * rpos ** (m - 1) * c
            dth_over_r = -eps * k * rpos ** (m - 1) * s
            er = np.stack([np.cos(th), np.sin(th)], axis=1)
            et = np.stack([-np.sin(th), np.cos(th)], axis=1)
            return dr[:, None] * er + dth_over_r[:, None] * et
        return sum(t._gradient(pts) for t in self.terms)

    def radial_derivative(self, x) -> np.ndarray:
        """(x/|x|) . grad; undefined at the origin (returns 0 there)."""
        pts = _as_points(x)
        r = np.sqrt((pts * pts).sum(axis=1))
        g = self._gradient(pts)
        with np.errstate(invalid="ignore"):
            out = (g * pts).sum(axis=1) / np.maximum(r, 1e-300)
        return np.where(r > 0, out, 0.0)

    def angular_magnitude(self, x) -> np.ndarray:
        """|grad - (x/|x|) d_r|; zero at the origin by convention."""
        pts = _as_points(x)
        r = np.sqrt((pts * pts).sum(axis=1))
        g = self._gradient(pts)
        dr = self.radial_derivative(pts)
        er = pts / np.maximum(r, 1e-300)[:, None]
        tang = g - dr[:, None] * er
        out = np.sqrt((tang * tang).sum(axis=1))
        return np.where(r > 0, out, 0.0)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        obj = {"family": self.family, "params": dict(self.params)}
        if self.nonneg:
            obj["flags"] = ["nonneg"]
        if self.family == "sum":
            obj["params"] = {"terms": [t.to_json() for t in self.terms]}
        return obj

    @classmethod
    def from_json(cls, obj) -> "FieldSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        flags = obj.get("flags", [])
        family = obj["family"]
        params = dict(obj.get("params", {}))
        terms = ()
        if family == "sum":
            terms = tuple(cls.from_json(t) for t in params.pop("terms"))
        return cls(family, params, nonneg="nonneg" in flags, terms=terms)


def constant_field(value: float, nonneg: bool = False) -> FieldSpec:
    return FieldSpec("constant", {"value": float(value)}, nonneg=nonneg)


def radial_polynomial(coeffs, nonneg: bool = False) -> FieldSpec:
    return FieldSpec("radial-polynomial", {"coeffs": list(coeffs)}, nonneg=nonneg)


def axial_linear(eps: float, base: float = 1.0, nonneg: bool = False) -> FieldSpec:
    return FieldSpec("axial-linear", {"base": base, "eps": float(eps)}, nonneg=nonneg)


def angular_harmonic(
    eps: float, k: int = 2, m: int | None = None, base: float = 1.0, phase: float = 0.0
) -> FieldSpec:
    m = k if m is None else m
    return FieldSpec(
        "angular-harmonic",
        {"base": base, "eps": float(eps), "m": int(m), "k": int(k), "phase": phase},
    )


def field_sum(*terms: FieldSpec) -> FieldSpec:
    return FieldSpec("sum", {}, terms=tuple(terms))


def eval_kappa(spec: FieldSpec, x) -> float:
    """Evaluate a coefficient field at one point of the closed disk."""
    pts = _as_points(x)
    r = np.sqrt((pts * pts).sum(axis=1))
    if np.any(r > 1.0 + 1e-12):
        raise ValidationError(f"point outside the closed disk, |x| = {r.max()}")
    out = spec.value(pts)
    return float(out[0]) if np.ndim(x) == 1 else out


@dataclass(frozen=True)
class NonlinearitySpec:
    """Scalar nonlinearity f(s) on s >= 0 with derivative and a Lipschitz
    bound on [0, U]."""

    family: str
    params: dict
    nonneg: bool = False

    def __post_init__(self):
        if self.family not in _NONLIN_FAMILIES:
            raise ValidationError(f"unknown nonlinearity family {self.family!r}")
        if self.family == "custom-table":
            s = np.asarray(self.params["s"], dtype=np.float64)
            if s.size < 2 or np.any(np.diff(s) <= 0):
                raise ValidationError("custom-table needs increasing s samples")

    def value(self, s) -> np.ndarray:
        # domain is [0, +inf); constant extension below 0 keeps Newton
        # iterates that dip negative from producing NaNs
        s = np.maximum(np.asarray(s, dtype=np.float64), 0.0)
        fam, p = self.family, self.params
        if fam == "constant":
            return np.full(s.shape, float(p["value"]))
        if fam == "power":
            return p["coef"] * np.power(s, p["exponent"])
        if fam == "affine-power":
            return p["const"] + p["coef"] * np.power(s, p["exponent"])
        return np.interp(s, p["s"], p["f"])

    def derivative(self, s) -> np.ndarray:
        s = np.maximum(np.asarray(s, dtype=np.float64), 0.0)
        fam, p = self.family, self.params
        if fam == "constant":
            return np.zeros(s.shape)
        if fam in ("power", "affine-power"):
            q = p["exponent"]
            with np.errstate(divide="ignore", invalid="ignore"):
                d = p["coef"] * q * np.power(np.maximum(s, 1e-300), q - 1.0)
            return d if q >= 1.0 else np.where(s > 0, d, 0.0)
        knots = np.asarray(p["s"], dtype=np.float64)
        vals = np.asarray(p["f"], dtype=np.float64)
        slopes = np.diff(vals) / np.diff(knots)
        idx = np.clip(np.searchsorted(knots, s, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    def lipschitz(self, U: float) -> float:
        """Lipschitz constant of f on [0, U]; analytic where the family
        allows, otherwise the sampled sup of |f'| over 10^4 points."""
        if U <= 0:
            raise ValidationError(f"U must be positive, got {U}")
        fam, p = self.family, self.params
        if fam == "constant":
            return 0.0
        if fam in ("power", "affine-power"):
            q = p["exponent"]
            if q >= 1.0:
                return abs(p["coef"]) * q * U ** (q - 1.0)
        if fam == "custom-table":
            knots = np.asarray(p["s"], dtype=np.float64)
            vals = np.asarray(p["f"], dtype=np.float64)
            slopes = np.abs(np.diff(vals) / np.diff(knots))
            keep = knots[:-1] < U
            return float(slopes[keep].max()) if keep.any() else float(slopes[0])
        s = np.linspace(U * 1e-4, U, 10_000)
        return float(np.abs(self.derivative(s)).max())

    def to_json(self) -> dict:
        obj = {"family": self.family, "params": dict(self.params)}
        if self.nonneg:
            obj["flags"] = ["nonneg"]
        return obj

    @classmethod
    def from_json(cls, obj) -> "NonlinearitySpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(
            obj["family"],
            dict(obj.get("params", {})),
            nonneg="nonneg" in obj.get("flags", []),
        )


def constant_nonlinearity(value: float, nonneg: bool | None = None) -> NonlinearitySpec:
    if nonneg is None:
        nonneg = value >= 0
    return NonlinearitySpec("constant", {"value": float(value)}, nonneg=nonneg)


def power_nonlinearity(coef: float, exponent: float, nonneg: bool = True) -> NonlinearitySpec:
    return NonlinearitySpec(
        "power", {"coef": float(coef), "exponent": float(exponent)}, nonneg=nonneg
    )


def affine_power_nonlinearity(
    const: float, coef: float, exponent: float, nonneg: bool = True
) -> NonlinearitySpec:
    return NonlinearitySpec(
        "affine-power",
        {"const": float(const), "coef": float(coef), "exponent": float(exponent)},
        nonneg=nonneg,
    )


@dataclass(frozen=True)
class RHSSpec:
    """Composite right-hand side g(x, s) = sum of kappa_t(x) * f_t(s)."""

    terms: tuple  # of (FieldSpec, NonlinearitySpec)

    def value(self, x, s) -> np.ndarray:
        pts = _as_points(x)
        s = np.asarray(s, dtype=np.float64)
        return sum(k._value(pts) * f.value(s) for k, f in self.terms)

    def ds(self, x, s) -> np.ndarray:
        pts = _as_points(x)
        s = np.asarray(s, dtype=np.float64)
        return sum(k._value(pts) * f.derivative(s) for k, f in self.terms)

    def grad_x(self, x, s) -> np.ndarray:
        pts = _as_points(x)
        s = np.asarray(s, dtype=np.float64)
        return sum(f.value(s)[:, None] * k._gradient(pts) for k, f in self.terms)

    def radial_derivative_x(self, x, s) -> np.ndarray:
        pts = _as_points(x)
        r = np.sqrt((pts * pts).sum(axis=1))
        g = self.grad_x(pts, s)
        out = (g * pts).sum(axis=1) / np.maximum(r, 1e-300)
        return np.where(r > 0, out, 0.0)

    def angular_magnitude_x(self, x, s) -> np.ndarray:
        pts = _as_points(x)
        r = np.sqrt((pts * pts).sum(axis=1))
        g = self.grad_x(pts, s)
        dr = self.radial_derivative_x(pts, s)
        er = pts / np.maximum(r, 1e-300)[:, None]
        tang = g - dr[:, None] * er
        out = np.sqrt((tang * tang).sum(axis=1))
        return np.where(r > 0, out, 0.0)

    def to_json(self) -> dict:
        return {
            "terms": [
                {"field": k.to_json(), "nonlinearity": f.to_json()}
                for k, f in self.terms
            ]
        }

    @classmethod
    def from_json(cls, obj) -> "RHSSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(
            tuple(
                (FieldSpec.from_json(t["field"]), NonlinearitySpec.from_json(t["nonlinearity"]))
                for t in obj["terms"]
            )
        )

    @classmethod
    def product(cls, kappa: FieldSpec, f: NonlinearitySpec) -> "RHSSpec":
        return cls(((kappa, f),))


@dataclass(frozen=True)
class HypothesesReport:
    """Diagnostic check of the structural hypotheses on (kappa, f)."""

    kappa_nonneg: bool
    kappa_min: float
    f_nonneg: bool
    f_min: float
    f_lipschitz: float
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def check_hypotheses(
    spec_k: FieldSpec,
    spec_f: NonlinearitySpec,
    U: float,
    resolution: tuple[int, int] = (256, 512),
) -> HypothesesReport:
    """Sample kappa over the disk and f over [0, U]; flags violations of the
    nonnegativity requirements without aborting."""
    if U <= 0:
        raise ValidationError(f"U must be positive, got {U}")
    n_r, n_t = resolution
    r = np.linspace(0.0, 1.0, n_r)
    th = np.arange(n_t) * (TWO_PI / n_t)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    kvals = spec_k._value(pts)
    kmin = float(kvals.min())

    s = np.linspace(0.0, U, 4096)
    fvals = spec_f.value(s)
    fmin = float(fvals.min())

    violations = []
    if kmin < 0.0:
        violations.append(f"kappa attains {kmin} < 0")
    if spec_f.nonneg and fmin < 0.0:
        violations.append(f"f flagged nonneg attains {fmin} < 0 on [0, {U}]")
    return HypothesesReport(
        kappa_nonneg=kmin >= 0.0,
        kappa_min=kmin,
        f_nonneg=fmin >= 0.0,
        f_min=fmin,
        f_lipschitz=spec_f.lipschitz(U),
        violations=tuple(violations),
    )
