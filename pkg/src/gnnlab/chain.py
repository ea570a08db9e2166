"""Constructive geometry of the weak Harnack chain of balls.

Given an inradius d, a boundary margin delta <= d/3 and a center distance
ell, the chain interpolates between a ball of radius d and one of radius
delta through balls B_k of radius r_k = (1 - t_k) d + t_k delta centered at
t_k ell e_n, where t_k follows the linear recursion

    t_k = d/(2 ell) + ((2 ell - d + delta)/(2 ell)) t_{k-1},    t_0 = 0,

whose closed form is t_k = (d/(d - delta)) (1 - q^k) with q the recursion
ratio.  The chain length N (largest k with t_k < 1) is logarithmic in
d/delta.  Everything here is dimension-generic; the overlap certificate is
checked by Monte-Carlo sampling in n dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_MAX_CHAIN = 200_000


@dataclass(frozen=True)
class ChainConfig:
    d: float
    delta: float
    ell: float
    c_sharp: float = 1.0
    n_dim: int = 2

    def __post_init__(self):
        if self.d <= 0:
            raise ValidationError(f"inradius d must be positive, got {self.d}")
        if not 0.0 < self.delta <= self.d / 3.0 * (1.0 + 1e-12):
            raise ValidationError(
                f"delta must lie in (0, d/3], got {self.delta} for d = {self.d}"
            )
        if self.ell < 0:
            raise ValidationError(f"center distance must be nonnegative, got {self.ell}")
        if not 0.0 < self.c_sharp <= 1.0:
            raise ValidationError(f"c_sharp must lie in (0, 1], got {self.c_sharp}")
        if self.ell > self.d / self.c_sharp * (1.0 + 1e-12):
            raise ValidationError(
                f"ell = {self.ell} exceeds the largest diameter d/c_sharp = "
                f"{self.d / self.c_sharp} consistent with the inradius bound"
            )
        if self.n_dim < 2:
            raise ValidationError(f"n_dim must be at least 2, got {self.n_dim}")

    @property
    def chain_branch(self) -> bool:
        return 2.0 * self.ell >= self.d

    @property
    def ratio(self) -> float:
        """(d - delta) / (2 ell - d + delta), the log-bound denominator."""
        return (self.d - self.delta) / (2.0 * self.ell - self.d + self.delta)


@dataclass(frozen=True)
class ChainReport:
    cfg: ChainConfig
    branch: str
    t: np.ndarray
    r: np.ndarray
    n_balls: int  # N: largest k with t_k < 1
    recursion_gap: float  # max |recursion - closed form|
    limit: float  # d / (d - delta), the supremum of t_k

    def to_json(self) -> dict:
        return {
            "d": self.cfg.d,
            "delta": self.cfg.delta,
            "ell": self.cfg.ell,
            "branch": self.branch,
            "t": self.t.tolist(),
            "r": self.r.tolist(),
            "N": self.n_balls,
            "recursion_gap": self.recursion_gap,
            "limit": self.limit,
        }

    def to_csv(self) -> str:
        lines = ["k,t,r"]
        for k in range(len(self.t)):
            lines.append(f"{k},{self.t[k]:.17g},{self.r[k]:.17g}")
        return "\n".join(lines) + "\n"


def build_chain(cfg: ChainConfig) -> ChainReport:
    """Run the recursion through the first t_k >= 1 and cross-check the
    closed form.  Outside the chain branch (2 ell < d) the two end balls
    already overlap heavily and the report degenerates to the single ball."""
    d, delta, ell = cfg.d, cfg.delta, cfg.ell
    if not cfg.chain_branch:
        t = np.array([0.0])
        return ChainReport(
            cfg=cfg,
            branch="large-overlap",
            t=t,
            r=np.array([d]),
            n_balls=0,
            recursion_gap=0.0,
            limit=d / (d - delta),
        )
    base = d / (2.0 * ell)
    q = (2.0 * ell - d + delta) / (2.0 * ell)
    ts = [0.0]
    while ts[-1] < 1.0 and len(ts) < _MAX_CHAIN:
        ts.append(base + q * ts[-1])
    t = np.array(ts)
    k = np.arange(len(t))
    closed = (d / (d - delta)) * (1.0 - q**k)
    gap = float(np.abs(t - closed).max())
    n_balls = int(np.sum(t < 1.0)) - 1  # t_0 = 0 counts, so N = #<1 - 1
    r = (1.0 - t) * d + t * delta
    return ChainReport(
        cfg=cfg,
        branch="chain",
        t=t,
        r=r,
        n_balls=n_balls,
        recursion_gap=gap,
        limit=d / (d - delta),
    )


@dataclass(frozen=True)
class LogBoundReport:
    n_balls: int
    threshold: float
    margin: float
    ratio: float
    ratio_bound: float
    ok: bool
    ratio_ok: bool


def verify_log_bound(cfg: ChainConfig, report: ChainReport | None = None) -> LogBoundReport:
    """Check N < log(d/delta) / log(1 + ratio) and ratio >= c_sharp / 3."""
    if not cfg.chain_branch:
        raise ValidationError("log bound applies to the chain branch only")
    if report is None:
        report = build_chain(cfg)
    ratio = cfg.ratio
    threshold = math.log(cfg.d / cfg.delta) / math.log1p(ratio)
    ratio_bound = cfg.c_sharp / 3.0
    return LogBoundReport(
        n_balls=report.n_balls,
        threshold=threshold,
        margin=threshold - report.n_balls,
        ratio=ratio,
        ratio_bound=ratio_bound,
        ok=report.n_balls < threshold,
        ratio_ok=ratio >= ratio_bound - 1e-12,
    )


def _sample_ball(rng, center_n: float, radius: float, n_dim: int, count: int):
    """Uniform samples in an n-ball centered on the x_n axis."""
    g = rng.standard_normal((count, n_dim))
    g /= np.sqrt((g * g).sum(axis=1))[:, None]
    radii = radius * rng.random(count) ** (1.0 / n_dim)
    pts = g * radii[:, None]
    pts[:, -1] += center_n
    return pts


def _inside(pts, center_n: float, radius: float) -> np.ndarray:
    d = pts.copy()
    d[:, -1] -= center_n
    return np.sqrt((d * d).sum(axis=1)) <= radius + 1e-12


@dataclass(frozen=True)
class OverlapReport:
    ok: bool
    route: str
    containment_as_written: bool
    containment_shifted: bool
    volume_ratio_ok: bool
    worst_fraction: float


def verify_overlap(
    cfg: ChainConfig,
    seed: int = 0,
    n_samples: int = 100_000,
    report: ChainReport | None = None,
) -> OverlapReport:
    """Monte-Carlo check of the consecutive-overlap certificate
    |B'_k| / |B'_{k-1} inter B'_k| <= 2^n.

    Two candidate inscribed balls are tried: the center offset t_k/4 as
    stated, and the offset r_k/4 (the one for which the radius-r_k/4 ball is
    internally tangent to both B' balls).  Independently, the volume ratio
    itself is certified by sampling in B'_k; the report records which route
    succeeded.
    """
    if report is None:
        report = build_chain(cfg)
    if report.branch != "chain" or report.n_balls == 0:
        return OverlapReport(True, "single-ball", True, True, True, 1.0)
    rng = np.random.default_rng(seed)
    ell = cfg.ell
    n = cfg.n_dim
    as_written = True
    shifted = True
    volume_ok = True
    worst = 1.0
    kmax = report.n_balls
    for k in range(1, kmax + 1):
        t_prev, t_k = report.t[k - 1], report.t[k]
        r_prev, r_k = report.r[k - 1], report.r[k]
        c_prev, c_k = t_prev * ell, t_k * ell
        small_r = r_k / 4.0

        for center, flag in (
            (c_k - report.t[k] / 4.0, "as_written"),
            (c_k - r_k / 4.0, "shifted"),
        ):
            pts = _sample_ball(rng, center, small_r, n, n_samples)
            okay = bool(
                np.all(_inside(pts, c_prev, r_prev / 2.0))
                and np.all(_inside(pts, c_k, r_k / 2.0))
            )
            if flag == "as_written":
                as_written &= okay
            else:
                shifted &= okay

        pts = _sample_ball(rng, c_k, r_k / 2.0, n, n_samples)
        frac = float(_inside(pts, c_prev, r_prev / 2.0).mean())
        sigma = math.sqrt(max(frac * (1.0 - frac), 1e-12) / n_samples)
        target = 2.0**-n
        volume_ok &= frac >= target - 3.0 * sigma
        worst = min(worst, frac / target)

    if as_written:
        route = "containment-as-written"
    elif shifted:
        route = "containment-shifted-offset"
    else:
        route = "volume-ratio-only"
    return OverlapReport(
        ok=volume_ok,
        route=route,
        containment_as_written=as_written,
        containment_shifted=shifted,
        volume_ratio_ok=volume_ok,
        worst_fraction=worst,
    )
