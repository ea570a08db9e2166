"""Pure-numpy implementations of the hot kernels.

The compiled extension ``gnnlab._kernels`` provides the same three entry
points with identical arithmetic (same operation grouping, same snap
thresholds); this module is the fallback selected at import time when the
extension is unavailable.  See ``gnnlab._backend``.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

# Fractional indices this close to an integer are snapped onto the node, so
# querying at (the floating-point image of) a node reproduces the stored
# value exactly.
SNAP = 1e-9


def interp_fractional(values, fr, ft):
    """Bilinear gather on a polar value table.

    ``fr`` is the fractional radial index (r * (n_r - 1), in [0, n_r - 1]),
    ``ft`` the fractional angular index (theta / dtheta, in [0, n_theta]).
    Angular indexing wraps periodically.
    """
    nr, nt = values.shape
    fr = np.asarray(fr, dtype=np.float64)
    ft = np.asarray(ft, dtype=np.float64)

    ir = np.floor(fr).astype(np.int64)
    tr = fr - ir
    hi = tr > 1.0 - SNAP
    tr = np.where((tr < SNAP) | hi, 0.0, tr)
    ir = ir + hi
    np.clip(ir, 0, nr - 1, out=ir)
    ir1 = np.minimum(ir + 1, nr - 1)

    it = np.floor(ft).astype(np.int64)
    tt = ft - it
    hi = tt > 1.0 - SNAP
    tt = np.where((tt < SNAP) | hi, 0.0, tt)
    it = np.mod(it + hi, nt)
    it1 = np.mod(it + 1, nt)

    v00 = values[ir, it]
    v10 = values[ir1, it]
    v01 = values[ir, it1]
    v11 = values[ir1, it1]
    return (1.0 - tr) * ((1.0 - tt) * v00 + tt * v01) + tr * (
        (1.0 - tt) * v10 + tt * v11
    )


def laplace_apply(values):
    """Discrete polar Laplacian u_rr + u_r/r + u_thth/r^2.

    Returns an array shaped like ``values`` holding the stencil value at the
    origin row and the interior rings; the boundary ring is set to zero.
    The origin uses the averaged-neighbor stencil 4*(mean(u(r1)) - u(0))/r1^2.
    """
    nr, nt = values.shape
    dr = 1.0 / (nr - 1)
    dth = TWO_PI / nt
    r = np.arange(nr) * dr

    out = np.zeros_like(values)
    out[0, :] = 4.0 * (values[1, :].mean() - values[0, 0]) / dr**2

    u = values
    mid = slice(1, nr - 1)
    rmid = r[mid][:, None]
    u_rr = (u[2:, :] - 2.0 * u[mid, :] + u[:-2, :]) / dr**2
    u_r = (u[2:, :] - u[:-2, :]) / (2.0 * dr)
    u_tt = (np.roll(u[mid, :], -1, axis=1) - 2.0 * u[mid, :]
            + np.roll(u[mid, :], 1, axis=1)) / dth**2
    out[mid, :] = u_rr + u_r / rmid + u_tt / rmid**2
    return out


def plane_scan_min(values, px, py, pu, lambdas, plane_tol):
    """Minimum of the reflection difference over each dome of a plane ladder.

    For each plane height lambda, consider the candidate nodes (arrays
    ``px, py, pu``; all strictly inside the disk) with py > lambda +
    plane_tol, reflect them across the plane, interpolate ``values`` at the
    reflected point and track the minimum of interp - pu.  Returns
    ``(min_w, counts)``; empty domes yield +inf / 0.
    """
    nr, nt = values.shape
    inv_dr = float(nr - 1)
    inv_dt = nt / TWO_PI
    mins = np.full(len(lambdas), np.inf)
    counts = np.zeros(len(lambdas), dtype=np.int64)
    for m, lam in enumerate(lambdas):
        mask = py > lam + plane_tol
        if not mask.any():
            continue
        x = px[mask]
        y = 2.0 * lam - py[mask]
        rq = np.sqrt(x * x + y * y)
        np.minimum(rq, 1.0, out=rq)
        tq = np.arctan2(y, x)
        tq = np.where(tq < 0.0, tq + TWO_PI, tq)
        w = interp_fractional(values, rq * inv_dr, tq * inv_dt) - pu[mask]
        mins[m] = w.min()
        counts[m] = w.size
    return mins, counts
