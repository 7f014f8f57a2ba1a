"""Natural cubic spline interpolation with linear tail extrapolation.

The value surfaces are interpolated along the average-price axis with
natural cubic splines (zero second derivative at both boundary knots).
Queries outside the knot range continue linearly with the spline's end
slope.  Coefficient construction is vectorised over rows so a whole
(q-row x A-knot) matrix is fitted in one tridiagonal solve.
"""

from __future__ import annotations

import numpy as np

__all__ = ["natural_m2", "spline_eval", "spline_eval_rows", "end_slopes",
           "bicubic_tensors", "bicubic_eval"]


def natural_m2(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second derivatives of the natural cubic spline through (x, y).

    x: strictly increasing knots, shape (K,) with K >= 4.
    y: values, shape (..., K); the fit is vectorised over leading axes.
    Returns m2 with the same shape as y, m2[..., 0] = m2[..., -1] = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    K = x.shape[0]
    if K < 4:
        raise ValueError(f"natural cubic spline needs >= 4 knots, got {K}")
    h = np.diff(x)
    if np.any(h <= 0):
        raise ValueError("knots must be strictly increasing")

    rows = y.reshape(-1, K)
    rhs = 6.0 * ((rows[:, 2:] - rows[:, 1:-1]) / h[1:] - (rows[:, 1:-1] - rows[:, :-2]) / h[:-1])

    # Thomas algorithm on the (K-2) interior equations, shared across rows.
    m = K - 2
    diag = 2.0 * (h[:-1] + h[1:])
    off = h[1:-1]  # sub- and super-diagonal entries h_1 .. h_{K-3}
    dg = np.empty(m)
    dg[0] = diag[0]
    for i in range(1, m):
        dg[i] = diag[i] - off[i - 1] * (off[i - 1] / dg[i - 1])
    sol = rhs.copy()
    for i in range(1, m):
        sol[:, i] -= off[i - 1] / dg[i - 1] * sol[:, i - 1]
    sol[:, m - 1] /= dg[m - 1]
    for i in range(m - 2, -1, -1):
        sol[:, i] = (sol[:, i] - off[i] * sol[:, i + 1]) / dg[i]

    m2 = np.zeros_like(rows)
    m2[:, 1:-1] = sol
    return m2.reshape(y.shape)


def end_slopes(x: np.ndarray, y: np.ndarray, m2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spline slopes at the first and last knot (used for the linear tails)."""
    h0 = x[1] - x[0]
    hk = x[-1] - x[-2]
    left = (y[..., 1] - y[..., 0]) / h0 - h0 * (2.0 * m2[..., 0] + m2[..., 1]) / 6.0
    right = (y[..., -1] - y[..., -2]) / hk + hk * (2.0 * m2[..., -1] + m2[..., -2]) / 6.0
    return left, right


def _segment(x: np.ndarray, xq: np.ndarray) -> np.ndarray:
    return np.clip(np.searchsorted(x, xq, side="right") - 1, 0, x.shape[0] - 2)


def spline_eval(x: np.ndarray, y: np.ndarray, m2: np.ndarray, xq) -> np.ndarray | float:
    """Evaluate one fitted spline (y, m2 of shape (K,)) at scalar/array xq."""
    x = np.asarray(x, dtype=np.float64)
    scalar = np.ndim(xq) == 0
    pts = np.atleast_1d(np.asarray(xq, dtype=np.float64))
    if not np.all(np.isfinite(pts)):
        raise ValueError("query points must be finite")

    idx = _segment(x, pts)
    h = x[idx + 1] - x[idx]
    a = (x[idx + 1] - pts) / h
    b = (pts - x[idx]) / h
    val = (a * y[idx] + b * y[idx + 1]
           + ((a ** 3 - a) * m2[idx] + (b ** 3 - b) * m2[idx + 1]) * h * h / 6.0)

    slope_l, slope_r = end_slopes(x, y, m2)
    val = np.where(pts < x[0], y[0] + slope_l * (pts - x[0]), val)
    val = np.where(pts > x[-1], y[-1] + slope_r * (pts - x[-1]), val)
    return float(val[0]) if scalar else val


def spline_eval_rows(x: np.ndarray, y: np.ndarray, m2: np.ndarray, xq: float) -> np.ndarray:
    """Evaluate a stack of splines (y, m2 of shape (..., K)) at one point."""
    x = np.asarray(x, dtype=np.float64)
    xq = float(xq)
    if not np.isfinite(xq):
        raise ValueError("query point must be finite")
    if xq < x[0]:
        slope_l, _ = end_slopes(x, y, m2)
        return y[..., 0] + slope_l * (xq - x[0])
    if xq > x[-1]:
        _, slope_r = end_slopes(x, y, m2)
        return y[..., -1] + slope_r * (xq - x[-1])
    k = int(_segment(x, np.asarray([xq]))[0])
    h = x[k + 1] - x[k]
    a = (x[k + 1] - xq) / h
    b = (xq - x[k]) / h
    return (a * y[..., k] + b * y[..., k + 1]
            + ((a ** 3 - a) * m2[..., k] + (b ** 3 - b) * m2[..., k + 1]) * h * h / 6.0)


def bicubic_tensors(theta: np.ndarray, s_grid: np.ndarray,
                    a_grid: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spline second-derivative tensors (DA, DS, DSA) of a (S, q, A) block.

    DA fits along the last (A) axis, DS along the first (S) axis, DSA fits
    DA along S; together they define the tensor-product natural bicubic.
    """
    da = natural_m2(a_grid, theta)
    ds = np.moveaxis(natural_m2(s_grid, np.moveaxis(theta, 0, -1)), -1, 0)
    dsa = np.moveaxis(natural_m2(s_grid, np.moveaxis(da, 0, -1)), -1, 0)
    return da, ds, dsa


def _axis_coeffs(grid: np.ndarray, x: float) -> tuple[int, int, np.ndarray]:
    """4-term evaluation coefficients on (value, value, m2, m2) knot pairs."""
    h = grid[1] - grid[0]
    n = grid.shape[0]
    if x < grid[0]:
        d = x - grid[0]
        return 0, 1, np.array([1.0 - d / h, d / h, -h * d / 3.0, -h * d / 6.0])
    if x > grid[-1]:
        d = x - grid[-1]
        return n - 2, n - 1, np.array([-d / h, 1.0 + d / h, h * d / 6.0, h * d / 3.0])
    k = min(int((x - grid[0]) / h), n - 2)
    aw = (grid[k + 1] - x) / h
    bw = (x - grid[k]) / h
    return k, k + 1, np.array([aw, bw, (aw ** 3 - aw) * h * h / 6.0,
                               (bw ** 3 - bw) * h * h / 6.0])


def bicubic_eval(theta: np.ndarray, tensors: tuple[np.ndarray, np.ndarray, np.ndarray],
                 s_grid: np.ndarray, a_grid: np.ndarray, s_query: float,
                 a_query: float) -> np.ndarray:
    """Evaluate all q-rows of a (S, q, A) block at one (S, A) point.

    Interpolates in A first, then in S; linear continuation on both tails.
    """
    da, ds, dsa = tensors
    c1, c2, wa = _axis_coeffs(a_grid, a_query)
    r1, r2, wsv = _axis_coeffs(s_grid, s_query)
    g1 = wa[0] * theta[r1, :, c1] + wa[1] * theta[r1, :, c2] \
        + wa[2] * da[r1, :, c1] + wa[3] * da[r1, :, c2]
    g2 = wa[0] * theta[r2, :, c1] + wa[1] * theta[r2, :, c2] \
        + wa[2] * da[r2, :, c1] + wa[3] * da[r2, :, c2]
    m1 = wa[0] * ds[r1, :, c1] + wa[1] * ds[r1, :, c2] \
        + wa[2] * dsa[r1, :, c1] + wa[3] * dsa[r1, :, c2]
    m2 = wa[0] * ds[r2, :, c1] + wa[1] * ds[r2, :, c2] \
        + wa[2] * dsa[r2, :, c1] + wa[3] * dsa[r2, :, c2]
    return wsv[0] * g1 + wsv[1] * g2 + wsv[2] * m1 + wsv[3] * m2
