"""Tight inner loops of the backward sweep and the path replay (numba).

The certainty-equivalent aggregation (1/gamma)*log(sum p*exp(-gamma*z)) is
evaluated in shifted form:

    value = cost + (ubar_i + M_j + log sum_e p_e * u[e,i] * Et[e,j]) / gamma

with u[e,i] = exp(-gamma*q_i*s*eps_e - ubar_i), ubar_i = 2*gamma*q_i*s its
per-inventory ceiling, and Et[e,j] = exp(gamma*(E[e,j] - max_e E[e,j])).
Both factor tables stay in (0, 1], so no overflow is possible and the sum
keeps at least one O(1) term, which bounds the relative error of the log.
Candidate offsets are visited in the caller-supplied preference order and
replaced only on strict improvement, making the argmin deterministic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BIG = np.inf


@njit(cache=True)
def sweep_day_base(theta_next, m2_next, n, s0, s, q_grid, a_grid, gamma,
                   probs, eps_vals, offs, costs, cont, tgt):
    """One backward day on the tree: fill continuation values and targets.

    theta_next/m2_next: (4n+5, n_q, n_A) day-(n+1) surfaces and their
    A-spline second derivatives.  cont/tgt: (4n+1, n_q, n_A) outputs; cont
    is NaN where no candidate target exists.  Returns (extrapolated,
    total) counts of A-queries outside the knot range.
    """
    n_z = 4 * n + 1
    n_q = q_grid.shape[0]
    n_a = a_grid.shape[0]
    n_off = offs.shape[0]
    a0 = a_grid[0]
    a_last = a_grid[n_a - 1]
    h = a_grid[1] - a_grid[0]
    inv6 = 1.0 / 6.0
    extrap = 0
    total = 0

    u = np.empty((5, n_q))
    ubar = np.empty(n_q)
    if gamma > 0.0:
        for i in range(n_q):
            g = gamma * q_grid[i] * s
            ubar[i] = 2.0 * g
            for e in range(5):
                u[e, i] = np.exp(-g * eps_vals[e] - ubar[i])

    E = np.empty((5, n_q))
    Et = np.empty((5, n_q))
    M = np.empty(n_q)

    for z in range(n_z):
        S = s0 + s * (z - 2.0 * n)
        for ai in range(n_a):
            A = a_grid[ai]
            for e in range(5):
                child = z + e
                A1 = (n * A + S + s * eps_vals[e]) / (n + 1.0)
                total += 1
                T = theta_next[child]
                M2 = m2_next[child]
                if A1 < a0:
                    extrap += 1
                    d_ = A1 - a0
                    for j in range(n_q):
                        slope = (T[j, 1] - T[j, 0]) / h - h * (2.0 * M2[j, 0] + M2[j, 1]) * inv6
                        E[e, j] = T[j, 0] + slope * d_
                elif A1 > a_last:
                    extrap += 1
                    d_ = A1 - a_last
                    for j in range(n_q):
                        slope = ((T[j, n_a - 1] - T[j, n_a - 2]) / h
                                 + h * (2.0 * M2[j, n_a - 1] + M2[j, n_a - 2]) * inv6)
                        E[e, j] = T[j, n_a - 1] + slope * d_
                else:
                    k = int((A1 - a0) / h)
                    if k > n_a - 2:
                        k = n_a - 2
                    aw = (a_grid[k + 1] - A1) / h
                    bw = (A1 - a_grid[k]) / h
                    ca = (aw * aw * aw - aw) * h * h * inv6
                    cb = (bw * bw * bw - bw) * h * h * inv6
                    for j in range(n_q):
                        E[e, j] = (aw * T[j, k] + bw * T[j, k + 1]
                                   + ca * M2[j, k] + cb * M2[j, k + 1])

            if gamma > 0.0:
                for j in range(n_q):
                    mx = E[0, j]
                    for e in range(1, 5):
                        if E[e, j] > mx:
                            mx = E[e, j]
                    M[j] = gamma * mx
                    for e in range(5):
                        Et[e, j] = np.exp(gamma * E[e, j] - M[j])
                for i in range(n_q):
                    best = BIG
                    bd = 0
                    for t in range(n_off):
                        j = i + offs[t]
                        if j < 0 or j >= n_q:
                            continue
                        inner = 0.0
                        for e in range(5):
                            inner += probs[e] * u[e, i] * Et[e, j]
                        val = costs[t] + (M[j] + np.log(inner)) / gamma
                        if val < best:
                            best = val
                            bd = offs[t]
                    if best == BIG:
                        cont[z, i, ai] = np.nan
                        tgt[z, i, ai] = i
                    else:
                        cont[z, i, ai] = best + ubar[i] / gamma
                        tgt[z, i, ai] = i + bd
            else:
                for j in range(n_q):
                    eb = 0.0
                    for e in range(5):
                        eb += probs[e] * E[e, j]
                    M[j] = eb
                for i in range(n_q):
                    best = BIG
                    bd = 0
                    for t in range(n_off):
                        j = i + offs[t]
                        if j < 0 or j >= n_q:
                            continue
                        val = costs[t] + M[j]
                        if val < best:
                            best = val
                            bd = offs[t]
                    if best == BIG:
                        cont[z, i, ai] = np.nan
                        tgt[z, i, ai] = i
                    else:
                        cont[z, i, ai] = best
                        tgt[z, i, ai] = i + bd
    return extrap, total


@njit(cache=True, inline="always")
def _row_coeffs(grid, h, x, c_lo, c_hi, out_w, out_idx, slot):
    """4-point coefficients of a natural-spline 1-D evaluation at x.

    Expresses value(x) = w0*y[k] + w1*y[k+1] + w2*m2[k] + w3*m2[k+1] for
    interior points, or the linear-tail equivalent at the boundary pair.
    Returns 1 if x fell outside the knots.
    """
    n = grid.shape[0]
    inv6 = 1.0 / 6.0
    if x < grid[0]:
        d = x - grid[0]
        out_idx[slot, 0] = 0
        out_idx[slot, 1] = 1
        out_w[slot, 0] = 1.0 - d / h
        out_w[slot, 1] = d / h
        out_w[slot, 2] = -h * d * 2.0 * inv6
        out_w[slot, 3] = -h * d * inv6
        return 1
    if x > grid[n - 1]:
        d = x - grid[n - 1]
        out_idx[slot, 0] = n - 2
        out_idx[slot, 1] = n - 1
        out_w[slot, 0] = -d / h
        out_w[slot, 1] = 1.0 + d / h
        out_w[slot, 2] = h * d * inv6
        out_w[slot, 3] = h * d * 2.0 * inv6
        return 1
    k = int((x - grid[0]) / h)
    if k > n - 2:
        k = n - 2
    aw = (grid[k + 1] - x) / h
    bw = (x - grid[k]) / h
    out_idx[slot, 0] = k
    out_idx[slot, 1] = k + 1
    out_w[slot, 0] = aw
    out_w[slot, 1] = bw
    out_w[slot, 2] = (aw * aw * aw - aw) * h * h * inv6
    out_w[slot, 3] = (bw * bw * bw - bw) * h * h * inv6
    return 0


@njit(cache=True)
def sweep_day_impact(T, DA, DS, DSA, n, dt, k_perm, noise_gate, s, q_grid, a_grid,
                     s_grid, gamma, probs, eps_vals, offs, costs, lam, cont, tgt):
    """One backward day of the permanent-impact recursion on (S, q, A).

    T: day-(n+1) values (n_S, n_q, n_A); DA/DS/DSA its spline second
    derivatives along A, along S, and along S of DA (the bicubic tensors).
    lam[t] is the pre-aggregated intraday-noise certainty equivalent of
    candidate t; noise_gate (0/1) switches the intraday execution-noise
    coupling, which is only part of the model when k_perm > 0.  Outputs
    cont/tgt shaped like T.  Returns the count of (S or A) queries that
    needed tail extrapolation, and the total count.
    """
    n_s = s_grid.shape[0]
    n_q = q_grid.shape[0]
    n_a = a_grid.shape[0]
    n_off = offs.shape[0]
    dq = q_grid[1] - q_grid[0]
    ha = a_grid[1] - a_grid[0]
    hs = s_grid[1] - s_grid[0]
    extrap = 0
    total = 0

    wa = np.empty((5, 4))
    ia = np.empty((5, 2), dtype=np.int64)
    ws = np.empty((5, 4))
    is_ = np.empty((5, 2), dtype=np.int64)
    ev = np.empty(5)
    val_ed = np.empty((5, n_q))
    best = np.empty(n_q)
    bidx = np.empty(n_q, dtype=np.int64)

    for js in range(n_s):
        S = s_grid[js]
        for ai in range(n_a):
            A = a_grid[ai]
            for i in range(n_q):
                best[i] = BIG
                bidx[i] = i
            for t in range(n_off):
                d = offs[t]
                v = d * dq / dt
                drift = k_perm * v * dt
                det = costs[t] + lam[t] - 0.5 * k_perm * (v * dt) * (v * dt)
                for e in range(5):
                    sp = S + drift + s * eps_vals[e]
                    a1 = (n * A + sp) / (n + 1.0)
                    total += 1
                    oob = _row_coeffs(s_grid, hs, sp, 0, 0, ws, is_, e)
                    oob += _row_coeffs(a_grid, ha, a1, 0, 0, wa, ia, e)
                    if oob > 0:
                        extrap += 1
                # value of target row j for every source i sharing this offset
                lo = 0 if d >= 0 else -d
                hi = n_q if d <= 0 else n_q - d
                for e in range(5):
                    r1 = is_[e, 0]
                    r2 = is_[e, 1]
                    c1 = ia[e, 0]
                    c2 = ia[e, 1]
                    b0 = ws[e, 0]
                    b1 = ws[e, 1]
                    b2 = ws[e, 2]
                    b3 = ws[e, 3]
                    a0w = wa[e, 0]
                    a1w = wa[e, 1]
                    a2w = wa[e, 2]
                    a3w = wa[e, 3]
                    for i in range(lo, hi):
                        j = i + d
                        g1 = (a0w * T[r1, j, c1] + a1w * T[r1, j, c2]
                              + a2w * DA[r1, j, c1] + a3w * DA[r1, j, c2])
                        g2 = (a0w * T[r2, j, c1] + a1w * T[r2, j, c2]
                              + a2w * DA[r2, j, c1] + a3w * DA[r2, j, c2])
                        mg1 = (a0w * DS[r1, j, c1] + a1w * DS[r1, j, c2]
                               + a2w * DSA[r1, j, c1] + a3w * DSA[r1, j, c2])
                        mg2 = (a0w * DS[r2, j, c1] + a1w * DS[r2, j, c2]
                               + a2w * DSA[r2, j, c1] + a3w * DSA[r2, j, c2])
                        val_ed[e, i] = b0 * g1 + b1 * g2 + b2 * mg1 + b3 * mg2
                if gamma > 0.0:
                    for i in range(lo, hi):
                        q = q_grid[i]
                        q_eff = q + noise_gate * 0.5 * v * dt
                        mx = -BIG
                        for e in range(5):
                            ev[e] = -gamma * (s * q_eff * eps_vals[e] - val_ed[e, i])
                            if ev[e] > mx:
                                mx = ev[e]
                        acc = 0.0
                        for e in range(5):
                            acc += probs[e] * np.exp(ev[e] - mx)
                        val = det - k_perm * v * q * dt + (mx + np.log(acc)) / gamma
                        if val < best[i]:
                            best[i] = val
                            bidx[i] = i + d
                else:
                    for i in range(lo, hi):
                        q = q_grid[i]
                        acc = 0.0
                        for e in range(5):
                            acc += probs[e] * val_ed[e, i]
                        val = det - k_perm * v * q * dt + acc
                        if val < best[i]:
                            best[i] = val
                            bidx[i] = i + d
            for i in range(n_q):
                if best[i] == BIG:
                    cont[js, i, ai] = np.nan
                    tgt[js, i, ai] = i
                else:
                    cont[js, i, ai] = best[i]
                    tgt[js, i, ai] = bidx[i]
    return extrap, total


@njit(cache=True)
def replay_day_base(alive, n_star, S, A, q, X, prices_next, n, exercisable,
                    theta_next, m2_next, tgt_day, s0, s, q_grid, a_grid, gamma,
                    probs, eps_vals, offs, costs, vol_day, dt, F, beta, lin, cub,
                    rho_lo, rho_hi, eta, phi, psi):
    """Advance every live path one day against the stored policy.

    Exercise is re-decided as settle-value <= interpolated continuation
    (only when `exercisable`); orders come from the stored targets,
    interpolated linearly in A and across the two neighbouring tree
    columns, clamped to the participation window.  Dead paths keep the
    state they settled with.
    """
    n_q = q_grid.shape[0]
    n_a = a_grid.shape[0]
    n_cols = 4 * n + 1
    lo_w = rho_lo * vol_day * dt
    hi_w = rho_hi * vol_day * dt
    for p in range(alive.shape[0]):
        if not alive[p]:
            continue
        if s > 0.0:
            zf = (S[p] - s0) / s + 2.0 * n
        else:
            zf = 2.0 * n
        if n_cols == 1:
            lo = 0
            hi = 0
            w = 0.0
        else:
            lo = int(np.floor(zf))
            if lo < 0:
                lo = 0
            if lo > n_cols - 2:
                lo = n_cols - 2
            hi = lo + 1
            w = zf - lo
            if w < 0.0:
                w = 0.0
            if w > 1.0:
                w = 1.0
        qrow = int(np.rint(q[p] / (q_grid[1] - q_grid[0])))
        if qrow < 0:
            qrow = 0
        if qrow > n_q - 1:
            qrow = n_q - 1
        if exercisable == 1:
            c_lo, _ = cont_single_base(theta_next, m2_next, n, s0, s, q_grid, a_grid,
                                       gamma, probs, eps_vals, offs, costs, lo, qrow, A[p])
            if w > 0.0:
                c_hi, _ = cont_single_base(theta_next, m2_next, n, s0, s, q_grid, a_grid,
                                           gamma, probs, eps_vals, offs, costs, hi, qrow, A[p])
            else:
                c_hi = 0.0
            cont = (1.0 - w) * c_lo + w * c_hi
            a_eff = (1.0 - beta) * A[p]
            resid = F / a_eff - q_grid[qrow]
            ar = abs(resid)
            intr = F * (S[p] / a_eff - 1.0) + lin * ar + cub * ar * ar * ar
            if intr <= cont:
                alive[p] = False
                n_star[p] = n
                continue
        od = 0.0
        for ci in range(2):
            if ci == 0:
                col = lo
                wt = 1.0 - w
            else:
                col = hi
                wt = w
            if wt == 0.0:
                continue
            if A[p] <= a_grid[0]:
                dlt = q_grid[tgt_day[col, qrow, 0]] - q_grid[qrow]
            elif A[p] >= a_grid[n_a - 1]:
                dlt = q_grid[tgt_day[col, qrow, n_a - 1]] - q_grid[qrow]
            else:
                ha = a_grid[1] - a_grid[0]
                ka = int((A[p] - a_grid[0]) / ha)
                if ka > n_a - 2:
                    ka = n_a - 2
                t_ = (A[p] - a_grid[ka]) / (a_grid[ka + 1] - a_grid[ka])
                d0 = q_grid[tgt_day[col, qrow, ka]] - q_grid[qrow]
                d1 = q_grid[tgt_day[col, qrow, ka + 1]] - q_grid[qrow]
                dlt = (1.0 - t_) * d0 + t_ * d1
            od += wt * dlt
        if od < lo_w:
            od = lo_w
        if od > hi_w:
            od = hi_w
        s_new = prices_next[p]
        v = od / dt
        rho = v / vol_day
        arho = abs(rho)
        X[p] += v * s_new * dt + (eta * arho ** (1.0 + phi) + psi * arho) * vol_day * dt
        q[p] += od
        A[p] = (n * A[p] + s_new) / (n + 1.0)
        S[p] = s_new


@njit(cache=True)
def cont_single_base(theta_next, m2_next, n, s0, s, q_grid, a_grid, gamma,
                     probs, eps_vals, offs, costs, z, qi, A):
    """Continuation value and target index at one (day, node, q, A) state."""
    n_q = q_grid.shape[0]
    n_a = a_grid.shape[0]
    a0 = a_grid[0]
    a_last = a_grid[n_a - 1]
    h = a_grid[1] - a_grid[0]
    inv6 = 1.0 / 6.0
    S = s0 + s * (z - 2.0 * n)
    q = q_grid[qi]
    ev = np.empty(5)
    best = BIG
    bj = qi
    for t in range(offs.shape[0]):
        j = qi + offs[t]
        if j < 0 or j >= n_q:
            continue
        for e in range(5):
            child = z + e
            A1 = (n * A + S + s * eps_vals[e]) / (n + 1.0)
            if A1 < a0:
                slope = ((theta_next[child, j, 1] - theta_next[child, j, 0]) / h
                         - h * (2.0 * m2_next[child, j, 0] + m2_next[child, j, 1]) * inv6)
                val = theta_next[child, j, 0] + slope * (A1 - a0)
            elif A1 > a_last:
                slope = ((theta_next[child, j, n_a - 1] - theta_next[child, j, n_a - 2]) / h
                         + h * (2.0 * m2_next[child, j, n_a - 1]
                                + m2_next[child, j, n_a - 2]) * inv6)
                val = theta_next[child, j, n_a - 1] + slope * (A1 - a_last)
            else:
                k = int((A1 - a0) / h)
                if k > n_a - 2:
                    k = n_a - 2
                aw = (a_grid[k + 1] - A1) / h
                bw = (A1 - a_grid[k]) / h
                val = (aw * theta_next[child, j, k] + bw * theta_next[child, j, k + 1]
                       + ((aw ** 3 - aw) * m2_next[child, j, k]
                          + (bw ** 3 - bw) * m2_next[child, j, k + 1]) * h * h * inv6)
            ev[e] = val
        if gamma > 0.0:
            mx = -BIG
            for e in range(5):
                x = -gamma * (q * s * eps_vals[e] - ev[e])
                ev[e] = x
                if x > mx:
                    mx = x
            acc = 0.0
            for e in range(5):
                acc += probs[e] * np.exp(ev[e] - mx)
            val = costs[t] + (mx + np.log(acc)) / gamma
        else:
            acc = 0.0
            for e in range(5):
                acc += probs[e] * ev[e]
            val = costs[t] + acc
        if val < best:
            best = val
            bj = j
    return best, bj
