"""Vectorized numpy versions of the ensemble kernels.

Used when numba is disabled. Paths are processed in lockstep; the rare steps
that need substep refinement are handed to the scalar kernel path by path.
Results agree with the compiled kernels to rounding.
"""
import numpy as np

from . import _kernels as K


def gap_integrals(W, Z, beta, xg, wg):
    """Batched ``_kernels.gap_integrals``: W has shape (N,), Z shape (N, n)."""
    W = np.asarray(W, dtype=float)
    N, n = Z.shape
    pos = Z > 0.0
    right = np.where(pos, Z, np.inf).min(axis=1)
    left = np.where(Z < 0.0, Z, -np.inf).max(axis=1)
    s = np.where(pos, beta, 0.0).sum(axis=1)
    phase = np.cos(np.pi * s) - 1j * np.sin(np.pi * s)
    bz = beta * 2.0 / (Z - W[:, None])

    sgn = np.where(W >= 0.0, 1.0, -1.0)
    ahead = np.where(W >= 0.0, right, -left)
    behind = np.where(W >= 0.0, -left, right)
    end = np.abs(W)
    a = np.zeros(N)
    s_int = np.zeros(N)
    r_int = np.zeros(N)
    active = a < end
    while active.any():
        idx = np.nonzero(active)[0]
        aa = a[idx]
        b = np.minimum(np.minimum(end[idx], (aa + 2.0 * ahead[idx]) / 3.0),
                       3.0 * aa + 2.0 * behind[idx])
        half = 0.5 * (b - aa)
        mid = 0.5 * (b + aa)
        x = sgn[idx, None] * (mid[:, None] + half[:, None] * xg[None, :])
        d = x[:, :, None] - Z[idx, None, :]
        m = np.exp(-(beta * np.log(np.abs(d))).sum(axis=2))
        rs = (bz[idx, None, :] / d).sum(axis=2)
        s_int[idx] += (wg * half[:, None] * m).sum(axis=1)
        r_int[idx] += (wg * half[:, None] * m * rs).sum(axis=1)
        a[idx] = b
        active = a < end
    s_int *= sgn
    r_int *= sgn
    mod = np.exp(-(beta * np.log(np.abs(W[:, None] - Z))).sum(axis=1))
    return s_int * phase, r_int * phase, mod * phase


def drive_endpoint_batch(z0, beta, rho, kappa, dt, dB, eps, maxdepth, xg, wg):
    N, nsteps = dB.shape
    n = z0.shape[0]
    sqrtk = np.sqrt(kappa)
    Z = np.tile(z0, (N, 1))
    B = np.zeros(N)
    X = np.zeros(N)
    W = np.zeros(N)
    sc, rate, dsc = gap_integrals(W, Z, beta, xg, wg)
    D = np.zeros(N, dtype=complex)
    A = np.zeros(N)
    U = sc - D
    steps = np.full(N, nsteps, dtype=np.int64)
    status = np.zeros(N, dtype=np.int64)
    live = np.ones(N, dtype=bool)
    for i in range(nsteps):
        dmin = np.abs(W[:, None] - Z).min(axis=1)
        hit = live & (dmin < eps)
        if hit.any():
            status[hit] = 1
            steps[hit] = i
            live &= ~hit
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        Wl = W[idx]
        Zl = Z[idx]
        d = Wl[:, None] - Zl
        drift = (rho / d).sum(axis=1)
        move = sqrtk * dB[idx, i] + drift * dt
        fine = np.abs(move) > 0.5 * np.abs(d).min(axis=1)
        side0 = Zl > Wl[:, None]
        Zn = Zl + 2.0 / (Zl - Wl[:, None]) * dt
        Xn = X[idx] + drift * dt
        Bn = B[idx] + dB[idx, i]
        for q in np.nonzero(fine)[0]:
            p = idx[q]
            zc = Z[p].copy()
            b1, x1, _ = K.driver_step(B[p], X[p], zc, rho, sqrtk, dt, dB[p, i], maxdepth)
            Zn[q] = zc
            Xn[q] = x1
            Bn[q] = b1
        Wn = sqrtk * Bn + Xn
        crossed = ((Zn > Wn[:, None]) != side0).any(axis=1) | (Zn == Wn[:, None]).any(axis=1)
        if crossed.any():
            pc = idx[crossed]
            status[pc] = 2
            steps[pc] = i
            live[pc] = False
            keep = ~crossed
            idx = idx[keep]
            Zn, Xn, Bn, Wn = Zn[keep], Xn[keep], Bn[keep], Wn[keep]
        Z[idx] = Zn
        X[idx] = Xn
        B[idx] = Bn
        W[idx] = Wn
        sc1, rate1, dsc1 = gap_integrals(Wn, Zn, beta, xg, wg)
        D[idx] += 0.5 * dt * (rate[idx] + rate1)
        A[idx] += 0.5 * kappa * dt * (np.abs(dsc[idx]) ** 2 + np.abs(dsc1) ** 2)
        rate[idx] = rate1
        dsc[idx] = dsc1
        U[idx] = sc1 - D[idx]
    dmin = np.abs(W[:, None] - Z).min(axis=1)
    status[live & (dmin < eps)] = 1
    return W, Z, D, A, U, steps, status


def metric_at_clock_batch(z0, beta, kappa, ds, dB, sign, eps, t_star, maxdepth, xg, wg):
    N, nsteps = dB.shape
    Z = np.tile(z0, (N, 1))
    W = np.zeros(N)
    Wt = np.full(N, np.nan)
    status = np.full(N, 3, dtype=np.int64)
    phi = np.exp(-(beta * np.log(np.abs(W[:, None] - Z))).sum(axis=1))
    c0 = 1.0 / (kappa * phi * phi)
    clock = np.zeros(N)
    live = np.ones(N, dtype=bool)
    for i in range(nsteps):
        dmin = np.abs(W[:, None] - Z).min(axis=1)
        hit = live & (dmin < eps)
        status[hit] = 1
        live &= ~hit
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        Wl = W[idx]
        Zl = Z[idx]
        d = Wl[:, None] - Zl
        ph = np.exp(-(beta * np.log(np.abs(d))).sum(axis=1))
        inv2 = 1.0 / (ph * ph)
        drift = (beta / d).sum(axis=1)
        move = dB[idx, i] / ph + sign * 0.5 * inv2 * drift * ds
        fine = np.abs(move) > 0.5 * np.abs(d).min(axis=1)
        side0 = Zl > Wl[:, None]
        Zn = Zl + 2.0 * inv2[:, None] / (kappa * (Zl - Wl[:, None])) * ds
        Wn = Wl + move
        for q in np.nonzero(fine)[0]:
            p = idx[q]
            zc = Z[p].copy()
            w1, _ = K.metric_step(W[p], zc, beta, kappa, ds, dB[p, i], sign, maxdepth, xg, wg)
            Zn[q] = zc
            Wn[q] = w1
        crossed = ((Zn > Wn[:, None]) != side0).any(axis=1) | (Zn == Wn[:, None]).any(axis=1)
        if crossed.any():
            status[idx[crossed]] = 2
            live[idx[crossed]] = False
            keep = ~crossed
            idx, Zn, Wn, Wl = idx[keep], Zn[keep], Wn[keep], Wl[keep]
        ph1 = np.exp(-(beta * np.log(np.abs(Wn[:, None] - Zn))).sum(axis=1))
        c1 = 1.0 / (kappa * ph1 * ph1)
        clock1 = clock[idx] + 0.5 * ds * (c0[idx] + c1)
        done = clock1 >= t_star
        if done.any():
            pd = idx[done]
            lam = (t_star - clock[pd]) / (clock1[done] - clock[pd])
            Wt[pd] = Wl[done] + lam * (Wn[done] - Wl[done])
            status[pd] = 0
            live[pd] = False
        W[idx] = Wn
        Z[idx] = Zn
        clock[idx] = clock1
        c0[idx] = c1
    return Wt, status


def hitting_batch(states, normals, sqrtk, dt, rel_tol, t_max):
    """Vectorized ``_kernels.hitting_continue`` over rows of ``states``."""
    N, M = normals.shape
    code = np.full(N, K.NEED_MORE, dtype=np.int64)
    used = np.zeros(N, dtype=np.int64)
    W, gx, gy, t = (states[:, 0].copy(), states[:, 1].copy(),
                    states[:, 2].copy(), states[:, 3].copy())
    live = np.ones(N, dtype=bool)
    for i in range(M):
        d1 = gx - W
        d2 = W - gy
        span = gx - gy
        r = live & (d1 <= rel_tol * span)
        code[r] = K.RIGHT_FIRST
        live &= ~r
        lft = live & (d2 <= rel_tol * span)
        code[lft] = K.LEFT_FIRST
        live &= ~lft
        nt = live & (t >= t_max)
        code[nt] = K.NEITHER
        live &= ~nt
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        dmin = np.minimum(d1[idx], d2[idx])
        h = dt * dmin * dmin
        h = np.where(t[idx] + h > t_max, t_max - t[idx], h)
        Wi = W[idx]
        Wn = Wi + sqrtk * np.sqrt(h) * normals[idx, i]
        gx[idx] += 2.0 * h / (gx[idx] - Wi)
        gy[idx] += 2.0 * h / (gy[idx] - Wi)
        W[idx] = Wn
        t[idx] += h
        used[idx] += 1
        r = Wn >= gx[idx]
        code[idx[r]] = K.RIGHT_FIRST
        live[idx[r]] = False
        lft = ~r & (Wn <= gy[idx])
        code[idx[lft]] = K.LEFT_FIRST
        live[idx[lft]] = False
    states[:, 0], states[:, 1], states[:, 2], states[:, 3] = W, gx, gy, t
    return code, used


def trace_points(W, dt_steps, idx):
    """Vectorized ``_kernels.trace_points``: all requested tips advance together."""
    idx = np.asarray(idx)
    z = W[idx].astype(complex)
    if idx.size == 0:
        return z
    for j in range(int(idx.max()) - 1, -1, -1):
        sel = idx > j
        c = W[j + 1]
        u = z[sel] - c
        r = np.sqrt(u * u - 4.0 * dt_steps[j])
        flip = (r.imag < 0.0) | ((r.imag == 0.0) & (r.real * u.real < 0.0))
        r = np.where(flip, -r, r)
        z[sel] = c + r
    return z
