"""Scalar-loop kernels, compiled with numba when it is enabled.

Every function here is also valid plain Python over numpy arrays; with numba
disabled they run uncompiled (see ``_kernels_np`` for the vectorized ensemble
variants used in that case).
"""
import cmath
import math

import numpy as np

from ._accel import njit

LEFT_FIRST = 1
RIGHT_FIRST = 2
NEITHER = 0
NEED_MORE = -1


@njit
def nearest_sides(Z):
    """Closest prevertex left and right of 0 (-inf / inf when absent)."""
    left = -np.inf
    right = np.inf
    for k in range(Z.shape[0]):
        z = Z[k]
        if z > 0.0 and z < right:
            right = z
        elif z < 0.0 and z > left:
            left = z
    return left, right


@njit
def gap_phase(Z, beta):
    """Constant phase of SC' on the prevertex gap that contains 0."""
    s = 0.0
    for k in range(Z.shape[0]):
        if Z[k] > 0.0:
            s += beta[k]
    return complex(math.cos(math.pi * s), -math.sin(math.pi * s))


@njit
def gap_modulus(x, Z, beta):
    acc = 0.0
    for k in range(Z.shape[0]):
        acc -= beta[k] * math.log(abs(x - Z[k]))
    return math.exp(acc)


@njit
def gap_integrals(W, Z, beta, xg, wg):
    """Integrals along the real segment [0, W] inside the gap containing 0.

    Returns ``(SC(W), dSC/dt(W), SC'(W))`` where the time derivative is taken
    with the prevertices moving at the Loewner speed ``2 / (Z_k - W)``. The
    segment is cut so that no piece is longer than twice its distance to the
    nearest prevertex; each piece gets a Gauss-Legendre rule.
    """
    n = Z.shape[0]
    left, right = nearest_sides(Z)
    phase = gap_phase(Z, beta)
    bz = np.empty(n)
    for k in range(n):
        bz[k] = beta[k] * 2.0 / (Z[k] - W)
    s_int = 0.0
    r_int = 0.0
    q = xg.shape[0]
    if W != 0.0:
        sgn = 1.0 if W > 0.0 else -1.0
        # distances measured along the direction of travel
        ahead = right if W > 0.0 else -left
        behind = -left if W > 0.0 else right
        end = abs(W)
        a = 0.0
        while a < end:
            b = min(end, (a + 2.0 * ahead) / 3.0, 3.0 * a + 2.0 * behind)
            half = 0.5 * (b - a)
            mid = 0.5 * (b + a)
            for i in range(q):
                x = sgn * (mid + half * xg[i])
                acc = 0.0
                rs = 0.0
                for k in range(n):
                    d = x - Z[k]
                    acc -= beta[k] * math.log(abs(d))
                    rs += bz[k] / d
                m = math.exp(acc)
                s_int += wg[i] * half * m
                r_int += wg[i] * half * m * rs
            a = b
        s_int *= sgn
        r_int *= sgn
    return s_int * phase, r_int * phase, gap_modulus(W, Z, beta) * phase


@njit
def min_dist(W, Z):
    d = np.inf
    for k in range(Z.shape[0]):
        e = abs(W - Z[k])
        if e < d:
            d = e
    return d


@njit
def driver_step(B, X, Z, rho, sqrtk, dt, dB, maxdepth):
    """One nominal Euler-Maruyama step of the force-point SDE.

    The driver is carried as ``W = sqrtk * B + X`` with ``B`` the raw Brownian
    path and ``X`` the integrated drift. Substeps halve while a proposed move
    exceeds half the distance to the nearest force point; the Brownian
    increment is split into equal parts. ``Z`` is updated in place.
    Returns ``(B, X, ok)``; ``ok`` is False when a force point was crossed.
    """
    n = Z.shape[0]
    W0 = sqrtk * B + X
    sign0 = np.empty(n)
    for k in range(n):
        sign0[k] = 1.0 if Z[k] > W0 else -1.0
    frac = 1.0
    done = 0.0
    depth = 0
    Bs = B
    Xs = X
    while done < 1.0:
        h = frac * dt
        db = frac * dB
        W = sqrtk * Bs + Xs
        drift = 0.0
        dmin = np.inf
        for k in range(n):
            d = W - Z[k]
            drift += rho[k] / d
            if abs(d) < dmin:
                dmin = abs(d)
        move = sqrtk * db + drift * h
        if abs(move) > 0.5 * dmin and depth < maxdepth:
            frac *= 0.5
            depth += 1
            continue
        for k in range(n):
            Z[k] += 2.0 / (Z[k] - W) * h
        Xs += drift * h
        Bs += db
        done += frac
    B_new = B + dB
    W1 = sqrtk * B_new + Xs
    ok = True
    for k in range(n):
        s = 1.0 if Z[k] > W1 else -1.0
        if s != sign0[k] or Z[k] == W1:
            ok = False
    return B_new, Xs, ok


@njit
def drive_record(z0, beta, rho, kappa, dt, dB, eps, maxdepth, xg, wg,
                 out_W, out_Z, out_D, out_A, out_B):
    """Simulate one path, recording every nominal step.

    Returns ``(m, collided)``: ``m`` rows were written; when ``collided`` the
    collision time is the grid time of row ``m - 1`` (distance below ``eps``)
    or of the step that crossed a force point (row ``m``, not written).
    """
    sqrtk = math.sqrt(kappa)
    Z = z0.copy()
    B = 0.0
    X = 0.0
    W = 0.0
    sc, rate, dsc = gap_integrals(W, Z, beta, xg, wg)
    D = 0j
    A = 0.0
    nsteps = dB.shape[0]
    out_W[0] = W
    out_Z[0, :] = Z
    out_D[0] = D
    out_A[0] = A
    out_B[0] = B
    for i in range(nsteps):
        if min_dist(W, Z) < eps:
            return i + 1, 1
        B, X, ok = driver_step(B, X, Z, rho, sqrtk, dt, dB[i], maxdepth)
        if not ok:
            return i + 1, 2
        W = sqrtk * B + X
        sc1, rate1, dsc1 = gap_integrals(W, Z, beta, xg, wg)
        D += 0.5 * dt * (rate + rate1)
        A += 0.5 * kappa * dt * (abs(dsc) ** 2 + abs(dsc1) ** 2)
        rate = rate1
        dsc = dsc1
        out_W[i + 1] = W
        out_Z[i + 1, :] = Z
        out_D[i + 1] = D
        out_A[i + 1] = A
        out_B[i + 1] = B
    if min_dist(W, Z) < eps:
        return nsteps + 1, 1
    return nsteps + 1, 0


@njit
def drive_endpoint(z0, beta, rho, kappa, dt, dB, eps, maxdepth, xg, wg):
    """Like ``drive_record`` but only keeps the final state.

    Returns ``(W, Z, D, A, U, steps_done, status)`` where ``U = SC_t(W) - D``
    and status is 0 (reached the end), 1 (distance below eps) or 2 (crossing).
    """
    sqrtk = math.sqrt(kappa)
    Z = z0.copy()
    B = 0.0
    X = 0.0
    W = 0.0
    sc, rate, dsc = gap_integrals(W, Z, beta, xg, wg)
    D = 0j
    A = 0.0
    nsteps = dB.shape[0]
    for i in range(nsteps):
        if min_dist(W, Z) < eps:
            return W, Z, D, A, sc - D, i, 1
        Zprev = Z.copy()
        B1, X1, ok = driver_step(B, X, Z, rho, sqrtk, dt, dB[i], maxdepth)
        if not ok:
            return W, Zprev, D, A, sc - D, i, 2
        B = B1
        X = X1
        W = sqrtk * B + X
        sc, rate1, dsc1 = gap_integrals(W, Z, beta, xg, wg)
        D += 0.5 * dt * (rate + rate1)
        A += 0.5 * kappa * dt * (abs(dsc) ** 2 + abs(dsc1) ** 2)
        rate = rate1
        dsc = dsc1
    if min_dist(W, Z) < eps:
        return W, Z, D, A, sc - D, nsteps, 1
    return W, Z, D, A, sc - D, nsteps, 0


@njit
def drive_endpoint_batch(z0, beta, rho, kappa, dt, dB, eps, maxdepth, xg, wg):
    N = dB.shape[0]
    n = z0.shape[0]
    Wf = np.empty(N)
    Zf = np.empty((N, n))
    Df = np.empty(N, dtype=np.complex128)
    Af = np.empty(N)
    Uf = np.empty(N, dtype=np.complex128)
    steps = np.empty(N, dtype=np.int64)
    status = np.empty(N, dtype=np.int64)
    for p in range(N):
        W, Z, D, A, U, s, st = drive_endpoint(z0, beta, rho, kappa, dt, dB[p], eps,
                                              maxdepth, xg, wg)
        Wf[p] = W
        Zf[p, :] = Z
        Df[p] = D
        Af[p] = A
        Uf[p] = U
        steps[p] = s
        status[p] = st
    return Wf, Zf, Df, Af, Uf, steps, status


@njit
def metric_step(W, Z, beta, kappa, ds, dB, sign, maxdepth, xg, wg):
    """One step of the boundary Brownian motion in the pull-back metric.

    Returns ``(W, ok)``; ``Z`` is updated in place. The metric factor
    ``|SC'_t(W)|`` is re-evaluated at each substep.
    """
    n = Z.shape[0]
    sign0 = np.empty(n)
    for k in range(n):
        sign0[k] = 1.0 if Z[k] > W else -1.0
    frac = 1.0
    done = 0.0
    depth = 0
    Wn = W
    while done < 1.0:
        h = frac * ds
        db = frac * dB
        phi = gap_modulus(Wn, Z, beta)
        inv2 = 1.0 / (phi * phi)
        drift = 0.0
        dmin = np.inf
        for k in range(n):
            d = Wn - Z[k]
            drift += beta[k] / d
            if abs(d) < dmin:
                dmin = abs(d)
        move = db / phi + sign * 0.5 * inv2 * drift * h
        if abs(move) > 0.5 * dmin and depth < maxdepth:
            frac *= 0.5
            depth += 1
            continue
        for k in range(n):
            Z[k] += 2.0 * inv2 / (kappa * (Z[k] - Wn)) * h
        Wn += move
        done += frac
    ok = True
    for k in range(n):
        s = 1.0 if Z[k] > Wn else -1.0
        if s != sign0[k] or Z[k] == Wn:
            ok = False
    return Wn, ok


@njit
def metric_record(z0, beta, kappa, ds, dB, sign, eps, t_stop, maxdepth, xg, wg,
                  out_W, out_Z, out_D, out_A, out_clock):
    """Simulate the metric system in metric time, recording every step.

    ``out_A`` receives the metric time itself (the accumulated clock) and
    ``out_clock`` the SLE time ``int ds / (kappa |SC'|^2)``. Stops early once
    the SLE clock reaches ``t_stop``. Returns ``(m, status)``.
    """
    Z = z0.copy()
    W = 0.0
    sc, rate, dsc = gap_integrals(W, Z, beta, xg, wg)
    c0 = 1.0 / (kappa * abs(dsc) ** 2)
    D = 0j
    clock = 0.0
    nsteps = dB.shape[0]
    out_W[0] = W
    out_Z[0, :] = Z
    out_D[0] = D
    out_A[0] = 0.0
    out_clock[0] = 0.0
    for i in range(nsteps):
        if min_dist(W, Z) < eps:
            return i + 1, 1
        if clock >= t_stop:
            return i + 1, 0
        W1, ok = metric_step(W, Z, beta, kappa, ds, dB[i], sign, maxdepth, xg, wg)
        if not ok:
            return i + 1, 2
        W = W1
        sc, rate1, dsc1 = gap_integrals(W, Z, beta, xg, wg)
        c1 = 1.0 / (kappa * abs(dsc1) ** 2)
        clock += 0.5 * ds * (c0 + c1)
        D += 0.5 * ds * (rate * c0 + rate1 * c1)
        rate = rate1
        c0 = c1
        out_W[i + 1] = W
        out_Z[i + 1, :] = Z
        out_D[i + 1] = D
        out_A[i + 1] = (i + 1) * ds
        out_clock[i + 1] = clock
    if min_dist(W, Z) < eps:
        return nsteps + 1, 1
    return nsteps + 1, 0


@njit
def metric_at_clock_batch(z0, beta, kappa, ds, dB, sign, eps, t_star, maxdepth, xg, wg):
    """Driver value at SLE time ``t_star`` for a batch of metric paths.

    Linear interpolation in the SLE clock between the bracketing steps.
    Status 0 = reached t_star, 1/2 = collision first, 3 = ran out of steps.
    """
    N = dB.shape[0]
    nsteps = dB.shape[1]
    n = z0.shape[0]
    Wt = np.full(N, np.nan)
    status = np.empty(N, dtype=np.int64)
    for p in range(N):
        Z = z0.copy()
        W = 0.0
        phi = gap_modulus(W, Z, beta)
        c0 = 1.0 / (kappa * phi * phi)
        clock = 0.0
        st = 3
        for i in range(nsteps):
            if min_dist(W, Z) < eps:
                st = 1
                break
            W1, ok = metric_step(W, Z, beta, kappa, ds, dB[p, i], sign, maxdepth, xg, wg)
            if not ok:
                st = 2
                break
            phi = gap_modulus(W1, Z, beta)
            c1 = 1.0 / (kappa * phi * phi)
            clock1 = clock + 0.5 * ds * (c0 + c1)
            if clock1 >= t_star:
                lam = (t_star - clock) / (clock1 - clock)
                Wt[p] = W + lam * (W1 - W)
                st = 0
                break
            W = W1
            clock = clock1
            c0 = c1
        status[p] = st
    return Wt, status


@njit
def flow_record(tg, Wg, z0, eps, cap):
    """Loewner flow of several points along a piecewise-linear driver.

    Integrates ``dg/dt = 2/(g - W)`` and ``d log g'/dt = -2/(g - W)^2`` with
    classical RK4, substeps capped so that ``|dg| <= cap |g - W|`` and the
    driver moves at most a quarter of the distance to the nearest live point.
    Returns ``(G, LG, T)``: values at every grid time (nan after swallowing)
    and swallow times (nan if never swallowed).
    """
    m = tg.shape[0]
    p = z0.shape[0]
    G = np.full((m, p), complex(np.nan, np.nan))
    LG = np.full((m, p), complex(np.nan, np.nan))
    T = np.full(p, np.nan)
    g = z0.copy()
    lg = np.zeros(p, dtype=np.complex128)
    alive = np.ones(p, dtype=np.bool_)
    w0 = Wg[0]
    for j in range(p):
        if abs(g[j] - w0) < eps:
            alive[j] = False
            T[j] = tg[0]
        else:
            G[0, j] = g[j]
            LG[0, j] = 0j
    k1 = np.empty(p, dtype=np.complex128)
    k2 = np.empty(p, dtype=np.complex128)
    k3 = np.empty(p, dtype=np.complex128)
    k4 = np.empty(p, dtype=np.complex128)
    l1 = np.empty(p, dtype=np.complex128)
    l2 = np.empty(p, dtype=np.complex128)
    l3 = np.empty(p, dtype=np.complex128)
    l4 = np.empty(p, dtype=np.complex128)
    nalive = 0
    for j in range(p):
        if alive[j]:
            nalive += 1
    for k in range(m - 1):
        if nalive == 0:
            break
        ta = tg[k]
        tb = tg[k + 1]
        wa = Wg[k]
        slope = (Wg[k + 1] - wa) / (tb - ta)
        t = ta
        while t < tb and nalive > 0:
            w = wa + slope * (t - ta)
            dmin = np.inf
            for j in range(p):
                if alive[j]:
                    d = abs(g[j] - w)
                    if d < dmin:
                        dmin = d
            h = 0.5 * cap * dmin * dmin
            if slope != 0.0:
                h = min(h, 0.25 * dmin / abs(slope))
            last = False
            if h >= tb - t:
                h = tb - t
                last = True
            wm = w + slope * 0.5 * h
            we = w + slope * h
            for j in range(p):
                if not alive[j]:
                    continue
                gj = g[j]
                a = gj - w
                k1[j] = 2.0 / a
                l1[j] = -2.0 / (a * a)
                a = gj + 0.5 * h * k1[j] - wm
                k2[j] = 2.0 / a
                l2[j] = -2.0 / (a * a)
                a = gj + 0.5 * h * k2[j] - wm
                k3[j] = 2.0 / a
                l3[j] = -2.0 / (a * a)
                a = gj + h * k3[j] - we
                k4[j] = 2.0 / a
                l4[j] = -2.0 / (a * a)
                gn = gj + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                g[j] = gn
                lg[j] += h / 6.0 * (l1[j] + 2.0 * l2[j] + 2.0 * l3[j] + l4[j])
            t = tb if last else t + h
            for j in range(p):
                if alive[j]:
                    if g[j].imag < 0.0:
                        g[j] = complex(g[j].real, 0.0)
                    real_cross = g[j].imag == 0.0 and (g[j].real - we) * (z0[j].real - wa) < 0.0
                    if abs(g[j] - we) < eps or real_cross:
                        alive[j] = False
                        T[j] = t
                        nalive -= 1
        for j in range(p):
            if alive[j]:
                G[k + 1, j] = g[j]
                LG[k + 1, j] = lg[j]
    return G, LG, T


@njit
def real_flow_record(tg, Wg, x0, eps, cap):
    """Real-axis specialisation of ``flow_record`` (no log-derivative)."""
    m = tg.shape[0]
    p = x0.shape[0]
    T = np.full(p, np.nan)
    x = x0.copy()
    side = np.empty(p)
    alive = np.ones(p, dtype=np.bool_)
    nalive = p
    for j in range(p):
        side[j] = 1.0 if x[j] > Wg[0] else -1.0
        if abs(x[j] - Wg[0]) < eps:
            alive[j] = False
            T[j] = tg[0]
            nalive -= 1
    for k in range(m - 1):
        if nalive == 0:
            break
        ta = tg[k]
        tb = tg[k + 1]
        wa = Wg[k]
        slope = (Wg[k + 1] - wa) / (tb - ta)
        t = ta
        while t < tb and nalive > 0:
            w = wa + slope * (t - ta)
            dmin = np.inf
            for j in range(p):
                if alive[j]:
                    d = abs(x[j] - w)
                    if d < dmin:
                        dmin = d
            h = 0.5 * cap * dmin * dmin
            if slope != 0.0:
                h = min(h, 0.25 * dmin / abs(slope))
            last = False
            if h >= tb - t:
                h = tb - t
                last = True
            wm = w + slope * 0.5 * h
            we = w + slope * h
            for j in range(p):
                if not alive[j]:
                    continue
                xj = x[j]
                a1 = 2.0 / (xj - w)
                a2 = 2.0 / (xj + 0.5 * h * a1 - wm)
                a3 = 2.0 / (xj + 0.5 * h * a2 - wm)
                a4 = 2.0 / (xj + h * a3 - we)
                x[j] = xj + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            t = tb if last else t + h
            for j in range(p):
                if alive[j]:
                    d = x[j] - we
                    if abs(d) < eps or d * side[j] <= 0.0:
                        alive[j] = False
                        T[j] = t
                        nalive -= 1
    return T


@njit
def hitting_continue(state, normals, sqrtk, dt, rel_tol, t_max):
    """Advance one plain-SLE path tracking the images of ``x`` and ``-y``.

    ``state = [W, gx, gy, t]`` is updated in place. The step is ``dt`` times
    the squared distance from the driver to the nearer tracked point; a point
    counts as swallowed once that distance drops below ``rel_tol`` times the
    current span ``gx - gy``. Returns ``(code, used)``.
    """
    W = state[0]
    gx = state[1]
    gy = state[2]
    t = state[3]
    used = 0
    code = NEED_MORE
    for i in range(normals.shape[0]):
        d1 = gx - W
        d2 = W - gy
        span = gx - gy
        if d1 <= rel_tol * span:
            code = RIGHT_FIRST
            break
        if d2 <= rel_tol * span:
            code = LEFT_FIRST
            break
        if t >= t_max:
            code = NEITHER
            break
        dmin = min(d1, d2)
        h = dt * dmin * dmin
        if t + h > t_max:
            h = t_max - t
        Wn = W + sqrtk * math.sqrt(h) * normals[i]
        gx += 2.0 * h / (gx - W)
        gy += 2.0 * h / (gy - W)
        W = Wn
        t += h
        used += 1
        if W >= gx:
            code = RIGHT_FIRST
            break
        if W <= gy:
            code = LEFT_FIRST
            break
    state[0] = W
    state[1] = gx
    state[2] = gy
    state[3] = t
    return code, used


@njit
def trace_points(W, dt_steps, idx):
    """Tip positions by composing inverse vertical-slit maps.

    On step ``j`` the driver is held at ``W[j + 1]``; the tip at grid index
    ``i`` is ``h_0^{-1} o ... o h_{i-1}^{-1}(W[i])``.
    """
    out = np.empty(idx.shape[0], dtype=np.complex128)
    for q in range(idx.shape[0]):
        i = idx[q]
        z = complex(W[i], 0.0)
        for j in range(i - 1, -1, -1):
            c = W[j + 1]
            u = z - c
            r = cmath.sqrt(u * u - 4.0 * dt_steps[j])
            if r.imag < 0.0 or (r.imag == 0.0 and r.real * u.real < 0.0):
                r = -r
            z = c + r
        out[q] = z
    return out


@njit
def hitting_batch(states, normals, sqrtk, dt, rel_tol, t_max):
    N = states.shape[0]
    code = np.empty(N, dtype=np.int64)
    used = np.empty(N, dtype=np.int64)
    for p in range(N):
        c, u = hitting_continue(states[p], normals[p], sqrtk, dt, rel_tol, t_max)
        code[p] = c
        used[p] = u
    return code, used
