"""Chordal Loewner flow ``dg/dt = 2 / (g - W_t)`` driven by a sampled path.

Between grid times the driver is linear. Points are integrated with RK4 on
substeps small enough that a step changes ``g`` by at most a tenth of
``|g - W|``; a point is swallowed once ``|g - W|`` drops below the swallow
tolerance (``sqrt(4 dt)`` by default).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from . import _kernels_np as KN
from ._accel import HAVE_NUMBA

STEP_CAP = 0.1

LEFT_FIRST = "left-first"
RIGHT_FIRST = "right-first"
NEITHER = "neither"


@dataclass(frozen=True, eq=False)
class FlowResult:
    point: complex
    times: np.ndarray
    trajectory: np.ndarray
    swallow_time: float | None
    log_deriv: np.ndarray  # log g_t'(z) along the trajectory


@dataclass(frozen=True, eq=False)
class TraceSample:
    times: np.ndarray
    points: np.ndarray


def default_swallow_eps(dt: float) -> float:
    return math.sqrt(4.0 * dt)


def _grid_with(tg, Wg, times):
    """Path grid up to ``max(times)`` with ``times`` inserted (driver
    interpolated linearly, so the driver itself is unchanged)."""
    times = np.asarray(times, dtype=float)
    tmax = times.max()
    if tmax > tg[-1] * (1 + 1e-12) + 1e-15:
        raise ValueError("requested time beyond the end of the path")
    base = tg[tg <= tmax]
    grid = np.union1d(base, times)
    return grid, np.interp(grid, tg, Wg)


def flow_many(tg, Wg, z0, times, eps: float = 0.0, cap: float = STEP_CAP):
    """Flow the points ``z0`` and report ``g`` and ``log g'`` at ``times``.

    Returns ``(G, LG, T)`` with shapes ``(len(times), len(z0))`` and swallow
    times (nan when not swallowed before ``max(times)``).
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=complex))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    grid, Wgrid = _grid_with(np.asarray(tg, float), np.asarray(Wg, float), times)
    G, LG, T = K.flow_record(grid, Wgrid, z0, float(eps), float(cap))
    idx = np.searchsorted(grid, times)
    return G[idx], LG[idx], T


def flow_point(path, z: complex, eps: float | None = None, cap: float = STEP_CAP) -> FlowResult:
    """Trajectory of ``g_t(z)`` on the path grid, stopped at the swallow time."""
    z = complex(z)
    if z.imag < 0:
        raise ValueError("z must lie in the closed upper half-plane")
    eps = default_swallow_eps(path.dt) if eps is None else eps
    G, LG, T = K.flow_record(path.t, path.W, np.array([z]), float(eps), float(cap))
    g = G[:, 0]
    ok = ~np.isnan(g)
    T0 = None if math.isnan(T[0]) else float(T[0])
    return FlowResult(z, path.t[ok], g[ok], T0, LG[ok, 0])


def swallow_times(path, x, eps: float | None = None, cap: float = STEP_CAP) -> np.ndarray:
    """Swallow times of real points (nan when not swallowed on the path)."""
    eps = default_swallow_eps(path.dt) if eps is None else eps
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return K.real_flow_record(path.t, path.W, x, float(eps), float(cap))


def swallow_order(path, x: float, y: float, eps: float | None = None) -> str:
    """Which of ``-y`` (left) and ``x`` (right) is swallowed first."""
    if not (x > 0 and y > 0):
        raise ValueError("x and y must be positive")
    tl, tr = swallow_times(path, [-y, x], eps)
    if math.isnan(tl) and math.isnan(tr):
        return NEITHER
    if math.isnan(tr) or (not math.isnan(tl) and tl < tr):
        return LEFT_FIRST
    return RIGHT_FIRST


def compute_trace(path, sample_stride: int = 1) -> TraceSample:
    """Tip positions from composed inverse slit maps (driver piecewise constant)."""
    if path.m == 0:
        raise ValueError("empty path")
    stride = max(1, int(sample_stride))
    idx = np.arange(0, path.m, stride)
    if idx[-1] != path.m - 1:
        idx = np.append(idx, path.m - 1)
    W = np.ascontiguousarray(path.W, dtype=float)
    dts = np.ascontiguousarray(np.diff(path.t), dtype=float)
    fn = K.trace_points if HAVE_NUMBA else KN.trace_points
    pts = fn(W, dts, idx.astype(np.int64))
    bad = ~np.isfinite(pts)
    if np.any(bad):
        raise FloatingPointError(f"branch failure at step {int(idx[np.argmax(bad)])}")
    return TraceSample(path.t[idx], pts)


def polyline_self_intersects(points: np.ndarray) -> bool:
    """True if two non-adjacent segments of the polyline cross."""
    p = np.asarray(points, dtype=complex)
    a = p[:-1]
    b = p[1:]
    n = a.shape[0]
    if n < 3:
        return False

    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    for i in range(n - 2):
        ai, bi = a[i], b[i]
        aj, bj = a[i + 2:], b[i + 2:]
        d1 = cross(bi - ai, aj - ai)
        d2 = cross(bi - ai, bj - ai)
        d3 = cross(bj - aj, ai - aj)
        d4 = cross(bj - aj, bi - aj)
        hit = (d1 * d2 < 0) & (d3 * d4 < 0)
        if np.any(hit):
            return True
    return False
