"""Time-dependent Schwarz-Christoffel maps.

``SC(z) = int_0^z prod_k (w - z_k)^(-beta_k) dw`` with every factor on the
branch ``arg(w - z_k) in [0, pi]`` of the closed upper half-plane. Integrals
run along polylines through the half-plane; pieces are cut so none is longer
than twice its distance to a prevertex that is not one of its endpoints, and
an endpoint sitting on a prevertex is absorbed into a Gauss-Jacobi weight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from . import _kernels as K
from .geometry import AT_INFINITY, Corner, PolygonSnapshot, exterior_angle_sum, infinity_angle


class QuadratureError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    x, w = leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@lru_cache(maxsize=None)
def gauss_jacobi(order: int, alpha: float, beta: float):
    """Nodes and weights for the weight ``(1 - x)^alpha (1 + x)^beta`` on [-1, 1]."""
    x, w = roots_jacobi(order, alpha, beta)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _arg_upper(w):
    # -0.0 + 0.0 == +0.0, so points on the real axis left of a prevertex get arg = pi
    w = np.asarray(w, dtype=complex)
    return np.arctan2(w.imag + 0.0, w.real)


def _seg_dist(p: complex, q: complex, c: complex) -> float:
    d = q - p
    L2 = d.real * d.real + d.imag * d.imag
    if L2 == 0.0:
        return abs(c - p)
    s = ((c - p) * d.conjugate()).real / L2
    s = min(1.0, max(0.0, s))
    return abs(p + s * d - c)


@dataclass(frozen=True)
class ScEvaluator:
    """Schwarz-Christoffel integrand and its integrals for one time slice."""

    prevertices: tuple[float, ...]
    betas: tuple[float, ...]
    basepoint: float = 0.0
    order: int = 12
    max_segments: int = 4096
    _z: np.ndarray = field(init=False, repr=False, compare=False)
    _b: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        z = np.array(self.prevertices, dtype=float)
        b = np.array(self.betas, dtype=float)
        if z.shape != b.shape:
            raise ValueError("prevertices and betas differ in length")
        z.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "prevertices", tuple(z.tolist()))
        object.__setattr__(self, "betas", tuple(b.tolist()))
        object.__setattr__(self, "_z", z)
        object.__setattr__(self, "_b", b)

    @classmethod
    def from_config(cls, cfg, **kw) -> "ScEvaluator":
        return cls(cfg.prevertices, cfg.betas, **kw)

    def moved(self, Z) -> "ScEvaluator":
        """Same weights, prevertices moved to ``Z``."""
        return ScEvaluator(tuple(np.asarray(Z, dtype=float)), self.betas, self.basepoint,
                           self.order, self.max_segments)

    # -- integrand -------------------------------------------------------

    def _log_factors(self, z):
        d = np.asarray(z, dtype=complex)[..., None] - self._z
        return np.log(np.abs(d)) + 1j * _arg_upper(d)

    def _check_off_prevertices(self, z):
        z = np.asarray(z, dtype=complex)
        hit = (z.imag[..., None] == 0.0) & (z.real[..., None] == self._z)
        if np.any(hit):
            raise ValueError("point coincides with a prevertex")

    def deriv(self, z):
        """SC'(z) as the product of branch powers."""
        self._check_off_prevertices(z)
        return np.exp(-(self._log_factors(z) * self._b).sum(axis=-1))

    def log_deriv_sum(self, z):
        """SC''(z) / SC'(z) = -sum_k beta_k / (z - z_k)."""
        self._check_off_prevertices(z)
        d = np.asarray(z, dtype=complex)[..., None] - self._z
        return -(self._b / d).sum(axis=-1)

    def _deriv_except(self, z, k):
        lf = self._log_factors(z)
        b = self._b.copy()
        if k is not None:
            b[k] = 0.0
        return np.exp(-(lf * b).sum(axis=-1))

    # -- quadrature ------------------------------------------------------

    def _prevertex_at(self, w: complex):
        if w.imag != 0.0:
            return None
        hits = np.nonzero(self._z == w.real)[0]
        return int(hits[0]) if hits.size else None

    def _pieces(self, a: complex, b: complex):
        ends = {self._prevertex_at(a), self._prevertex_at(b)} - {None}
        others = [complex(z) for k, z in enumerate(self._z) if k not in ends]
        out = []
        stack = [(a, b)]
        while stack:
            p, q = stack.pop()
            L = abs(q - p)
            d = min((_seg_dist(p, q, c) for c in others), default=math.inf)
            if d == 0.0:
                raise QuadratureError(f"integration path {a} -> {b} passes through a prevertex")
            if L > 2.0 * d:
                m = 0.5 * (p + q)
                stack.append((m, q))
                stack.append((p, m))
            else:
                out.append((p, q))
            if len(out) + len(stack) > self.max_segments:
                raise QuadratureError("subdivision limit exceeded")
        return out

    def _piece(self, p: complex, q: complex) -> complex:
        half = 0.5 * (q - p)
        mid = 0.5 * (q + p)
        kq = self._prevertex_at(q)
        kp = self._prevertex_at(p)
        for k in (kq, kp):
            if k is not None and self._b[k] >= 1.0:
                raise QuadratureError(
                    f"prevertex {self._z[k]:g} has beta={self._b[k]:g} >= 1: "
                    "its corner is at infinity"
                )
        aq = -self._b[kq] if kq is not None else 0.0
        ap = -self._b[kp] if kp is not None else 0.0
        if aq == 0.0 and ap == 0.0:
            x, w = gauss_legendre(self.order)
            nodes = mid + half * x
            return complex(half * np.dot(w, self._deriv_except(nodes, None)))
        x, w = gauss_jacobi(self.order, float(aq), float(ap))
        nodes = mid + half * x
        skip = [k for k in (kq, kp) if k is not None]
        lf = self._log_factors(nodes)
        b = self._b.copy()
        b[skip] = 0.0
        vals = np.exp(-(lf * b).sum(axis=-1))
        const = 1.0 + 0j
        r = abs(half)
        if kq is not None:
            # w - q = (p - q) (1 - x) / 2 along the piece
            const *= r ** aq * np.exp(1j * aq * _arg_upper(p - q))
        if kp is not None:
            const *= r ** ap * np.exp(1j * ap * _arg_upper(q - p))
        return complex(half * const * np.dot(w, vals))

    def integrate(self, a: complex, b: complex) -> complex:
        """Integral of SC' along the straight segment from ``a`` to ``b``."""
        a = complex(a)
        b = complex(b)
        if a == b:
            return 0j
        if a.imag < 0 or b.imag < 0:
            raise ValueError("segments must lie in the closed upper half-plane")
        return sum((self._piece(p, q) for p, q in self._pieces(a, b)), 0j)

    def lift_height(self) -> float:
        pts = np.sort(np.append(self._z, 0.0))
        return 0.5 * float(np.min(np.diff(pts))) if pts.size > 1 else 0.5

    def in_base_gap(self, x: float, closed: bool = False) -> bool:
        left, right = K.nearest_sides(self._z)
        if closed:
            return left <= x <= right
        return left < x < right

    def default_path(self, z: complex) -> list[complex]:
        z = complex(z)
        if z.imag == 0.0 and self.in_base_gap(z.real, closed=True):
            return [0j, z]
        return [0j, 1j * self.lift_height(), z]

    def eval(self, z, path=None) -> complex:
        """SC(z) along ``path`` (a polyline from the base point) or the default one."""
        z = complex(z)
        if z.imag < 0:
            raise ValueError("SC is evaluated on the closed upper half-plane")
        k = self._prevertex_at(z)
        if k is not None and self._b[k] >= 1.0:
            raise QuadratureError("target is a corner at infinity (divergent integral)")
        if path is None:
            path = self.default_path(z)
        path = [complex(p) for p in path]
        if path[0] != self.basepoint or path[-1] != z:
            raise ValueError("path must run from the base point to z")
        return sum((self.integrate(p, q) for p, q in zip(path, path[1:])), 0j)

    def gap_values(self, W: float):
        """``(SC(W), dSC/dt(W), SC'(W))`` for real ``W`` in the gap containing 0."""
        if not self.in_base_gap(W):
            raise ValueError(f"W={W} is outside the prevertex gap containing 0")
        xg, wg = gauss_legendre(self.order)
        return K.gap_integrals(float(W), self._z, self._b, np.asarray(xg), np.asarray(wg))

    def drift_correction_rate(self, W: float, zdot=None) -> complex:
        """(d/dt SC_t)(W) with the prevertices moving at ``zdot``.

        The default speed is the Loewner one, ``2 / (Z_k - W)``.
        """
        if zdot is None:
            return complex(self.gap_values(W)[1])
        if not self.in_base_gap(W):
            raise ValueError(f"W={W} is outside the prevertex gap containing 0")
        zdot = np.asarray(zdot, dtype=float)
        x, w = gauss_legendre(self.order)
        total = 0j
        for p, q in self._pieces(0j, complex(W)):
            half = 0.5 * (q - p)
            nodes = 0.5 * (q + p) + half * x
            d = nodes[:, None] - self._z
            vals = self.deriv(nodes) * (self._b * zdot / d).sum(axis=1)
            total += half * np.dot(w, vals)
        return complex(total)


@dataclass(frozen=True)
class CorrectedMap:
    """``f_t = SC_t - D_t`` with the accumulated drift correction ``D_t``."""

    evaluator: ScEvaluator
    correction: complex = 0j

    def __call__(self, z, path=None) -> complex:
        return self.evaluator.eval(z, path) - self.correction

    def deriv(self, z):
        return self.evaluator.deriv(z)


def sc_eval(ev: ScEvaluator, z, path=None) -> complex:
    return ev.eval(z, path)


def sc_deriv(ev: ScEvaluator, z):
    return ev.deriv(z)


def sc_log_deriv_sum(ev: ScEvaluator, z):
    return ev.log_deriv_sum(z)


def drift_correction_rate(ev: ScEvaluator, W: float, zdot=None) -> complex:
    return ev.drift_correction_rate(W, zdot)


def corrected_map_eval(cm: CorrectedMap, z, path=None) -> complex:
    return cm(z, path)


def planar_betas(betas) -> bool:
    for b in betas:
        if not (-1.0 <= b < 1.0 or 1.0 <= b <= 3.0):
            return False
    total = exterior_angle_sum(betas)
    if abs(total - 2.0) > 1e-12 and not 1.0 <= infinity_angle(betas) <= 3.0:
        return False
    return True


def corrected_map_at(path, i: int, order: int = 12) -> CorrectedMap:
    ev = ScEvaluator(tuple(path.Z[i]), path.betas, order=order)
    return CorrectedMap(ev, complex(path.D[i]))


def polygon_snapshot(path, t: float, order: int = 12) -> PolygonSnapshot:
    """Corners ``f_t(Z_t^k)`` of the image polygon at grid time ``t``."""
    i = path.index_of(t)
    if path.sigma is not None and path.t[i] >= path.sigma:
        raise ValueError(f"t={t} is not before the collision time {path.sigma}")
    cm = corrected_map_at(path, i, order)
    corners = []
    for k, (z, b) in enumerate(zip(cm.evaluator.prevertices, cm.evaluator.betas)):
        if b >= 1.0:
            corners.append(Corner(AT_INFINITY, b))
        else:
            corners.append(Corner(cm(z), b))
    closed = abs(exterior_angle_sum(path.betas) - 2.0) <= 1e-12
    return PolygonSnapshot(tuple(corners), float(path.t[i]), closed, planar_betas(path.betas))


@dataclass(frozen=True)
class CornerTrajectory:
    corner: int
    times: np.ndarray
    positions: np.ndarray
    velocity_times: np.ndarray
    steps: np.ndarray  # half-widths h of the central differences
    quotients: np.ndarray  # (len(velocity_times), len(steps))
    extrapolated: np.ndarray  # Richardson values, one fewer column
    rel_changes: np.ndarray  # relative change between successive extrapolations

    @property
    def velocities(self) -> np.ndarray:
        return self.extrapolated[:, -1]


def corner_positions(path, l: int, stride: int = 1, order: int = 12) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(0, path.m, stride)
    pos = np.empty(idx.size, dtype=complex)
    for j, i in enumerate(idx):
        cm = corrected_map_at(path, i, order)
        pos[j] = cm(cm.evaluator.prevertices[l])
    return path.t[idx], pos


def _local_state(path, times):
    """Prevertex positions at arbitrary ``times`` by re-flowing along the
    piecewise-linear driver (exact ODE solution of the force-point motion)."""
    from .loewner import flow_many

    G, _, T = flow_many(path.t, path.W, np.asarray(path.Z[0], dtype=complex), times)
    if np.any(~np.isnan(T)):
        raise ValueError("a force point was swallowed inside the stencil")
    return G.real


def corner_trajectory(path, l: int, velocity_times=None, h0=None, levels: int = 4,
                      stride: int = 1, order: int = 12) -> CornerTrajectory:
    """Positions ``f_t(Z_t^l)`` on the grid and Richardson-extrapolated velocities.

    Velocities are central differences of half-width ``h0, h0/2, ...`` taken
    inside a single grid cell, where the driver is linear, so the difference
    quotients converge at second order.
    """
    b = path.betas[l]
    if b >= 1.0:
        raise ValueError("corner at infinity has no finite trajectory")
    times, pos = corner_positions(path, l, stride, order)
    t = path.t
    last = path.m - 1
    if velocity_times is None:
        cells = np.unique(np.linspace(1, max(last - 1, 1), 5).astype(int))
        velocity_times = 0.5 * (t[cells] + t[np.minimum(cells + 1, last)])
    velocity_times = np.atleast_1d(np.asarray(velocity_times, dtype=float))
    xg, wg = gauss_legendre(16)
    hs = None
    Q = []
    for tv in velocity_times:
        k = int(np.searchsorted(t, tv, side="right") - 1)
        if not 0 <= k < last:
            raise ValueError(f"velocity time {tv} outside the path")
        cell = t[k + 1] - t[k]
        margin = min(tv - t[k], t[k + 1] - tv)
        hh = h0 if h0 is not None else 0.5 * margin
        if hh > margin:
            raise ValueError("stencil leaves the grid cell")
        hs = hh / 2.0 ** np.arange(levels)
        stencil = np.concatenate([tv - hs, tv + hs])
        quad = np.concatenate([tv + h * xg for h in hs])
        Zs = _local_state(path, np.concatenate([stencil, quad]))
        Zst, Zq = Zs[: 2 * levels], Zs[2 * levels:]
        Wq = np.interp(quad, t, path.W)
        row = []
        for j, h in enumerate(hs):
            ev_m = ScEvaluator(tuple(Zst[j]), path.betas, order=order)
            ev_p = ScEvaluator(tuple(Zst[levels + j]), path.betas, order=order)
            dsc = ev_p.eval(ev_p.prevertices[l]) - ev_m.eval(ev_m.prevertices[l])
            rates = np.array([
                K.gap_integrals(Wq[j * 16 + i], Zq[j * 16 + i], np.asarray(path.betas),
                                np.asarray(gauss_legendre(order)[0]),
                                np.asarray(gauss_legendre(order)[1]))[1]
                for i in range(16)
            ])
            dD = h * np.dot(wg, rates)
            row.append((dsc - dD) / (2.0 * h))
        Q.append(row)
    Q = np.array(Q, dtype=complex)
    R = (4.0 * Q[:, 1:] - Q[:, :-1]) / 3.0
    rel = np.abs(np.diff(R, axis=1)) / np.maximum(np.abs(R[:, 1:]), 1e-300)
    return CornerTrajectory(l, times, pos, velocity_times, hs, Q, R, rel)
