"""Numerical checks of the analytic claims about SLE(kappa, rho) in polygons.

Every check returns a :class:`Report` whose status is ``"pass"``, ``"fail"`` or
``"inconclusive"`` (too many paths stopped before the observation time).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from . import _kernels_np as KN
from ._accel import HAVE_NUMBA
from .driving import (
    DrivingPath,
    _run_chunked,
    default_eps,
    metric_values_at_clock,
    path_seeds,
    rho_system_coefficients,
    simulate_endpoints,
    time_changed_coefficients,
)
from .geometry import PrevertexConfig
from .loewner import default_swallow_eps, flow_many
from .scmap import ScEvaluator, gauss_legendre
from .special import gamma, hyp2f1
from .stats import EnsembleStats, TimeChange, two_sample_z

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass
class Report:
    test: str
    config_hash: str
    N: int
    estimate: float
    se: float
    threshold: float
    status: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [_jsonable(x.real), _jsonable(x.imag)]
    return x


def config_hash(obj) -> str:
    if isinstance(obj, PrevertexConfig):
        obj = {"kappa": obj.kappa, "prevertices": list(obj.prevertices), "betas": list(obj.betas)}
    blob = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def side_direction(cfg_or_path) -> complex:
    """Unit direction of the polygon side that contains f(0)."""
    if isinstance(cfg_or_path, DrivingPath):
        Z, betas = cfg_or_path.Z[0], cfg_or_path.betas
    else:
        Z, betas = cfg_or_path.prevertices, cfg_or_path.betas
    return complex(K.gap_phase(np.asarray(Z, float), np.asarray(betas, float)))


# -- martingale ----------------------------------------------------------


def martingale_test(cfg: PrevertexConfig, T: float, dt: float, N: int, seed: int,
                    gate: float = 3.5, max_attrition: float = 0.2, eps_coll=None,
                    threads: int = 1) -> Report:
    """Monte Carlo test that ``U_t = f_t(W_t)`` has mean ``U_0 = 0`` at ``T``.

    Paths that reach the collision tolerance before ``T`` are excluded and
    counted; above ``max_attrition`` the result is inconclusive.
    """
    ends = simulate_endpoints(cfg, T, dt, N, seed, eps_coll, threads)
    e = side_direction(cfg)
    ok = ends.survived
    u_par = (ends.U[ok] * e.conjugate()).real
    u_perp = (ends.U[ok] * e.conjugate()).imag
    stats = EnsembleStats.from_samples(u_par)
    attrition = 1.0 - ok.mean()
    if attrition > max_attrition or stats.n < 2:
        status = INCONCLUSIVE
    else:
        status = PASS if stats.within(0.0, gate) else FAIL
    stopped = EnsembleStats.from_samples((ends.U * e.conjugate()).real)
    return Report(
        "martingale", config_hash(cfg), N, stats.mean, stats.se, gate, status,
        {"T": T, "dt": dt, "seed": seed, "attrition": attrition,
         "max_perpendicular": float(np.abs(u_perp).max()) if u_perp.size else 0.0,
         "stopped_mean": stopped.mean, "stopped_se": stopped.se,
         "z": stats.mean / stats.se if stats.se > 0 else float("nan"),
         "backend": "numba" if HAVE_NUMBA else "numpy"},
    )


# -- quadratic variation and time change ---------------------------------


def path_U(path: DrivingPath, order: int = 12) -> np.ndarray:
    """``U_t = SC_t(W_t) - D_t`` at every grid time of ``path``."""
    xg, wg = gauss_legendre(order)
    sc, _, _ = KN.gap_integrals(path.W, path.Z, np.asarray(path.betas, float),
                                np.asarray(xg), np.asarray(wg))
    return sc - path.D


@dataclass
class QVResult:
    realized: float
    clock: float
    rel_error: float
    increment_mean_square: float
    interval: float
    increment_se: float
    n_intervals: int

    @property
    def increments_ok(self) -> bool:
        return abs(self.increment_mean_square - self.interval) <= 3.0 * self.increment_se


def qv_test(path: DrivingPath, n_intervals: int = 100, order: int = 12) -> QVResult:
    """Realized quadratic variation of ``U`` against the clock ``A_T``, and the
    variance of ``U`` increments over equal clock intervals."""
    U = path_U(path, order)
    e = side_direction(path)
    u = (U * e.conjugate()).real
    realized = float(np.sum(np.abs(np.diff(U)) ** 2))
    A_T = float(path.A[-1])
    tc = TimeChange(path.t, path.A)
    delta = A_T / n_intervals
    levels = delta * np.arange(n_intervals + 1)
    levels[-1] = min(levels[-1], A_T)
    taus = tc.tau(levels)
    inc = np.diff(np.interp(taus, path.t, u))
    sq = inc * inc
    return QVResult(realized, A_T, abs(realized - A_T) / A_T, float(sq.mean()), delta,
                    float(sq.std(ddof=1) / math.sqrt(sq.size)), n_intervals)


# -- hitting probability -------------------------------------------------


def hitting_probability_formula(kappa: float, x: float, y: float) -> float:
    """Probability that chordal SLE_kappa hits (-inf, -y) before (x, inf), kappa > 4."""
    if not kappa > 4:
        raise ValueError("the formula holds for kappa > 4")
    if not (x > 0 and y > 0):
        raise ValueError("x and y must be positive")
    a = 2.0 / kappa
    r = y / x
    s = r / (r + 1.0)
    pref = gamma(2.0 - 4.0 * a) / (gamma(2.0 - 2.0 * a) * gamma(1.0 - 2.0 * a))
    return pref * s ** (1.0 - 2.0 * a) * hyp2f1(2.0 * a, 1.0 - 2.0 * a, 2.0 - 2.0 * a, s)


def hitting_probability_mc(kappa: float, x: float, y: float, N: int, T_max: float = 1e12,
                           dt: float = 1e-3, seed: int = 0, rel_tol: float = 1e-6,
                           block: int = 4096, max_undecided: float = 0.01,
                           gate: float = 3.0, threads: int = 1):
    """Fraction of plain SLE_kappa paths that swallow ``-y`` before ``x``.

    The driver is simulated on a scale-adapted grid: each step is ``dt`` times
    the squared distance from the driver to the nearer tracked point, which
    keeps the relative resolution fixed as the configuration grows or as a
    point is about to be swallowed. Returns ``(Report, EnsembleStats)``.
    """
    if not kappa > 4:
        raise ValueError("kappa must exceed 4")
    seeds = path_seeds(seed, N)
    sqrtk = math.sqrt(kappa)
    batch = K.hitting_batch if HAVE_NUMBA else KN.hitting_batch

    def run(a, b):
        rngs = [np.random.default_rng(int(s)) for s in seeds[a:b]]
        states = np.zeros((b - a, 4))
        states[:, 1] = x
        states[:, 2] = -y
        codes = np.full(b - a, K.NEED_MORE, dtype=np.int64)
        steps = np.zeros(b - a, dtype=np.int64)
        todo = np.arange(b - a)
        while todo.size:
            normals = np.empty((todo.size, block))
            for j, p in enumerate(todo):
                normals[j] = rngs[p].standard_normal(block)
            st = np.ascontiguousarray(states[todo])
            c, used = batch(st, normals, sqrtk, dt, rel_tol, T_max)
            states[todo] = st
            codes[todo] = c
            steps[todo] += used
            todo = todo[c == K.NEED_MORE]
        return codes, steps, states[:, 3]

    parts = _run_chunked(run, N, threads)
    codes = np.concatenate([p[0] for p in parts])
    steps = np.concatenate([p[1] for p in parts])
    times = np.concatenate([p[2] for p in parts])
    decided = codes != K.NEITHER
    left = (codes[decided] == K.LEFT_FIRST).astype(float)
    stats = EnsembleStats.from_samples(left, undecided=float(1.0 - decided.mean()))
    target = hitting_probability_formula(kappa, x, y)
    if 1.0 - decided.mean() > max_undecided:
        status = INCONCLUSIVE
    else:
        status = PASS if stats.within(target, gate) else FAIL
    rep = Report("hitting-mc", config_hash({"kappa": kappa, "x": x, "y": y}), N, stats.mean,
                 stats.se, gate, status,
                 {"formula": target, "undecided": 1.0 - decided.mean(), "seed": seed,
                  "dt": dt, "rel_tol": rel_tol, "mean_steps": float(steps.mean()),
                  "median_time": float(np.median(times)),
                  "z": (stats.mean - target) / stats.se if stats.se > 0 else float("nan"),
                  # the estimate compared against 1 - p, i.e. right-first
                  "z_complement": ((stats.mean - (1.0 - target)) / stats.se
                                   if stats.se > 0 else float("nan"))})
    return rep, stats


# -- theorem rate identity -----------------------------------------------


@dataclass
class RateCheck:
    t: float
    h: float
    w: complex
    derivative: complex
    bracket: complex
    residual: float


def theorem_rate_check(path: DrivingPath, w: complex, t: float, h: float | None = None) -> RateCheck:
    """Compare ``d/dt log(f_t'(g_t(w)) g_t'(w))`` (central difference) with
    ``-2/(g - W)^2 + 2/(g - W) sum_l beta_l / (Z^l - W)``.

    The force points and ``g_t(w)`` are integrated together along the
    piecewise-linear driver, so for a stencil inside one grid cell the only
    error is the difference-quotient truncation. ``h`` defaults to a tenth
    of the grid step.
    """
    if h is None:
        h = 0.1 * path.dt
    if path.sigma is not None and t + h >= path.sigma:
        raise ValueError("stencil reaches the collision time")
    if t - h < 0:
        raise ValueError("stencil starts before 0")
    times = np.array([t - h, t, t + h])
    pts = np.concatenate([[complex(w)], path.Z[0].astype(complex)])
    eps = default_swallow_eps(path.dt)
    G, LG, T = flow_many(path.t, path.W, pts, times, eps=eps)
    if not math.isnan(T[0]):
        raise ValueError(f"w={w} is swallowed at t={T[0]:.6g}, inside the stencil")
    if np.any(~np.isnan(T[1:])):
        raise ValueError("a force point was swallowed")
    betas = np.asarray(path.betas, float)

    def L(j):
        g = G[j, 0]
        Z = G[j, 1:].real
        d = g - Z
        logf = -(betas * (np.log(np.abs(d)) + 1j * np.arctan2(d.imag + 0.0, d.real))).sum()
        return logf + LG[j, 0]

    deriv = (L(2) - L(0)) / (2.0 * h)
    Wt = float(np.interp(t, path.t, path.W))
    g = G[1, 0]
    Z = G[1, 1:].real
    bracket = -2.0 / (g - Wt) ** 2 + 2.0 / (g - Wt) * np.sum(betas / (Z - Wt))
    res = abs(deriv - bracket) / max(1.0, abs(bracket))
    return RateCheck(t, h, complex(w), complex(deriv), complex(bracket), float(res))


def cell_midpoints(path: DrivingPath, count: int, start_frac: float = 0.2) -> np.ndarray:
    """``count`` stencil centres at grid-cell midpoints spread over the path."""
    last = path.m - 1
    cells = np.unique(np.linspace(int(start_frac * last), last - 1, count).astype(int))
    return 0.5 * (path.t[cells] + path.t[cells + 1])


# -- metric Brownian motion equivalence ----------------------------------


def random_states(cfg: PrevertexConfig, count: int, seed: int = 0):
    """Random (W, Z) pairs with the ordering of ``cfg`` and W in the base gap."""
    rng = np.random.default_rng(seed)
    z0 = np.asarray(cfg.prevertices, float)
    out = []
    for _ in range(count):
        Z = z0 * rng.uniform(0.5, 2.0, size=z0.size)
        Z = np.sort(Z)
        left, right = K.nearest_sides(Z)
        lo = left if math.isfinite(left) else -3.0 * abs(right)
        hi = right if math.isfinite(right) else 3.0 * abs(left)
        W = rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo))
        out.append((float(W), Z))
    return out


def coefficient_residual(cfg: PrevertexConfig, count: int = 100, seed: int = 0,
                         drift_sign: int = 1) -> float:
    """Largest relative mismatch between time-changed metric coefficients and
    the force-point coefficients over ``count`` random states."""
    worst = 0.0
    for W, Z in random_states(cfg, count, seed):
        a = time_changed_coefficients(W, Z, cfg, drift_sign)
        b = rho_system_coefficients(W, Z, cfg)
        for x, y in zip(a, b):
            x = np.atleast_1d(x)
            y = np.atleast_1d(y)
            r = np.max(np.abs(x - y) / np.maximum(1.0, np.abs(y)))
            worst = max(worst, float(r))
    return worst


def metric_equivalence_test(cfg: PrevertexConfig, S: float | None = None, ds: float | None = None,
                            N: int = 20000, seed: int = 0, t_star: float = 0.05,
                            dt: float = 1e-4, drift_sign: int = 1, gate: float = 3.0,
                            coef_tol: float = 1e-12, max_attrition: float = 0.2,
                            threads: int = 1) -> Report:
    """(i) coefficient identity at random states; (ii) first four moments of W
    at SLE time ``t_star``: force-point simulator against the time-changed
    metric simulator, two-sample z-scores within ``gate``."""
    z0 = np.asarray(cfg.prevertices, float)
    phi0 = K.gap_modulus(0.0, z0, np.asarray(cfg.betas, float))
    if not (math.isfinite(phi0) and phi0 > 0):
        raise ValueError("degenerate clock: |SC'(0)| is 0 or infinite")
    resid = coefficient_residual(cfg, 100, seed, drift_sign)
    if ds is None:
        ds = cfg.kappa * phi0 ** 2 * dt
    if S is None:
        S = 20.0 * cfg.kappa * phi0 ** 2 * t_star
    eps = default_eps(cfg.kappa, dt)
    ends = simulate_endpoints(cfg, t_star, dt, N, seed, eps, threads)
    Wm, status, _ = metric_values_at_clock(cfg, t_star, ds, N, seed + 1, S, drift_sign, eps,
                                           threads=threads)
    wa = ends.W[ends.survived]
    wb = Wm[status == 0]
    attr = max(1.0 - ends.survived.mean(), 1.0 - (status == 0).mean())
    zs = [float(two_sample_z(wa ** k, wb ** k)) for k in range(1, 5)]
    worst = max(abs(z) for z in zs)
    if attr > max_attrition:
        status_s = INCONCLUSIVE
    elif resid <= coef_tol and worst <= gate:
        status_s = PASS
    else:
        status_s = FAIL
    return Report(
        "metric-equivalence", config_hash(cfg), N, worst, 1.0, gate, status_s,
        {"coefficient_residual": resid, "z_scores": zs, "t_star": t_star, "dt": dt, "ds": ds,
         "S": S, "attrition": attr, "unfinished_metric": float((status == 3).mean()),
         "moments_rho": [float(np.mean(wa ** k)) for k in range(1, 5)],
         "moments_metric": [float(np.mean(wb ** k)) for k in range(1, 5)],
         "drift_sign": drift_sign, "seed": seed},
    )


# -- Schwarz-Christoffel oracles ----------------------------------------


def sc_oracles(n_points: int = 20, seed: int = 0, cfg: PrevertexConfig | None = None) -> Report:
    """Closed-form checks of the quadrature: the cubic ``z^3/3 - z`` for
    beta = (-1, -1) and the arcsine gap ``pi`` for beta = (1/2, 1/2).

    With ``cfg``, the boundary straightness and turning checks are run on
    its map as well.
    """
    rng = np.random.default_rng(seed)
    ev = ScEvaluator((-1.0, 1.0), (-1.0, -1.0))
    zs = rng.uniform(-3, 3, n_points) + 1j * rng.uniform(0, 2, n_points)
    fixed = [-1.0, 1.0, 2.0, -2.5][: min(4, n_points)]
    zs[: len(fixed)] = fixed
    cubic = max(abs(ev.eval(z) - (z ** 3 / 3 - z)) for z in zs)
    ev2 = ScEvaluator((-1.0, 1.0), (0.5, 0.5))
    arcsine = abs(abs(ev2.eval(1.0) - ev2.eval(-1.0)) - math.pi)
    ok = cubic <= 1e-10 and arcsine <= 1e-8
    details = {"cubic_max_error": cubic, "arcsine_error": arcsine}
    if cfg is not None:
        bc = boundary_checks(ScEvaluator.from_config(cfg))
        details.update(bc)
        ok = ok and bc["straightness"] <= 1e-8 and bc["turning"] <= 1e-6
    key = {"n_points": n_points, "seed": seed, "cfg": config_hash(cfg) if cfg else None}
    return Report("sc-oracles", config_hash(key), n_points, cubic, 0.0, 1e-10,
                  PASS if ok else FAIL, details)

def _wrap(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def boundary_checks(ev: ScEvaluator, samples: int = 50, delta: float = 1e-7) -> dict:
    """Largest deviation of ``arg SC'`` from constancy on each real gap, and
    largest error of the jump across each prevertex against ``beta_k pi``."""
    z = np.asarray(ev.prevertices, float)
    b = np.asarray(ev.betas, float)
    scale = max(1.0, float(np.abs(z).max()))
    edges = np.concatenate([[z[0] - 2.0 * scale], z, [z[-1] + 2.0 * scale]])
    straight = 0.0
    for lo, hi in zip(edges, edges[1:]):
        pad = 1e-6 * (hi - lo)
        x = np.linspace(lo + pad, hi - pad, samples)
        ang = np.angle(ev.deriv(x.astype(complex)))
        straight = max(straight, float(np.abs(_wrap(ang - ang[0])).max()))
    turning = 0.0
    for k, zk in enumerate(z):
        d = delta * min(np.min(np.abs(np.delete(np.append(z, 0.0), k) - zk)), 1.0)
        left, right = ev.deriv(np.array([zk - d, zk + d], dtype=complex))
        jump = np.angle(right) - np.angle(left)
        turning = max(turning, float(abs(_wrap(jump - b[k] * np.pi))))
    return {"straightness": straight, "turning": turning}


def qv_ensemble(cfg: PrevertexConfig, T: float, dt: float, paths: int, seed: int,
                n_intervals: int = 100, tol: float = 0.05, gate: float = 3.0) -> Report:
    """``qv_test`` over independently seeded paths: the median relative QV
    error must be within ``tol`` and the pooled normalized squared clock
    increments must average 1 within ``gate`` standard errors."""
    from .driving import simulate_driver

    rel = []
    ratios = []
    per_path_ok = 0
    for s in path_seeds(seed, paths):
        p = simulate_driver(cfg, T, dt, int(s))
        if p.m < 2 * n_intervals:
            continue
        q = qv_test(p, n_intervals)
        rel.append(q.rel_error)
        per_path_ok += q.increments_ok
        U = path_U(p)
        u = (U * side_direction(p).conjugate()).real
        tc = TimeChange(p.t, p.A)
        levels = np.linspace(0.0, p.A[-1], n_intervals + 1)
        inc = np.diff(np.interp(tc.tau(levels), p.t, u))
        ratios.append(inc * inc / (p.A[-1] / n_intervals))
    rel = np.array(rel)
    pooled = EnsembleStats.from_samples(np.concatenate(ratios) if ratios else [])
    med = float(np.median(rel)) if rel.size else float("nan")
    ok = rel.size > 0 and med <= tol and pooled.within(1.0, gate)
    return Report("qv", config_hash(cfg), int(rel.size), med, pooled.se, tol,
                  PASS if ok else FAIL,
                  {"T": T, "dt": dt, "seed": seed, "max_rel_error": float(rel.max()) if rel.size else None,
                   "pooled_increment_ratio": pooled.mean, "pooled_se": pooled.se,
                   "paths_with_increments_ok": int(per_path_ok), "n_intervals": n_intervals})


def hitting_formula_report(kappa: float, x: float, y: float) -> Report:
    """Formula value with its internal consistency checks: scale invariance
    and complementarity under swapping x and y."""
    p = hitting_probability_formula(kappa, x, y)
    scaled = hitting_probability_formula(kappa, 2.0 * x, 2.0 * y)
    swapped = hitting_probability_formula(kappa, y, x)
    ok = abs(p - scaled) <= 1e-12 and abs(p + swapped - 1.0) <= 1e-8
    out = {"scaled": scaled, "swapped": swapped, "kappa": kappa, "x": x, "y": y}
    if abs(kappa - 8.0) < 1e-15:
        s = y / (x + y)
        out["arcsine_identity"] = 2.0 / math.pi * math.asin(math.sqrt(s))
        ok = ok and abs(p - out["arcsine_identity"]) <= 1e-8
    return Report("hitting-formula", config_hash(out), 0, p, 0.0, 1e-8, PASS if ok else FAIL, out)


def theorem_rate_report(path: DrivingPath, points, times=None, h=None, tol: float = 1e-3,
                        name: str = "theorem-rate") -> Report:
    """``theorem_rate_check`` at the pairs ``(points[i], times[i])``; stencil
    centres default to grid-cell midpoints spread over the path."""
    points = [complex(w) for w in points]
    if times is None:
        times = cell_midpoints(path, len(points))
    if len(times) < len(points):
        times = np.resize(times, len(points))
    rows = []
    try:
        for w, t in zip(points, times):
            rows.append(theorem_rate_check(path, w, float(t), h))
    except ValueError as e:
        return Report(name, config_hash({"points": points}), len(rows), float("nan"), 0.0, tol,
                      INCONCLUSIVE, {"error": str(e)})
    worst = max(r.residual for r in rows)
    return Report(name, config_hash({"points": points, "seed": path.seed}), len(rows), worst,
                  0.0, tol, PASS if worst <= tol else FAIL,
                  {"residuals": [r.residual for r in rows], "times": [r.t for r in rows],
                   "h": [r.h for r in rows]})


def report_table(reports) -> str:
    """Fixed-width text table of reports."""
    head = f"{'test':<20} {'status':<13} {'N':>7} {'estimate':>14} {'se':>11} {'threshold':>10}"
    lines = [head, "-" * len(head)]
    for r in reports:
        lines.append(f"{r.test:<20} {r.status:<13} {r.N:>7d} {r.estimate:>14.6g} "
                     f"{r.se:>11.4g} {r.threshold:>10.4g}")
    return "\n".join(lines)
