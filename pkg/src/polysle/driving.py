"""Driver / force-point SDE system and its metric Brownian-motion variant.

Force-point system (time t)::

    dW   = sqrt(kappa) dB + sum_k rho_k / (W - Z^k) dt
    dZ^k = 2 / (Z^k - W) dt

Metric system (time s, ``phi = |SC'_t(W)|``)::

    dW   = dB / phi + sign * sum_j beta_j / (W - Z^j) / (2 phi^2) ds
    dZ^k = 2 / (kappa phi^2 (Z^k - W)) ds

Under ``dt = ds / (kappa phi^2)`` and ``sign = +1`` the metric system is the
force-point system with ``rho = kappa beta / 2``.

Random numbers: each path owns a ``numpy.random.default_rng(seed)`` stream and
draws exactly one standard normal per nominal step, in step order. Substeps
split that increment into equal parts and draw nothing.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from . import _kernels_np as KN
from ._accel import HAVE_NUMBA
from .geometry import PrevertexConfig
from .scmap import gauss_legendre

MAX_DEPTH = 30


class CollisionError(RuntimeError):
    """The driver is within the collision tolerance of a force point."""


@dataclass(frozen=True)
class DrivingState:
    t: float
    W: float
    Z: tuple[float, ...]
    D: complex = 0j
    A: float = 0.0
    B: float = 0.0  # raw Brownian path value, W = sqrt(kappa) B + drift integral


@dataclass(frozen=True, eq=False)
class DrivingPath:
    t: np.ndarray
    W: np.ndarray
    Z: np.ndarray  # shape (m, n)
    D: np.ndarray  # complex drift correction int_0^t (d_s SC_s)(W_s) ds
    A: np.ndarray  # clock kappa int_0^t |SC'_s(W_s)|^2 ds
    betas: tuple[float, ...]
    kappa: float
    dt: float
    seed: int
    sigma: float | None = None
    eps_coll: float = 0.0
    kind: str = "rho"
    B: np.ndarray | None = None
    clock: np.ndarray | None = None  # metric paths: SLE time reached at each metric time
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.t.shape[0]

    @property
    def n(self) -> int:
        return self.Z.shape[1]

    @property
    def grid(self) -> np.ndarray:
        return self.t

    @property
    def rhos(self) -> tuple[float, ...]:
        return tuple(0.5 * self.kappa * b for b in self.betas)

    @property
    def states(self) -> list[DrivingState]:
        return [self.state(i) for i in range(self.m)]

    def state(self, i: int) -> DrivingState:
        b = float(self.B[i]) if self.B is not None else 0.0
        return DrivingState(float(self.t[i]), float(self.W[i]), tuple(self.Z[i].tolist()),
                            complex(self.D[i]), float(self.A[i]), b)

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.t, t - 1e-12 * max(1.0, abs(t))))
        if i >= self.m or abs(self.t[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a grid time of this path")
        return i

    def config(self, prevertices=None) -> PrevertexConfig:
        z = self.Z[0] if prevertices is None else prevertices
        return PrevertexConfig(tuple(z), self.betas, self.kappa)


def default_eps(kappa: float, dt: float) -> float:
    return 10.0 * math.sqrt(kappa * dt)


def brownian_increments(seed: int, nsteps: int, dt: float) -> np.ndarray:
    """The documented increment stream: ``sqrt(dt) * N(0, 1)``, one per step."""
    rng = np.random.default_rng(int(seed))
    return rng.standard_normal(nsteps) * math.sqrt(dt)


def path_seeds(seed: int, N: int) -> np.ndarray:
    """Independent 64-bit per-path seeds derived from one master seed."""
    return np.random.SeedSequence(int(seed)).generate_state(N, dtype=np.uint64)


def increments_matrix(seeds, nsteps: int, dt: float) -> np.ndarray:
    out = np.empty((len(seeds), nsteps))
    for p, s in enumerate(seeds):
        out[p] = brownian_increments(int(s), nsteps, dt)
    return out


def _quad(order=12):
    x, w = gauss_legendre(order)
    return np.ascontiguousarray(x), np.ascontiguousarray(w)


def _arrays(cfg: PrevertexConfig):
    z0 = np.array(cfg.prevertices, dtype=float)
    beta = np.array(cfg.betas, dtype=float)
    rho = 0.5 * cfg.kappa * beta
    return z0, beta, rho


def step_driver(state: DrivingState, cfg: PrevertexConfig, dt: float, dB: float,
                eps_coll: float | None = None, order: int = 12) -> DrivingState:
    """One Euler-Maruyama step of the force-point system from ``state``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    eps = default_eps(cfg.kappa, dt) if eps_coll is None else eps_coll
    Z = np.array(state.Z, dtype=float)
    if K.min_dist(state.W, Z) < eps:
        raise CollisionError(f"driver within {eps:g} of a force point at t={state.t}")
    _, beta, rho = _arrays(cfg)
    xg, wg = _quad(order)
    sqrtk = math.sqrt(cfg.kappa)
    X = state.W - sqrtk * state.B
    _, r0, d0 = K.gap_integrals(state.W, Z, beta, xg, wg)
    B1, X1, ok = K.driver_step(state.B, X, Z, rho, sqrtk, dt, dB, MAX_DEPTH)
    if not ok:
        raise CollisionError(f"force point crossed during the step from t={state.t}")
    W1 = sqrtk * B1 + X1
    _, r1, d1 = K.gap_integrals(W1, Z, beta, xg, wg)
    D = state.D + 0.5 * dt * (r0 + r1)
    A = state.A + 0.5 * cfg.kappa * dt * (abs(d0) ** 2 + abs(d1) ** 2)
    return DrivingState(state.t + dt, W1, tuple(Z.tolist()), complex(D), float(A), B1)


def simulate_driver(cfg: PrevertexConfig, T: float, dt: float, seed: int = 0,
                    eps_coll: float | None = None, increments=None,
                    order: int = 12) -> DrivingPath:
    """Simulate the force-point system on the grid ``0, dt, 2dt, ...`` up to
    ``min(T, sigma)``, accumulating the drift correction D and the clock A.

    ``increments`` overrides the seeded Brownian increments (length
    ``round(T / dt)``).
    """
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    nsteps = int(round(T / dt))
    if increments is None:
        dB = brownian_increments(seed, nsteps, dt)
    else:
        dB = np.ascontiguousarray(increments, dtype=float)
        nsteps = dB.shape[0]
    eps = default_eps(cfg.kappa, dt) if eps_coll is None else float(eps_coll)
    z0, beta, rho = _arrays(cfg)
    n = z0.shape[0]
    xg, wg = _quad(order)
    W = np.zeros(nsteps + 1)
    Z = np.zeros((nsteps + 1, n))
    D = np.zeros(nsteps + 1, dtype=complex)
    A = np.zeros(nsteps + 1)
    B = np.zeros(nsteps + 1)
    m, status = K.drive_record(z0, beta, rho, cfg.kappa, dt, dB, eps, MAX_DEPTH, xg, wg,
                               W, Z, D, A, B)
    m = int(m)
    status = int(status)
    t = np.arange(m) * dt
    sigma = None
    if status == 1:
        sigma = float(t[m - 1])
    elif status == 2:
        sigma = float(m * dt)
    return DrivingPath(t, W[:m].copy(), Z[:m].copy(), D[:m].copy(), A[:m].copy(),
                       cfg.betas, cfg.kappa, dt, int(seed), sigma, eps, "rho", B[:m].copy())


def driven_path(cfg: PrevertexConfig, W, dt: float, order: int = 12) -> DrivingPath:
    """Path for a prescribed driver ``W`` sampled on ``0, dt, 2dt, ...``.

    Force points follow the Loewner flow along the piecewise-linear driver;
    D and A are accumulated by the trapezoid rule as in the stochastic case.
    """
    W = np.ascontiguousarray(W, dtype=float)
    if W.ndim != 1 or W.size < 2 or W[0] != 0.0:
        raise ValueError("driver must be a 1-d array starting at 0")
    t = np.arange(W.size) * dt
    z0, beta, _ = _arrays(cfg)
    G, _, T = K.flow_record(t, W, z0.astype(complex), 0.0, 0.1)
    if np.any(~np.isnan(T)):
        raise CollisionError("the prescribed driver reaches a force point")
    Z = np.ascontiguousarray(G.real)
    gaps = np.abs(W[:, None] - Z).min(axis=1) if z0.size else np.full(W.size, np.inf)
    if np.any(gaps <= 0):
        raise CollisionError("the prescribed driver reaches a force point")
    xg, wg = _quad(order)
    if z0.size:
        _, rate, der = KN.gap_integrals(W, Z, beta, xg, wg)
    else:
        rate, der = np.zeros(W.size, complex), np.ones(W.size, complex)
    inc = 0.5 * dt * (rate[1:] + rate[:-1])
    D = np.concatenate([[0j], np.cumsum(inc)])
    q = cfg.kappa * np.abs(der) ** 2
    A = np.concatenate([[0.0], np.cumsum(0.5 * dt * (q[1:] + q[:-1]))])
    return DrivingPath(t, W.copy(), Z, D, A, cfg.betas, cfg.kappa, dt, 0, None, 0.0,
                       "prescribed")


def collision_time(path: DrivingPath, eps: float | None = None) -> float | None:
    """First grid time with ``min_k |W - Z^k| < eps`` (the path's tolerance by default)."""
    eps = path.eps_coll if eps is None else eps
    if path.n == 0:
        return None
    d = np.abs(path.W[:, None] - path.Z).min(axis=1)
    hit = np.nonzero(d < eps)[0]
    if hit.size:
        return float(path.t[hit[0]])
    if path.sigma is not None and path.sigma > path.t[-1]:
        return path.sigma  # crossing inside the last step
    return None


def rho_system_coefficients(W: float, Z, cfg: PrevertexConfig):
    """(drift of W, squared diffusion of W, drifts of Z) for the force-point system."""
    Z = np.asarray(Z, dtype=float)
    rho = 0.5 * cfg.kappa * np.asarray(cfg.betas)
    return float(np.sum(rho / (W - Z))), cfg.kappa, 2.0 / (Z - W)


def metric_system_coefficients(W: float, Z, cfg: PrevertexConfig, drift_sign: int = 1):
    """(drift of W, squared diffusion of W, drifts of Z) in metric time."""
    Z = np.asarray(Z, dtype=float)
    beta = np.asarray(cfg.betas, dtype=float)
    phi = K.gap_modulus(float(W), Z, beta)
    inv2 = 1.0 / (phi * phi)
    drift = drift_sign * 0.5 * inv2 * float(np.sum(beta / (W - Z)))
    return drift, inv2, 2.0 * inv2 / (cfg.kappa * (Z - W)), phi


def time_changed_coefficients(W: float, Z, cfg: PrevertexConfig, drift_sign: int = 1):
    """Metric coefficients rescaled to SLE time (``ds/dt = kappa phi^2``)."""
    drift, var, zdrift, phi = metric_system_coefficients(W, Z, cfg, drift_sign)
    rate = cfg.kappa * phi * phi
    return drift * rate, var * rate, zdrift * rate


def simulate_metric_driver(cfg: PrevertexConfig, S: float, ds: float, seed: int = 0,
                           drift_sign: int = 1, eps_coll: float | None = None,
                           t_stop: float = math.inf, increments=None,
                           order: int = 12) -> DrivingPath:
    """Boundary Brownian motion in the evolving pull-back metric, coupled to
    the force points; recorded in metric time ``s`` (grid ``0, ds, ...``).

    ``A`` holds the metric time itself, ``clock`` the SLE time
    ``int ds / (kappa |SC'|^2)``.
    """
    if not (S > 0 and ds > 0):
        raise ValueError("S and ds must be positive")
    if drift_sign not in (1, -1):
        raise ValueError("drift_sign must be +1 or -1")
    nsteps = int(round(S / ds))
    dB = (brownian_increments(seed, nsteps, ds) if increments is None
          else np.ascontiguousarray(increments, dtype=float))
    nsteps = dB.shape[0]
    z0, beta, _ = _arrays(cfg)
    phi0 = K.gap_modulus(0.0, z0, beta)
    if not (math.isfinite(phi0) and phi0 > 0):
        raise CollisionError("degenerate metric at the start: |SC'(0)| is 0 or infinite")
    eps = 10.0 * math.sqrt(ds) / phi0 if eps_coll is None else float(eps_coll)
    n = z0.shape[0]
    xg, wg = _quad(order)
    W = np.zeros(nsteps + 1)
    Z = np.zeros((nsteps + 1, n))
    D = np.zeros(nsteps + 1, dtype=complex)
    A = np.zeros(nsteps + 1)
    clock = np.zeros(nsteps + 1)
    m, status = K.metric_record(z0, beta, cfg.kappa, ds, dB, float(drift_sign), eps,
                                float(t_stop), MAX_DEPTH, xg, wg, W, Z, D, A, clock)
    m = int(m)
    status = int(status)
    if not np.all(np.isfinite(clock[:m])):
        raise CollisionError("metric factor became degenerate")
    s = np.arange(m) * ds
    sigma = None
    if status == 1:
        sigma = float(s[m - 1])
    elif status == 2:
        sigma = float(m * ds)
    return DrivingPath(s, W[:m].copy(), Z[:m].copy(), D[:m].copy(), A[:m].copy(), cfg.betas,
                       cfg.kappa, ds, int(seed), sigma, eps, "metric", None, clock[:m].copy(),
                       {"drift_sign": drift_sign})


def rescale_to_rho_time(metric_path: DrivingPath) -> DrivingPath:
    """Re-index a metric-time path by its SLE clock."""
    if metric_path.clock is None:
        raise ValueError("path carries no clock")
    c = metric_path.clock
    if np.any(np.diff(c) <= 0):
        raise ValueError("clock is not strictly increasing")
    sigma = None
    if metric_path.sigma is not None:
        sigma = float(np.interp(metric_path.sigma, metric_path.t, c,
                                right=c[-1]))
    phi0 = K.gap_modulus(0.0, metric_path.Z[0], np.asarray(metric_path.betas))
    return replace(metric_path, t=c.copy(), dt=metric_path.dt / (metric_path.kappa * phi0 ** 2),
                   sigma=sigma, kind="rescaled", clock=metric_path.t.copy())


# -- ensembles -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Endpoints:
    """Final states of an ensemble of independently seeded paths."""

    W: np.ndarray
    Z: np.ndarray
    D: np.ndarray
    A: np.ndarray
    U: np.ndarray  # f_t(W_t) at the final (or stopping) state
    steps: np.ndarray
    status: np.ndarray  # 0 survived, 1 within eps, 2 crossed
    seeds: np.ndarray

    @property
    def survived(self) -> np.ndarray:
        return self.status == 0


def _chunks(N: int, threads: int):
    threads = max(1, int(threads))
    edges = np.linspace(0, N, min(threads, max(N, 1)) + 1).astype(int)
    return [(a, b) for a, b in zip(edges, edges[1:]) if b > a]


def _run_chunked(fn, N, threads):
    parts = _chunks(N, threads)
    if len(parts) == 1:
        return [fn(*parts[0])]
    with ThreadPoolExecutor(max_workers=len(parts)) as ex:
        return list(ex.map(lambda ab: fn(*ab), parts))


def simulate_endpoints(cfg: PrevertexConfig, T: float, dt: float, N: int, seed: int,
                       eps_coll: float | None = None, threads: int = 1,
                       order: int = 12) -> Endpoints:
    """Run ``N`` paths (seeds from :func:`path_seeds`) and keep final states.

    Results do not depend on ``threads``: paths are independent and results
    are assembled in seed order.
    """
    nsteps = int(round(T / dt))
    seeds = path_seeds(seed, N)
    eps = default_eps(cfg.kappa, dt) if eps_coll is None else float(eps_coll)
    z0, beta, rho = _arrays(cfg)
    xg, wg = _quad(order)
    batch = K.drive_endpoint_batch if HAVE_NUMBA else KN.drive_endpoint_batch

    def run(a, b):
        dB = increments_matrix(seeds[a:b], nsteps, dt)
        return batch(z0, beta, rho, cfg.kappa, dt, dB, eps, MAX_DEPTH, xg, wg)

    parts = _run_chunked(run, N, threads)
    cols = [np.concatenate([p[i] for p in parts]) for i in range(7)]
    return Endpoints(*cols, seeds)


def metric_values_at_clock(cfg: PrevertexConfig, t_star: float, ds: float, N: int, seed: int,
                           S: float, drift_sign: int = 1, eps_coll: float | None = None,
                           threads: int = 1, order: int = 12):
    """Driver value at SLE time ``t_star`` for ``N`` metric paths run up to
    metric time ``S``. Returns ``(W, status, seeds)``."""
    nsteps = int(round(S / ds))
    seeds = path_seeds(seed, N)
    z0, beta, _ = _arrays(cfg)
    phi0 = K.gap_modulus(0.0, z0, beta)
    eps = 10.0 * math.sqrt(ds) / phi0 if eps_coll is None else float(eps_coll)
    xg, wg = _quad(order)
    batch = K.metric_at_clock_batch if HAVE_NUMBA else KN.metric_at_clock_batch

    def run(a, b):
        dB = increments_matrix(seeds[a:b], nsteps, ds)
        return batch(z0, beta, cfg.kappa, ds, dB, float(drift_sign), eps, float(t_star),
                     MAX_DEPTH, xg, wg)

    parts = _run_chunked(run, N, threads)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
            seeds)
