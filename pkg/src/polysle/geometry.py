"""Marked-polygon data: corners, prevertex configurations and snapshots.

A configuration lives in the upper half-plane: real prevertices ``z_1 < ... < z_n``
with exterior-angle weights ``beta_k`` (angles in units of pi). The force-point
weights of the driving SDE are ``rho_k = kappa * beta_k / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


class ConfigError(ValueError):
    """Raised for configurations that cannot be simulated at all."""


class _Infinity:
    """Marker for a corner whose position is the point at infinity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "AT_INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


AT_INFINITY = _Infinity()


@dataclass(frozen=True)
class Corner:
    position: complex | _Infinity
    beta: float

    @property
    def alpha(self) -> float:
        return 1.0 - self.beta

    @property
    def at_infinity(self) -> bool:
        return self.position is AT_INFINITY


@dataclass(frozen=True)
class PrevertexConfig:
    prevertices: tuple[float, ...]
    betas: tuple[float, ...]
    kappa: float
    basepoint: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "prevertices", tuple(float(z) for z in self.prevertices))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "kappa", float(self.kappa))
        if len(self.prevertices) != len(self.betas):
            raise ConfigError("prevertices and betas differ in length")
        if self.basepoint != 0.0:
            raise ConfigError("the Schwarz-Christoffel base point is fixed to 0")

    @classmethod
    def from_rhos(cls, prevertices: Sequence[float], rhos: Sequence[float], kappa: float):
        return cls(tuple(prevertices), tuple(rho_beta_convert(rhos, kappa, "to_beta")), kappa)

    @property
    def n(self) -> int:
        return len(self.prevertices)

    @property
    def rhos(self) -> tuple[float, ...]:
        return tuple(rho_beta_convert(self.betas, self.kappa, "to_rho"))

    def with_betas(self, betas) -> "PrevertexConfig":
        return PrevertexConfig(self.prevertices, tuple(betas), self.kappa)


@dataclass(frozen=True)
class PolygonSnapshot:
    corners: tuple[Corner, ...]
    time: float
    closed: bool
    planar: bool = True

    @property
    def turning_sum(self) -> float:
        return exterior_angle_sum([c.beta for c in self.corners])

    def finite_positions(self) -> list[complex]:
        return [c.position for c in self.corners if not c.at_infinity]


@dataclass(frozen=True)
class ValidationReport:
    config: PrevertexConfig
    warnings: tuple[str, ...] = field(default=())

    @property
    def open_polygon(self) -> bool:
        return any(w.startswith("open") for w in self.warnings)

    @property
    def planar(self) -> bool:
        return not any(w.startswith("non-planar") for w in self.warnings)


def rho_beta_convert(values: Sequence[float], kappa: float, direction: str) -> list[float]:
    """Convert between force-point weights rho and exterior angles beta.

    ``direction`` is ``"to_rho"`` (beta -> rho) or ``"to_beta"`` (rho -> beta).
    """
    if not kappa > 0:
        raise ConfigError(f"kappa must be positive, got {kappa}")
    if direction == "to_rho":
        return [0.5 * kappa * float(v) for v in values]
    if direction == "to_beta":
        return [2.0 * float(v) / kappa for v in values]
    raise ValueError(f"unknown direction {direction!r}")


def exterior_angle_sum(betas: Sequence[float]) -> float:
    # fsum keeps the result independent of summation order
    return math.fsum(float(b) for b in betas)


def infinity_angle(betas: Sequence[float]) -> float:
    """Exterior angle (units of pi) of the image of the point at infinity."""
    return 2.0 - exterior_angle_sum(betas)


def validate_config(cfg: PrevertexConfig) -> ValidationReport:
    """Check that ``cfg`` describes a usable half-plane configuration.

    Errors raise :class:`ConfigError`. Soft problems (open or non-planar image
    polygons, corners at infinity) are returned as warnings.
    """
    z = cfg.prevertices
    if len(z) == 0:
        raise ConfigError("empty configuration")
    if not cfg.kappa > 0 or not math.isfinite(cfg.kappa):
        raise ConfigError(f"kappa must be positive and finite, got {cfg.kappa}")
    if not all(math.isfinite(v) for v in z):
        raise ConfigError("prevertices must be finite")
    if not all(math.isfinite(b) for b in cfg.betas):
        raise ConfigError("betas must be finite")
    if any(v == 0.0 for v in z):
        raise ConfigError("a prevertex coincides with the driver start 0")
    if any(b <= a for a, b in zip(z, z[1:])):
        raise ConfigError("prevertices must be strictly increasing")
    # a single force point may sit on either side of 0
    if len(z) > 1:
        if z[0] > 0:
            raise ConfigError("no prevertex left of 0")
        if z[-1] < 0:
            raise ConfigError("no prevertex right of 0")

    warnings = []
    total = exterior_angle_sum(cfg.betas)
    if abs(total - 2.0) > 1e-12:
        warnings.append(f"open polygon: sum of betas is {total:g}, not 2")
    for k, b in enumerate(cfg.betas):
        if 1.0 <= b <= 3.0:
            warnings.append(f"corner {k} at infinity (beta={b:g})")
        elif not -1.0 <= b < 1.0:
            warnings.append(f"non-planar: beta[{k}]={b:g} outside [-1, 1)")
    if abs(total - 2.0) > 1e-12:
        b_inf = 2.0 - total
        if not 1.0 <= b_inf <= 3.0:
            warnings.append(
                f"non-planar: corner at infinity has beta={b_inf:g} outside [1, 3]; "
                "the map is not injective"
            )
    return ValidationReport(cfg, tuple(warnings))
