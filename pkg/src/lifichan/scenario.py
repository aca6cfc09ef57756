"""Attocell geometry and physical constants.

A `Scenario` bundles the access-point optics, the receiver front end, the
cell geometry and the user activity mode.  Everything else in the package
(channel sampling, exact statistics, fitted models, BER analysis) is a
deterministic function of a `Scenario`, so all derived quantities live here:

    m    = -ln 2 / ln cos(phi_half)            Lambertian order
    H0   = rho * R_p * (m+1)/(2*pi) * n_c^2 * A_g / sin^2(Psi_c)
    d    in [h_a - h_u, sqrt(R^2 + (h_a - h_u)^2)]
    H    in {0} U [h*_min, h_max],  h_max = H0 / (h_a - h_u)^2
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field

__all__ = [
    "ApParams",
    "UeParams",
    "CellGeometry",
    "Mobility",
    "MobilityMode",
    "Scenario",
    "GainBounds",
    "lambertian_order",
    "channel_constant",
    "distance_bounds",
    "gain_bounds",
    "table_scenario",
]

# Measured elevation-angle statistics (degrees): sitting users follow a
# truncated Laplace law, walking users a truncated Gaussian law.
MU_THETA_STATIONARY_DEG = 41.39
SIGMA_THETA_STATIONARY_DEG = 7.68
MU_THETA_MOBILE_DEG = 29.67
SIGMA_THETA_MOBILE_DEG = 7.78

# Default receiver heights (m) for sitting / walking activity.
DEFAULT_HU_STATIONARY = 0.9
DEFAULT_HU_MOBILE = 1.4

_MIN_COS_SEMI_ANGLE = 1e-12


class ScenarioError(ValueError):
    """Raised when a scenario (or one of its components) is inconsistent."""


def lambertian_order(phi_half: float) -> float:
    """Lambertian emission order m = -ln 2 / ln cos(phi_half).

    `phi_half` is the half-power semi-angle in radians, 0 < phi_half < pi/2.
    """
    if not 0.0 < phi_half < math.pi / 2:
        raise ScenarioError(f"semi-angle must lie in (0, pi/2), got {phi_half!r}")
    c = math.cos(phi_half)
    if c <= _MIN_COS_SEMI_ANGLE:
        raise ScenarioError(f"semi-angle too close to pi/2 (cos = {c:.3e})")
    return -math.log(2.0) / math.log(c)


@dataclass(frozen=True)
class ApParams:
    """Ceiling access point: mounting height, LED semi-angle, conversion factor."""

    h_a: float = 2.4            # m
    phi_half: float = math.radians(60.0)  # rad
    rho: float = 0.7            # W/A, electrical-to-optical conversion

    def __post_init__(self):
        if self.h_a <= 0.0:
            raise ScenarioError(f"AP height must be positive, got {self.h_a}")
        if self.rho <= 0.0:
            raise ScenarioError(f"conversion factor must be positive, got {self.rho}")
        lambertian_order(self.phi_half)  # validates the semi-angle

    @property
    def m(self) -> float:
        return lambertian_order(self.phi_half)


@dataclass(frozen=True)
class UeParams:
    """Receiver front end: PD responsivity, area, concentrator and field of view."""

    h_u: float = DEFAULT_HU_STATIONARY  # m
    R_p: float = 0.6            # A/W
    A_g: float = 1e-4           # m^2
    n_c: float = 1.0            # refractive index of the concentrator
    Psi_c: float = math.radians(90.0)   # rad, field of view

    def __post_init__(self):
        if self.h_u < 0.0:
            raise ScenarioError(f"UE height must be nonnegative, got {self.h_u}")
        if self.R_p <= 0.0 or self.A_g <= 0.0 or self.n_c <= 0.0:
            raise ScenarioError("R_p, A_g and n_c must all be positive")
        if not 0.0 < self.Psi_c <= math.pi / 2:
            raise ScenarioError(f"field of view must lie in (0, pi/2], got {self.Psi_c}")


@dataclass(frozen=True)
class CellGeometry:
    """Attocell radius R and the radius R_e of the larger area containing it."""

    R: float = 1.0
    R_e: float | None = None    # defaults to R

    def __post_init__(self):
        if self.R <= 0.0:
            raise ScenarioError(f"attocell radius must be positive, got {self.R}")
        if self.R_e is None:
            object.__setattr__(self, "R_e", self.R)
        if self.R > self.R_e:
            raise ScenarioError(f"attocell radius {self.R} exceeds outer radius {self.R_e}")


class Mobility(enum.Enum):
    STATIONARY = "stationary"
    MOBILE = "mobile"


@dataclass(frozen=True)
class MobilityMode:
    """User activity tag plus optional overrides of the measured orientation law.

    The tag selects the radial law (uniform disk vs. random-waypoint), the
    orientation law family (truncated Laplace vs. truncated Gaussian) and the
    default receiver height.  `mu_theta`/`sigma_theta` (radians) override the
    measured orientation moments; None keeps the measured defaults.
    """

    tag: Mobility = Mobility.STATIONARY
    mu_theta: float | None = None
    sigma_theta: float | None = None

    def __post_init__(self):
        if self.sigma_theta is not None and self.sigma_theta <= 0.0:
            raise ScenarioError("orientation sigma override must be positive")

    @property
    def default_h_u(self) -> float:
        return DEFAULT_HU_STATIONARY if self.tag is Mobility.STATIONARY else DEFAULT_HU_MOBILE

    def orientation_moments(self) -> tuple[float, float]:
        """(mu, sigma) of the elevation-angle law in radians."""
        if self.tag is Mobility.STATIONARY:
            mu = math.radians(MU_THETA_STATIONARY_DEG)
            sigma = math.radians(SIGMA_THETA_STATIONARY_DEG)
        else:
            mu = math.radians(MU_THETA_MOBILE_DEG)
            sigma = math.radians(SIGMA_THETA_MOBILE_DEG)
        if self.mu_theta is not None:
            mu = self.mu_theta
        if self.sigma_theta is not None:
            sigma = self.sigma_theta
        return mu, sigma


@dataclass(frozen=True)
class GainBounds:
    """Support landmarks of the gain law: 0 <= h*_min <= h*_max and h_max."""

    h_min: float
    h_star_min: float
    h_star_max: float
    h_max: float


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one attocell configuration."""

    ap: ApParams = field(default_factory=ApParams)
    ue: UeParams = field(default_factory=UeParams)
    cell: CellGeometry = field(default_factory=CellGeometry)
    mode: MobilityMode = field(default_factory=MobilityMode)

    def __post_init__(self):
        if not self.ue.h_u < self.ap.h_a:
            raise ScenarioError(
                f"UE height {self.ue.h_u} must be below AP height {self.ap.h_a}"
            )

    # -- derived geometry -------------------------------------------------

    @property
    def height_gap(self) -> float:
        """Vertical AP-to-UE separation h_a - h_u (m)."""
        return self.ap.h_a - self.ue.h_u

    @property
    def m(self) -> float:
        return self.ap.m

    @property
    def H0(self) -> float:
        return channel_constant(self)

    @property
    def cos_fov(self) -> float:
        """cos(Psi_c), snapped to exactly 0 at a 90-degree field of view."""
        c = math.cos(self.ue.Psi_c)
        return 0.0 if c < 1e-15 else c

    def digest(self) -> str:
        """Stable hex digest of the physical configuration (for artifact headers)."""
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    # -- lossless dict round trip (consumed by the config front end) ------

    def to_dict(self) -> dict:
        return {
            "ap": {"h_a": self.ap.h_a, "phi_half": self.ap.phi_half, "rho": self.ap.rho},
            "ue": {
                "h_u": self.ue.h_u,
                "R_p": self.ue.R_p,
                "A_g": self.ue.A_g,
                "n_c": self.ue.n_c,
                "Psi_c": self.ue.Psi_c,
            },
            "cell": {"R": self.cell.R, "R_e": self.cell.R_e},
            "mode": {
                "tag": self.mode.tag.value,
                "mu_theta": self.mode.mu_theta,
                "sigma_theta": self.mode.sigma_theta,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        mode = data.get("mode", {})
        return cls(
            ap=ApParams(**data.get("ap", {})),
            ue=UeParams(**data.get("ue", {})),
            cell=CellGeometry(**data.get("cell", {})),
            mode=MobilityMode(
                tag=Mobility(mode.get("tag", "stationary")),
                mu_theta=mode.get("mu_theta"),
                sigma_theta=mode.get("sigma_theta"),
            ),
        )


def channel_constant(scenario: Scenario) -> float:
    """Gain constant H0 = rho*R_p*(m+1)/(2 pi) * n_c^2*A_g / sin^2(Psi_c)."""
    ue, ap = scenario.ue, scenario.ap
    s = math.sin(ue.Psi_c)
    if s <= 0.0:
        raise ScenarioError("field of view of zero makes the gain constant undefined")
    return ap.rho * ue.R_p * (ap.m + 1.0) / (2.0 * math.pi) * ue.n_c**2 * ue.A_g / s**2


def distance_bounds(scenario: Scenario) -> tuple[float, float]:
    """AP-to-UE distance range (d_min, d_max) over the attocell."""
    gap = scenario.height_gap
    return gap, math.hypot(scenario.cell.R, gap)


def gain_bounds(scenario: Scenario) -> GainBounds:
    """Support landmarks of the LOS gain law.

    h_max     = H0 / (h_a - h_u)^2                  (nadir, upward-facing UE)
    h*_min    = H0 (h_a-h_u)^m cos(Psi_c) / d_max^(m+2)
    h*_max    = H0 (h_a-h_u)^m cos(Psi_c) / d_min^(m+2) = h_max cos(Psi_c)
    """
    H0 = channel_constant(scenario)
    gap = scenario.height_gap
    m = scenario.m
    d_min, d_max = distance_bounds(scenario)
    cos_fov = scenario.cos_fov
    h_max = H0 / gap**2
    h_star_min = H0 * gap**m * cos_fov / d_max ** (m + 2.0)
    h_star_max = H0 * gap**m * cos_fov / d_min ** (m + 2.0)
    assert h_star_min <= h_max * (1.0 + 1e-12)
    return GainBounds(0.0, h_star_min, h_star_max, h_max)


def table_scenario(
    mobility: Mobility | str = Mobility.STATIONARY,
    R: float = 1.0,
    fov_deg: float = 90.0,
    R_e: float | None = None,
) -> Scenario:
    """Convenience constructor for the benchmark attocell configurations.

    Uses the standard constants (h_a = 2.4 m, 60 deg semi-angle, rho = 0.7 W/A,
    R_p = 0.6 A/W, A_g = 1 cm^2, n_c = 1) with the activity-specific default
    receiver height.
    """
    mode = MobilityMode(tag=Mobility(mobility))
    return Scenario(
        ap=ApParams(),
        ue=UeParams(h_u=mode.default_h_u, Psi_c=math.radians(fov_deg)),
        cell=CellGeometry(R=R, R_e=R_e),
        mode=mode,
    )
