"""Probability laws driving the channel gain.

Four random variables control the LOS gain: the polar distance r, the polar
angle alpha, the facing direction Omega and the elevation angle theta.
This module provides their parametric laws plus the two derived laws the
statistics need: the AP-to-UE distance d and cos(Omega - alpha), which is
arcsine distributed on [-1, 1].

Orientation laws (elevation angle, measured):
    sitting:  truncated Laplace,  mu = 41.39 deg, sigma = 7.68 deg
    walking:  truncated Gaussian, mu = 29.67 deg, sigma = 7.78 deg

Radial laws (planar position):
    sitting:  uniform over the disk, f_r(r) = 2 r / R_e^2
    walking:  random-waypoint polynomial,
              f_r(r) = sum_i a_i r^(b_i) / R_e^(b_i+1),
              a = [324, -420, 96]/75, b = [1, 3, 5]
The printed waypoint coefficients integrate to 73/75, not 1; the truncation
to the attocell renormalizes, so every downstream statistic is proper.

All sampling is by inverse CDF on an explicit numpy Generator, so results
are reproducible and substreams can be split for parallel work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .scenario import Mobility, Scenario

__all__ = [
    "TruncatedLaplace",
    "TruncatedGaussian",
    "UniformDisk",
    "Rwp",
    "TruncatedRadial",
    "ArcsineLaw",
    "orientation_pdf",
    "orientation_sample",
    "radial_truncated_pdf",
    "distance_pdf",
    "arcsine_pdf_cdf",
    "orientation_law_for",
    "radial_law_for",
]

PI_2 = math.pi / 2.0

RWP_COEFFS = np.array([324.0, -420.0, 96.0]) / 75.0
RWP_EXPONENTS = np.array([1.0, 3.0, 5.0])


# ---------------------------------------------------------------------------
# orientation laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedLaplace:
    """Laplace law restricted to [lo, hi] and renormalized.

    The scale is sigma/sqrt(2) so that `sigma` is the standard deviation of
    the untruncated law.
    """

    mu: float
    sigma: float
    lo: float = 0.0
    hi: float = PI_2

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if not self.lo < self.hi:
            raise ValueError("empty support")

    @property
    def _b(self) -> float:
        return self.sigma / math.sqrt(2.0)

    def _base_cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self._b
        return np.where(z < 0.0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))

    @property
    def _norm(self) -> float:
        return float(self._base_cdf(self.hi) - self._base_cdf(self.lo))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        b = self._b
        inside = (x >= self.lo) & (x <= self.hi)
        val = np.exp(-np.abs(x - self.mu) / b) / (2.0 * b * self._norm)
        return np.where(inside, val, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        lo_mass = self._base_cdf(self.lo)
        q = (self._base_cdf(x) - lo_mass) / self._norm
        return np.clip(q, 0.0, 1.0)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        target = self._base_cdf(self.lo) + q * self._norm
        target = np.clip(target, 1e-320, 1.0 - 1e-16)
        b = self._b
        x = np.where(
            target < 0.5,
            self.mu + b * np.log(2.0 * target),
            self.mu - b * np.log(2.0 * (1.0 - target)),
        )
        return np.clip(x, self.lo, self.hi)

    def mean(self) -> float:
        # int x f(x) dx over each exponential branch, in closed form
        b, mu = self._b, self.mu
        lo, hi = self.lo, self.hi

        def _branch(a, c, sign):
            # int_a^c x exp(sign (x-mu)/b) dx / (2b), sign = +-1
            def prim(x):
                return (x - sign * b) * math.exp(sign * (x - mu) / b)
            return sign * (prim(c) - prim(a)) / 2.0

        left_hi = min(hi, mu)
        total = 0.0
        if lo < left_hi:
            total += _branch(lo, left_hi, 1.0)
        right_lo = max(lo, mu)
        if right_lo < hi:
            total += _branch(right_lo, hi, -1.0)
        return total / self._norm

    def sample(self, rng: np.random.Generator, n: int):
        return self.ppf(rng.random(n))


@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian law restricted to [lo, hi] and renormalized."""

    mu: float
    sigma: float
    lo: float = 0.0
    hi: float = PI_2

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if not self.lo < self.hi:
            raise ValueError("empty support")
        if self._norm <= 0.0:
            raise ValueError("truncation interval carries no probability mass")

    @property
    def _phi_lo(self) -> float:
        return float(ndtr((self.lo - self.mu) / self.sigma))

    @property
    def _norm(self) -> float:
        return float(
            ndtr((self.hi - self.mu) / self.sigma) - ndtr((self.lo - self.mu) / self.sigma)
        )

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mu) / self.sigma
        inside = (x >= self.lo) & (x <= self.hi)
        val = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi) * self._norm)
        return np.where(inside, val, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        q = (ndtr((x - self.mu) / self.sigma) - self._phi_lo) / self._norm
        return np.clip(q, 0.0, 1.0)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        target = np.clip(self._phi_lo + q * self._norm, 1e-320, 1.0 - 1e-16)
        x = self.mu + self.sigma * ndtri(target)
        return np.clip(x, self.lo, self.hi)

    def mean(self) -> float:
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        return self.mu + self.sigma * (phi(a) - phi(b)) / self._norm

    def sample(self, rng: np.random.Generator, n: int):
        return self.ppf(rng.random(n))


def orientation_pdf(law, theta):
    """Density of the elevation-angle law at `theta` (zero outside support)."""
    return law.pdf(theta)


def orientation_sample(law, rng: np.random.Generator, n: int):
    """Inverse-CDF draw of `n` elevation angles from `law`."""
    return law.sample(rng, n)


# ---------------------------------------------------------------------------
# radial laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformDisk:
    """Polar distance of a point uniform over a disk of radius R_e."""

    R_e: float

    def __post_init__(self):
        if self.R_e <= 0.0:
            raise ValueError("outer radius must be positive")

    def pdf_raw(self, r):
        r = np.asarray(r, dtype=float)
        inside = (r >= 0.0) & (r <= self.R_e)
        return np.where(inside, 2.0 * r / self.R_e**2, 0.0)

    def cdf_raw(self, r):
        r = np.clip(np.asarray(r, dtype=float), 0.0, self.R_e)
        return r**2 / self.R_e**2

    def pdf_slope_at_zero(self) -> float:
        """lim_{r->0} f_r(r)/r (finite: the density vanishes linearly)."""
        return 2.0 / self.R_e**2


@dataclass(frozen=True, eq=False)
class Rwp:
    """Stationary polar-distance law of the planar random-waypoint walk."""

    R_e: float
    coeffs: np.ndarray = field(default_factory=lambda: RWP_COEFFS.copy())
    exponents: np.ndarray = field(default_factory=lambda: RWP_EXPONENTS.copy())

    def __post_init__(self):
        if self.R_e <= 0.0:
            raise ValueError("outer radius must be positive")

    def pdf_raw(self, r):
        r = np.asarray(r, dtype=float)
        x = np.clip(r / self.R_e, 0.0, None)
        val = np.zeros_like(x)
        for a, b in zip(self.coeffs, self.exponents):
            val += a * x**b
        val /= self.R_e
        inside = (r >= 0.0) & (r <= self.R_e)
        return np.where(inside, val, 0.0)

    def cdf_raw(self, r):
        r = np.asarray(r, dtype=float)
        x = np.clip(r / self.R_e, 0.0, 1.0)
        val = np.zeros_like(x)
        for a, b in zip(self.coeffs, self.exponents):
            val += a * x ** (b + 1.0) / (b + 1.0)
        return val

    def pdf_slope_at_zero(self) -> float:
        # only the linear term survives at r -> 0
        lead = self.coeffs[self.exponents == 1.0]
        return float(lead.sum()) / self.R_e**2


@dataclass(frozen=True)
class TruncatedRadial:
    """Radial law conditioned on the user lying inside the attocell r <= R."""

    base: UniformDisk | Rwp
    R: float

    def __post_init__(self):
        if not 0.0 < self.R <= self.base.R_e:
            raise ValueError(f"need 0 < R <= R_e, got R={self.R}, R_e={self.base.R_e}")

    @property
    def _norm(self) -> float:
        return float(self.base.cdf_raw(self.R) - self.base.cdf_raw(0.0))

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        inside = (r >= 0.0) & (r <= self.R)
        return np.where(inside, self.base.pdf_raw(r) / self._norm, 0.0)

    def cdf(self, r):
        r = np.clip(np.asarray(r, dtype=float), 0.0, self.R)
        return self.base.cdf_raw(r) / self._norm

    def pdf_slope_at_zero(self) -> float:
        return self.base.pdf_slope_at_zero() / self._norm

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if isinstance(self.base, UniformDisk):
            return self.R * np.sqrt(np.clip(q, 0.0, 1.0))
        # polynomial CDF: interpolate an initial guess, polish with Newton
        grid = np.linspace(0.0, self.R, 513)
        r = np.interp(np.clip(q, 0.0, 1.0), self.cdf(grid), grid)
        for _ in range(4):
            f = self.cdf(r) - q
            df = self.pdf(r)
            step = np.where(df > 0.0, f / np.maximum(df, 1e-300), 0.0)
            r = np.clip(r - step, 0.0, self.R)
        return r

    def sample(self, rng: np.random.Generator, n: int):
        return self.ppf(rng.random(n))


def radial_truncated_pdf(law, R: float, r):
    """Density of the radial law renormalized to the attocell [0, R]."""
    return TruncatedRadial(law, R).pdf(r)


def distance_pdf(scenario: Scenario, d):
    """Density of the AP-to-UE distance d = sqrt(r^2 + (h_a - h_u)^2).

    f_d(d) = d * f~_r(sqrt(d^2 - gap^2)) / sqrt(d^2 - gap^2) on [d_min, d_max].
    At d = d_min the ratio is evaluated by its analytic limit (the radial
    densities vanish linearly at r = 0, so the limit is finite).
    """
    gap = scenario.height_gap
    radial = radial_law_for(scenario)
    d = np.asarray(d, dtype=float)
    d_min, d_max = gap, math.hypot(scenario.cell.R, gap)
    inside = (d >= d_min) & (d <= d_max)
    rsq = np.maximum(d * d - gap * gap, 0.0)
    r = np.sqrt(rsq)
    at_floor = r <= 1e-12 * d_min
    r_safe = np.where(at_floor, 1.0, r)
    val = np.where(
        at_floor,
        d * radial.pdf_slope_at_zero(),
        d * radial.pdf(r_safe) / r_safe,
    )
    return np.where(inside, val, 0.0)


# ---------------------------------------------------------------------------
# arcsine law of cos(Omega - alpha)
# ---------------------------------------------------------------------------

class ArcsineLaw:
    """Law of cos(U) for U uniform: density 1/(pi sqrt(1-x^2)) on [-1, 1].

    The density diverges at the endpoints; `pdf` returns `inf` there and
    numerical consumers must integrate through the endpoints by substitution
    rather than evaluate at them.
    """

    lo = -1.0
    hi = 1.0

    @staticmethod
    def pdf(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1.0
        out[inside] = 1.0 / (math.pi * np.sqrt(1.0 - x[inside] ** 2))
        out[np.abs(x) == 1.0] = np.inf
        return out

    @staticmethod
    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.arcsin(np.clip(x, -1.0, 1.0)) / math.pi + 0.5

    @staticmethod
    def ppf(q):
        q = np.asarray(q, dtype=float)
        return np.sin(math.pi * (np.clip(q, 0.0, 1.0) - 0.5))

    @staticmethod
    def sample(rng: np.random.Generator, n: int):
        return np.cos(rng.uniform(0.0, 2.0 * math.pi, n) - rng.uniform(0.0, 2.0 * math.pi, n))

    @staticmethod
    def partial_moments(u, max_order: int):
        """Upper partial moments T_j(u) = int_u^1 x^j dF(x), j = 0..max_order.

        With x = sin t the weight cancels: T_j(u) = (1/pi) * S_j(arcsin u),
        S_j(t0) = int_{t0}^{pi/2} sin^j t dt, via the power recurrence
        S_j = cos(t0) sin^(j-1)(t0)/j + (j-1)/j * S_{j-2}.
        Saturates correctly for u <= -1 (full moment) and u >= 1 (zero).
        """
        u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
        t0 = np.arcsin(u)
        s, c = u, np.sqrt(np.maximum(1.0 - u * u, 0.0))
        out = np.empty((max_order + 1,) + u.shape)
        s_prev2 = PI_2 - t0            # S_0
        out[0] = s_prev2 / math.pi
        if max_order >= 1:
            s_prev1 = c                # S_1
            out[1] = s_prev1 / math.pi
        for j in range(2, max_order + 1):
            s_j = c * s ** (j - 1) / j + (j - 1) / j * s_prev2
            out[j] = s_j / math.pi
            s_prev2, s_prev1 = s_prev1, s_j
        return out


def arcsine_pdf_cdf(x):
    """(density, cumulative) of the arcsine law, with the step extension of
    the CDF outside [-1, 1]."""
    return ArcsineLaw.pdf(x), ArcsineLaw.cdf(x)


# ---------------------------------------------------------------------------
# scenario wiring
# ---------------------------------------------------------------------------

def orientation_law_for(scenario: Scenario):
    """Elevation-angle law selected by the scenario's activity mode."""
    mu, sigma = scenario.mode.orientation_moments()
    if scenario.mode.tag is Mobility.STATIONARY:
        return TruncatedLaplace(mu=mu, sigma=sigma)
    return TruncatedGaussian(mu=mu, sigma=sigma)


def radial_law_for(scenario: Scenario) -> TruncatedRadial:
    """Attocell-truncated radial law selected by the scenario's activity mode."""
    if scenario.mode.tag is Mobility.STATIONARY:
        base = UniformDisk(R_e=scenario.cell.R_e)
    else:
        base = Rwp(R_e=scenario.cell.R_e)
    return TruncatedRadial(base=base, R=scenario.cell.R)
