"""Model validation (Kolmogorov-Smirnov distance) and link error analytics.

The M-PAM bit error rate conditioned on a gain h is

    P_e(h) = 2 (M-1)/M * Q( h P_opt / (sigma (M-1)) )

with Q the Gaussian tail.  Averaging over a GainLaw adds the outage atom,
which pins the high-power floor at (M-1)/M * p0 (p0/2 for OOK): once the
continuous part is driven error-free, only out-of-view states still err.

The multi-cell evaluator places four extra APs at (+-D_c, 0), (0, +-D_c)
around the reference cell; all five transmit the same signal, so the
photodiode collects the straight sum of the per-AP LOS gains, each gated
by its own field-of-view check under the same device orientation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .channel import EmpiricalCdf, UeState, _chunk_sizes
from .distributions import orientation_law_for, radial_law_for
from .exact import DEFAULT_SPEC, GainLaw, QuadratureSpec, outage_probability
from .quadrature import integrate_adaptive
from .scenario import CellGeometry, Scenario

__all__ = [
    "BerCurve",
    "MulticellLayout",
    "MulticellGainSample",
    "ksd",
    "default_probe_grid",
    "qfunc",
    "pam_ber_instant",
    "average_ber",
    "monte_carlo_ber",
    "ber_floor",
    "multicell_gain",
    "multicell_gain_samples",
    "multicell_ber",
    "dbm_to_watts",
    "watts_to_dbm",
]

_Q_CUTOFF = 40.0  # Q(x) underflows to exactly 0 in double precision near 38


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov distance
# ---------------------------------------------------------------------------

def _cdf_right(obj, x: np.ndarray) -> np.ndarray:
    if isinstance(obj, GainLaw):
        if obj.cdf is None:
            raise ValueError("GainLaw has no CDF evaluator")
        return np.asarray(obj.cdf(x), dtype=float)
    return np.asarray(obj(x), dtype=float)


def _cdf_left(obj, x: np.ndarray) -> np.ndarray:
    """CDF approached from below; differs from the right value at atoms."""
    if isinstance(obj, EmpiricalCdf):
        return np.asarray(obj.left_limit(x), dtype=float)
    if isinstance(obj, GainLaw):
        right = _cdf_right(obj, x)
        return np.where(x <= 0.0, 0.0, right)  # single atom at zero gain
    left = getattr(obj, "left_limit", None)
    if left is not None:
        return np.asarray(left(x), dtype=float)
    return _cdf_right(obj, x)


def ksd(cdf_a, cdf_b, probe_grid) -> float:
    """max |F_a - F_b| over the probe grid, approached from both sides.

    Arguments may be plain callables, GainLaw objects or EmpiricalCdf
    step functions; left limits are compared with left limits so shared
    atoms (the outage mass at zero) do not inflate the distance.
    """
    x = np.sort(np.asarray(probe_grid, dtype=float))
    right = np.abs(_cdf_right(cdf_a, x) - _cdf_right(cdf_b, x)).max()
    left = np.abs(_cdf_left(cdf_a, x) - _cdf_left(cdf_b, x)).max()
    return float(min(max(right, left), 1.0))


def default_probe_grid(*cdfs, support: tuple[float, float], n_dense: int = 4001) -> np.ndarray:
    """Dense refinement of the support plus every step point of the
    empirical arguments."""
    lo, hi = support
    pieces = [np.linspace(min(lo, 0.0), hi, n_dense)]
    for obj in cdfs:
        if isinstance(obj, EmpiricalCdf):
            pieces.append(obj.step_points)
    return np.unique(np.concatenate(pieces))


# ---------------------------------------------------------------------------
# BER primitives
# ---------------------------------------------------------------------------

def qfunc(x):
    """Gaussian tail Q(x) = erfc(x / sqrt 2) / 2."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def pam_ber_instant(h, P_opt: float, sigma: float, M: int = 2):
    """Instantaneous M-PAM error rate at gain h."""
    if M < 2:
        raise ValueError("modulation order must be at least 2")
    if sigma <= 0.0:
        raise ValueError("noise RMS must be positive")
    arg = np.asarray(h, dtype=float) * P_opt / (sigma * (M - 1))
    return (2.0 * (M - 1) / M) * qfunc(arg)


def average_ber(
    law: GainLaw,
    P_opt: float,
    sigma: float,
    M: int = 2,
    spec: QuadratureSpec | None = None,
) -> float:
    """Error rate averaged over a gain law: the outage atom at Q(0) plus the
    quadrature of the continuous density against the instantaneous BER."""
    spec = spec or DEFAULT_SPEC
    if law.density is None:
        raise ValueError("gain law carries no density; use monte_carlo_ber instead")
    lo, hi = law.support
    atom = law.p0 * float(pam_ber_instant(0.0, P_opt, sigma, M))
    # beyond the Q cutoff the integrand is exactly zero in double precision
    h_cut = _Q_CUTOFF * sigma * (M - 1) / P_opt if P_opt > 0.0 else math.inf
    upper = min(hi, h_cut)
    if upper <= lo:
        return atom
    breaks = [b * sigma * (M - 1) / P_opt for b in (1.0, 4.0, 16.0)] if P_opt > 0 else []

    def integrand(h):
        return np.asarray(law.density(h), dtype=float) * pam_ber_instant(h, P_opt, sigma, M)

    val = integrate_adaptive(
        integrand, lo, upper,
        breakpoints=[b for b in breaks if lo < b < upper],
        rel_tol=max(spec.rel_tol, 1e-10), abs_tol=1e-16, max_depth=spec.max_depth,
    )
    return float(min(max(atom + val, 0.0), (M - 1) / M))


def monte_carlo_ber(gains: np.ndarray, P_opt, sigma: float, M: int = 2):
    """Plain average of the instantaneous BER over sampled gains.

    `P_opt` may be an array; returns matching shape.  Also returns the
    standard error(s) of the estimate."""
    g = np.asarray(gains, dtype=float)
    powers = np.atleast_1d(np.asarray(P_opt, dtype=float))
    means = np.empty(len(powers))
    ses = np.empty(len(powers))
    for i, p in enumerate(powers):
        vals = pam_ber_instant(g, p, sigma, M)
        means[i] = vals.mean()
        ses[i] = vals.std(ddof=1) / math.sqrt(len(vals))
    if np.isscalar(P_opt) or np.asarray(P_opt).ndim == 0:
        return float(means[0]), float(ses[0])
    return means, ses


def ber_floor(scenario: Scenario, M: int = 2, spec: QuadratureSpec | None = None) -> float:
    """High-power BER limit (M-1)/M * p0; equals p0/2 for OOK.

    Only the outage atom survives arbitrarily large power, and it errs at
    the zero-SNR rate 2(M-1)/M * Q(0)."""
    if M < 2:
        raise ValueError("modulation order must be at least 2")
    p0 = outage_probability(scenario, spec)
    return (M - 1) / M * p0


@dataclass(frozen=True)
class BerCurve:
    """Average BER versus transmitted optical power for one gain law."""

    M: int
    sigma: float
    points: tuple[tuple[float, float], ...]   # (P_opt watts, ber)
    provenance: str
    scenario_digest: str
    floor: float | None = None

    def __post_init__(self):
        for _, ber in self.points:
            if not 0.0 <= ber <= 0.5 + 1e-12:
                raise ValueError(f"BER {ber} outside [0, 0.5]")

    def write(self, csv_path, json_path=None) -> None:
        csv_path = Path(csv_path)
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["P_opt_dBm", "ber"])
            for p, ber in self.points:
                writer.writerow([repr(watts_to_dbm(p)), repr(float(ber))])
        header = {
            "format_version": 1,
            "M": self.M,
            "sigma": self.sigma,
            "provenance": self.provenance,
            "scenario_digest": self.scenario_digest,
            "floor": self.floor,
        }
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        json_path.write_text(json.dumps(header, indent=2) + "\n")


# ---------------------------------------------------------------------------
# multi-cell layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MulticellLayout:
    """Five co-transmitting APs: the reference cell plus four neighbours."""

    R_c: float
    D_c: float

    def __post_init__(self):
        if self.R_c <= 0.0 or self.D_c <= 0.0:
            raise ValueError("cell radius and spacing must be positive")

    @property
    def ap_positions(self) -> tuple[tuple[float, float], ...]:
        d = self.D_c
        return ((0.0, 0.0), (d, 0.0), (-d, 0.0), (0.0, d), (0.0, -d))


def _multicell_gain_arrays(x, y, Omega, theta, layout: MulticellLayout, scenario: Scenario):
    """Sum of per-AP LOS gains (and the center AP's own gain) for arrays of
    user positions and one shared orientation per user."""
    gap = scenario.height_gap
    m = scenario.m
    H0 = scenario.H0
    cos_fov = scenario.cos_fov
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    cos_O, sin_O = np.cos(Omega), np.sin(Omega)
    total = np.zeros_like(np.asarray(x, dtype=float))
    center = None
    for (ax, ay) in layout.ap_positions:
        dx = ax - x
        dy = ay - y
        r_i = np.hypot(dx, dy)
        d_i = np.sqrt(r_i * r_i + gap * gap)
        cos_psi = (gap * cos_t - sin_t * (dx * cos_O + dy * sin_O)) / d_i
        gain = H0 * (gap / d_i) ** m * cos_psi / d_i**2
        gain = np.where(cos_psi > cos_fov, gain, 0.0)
        total += gain
        if ax == 0.0 and ay == 0.0:
            center = gain
    return total, center


def multicell_gain(state: UeState, layout: MulticellLayout, scenario: Scenario) -> float:
    """Aggregate five-AP gain for one user state in the reference cell."""
    if state.r > layout.R_c:
        raise ValueError("user lies outside the reference cell")
    x = np.asarray([state.r * math.cos(state.alpha)])
    y = np.asarray([state.r * math.sin(state.alpha)])
    total, _ = _multicell_gain_arrays(
        x, y, np.asarray([state.Omega]), np.asarray([state.theta]), layout, scenario
    )
    return float(total[0])


@dataclass(frozen=True)
class MulticellGainSample:
    """Paired aggregate and center-only gains on common random draws."""

    aggregate: np.ndarray
    center_only: np.ndarray
    seed: int


def _reference_cell_scenario(scenario: Scenario, R_c: float) -> Scenario:
    cell = CellGeometry(R=R_c, R_e=max(scenario.cell.R_e, R_c))
    return replace(scenario, cell=cell)


def multicell_gain_samples(
    layout: MulticellLayout, scenario: Scenario, n: int, seed: int
) -> MulticellGainSample:
    """Draw users in the reference cell and evaluate five-AP and center-only
    gains on the same states (enables paired comparisons)."""
    if n <= 0:
        raise ValueError("need a positive sample size")
    ref = _reference_cell_scenario(scenario, layout.R_c)
    radial = radial_law_for(ref)
    orient = orientation_law_for(ref)
    sizes = _chunk_sizes(n)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    agg_parts, cen_parts = [], []
    for ss, size in zip(streams, sizes):
        rng = np.random.default_rng(ss)
        r = radial.ppf(rng.random(size))
        alpha = rng.uniform(0.0, 2.0 * math.pi, size)
        Omega = rng.uniform(0.0, 2.0 * math.pi, size)
        theta = orient.ppf(rng.random(size))
        total, center = _multicell_gain_arrays(
            r * np.cos(alpha), r * np.sin(alpha), Omega, theta, layout, ref
        )
        agg_parts.append(total)
        cen_parts.append(center)
    return MulticellGainSample(
        aggregate=np.concatenate(agg_parts),
        center_only=np.concatenate(cen_parts),
        seed=seed,
    )


def multicell_ber(
    layout: MulticellLayout,
    scenario: Scenario,
    P_opt,
    sigma: float,
    M: int = 2,
    n: int = 10**5,
    seed: int = 0,
):
    """Monte Carlo BER of the five-AP layout; deterministic in the seed.

    `P_opt` may be a scalar or an array of powers; returns (ber, se) with
    matching shape."""
    if n < 10**5:
        raise ValueError("need at least 1e5 draws for a stable estimate")
    sample = multicell_gain_samples(layout, scenario, n, seed)
    return monte_carlo_ber(sample.aggregate, P_opt, sigma, M)
