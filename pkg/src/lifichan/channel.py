"""Instantaneous LOS gain evaluation and the Monte Carlo sampling engine.

The gain of a single user state (r, alpha, Omega, theta) is

    cos(psi) = [ r cos(Omega - alpha) sin(theta) + (h_a - h_u) cos(theta) ] / d
    H        = ( a(theta) r cos(Omega - alpha) + b(theta) ) / d^(m+3)
               if cos(psi) > cos(Psi_c), else 0

with a(theta) = H0 (h_a-h_u)^m sin(theta), b(theta) = H0 (h_a-h_u)^(m+1)
cos(theta).  The same quantity factors as H0 cos^m(phi) cos(psi) / d^2 with
cos(phi) = (h_a-h_u)/d whenever the field-of-view indicator passes; the two
forms are used as a mutual cross-check in the tests.

Sampling is chunked: every chunk owns a spawned substream and a fixed,
worker-independent slice of the output, so a GainSampleSet is bit-identical
for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import orientation_law_for, radial_law_for
from .scenario import Scenario

__all__ = [
    "UeState",
    "StateSample",
    "GainSampleSet",
    "EmpiricalCdf",
    "incidence_cosine",
    "los_gain",
    "los_gain_arrays",
    "sample_states",
    "sample_gains",
    "empirical_cdf",
]

CHUNK = 1 << 18  # states per substream; fixed so results ignore worker count

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class UeState:
    """One realization of the four driving random variables."""

    r: float
    alpha: float
    Omega: float
    theta: float

    def __post_init__(self):
        if self.r < 0.0:
            raise ValueError("polar distance must be nonnegative")
        if not 0.0 <= self.theta <= math.pi / 2:
            raise ValueError("elevation angle must lie in [0, pi/2]")


@dataclass(frozen=True)
class StateSample:
    """Columnar batch of user states (iterable as UeState records)."""

    r: np.ndarray
    alpha: np.ndarray
    Omega: np.ndarray
    theta: np.ndarray

    def __len__(self):
        return len(self.r)

    def __getitem__(self, i: int) -> UeState:
        return UeState(
            float(self.r[i]), float(self.alpha[i]), float(self.Omega[i]), float(self.theta[i])
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def incidence_cosine(state: UeState, scenario: Scenario) -> float:
    """cos(psi) of the AP as seen along the device normal."""
    gap = scenario.height_gap
    d = math.hypot(state.r, gap)
    num = state.r * math.cos(state.Omega - state.alpha) * math.sin(state.theta)
    num += gap * math.cos(state.theta)
    return num / d


def los_gain_arrays(r, alpha, Omega, theta, scenario: Scenario):
    """Vectorized LOS gain for arrays of user states."""
    gap = scenario.height_gap
    m = scenario.m
    H0 = scenario.H0
    r = np.asarray(r, dtype=float)
    d = np.hypot(r, gap)
    cos_beta = np.cos(np.asarray(Omega) - np.asarray(alpha))
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)
    cos_psi = (r * cos_beta * sin_t + gap * cos_t) / d
    a = H0 * gap**m * sin_t
    b = H0 * gap ** (m + 1.0) * cos_t
    gain = (a * r * cos_beta + b) / d ** (m + 3.0)
    return np.where(cos_psi > scenario.cos_fov, gain, 0.0)


def los_gain(state: UeState, scenario: Scenario) -> float:
    """LOS channel gain of a single user state (0 outside the field of view)."""
    return float(
        los_gain_arrays(
            np.asarray([state.r]),
            np.asarray([state.alpha]),
            np.asarray([state.Omega]),
            np.asarray([state.theta]),
            scenario,
        )[0]
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _chunk_sizes(n: int) -> list[int]:
    sizes = [CHUNK] * (n // CHUNK)
    if n % CHUNK:
        sizes.append(n % CHUNK)
    return sizes


def _draw_chunk(scenario: Scenario, rng: np.random.Generator, size: int) -> StateSample:
    radial = radial_law_for(scenario)
    orient = orientation_law_for(scenario)
    r = radial.ppf(rng.random(size))
    alpha = rng.uniform(0.0, TWO_PI, size)
    Omega = rng.uniform(0.0, TWO_PI, size)
    theta = orient.ppf(rng.random(size))
    return StateSample(r=r, alpha=alpha, Omega=Omega, theta=theta)


def sample_states(scenario: Scenario, n: int, seed: int) -> StateSample:
    """Draw n independent user states: r from the attocell-truncated radial
    law, alpha and Omega uniform on [0, 2 pi), theta from the mode's
    orientation law.  Deterministic in (scenario, n, seed)."""
    if n <= 0:
        raise ValueError("need a positive sample size")
    streams = np.random.SeedSequence(seed).spawn(len(_chunk_sizes(n)))
    parts = [
        _draw_chunk(scenario, np.random.default_rng(ss), size)
        for ss, size in zip(streams, _chunk_sizes(n))
    ]
    return StateSample(
        r=np.concatenate([p.r for p in parts]),
        alpha=np.concatenate([p.alpha for p in parts]),
        Omega=np.concatenate([p.Omega for p in parts]),
        theta=np.concatenate([p.theta for p in parts]),
    )


@dataclass(frozen=True)
class GainSampleSet:
    """Monte Carlo gain draws plus provenance (seed, scenario digest)."""

    gains: np.ndarray
    n_total: int
    n_outage: int
    seed: int
    scenario_digest: str

    def __post_init__(self):
        if self.n_outage > self.n_total:
            raise ValueError("outage count cannot exceed the sample size")

    @property
    def outage_frequency(self) -> float:
        return self.n_outage / self.n_total

    def summary(self) -> dict:
        pos = self.gains[self.gains > 0.0]
        return {
            "n": self.n_total,
            "n_outage": self.n_outage,
            "outage_frequency": self.outage_frequency,
            "mean": float(self.gains.mean()),
            "min_positive": float(pos.min()) if len(pos) else None,
            "max": float(self.gains.max()),
            "seed": self.seed,
            "scenario_digest": self.scenario_digest,
        }

    def write(self, csv_path, json_path=None) -> None:
        """CSV of gains plus a JSON sidecar with counts and provenance."""
        csv_path = Path(csv_path)
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["gain"])
            for g in self.gains:
                writer.writerow([repr(float(g))])
        sidecar = {
            "format_version": 1,
            "n": self.n_total,
            "n_outage": self.n_outage,
            "seed": self.seed,
            "scenario_digest": self.scenario_digest,
        }
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        json_path.write_text(json.dumps(sidecar, indent=2) + "\n")


def sample_gains(scenario: Scenario, n: int, seed: int, workers: int = 1) -> GainSampleSet:
    """Monte Carlo gain sample; identical output for any `workers` value."""
    if n <= 0:
        raise ValueError("need a positive sample size")
    if workers < 1:
        raise ValueError("need at least one worker")
    sizes = _chunk_sizes(n)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(args):
        ss, size = args
        states = _draw_chunk(scenario, np.random.default_rng(ss), size)
        return los_gain_arrays(states.r, states.alpha, states.Omega, states.theta, scenario)

    jobs = list(zip(streams, sizes))
    if workers == 1 or len(jobs) == 1:
        parts = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    gains = np.concatenate(parts)
    n_outage = int(np.count_nonzero(gains == 0.0))
    return GainSampleSet(
        gains=gains,
        n_total=n,
        n_outage=n_outage,
        seed=seed,
        scenario_digest=scenario.digest(),
    )


# ---------------------------------------------------------------------------
# empirical CDF
# ---------------------------------------------------------------------------

class EmpiricalCdf:
    """Right-continuous step CDF of a gain sample (atom at 0 included)."""

    def __init__(self, gains: np.ndarray):
        if len(gains) == 0:
            raise ValueError("empty sample")
        self.sorted = np.sort(np.asarray(gains, dtype=float))
        self.n = len(self.sorted)

    def __call__(self, x):
        return np.searchsorted(self.sorted, np.asarray(x, dtype=float), side="right") / self.n

    def left_limit(self, x):
        """F(x-) , the CDF approached from below (differs at step points)."""
        return np.searchsorted(self.sorted, np.asarray(x, dtype=float), side="left") / self.n

    @property
    def step_points(self) -> np.ndarray:
        return np.unique(self.sorted)


def empirical_cdf(sample: GainSampleSet) -> EmpiricalCdf:
    return EmpiricalCdf(sample.gains)
