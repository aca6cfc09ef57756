"""Approximate channel laws and moment-matching estimation.

Four parametric families approximate the continuous part of the gain law,
all shaped like h^(-nu) times a kernel on the support [h_lo, h_max]:

    MTL   h^(-nu) exp(-|h - mu_H| / b_H)                 (stationary users)
    MB    h^(-nu) z^(alpha_H - 1) (1 - z)^(beta_H - 1)   (stationary users)
    SMTG  sum_j h^(-nu_j) exp(-(h - mu_Hj)^2 / (2 sigma_Hj^2))   (mobile)
    SMB   sum_j h^(-nu_j) z^(alpha_Hj - 1) (1 - z)^(beta_Hj - 1) (mobile)

with z = (h - h_lo)/(h_max - h_lo).  The mixture adds the outage atom p0 at
zero, so the continuous part carries mass 1 - p0.  Parameters are estimated
by matching conditional (non-outage) moments of the exact law: 3 moments
for the single-kernel families, 9 for the three-kernel sums, minimizing
sum_i (m_i_model / m_i_target - 1)^2 by multi-start Nelder-Mead with a
Levenberg-Marquardt polish.

All kernel integrals run on the gain rescaled by h_max with tanh-sinh
(double-exponential) nodes, which absorb the Beta endpoint singularities
and the h^(-nu) edge without special-casing.  When the field of view makes
the true support touch zero, the fitting support is floored at
1e-4 * h_max so h^(-nu) stays integrable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import least_squares, minimize

from .exact import DEFAULT_SPEC, GainLaw, QuadratureSpec, exact_moments_batch, outage_probability
from .quadrature import tanh_sinh_nodes
from .scenario import Mobility, Scenario, gain_bounds

__all__ = [
    "MtlParams",
    "MbParams",
    "SmtgParams",
    "SmbParams",
    "FittedModel",
    "FitError",
    "FitOptions",
    "model_pdf",
    "normalization",
    "model_moments",
    "fit_by_moments",
    "model_gain_law",
    "default_model_tags",
    "mtl_kernel_integral_closed_form",
]

SUPPORT_FLOOR_FRACTION = 1e-4   # of h_max, applied when h*_min is 0
_TS_LEVEL = 6
_NU_MAX = 12.0


class FitError(RuntimeError):
    """Moment-matching failed to produce finite parameters.

    Carries `residual` (best value seen) and `trace` (per-start residuals).
    """

    def __init__(self, message, residual=None, trace=None):
        super().__init__(message)
        self.residual = residual
        self.trace = trace


@dataclass(frozen=True)
class MtlParams:
    nu: float
    mu_H: float
    b_H: float

    def __post_init__(self):
        if self.nu <= 0.0 or self.b_H <= 0.0:
            raise ValueError("nu and b_H must be positive")


@dataclass(frozen=True)
class MbParams:
    nu: float
    alpha_H: float
    beta_H: float

    def __post_init__(self):
        if min(self.nu, self.alpha_H, self.beta_H) <= 0.0:
            raise ValueError("nu, alpha_H and beta_H must be positive")


@dataclass(frozen=True)
class SmtgParams:
    components: tuple[tuple[float, float, float], ...]  # (nu, mu_H, sigma_H) x3

    def __post_init__(self):
        if len(self.components) != 3:
            raise ValueError("three components required")
        for nu, _, sigma in self.components:
            if nu <= 0.0 or sigma <= 0.0:
                raise ValueError("nu and sigma_H must be positive")


@dataclass(frozen=True)
class SmbParams:
    components: tuple[tuple[float, float, float], ...]  # (nu, alpha_H, beta_H) x3

    def __post_init__(self):
        if len(self.components) != 3:
            raise ValueError("three components required")
        for nu, alpha, beta in self.components:
            if min(nu, alpha, beta) <= 0.0:
                raise ValueError("nu, alpha_H and beta_H must be positive")


MODEL_TAGS = ("mtl", "mb", "smtg", "smb")
_PARAM_TYPES = {"mtl": MtlParams, "mb": MbParams, "smtg": SmtgParams, "smb": SmbParams}


def default_model_tags(mode: Mobility) -> tuple[str, str]:
    """Model families designated for an activity mode."""
    return ("mtl", "mb") if mode is Mobility.STATIONARY else ("smtg", "smb")


def tags_for_mode(tag: str, mode: Mobility) -> bool:
    return tag in default_model_tags(mode)


# ---------------------------------------------------------------------------
# kernels on the rescaled support [l, 1]
# ---------------------------------------------------------------------------

def _scaled_components(tag: str, params, h_max: float, lo: float):
    """Per-component (nu, a, b) tuples with location/scale in h/h_max units."""
    if tag == "mtl":
        return [(params.nu, params.mu_H / h_max, params.b_H / h_max)]
    if tag == "mb":
        return [(params.nu, params.alpha_H, params.beta_H)]
    if tag == "smtg":
        return [(nu, mu / h_max, sig / h_max) for nu, mu, sig in params.components]
    if tag == "smb":
        return [(nu, a, b) for nu, a, b in params.components]
    raise ValueError(f"unknown model tag {tag!r}")


def _kernel_scaled(tag: str, comp, x: np.ndarray, l: float) -> np.ndarray:
    """One unnormalized component kernel at scaled gains x in [l, 1]."""
    nu, p1, p2 = comp
    with np.errstate(over="ignore", divide="ignore"):
        lead = x ** (-nu)
        if tag in ("mtl",):
            val = lead * np.exp(-np.abs(x - p1) / p2)
        elif tag in ("smtg",):
            val = lead * np.exp(-((x - p1) ** 2) / (2.0 * p2**2))
        else:  # beta kernels; clip z away from {0, 1} so z^(a-1) stays finite
            z = np.clip((x - l) / (1.0 - l), 1e-17, 1.0 - 1e-17)
            val = lead * z ** (p1 - 1.0) * (1.0 - z) ** (p2 - 1.0)
    return val


class _KernelQuad:
    """tanh-sinh nodes on [l, 1] with cached scaled-gain powers.

    `moment_table(tag, comps, orders)` returns the matrix of
    int x^i * kernel_j(x) dx for i in {0} + orders, j over components.
    """

    def __init__(self, l: float, max_order: int, split: float | None = None):
        x, w = tanh_sinh_nodes(_TS_LEVEL)
        pieces = []
        edges = [l, 1.0] if split is None or not l < split < 1.0 else [l, split, 1.0]
        for a, b in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            pieces.append((np.clip(mid + half * x, l, 1.0), half * w))
        self.x = np.concatenate([p[0] for p in pieces])
        self.w = np.concatenate([p[1] for p in pieces])
        self.l = l
        self.xpow = np.vstack([self.x**i for i in range(max_order + 1)])

    def moment_table(self, tag: str, comps, orders: Sequence[int]) -> np.ndarray:
        rows = [0] + list(orders)
        out = np.empty((len(rows), len(comps)))
        for j, comp in enumerate(comps):
            kern = _kernel_scaled(tag, comp, self.x, self.l) * self.w
            if not np.all(np.isfinite(kern)):
                out[:, j] = np.nan
                continue
            out[:, j] = self.xpow[rows] @ kern
        return out


def _comp_weights(comps, h_max: float) -> np.ndarray:
    """Relative physical weights of the scaled component kernels.

    The physical leading factor h^(-nu_j) equals h_max^(-nu_j) times its
    scaled counterpart; normalizing by the largest factor keeps every
    weight in (0, 1] so mixtures of very different nu_j stay finite.
    """
    nus = np.asarray([c[0] for c in comps], dtype=float)
    return np.power(h_max, nus.max() - nus)


def fit_support(scenario: Scenario) -> tuple[float, float]:
    """Support the approximate families live on; the lower edge is floored
    at a small fraction of h_max when the true support touches zero."""
    b = gain_bounds(scenario)
    lo = max(b.h_star_min, SUPPORT_FLOOR_FRACTION * b.h_max)
    return lo, b.h_max


@dataclass
class FittedModel:
    """One fitted approximate law plus its fit diagnostics."""

    tag: str
    params: MtlParams | MbParams | SmtgParams | SmbParams
    p0: float
    support: tuple[float, float]
    residual: float = math.nan
    matched_orders: tuple[int, ...] = ()
    target_moments: tuple[float, ...] = ()      # conditional, physical units
    achieved_moments: tuple[float, ...] = ()

    def pdf(self, h):
        return model_pdf(self, h)

    def moment(self, i: int) -> float:
        return model_moments(self, i)

    # -- JSON artifact ----------------------------------------------------

    def to_dict(self) -> dict:
        if isinstance(self.params, (MtlParams, MbParams)):
            pd = self.params.__dict__.copy()
        else:
            pd = {"components": [list(c) for c in self.params.components]}
        return {
            "format_version": 1,
            "tag": self.tag,
            "params": pd,
            "p0": self.p0,
            "support": list(self.support),
            "residual": self.residual,
            "matched_moments": {
                "orders": list(self.matched_orders),
                "target": list(self.target_moments),
                "achieved": list(self.achieved_moments),
            },
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "FittedModel":
        tag = data["tag"]
        ptype = _PARAM_TYPES[tag]
        raw = data["params"]
        if tag in ("mtl", "mb"):
            params = ptype(**raw)
        else:
            params = ptype(components=tuple(tuple(c) for c in raw["components"]))
        mm = data.get("matched_moments", {})
        return cls(
            tag=tag,
            params=params,
            p0=data["p0"],
            support=tuple(data["support"]),
            residual=data.get("residual", math.nan),
            matched_orders=tuple(mm.get("orders", ())),
            target_moments=tuple(mm.get("target", ())),
            achieved_moments=tuple(mm.get("achieved", ())),
        )


def _model_quad(model: FittedModel, max_order: int = 0) -> tuple[_KernelQuad, list]:
    lo, h_max = model.support
    l = lo / h_max
    comps = _scaled_components(model.tag, model.params, h_max, l)
    split = comps[0][1] if model.tag == "mtl" else None
    quad = _KernelQuad(l, max_order, split=split)
    return quad, comps


def normalization(model: FittedModel) -> float:
    """Mixture constant M = (int of the unnormalized kernel sum) / (1 - p0).

    Dividing the physical kernel sum by M makes the continuous part
    integrate to 1 - p0, so the law including the atom is a probability
    law.  Returned in physical units, matching the h^(-nu) leading factors.
    """
    quad, comps = _model_quad(model)
    table = quad.moment_table(model.tag, comps, ())
    cw = _comp_weights(comps, model.support[1])
    nu_max = max(c[0] for c in comps)
    total = float(np.dot(cw, table[0]))
    if not math.isfinite(total) or total <= 0.0:
        raise FitError(f"kernel integral diverged for {model.tag} params {model.params}")
    h_max = model.support[1]
    return total * h_max ** (1.0 - nu_max) / (1.0 - model.p0)


def model_pdf(model: FittedModel, h) -> np.ndarray:
    """Continuous-part density of the fitted law (zero outside support)."""
    lo, h_max = model.support
    l = lo / h_max
    h = np.asarray(h, dtype=float)
    x = np.clip(h / h_max, l, 1.0)
    comps = _scaled_components(model.tag, model.params, h_max, l)
    cw = _comp_weights(comps, h_max)
    quad = _KernelQuad(l, 0, split=comps[0][1] if model.tag == "mtl" else None)
    table = quad.moment_table(model.tag, comps, ())
    denom = float(np.dot(cw, table[0])) * h_max
    val = np.zeros_like(x)
    for wgt, comp in zip(cw, comps):
        val += wgt * _kernel_scaled(model.tag, comp, x, l)
    out = (1.0 - model.p0) * val / denom
    inside = (h >= lo) & (h <= h_max)
    return np.where(inside, out, 0.0)


def model_moments(model: FittedModel, i: int) -> float:
    """Conditional (non-outage) i-th moment: the ratio of the i-weighted to
    unweighted kernel integrals, in physical gain units."""
    if i < 1:
        raise ValueError("moment order must be >= 1")
    quad, comps = _model_quad(model, max_order=i)
    table = quad.moment_table(model.tag, comps, (i,))
    cw = _comp_weights(comps, model.support[1])
    denom = float(np.dot(cw, table[0]))
    if not np.isfinite(denom) or denom <= 0.0:
        raise FitError(f"normalization diverged for {model.tag}")
    return float(np.dot(cw, table[1]) / denom) * model.support[1] ** i


def model_gain_law(model: FittedModel, grid_size: int = 1024) -> GainLaw:
    """GainLaw view of a fitted model with fast density and CDF callables."""
    lo, h_max = model.support
    l = lo / h_max
    quad, comps = _model_quad(model)

    grid = np.unique(np.concatenate([
        lo + (h_max - lo) * 0.5 * (1.0 - np.cos(np.linspace(0.0, math.pi, grid_size))),
        np.asarray([lo, h_max]),
    ]))
    # cumulative mass between grid nodes from the tanh-sinh node set
    xs_phys = quad.x * h_max
    cw = _comp_weights(comps, h_max)
    kern = np.zeros_like(quad.x)
    for wgt, comp in zip(cw, comps):
        kern += wgt * _kernel_scaled(model.tag, comp, quad.x, l)
    weights = kern * quad.w
    total = weights.sum()
    order = np.argsort(xs_phys)
    xs_sorted = xs_phys[order]
    cum = np.cumsum(weights[order]) / total
    cdf_grid = np.interp(grid, xs_sorted, cum, left=0.0, right=1.0)
    cdf_vals = model.p0 + (1.0 - model.p0) * np.maximum.accumulate(np.clip(cdf_grid, 0.0, 1.0))
    cdf_interp = PchipInterpolator(grid, cdf_vals, extrapolate=False)

    def cdf(h):
        h = np.asarray(h, dtype=float)
        out = cdf_interp(np.clip(h, lo, h_max))
        out = np.where(h < 0.0, 0.0, np.where(h < lo, model.p0, out))
        out = np.where(h >= h_max, 1.0, out)
        return np.clip(np.nan_to_num(out, nan=model.p0), 0.0, 1.0)

    return GainLaw(
        p0=model.p0,
        support=(lo, h_max),
        density=lambda h: model_pdf(model, h),
        provenance=f"fitted:{model.tag}",
        cdf=cdf,
    )


# ---------------------------------------------------------------------------
# moment matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitOptions:
    n_starts: int = 8
    nm_max_iter: int = 4000
    residual_goal: float = 1e-8


def _sigmoid(p):
    with np.errstate(over="ignore"):
        return np.where(p >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(p))),
                        np.exp(-np.abs(p)) / (1.0 + np.exp(-np.abs(p))))


def _logit(q):
    q = min(max(q, 1e-9), 1.0 - 1e-9)
    return math.log(q / (1.0 - q))


class _Problem:
    """Decodes optimizer vectors into scaled components and scores them."""

    def __init__(self, tag: str, l: float, h_max: float, orders: tuple[int, ...],
                 targets_scaled: np.ndarray):
        self.tag = tag
        self.l = l
        self.h_max = h_max
        self.orders = orders
        self.targets = targets_scaled
        self.max_order = max(orders)
        self.quad = _KernelQuad(l, self.max_order)
        self.n_comp = 1 if tag in ("mtl", "mb") else 3

    def decode(self, p: np.ndarray):
        comps = []
        for j in range(self.n_comp):
            a, b, c = p[3 * j : 3 * j + 3]
            nu = float(np.clip(math.exp(min(a, 50.0)), 1e-3, _NU_MAX))
            if self.tag in ("mtl", "smtg"):
                loc = self.l + (1.0 - self.l) * float(_sigmoid(b))
                scale = float(np.clip(math.exp(min(c, 50.0)), 1e-4, 10.0))
                comps.append((nu, loc, scale))
            else:
                alpha = float(np.clip(math.exp(min(b, 50.0)), 0.02, 60.0))
                beta = float(np.clip(math.exp(min(c, 50.0)), 0.02, 60.0))
                comps.append((nu, alpha, beta))
        return comps

    def moments_scaled(self, comps) -> np.ndarray | None:
        # the mtl kernel has a kink at its location parameter: rebuild the
        # node set split there for this candidate
        quad = _KernelQuad(self.l, self.max_order, split=comps[0][1]) if self.tag == "mtl" \
            else self.quad
        table = quad.moment_table(self.tag, comps, self.orders)
        cw = _comp_weights(comps, self.h_max)
        denom = float(np.dot(cw, table[0]))
        if not np.isfinite(denom) or denom <= 0.0:
            return None
        mom = table[1:] @ cw / denom
        return mom if np.all(np.isfinite(mom)) else None

    def residual_vector(self, p: np.ndarray) -> np.ndarray:
        mom = self.moments_scaled(self.decode(p))
        if mom is None:
            return np.full(len(self.orders), 1e6)
        return mom / self.targets - 1.0

    def objective(self, p: np.ndarray) -> float:
        r = self.residual_vector(p)
        return float(np.dot(r, r))


def _starts(tag: str, l: float, targets: np.ndarray, n_starts: int) -> list[np.ndarray]:
    """Deterministic multi-start seeds spanning the transformed box."""
    m1 = float(targets[0])
    m2 = float(targets[1]) if len(targets) > 1 else m1**2 * 1.2
    spread = math.sqrt(max(m2 - m1**2, 1e-6))
    frac = min(max((m1 - l) / (1.0 - l), 0.05), 0.95)
    starts = []
    if tag in ("mtl", "smtg"):
        for nu in (0.3, 1.5):
            for df in (-0.15, 0.15):
                for sc in (0.6, 2.0):
                    p = []
                    for j in range(1 if tag == "mtl" else 3):
                        off = (j - 1) * 0.2 if tag == "smtg" else 0.0
                        p += [math.log(nu), _logit(min(max(frac + df + off, 0.02), 0.98)),
                              math.log(min(max(spread * sc, 1e-3), 5.0))]
                    starts.append(np.asarray(p))
    else:
        for nu in (0.3, 1.5):
            for ab in ((1.5, 1.5), (0.8, 3.0)):
                for swap in (False, True):
                    a, b = (ab[1], ab[0]) if swap else ab
                    p = []
                    for j in range(1 if tag == "mb" else 3):
                        aj = a * (1.0 + 0.3 * (j - 1)) if tag == "smb" else a
                        p += [math.log(nu), math.log(aj), math.log(b)]
                    starts.append(np.asarray(p))
    return starts[:n_starts]


def fit_by_moments(
    scenario: Scenario,
    model_tag: str,
    exact_moments: Sequence[float] | None = None,
    options: FitOptions | None = None,
    spec: QuadratureSpec | None = None,
) -> FittedModel:
    """Estimate model parameters by matching conditional gain moments.

    `exact_moments` are the non-outage moments int h^i g(h) dh for
    i = 1..3 (mtl/mb) or i = 1..9 (smtg/smb); if omitted they are computed
    from the exact law.  Matching is on the conditional moments (each
    target divided by 1 - p0), which is the only normalization under which
    the model-side ratio and the exact side agree family-wise.  The outage
    mass is carried over unchanged; only the continuous shape is fitted.
    """
    tag = model_tag.lower()
    if tag not in MODEL_TAGS:
        raise ValueError(f"unknown model tag {model_tag!r}")
    options = options or FitOptions()
    spec = spec or DEFAULT_SPEC
    n_orders = 3 if tag in ("mtl", "mb") else 9
    orders = tuple(range(1, n_orders + 1))
    if exact_moments is None:
        exact_moments = exact_moments_batch(scenario, orders, spec)
    if len(exact_moments) != n_orders:
        raise ValueError(f"{tag} fit needs {n_orders} moments, got {len(exact_moments)}")

    p0 = outage_probability(scenario, spec)
    lo, h_max = fit_support(scenario)
    l = lo / h_max
    scale = h_max ** np.arange(1, n_orders + 1, dtype=float)
    targets_scaled = np.asarray(exact_moments, dtype=float) / scale / (1.0 - p0)
    if np.any(targets_scaled <= 0.0):
        raise ValueError("moments must be positive")

    problem = _Problem(tag, l, h_max, orders, targets_scaled)
    trace = []
    best = None
    for idx, start in enumerate(_starts(tag, l, targets_scaled, options.n_starts)):
        res = minimize(
            problem.objective, start, method="Nelder-Mead",
            options={"maxiter": options.nm_max_iter, "xatol": 1e-10, "fatol": 1e-14},
        )
        p = res.x
        try:
            ls = least_squares(problem.residual_vector, p, method="lm", xtol=1e-15, ftol=1e-15)
            if np.isfinite(ls.cost) and problem.objective(ls.x) <= problem.objective(p):
                p = ls.x
        except Exception:
            pass
        val = problem.objective(p)
        trace.append((idx, val))
        if np.isfinite(val) and (best is None or val < best[0] - 1e-18):
            best = (val, idx, p)

    if best is None:
        raise FitError("all starts diverged", trace=trace)
    residual, _, p_best = best
    comps = problem.decode(p_best)

    if tag == "mtl":
        nu, loc, b = comps[0]
        params = MtlParams(nu=nu, mu_H=loc * h_max, b_H=b * h_max)
    elif tag == "mb":
        nu, a, b = comps[0]
        params = MbParams(nu=nu, alpha_H=a, beta_H=b)
    elif tag == "smtg":
        params = SmtgParams(components=tuple((nu, loc * h_max, s * h_max) for nu, loc, s in comps))
    else:
        params = SmbParams(components=tuple((nu, a, b) for nu, a, b in comps))

    achieved_scaled = problem.moments_scaled(comps)
    if achieved_scaled is None:
        raise FitError("best candidate has a divergent kernel integral",
                       residual=residual, trace=trace)
    model = FittedModel(
        tag=tag,
        params=params,
        p0=p0,
        support=(lo, h_max),
        residual=float(residual),
        matched_orders=orders,
        target_moments=tuple(float(t * s) for t, s in zip(targets_scaled, scale)),
        achieved_moments=tuple(float(m * s) for m, s in zip(achieved_scaled, scale)),
    )
    return model


# ---------------------------------------------------------------------------
# closed-form cross-check of the MTL kernel integral
# ---------------------------------------------------------------------------

def mtl_kernel_integral_closed_form(gamma: float, mu: float, b: float,
                                    lo: float, hi: float) -> float:
    """int_lo^hi h^gamma exp(-|h - mu|/b) dh via upper incomplete gammas.

    Splitting at the kink h = mu, the upper branch is
    b^(1+gamma) e^(mu/b) [Gamma(1+gamma, mu/b) - Gamma(1+gamma, hi/b)]
    and the lower branch continues the incomplete gamma across negative
    arguments, b^(1+gamma) e^(-mu/b) Re{ e^(-i pi gamma)
    [Gamma(1+gamma, -mu/b) - Gamma(1+gamma, -lo/b)] }.
    Requires mu inside [lo, hi].
    """
    import mpmath as mp

    if not lo <= mu <= hi:
        raise ValueError("kink must lie inside the integration range")
    s = mp.mpf(1.0 + gamma)
    upper = mp.e ** (mu / b) * (mp.gammainc(s, a=mu / b) - mp.gammainc(s, a=hi / b))
    glo = mp.gammainc(s, a=mp.mpf(-mu / b))
    ghi = mp.gammainc(s, a=mp.mpf(-lo / b))
    lower = mp.e ** (-mu / b) * mp.e ** (-1j * mp.pi * gamma) * (glo - ghi)
    total = mp.mpf(b) ** (1.0 + gamma) * (upper + lower.real)
    return float(total)
