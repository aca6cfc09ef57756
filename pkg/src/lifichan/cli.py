"""Command-line front end: config ingestion and the five pipeline commands.

A run is described by one INI-style config file with sections [ap], [ue],
[cell], [mode] and [run].  Angles are written in degrees, lengths in
meters and powers in dBm; everything is converted to SI internally.

    lifichan sample    --config run.ini --out results/
    lifichan exact     --config run.ini --out results/
    lifichan fit       --config run.ini --out results/
    lifichan ber       --config run.ini --out results/
    lifichan multicell --config run.ini --out results/

Exit codes: 0 success, 2 config/usage error, 3 numerical failure.
All outputs are CSV tables plus JSON headers; numbers are written in
shortest round-trip form so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import EmpiricalCdf, sample_gains
from .exact import tabulate_law
from .models import FitError, default_model_tags, fit_by_moments, model_gain_law
from .performance import (
    BerCurve,
    MulticellLayout,
    average_ber,
    ber_floor,
    dbm_to_watts,
    default_probe_grid,
    ksd,
    monte_carlo_ber,
    multicell_ber,
)
from .quadrature import QuadratureError
from .scenario import (
    ApParams,
    CellGeometry,
    Mobility,
    MobilityMode,
    Scenario,
    ScenarioError,
    UeParams,
)

__all__ = [
    "ConfigError",
    "RunOptions",
    "RunConfig",
    "parse_config",
    "render_config",
    "load_config",
    "cmd_sample",
    "cmd_exact",
    "cmd_fit",
    "cmd_ber",
    "cmd_multicell",
    "main",
]


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key

    def as_json(self) -> str:
        return json.dumps({"error": "config", "message": str(self), "key": self.key})


@dataclass(frozen=True)
class RunOptions:
    """Command-specific knobs from the [run] section."""

    n: int = 100_000
    seed: int = 1
    workers: int = 1
    grid_size: int = 256
    model: str | None = None
    allow_mode_mismatch: bool = False
    law: str = "exact"
    powers_dbm: tuple[float, ...] = ()
    sigma_a: float = 1e-9
    modulation_order: int = 2
    rc_grid: tuple[float, ...] = ()
    dc_grid: tuple[float, ...] = ()
    target_ber: float = 3.8e-3
    ref_power_dbm: float | None = None


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    run: RunOptions = field(default_factory=RunOptions)


# ---------------------------------------------------------------------------
# parsing / canonical serialization
# ---------------------------------------------------------------------------

def _parse_float_list(raw: str) -> tuple[float, ...]:
    items = [s.strip() for s in raw.replace(";", ",").split(",") if s.strip()]
    return tuple(float(s) for s in items)


_SCHEMA = {
    "ap": {"height_m": float, "semi_angle_deg": float, "conversion_w_per_a": float},
    "ue": {
        "height_m": float,
        "responsivity_a_per_w": float,
        "area_m2": float,
        "refractive_index": float,
        "fov_deg": float,
    },
    "cell": {"radius_m": float, "outer_radius_m": float},
    "mode": {"kind": str, "mu_theta_deg": float, "sigma_theta_deg": float},
    "run": {
        "n": int,
        "seed": int,
        "workers": int,
        "grid_size": int,
        "model": str,
        "allow_mode_mismatch": bool,
        "law": str,
        "powers_dbm": _parse_float_list,
        "sigma_a": float,
        "modulation_order": int,
        "rc_grid": _parse_float_list,
        "dc_grid": _parse_float_list,
        "target_ber": float,
        "ref_power_dbm": float,
    },
}


def _convert(section: str, key: str, raw: str):
    caster = _SCHEMA[section][key]
    if caster is bool:
        low = raw.strip().lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"expected a boolean for {section}.{key}, got {raw!r}",
                          key=f"{section}.{key}")
    try:
        return caster(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}", key=f"{section}.{key}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; unknown sections or keys are rejected."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}")

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", key=section)
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=f"{section}.{key}")
            values[section][key] = _convert(section, key, raw)

    mode_kind = values.get("mode", {}).get("kind", "stationary")
    try:
        mobility = Mobility(mode_kind)
    except ValueError:
        raise ConfigError(f"mode.kind must be 'stationary' or 'mobile', got {mode_kind!r}",
                          key="mode.kind")
    mode = MobilityMode(
        tag=mobility,
        mu_theta=_deg_opt(values.get("mode", {}).get("mu_theta_deg")),
        sigma_theta=_deg_opt(values.get("mode", {}).get("sigma_theta_deg")),
    )

    ap_v = values.get("ap", {})
    ue_v = values.get("ue", {})
    cell_v = values.get("cell", {})
    try:
        ap = ApParams(
            h_a=ap_v.get("height_m", 2.4),
            phi_half=math.radians(ap_v.get("semi_angle_deg", 60.0)),
            rho=ap_v.get("conversion_w_per_a", 0.7),
        )
        ue = UeParams(
            h_u=ue_v.get("height_m", mode.default_h_u),
            R_p=ue_v.get("responsivity_a_per_w", 0.6),
            A_g=ue_v.get("area_m2", 1e-4),
            n_c=ue_v.get("refractive_index", 1.0),
            Psi_c=math.radians(ue_v.get("fov_deg", 90.0)),
        )
        radius = cell_v.get("radius_m", 1.0)
        cell = CellGeometry(R=radius, R_e=cell_v.get("outer_radius_m", radius))
        scenario = Scenario(ap=ap, ue=ue, cell=cell, mode=mode)
    except ScenarioError as exc:
        raise ConfigError(str(exc))

    run_v = values.get("run", {})
    try:
        run = RunOptions(**run_v)
    except TypeError as exc:
        raise ConfigError(f"invalid [run] options: {exc}", key="run")
    _validate_run(run)
    return RunConfig(scenario=scenario, run=run)


def _deg_opt(val: float | None) -> float | None:
    return math.radians(val) if val is not None else None


def _validate_run(run: RunOptions) -> None:
    if run.n <= 0:
        raise ConfigError("run.n must be positive", key="run.n")
    if run.workers < 1:
        raise ConfigError("run.workers must be at least 1", key="run.workers")
    if run.grid_size < 64:
        raise ConfigError("run.grid_size must be at least 64", key="run.grid_size")
    if run.sigma_a <= 0.0:
        raise ConfigError("run.sigma_a must be positive", key="run.sigma_a")
    if run.modulation_order < 2:
        raise ConfigError("run.modulation_order must be at least 2",
                          key="run.modulation_order")


def render_config(config: RunConfig) -> str:
    """Canonical text form; parse(render(parse(x))) is semantically x."""
    sc = config.scenario
    run = config.run
    parser = configparser.ConfigParser()
    parser["ap"] = {
        "height_m": repr(sc.ap.h_a),
        "semi_angle_deg": repr(math.degrees(sc.ap.phi_half)),
        "conversion_w_per_a": repr(sc.ap.rho),
    }
    parser["ue"] = {
        "height_m": repr(sc.ue.h_u),
        "responsivity_a_per_w": repr(sc.ue.R_p),
        "area_m2": repr(sc.ue.A_g),
        "refractive_index": repr(sc.ue.n_c),
        "fov_deg": repr(math.degrees(sc.ue.Psi_c)),
    }
    parser["cell"] = {
        "radius_m": repr(sc.cell.R),
        "outer_radius_m": repr(sc.cell.R_e),
    }
    mode = {"kind": sc.mode.tag.value}
    if sc.mode.mu_theta is not None:
        mode["mu_theta_deg"] = repr(math.degrees(sc.mode.mu_theta))
    if sc.mode.sigma_theta is not None:
        mode["sigma_theta_deg"] = repr(math.degrees(sc.mode.sigma_theta))
    parser["mode"] = mode
    run_sec = {
        "n": str(run.n),
        "seed": str(run.seed),
        "workers": str(run.workers),
        "grid_size": str(run.grid_size),
        "allow_mode_mismatch": str(run.allow_mode_mismatch).lower(),
        "law": run.law,
        "sigma_a": repr(run.sigma_a),
        "modulation_order": str(run.modulation_order),
        "target_ber": repr(run.target_ber),
    }
    if run.model is not None:
        run_sec["model"] = run.model
    if run.powers_dbm:
        run_sec["powers_dbm"] = ", ".join(repr(p) for p in run.powers_dbm)
    if run.rc_grid:
        run_sec["rc_grid"] = ", ".join(repr(p) for p in run.rc_grid)
    if run.dc_grid:
        run_sec["dc_grid"] = ", ".join(repr(p) for p in run.dc_grid)
    if run.ref_power_dbm is not None:
        run_sec["ref_power_dbm"] = repr(run.ref_power_dbm)
    parser["run"] = run_sec
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _outdir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_sample(config: RunConfig, out) -> dict:
    """Monte Carlo gain sample: gains.csv, gains.json, summary.json."""
    run = config.run
    out = _outdir(out)
    sample = sample_gains(config.scenario, run.n, run.seed, workers=run.workers)
    sample.write(out / "gains.csv", out / "gains.json")
    summary = sample.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def cmd_exact(config: RunConfig, out) -> dict:
    """Exact gain law table: law.csv (h, pdf, cdf) + law.json header."""
    run = config.run
    out = _outdir(out)
    law = tabulate_law(config.scenario, grid_size=run.grid_size)
    law.write(out / "law.csv", out / "law.json")
    return {"p0": law.p0, "support": list(law.support), "grid_size": len(law.grid)}


def cmd_fit(config: RunConfig, out) -> dict:
    """Moment-matched model fit: model.json + ksd_report.json."""
    run = config.run
    scenario = config.scenario
    out = _outdir(out)
    tag = run.model
    if tag is None:
        raise ConfigError("run.model must name a model family for 'fit'", key="run.model")
    tag = tag.lower()
    allowed = default_model_tags(scenario.mode.tag)
    if tag not in allowed and not run.allow_mode_mismatch:
        raise ConfigError(
            f"model {tag!r} targets the other activity mode (expected one of {allowed}); "
            "set run.allow_mode_mismatch = true to override",
            key="run.model",
        )
    model = fit_by_moments(scenario, tag)
    model.write(out / "model.json")

    law = model_gain_law(model)
    mc_seed = run.seed + 1_000_003  # fresh draw, decoupled from any fit inputs
    sample = sample_gains(scenario, run.n, mc_seed, workers=run.workers)
    emp = EmpiricalCdf(sample.gains)
    probes = default_probe_grid(emp, support=(0.0, model.support[1]))
    distance = ksd(law, emp, probes)
    report = {
        "model": tag,
        "ksd": distance,
        "n": run.n,
        "mc_seed": mc_seed,
        "residual": model.residual,
        "scenario_digest": scenario.digest(),
    }
    (out / "ksd_report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def _gain_law_for_source(config: RunConfig, source: str):
    scenario = config.scenario
    run = config.run
    if source == "exact":
        return tabulate_law(scenario, grid_size=run.grid_size), None
    if source.startswith("fitted:"):
        tag = source.split(":", 1)[1]
        model = fit_by_moments(scenario, tag)
        return model_gain_law(model), None
    if source == "montecarlo":
        sample = sample_gains(scenario, run.n, run.seed, workers=run.workers)
        return None, sample.gains
    raise ConfigError(
        f"run.law must be 'exact', 'fitted:<tag>' or 'montecarlo', got {source!r}",
        key="run.law",
    )


def cmd_ber(config: RunConfig, out) -> dict:
    """BER curve over the configured power sweep, with the floor in the header."""
    run = config.run
    scenario = config.scenario
    out = _outdir(out)
    if not run.powers_dbm:
        raise ConfigError("run.powers_dbm must list at least one power", key="run.powers_dbm")
    law, gains = _gain_law_for_source(config, run.law)
    powers_w = [dbm_to_watts(p) for p in run.powers_dbm]
    if gains is not None:
        bers, _ = monte_carlo_ber(gains, np.asarray(powers_w), run.sigma_a,
                                  run.modulation_order)
        points = tuple(zip(powers_w, (float(b) for b in bers)))
    else:
        points = tuple(
            (p, average_ber(law, p, run.sigma_a, run.modulation_order)) for p in powers_w
        )
    curve = BerCurve(
        M=run.modulation_order,
        sigma=run.sigma_a,
        points=points,
        provenance=run.law,
        scenario_digest=scenario.digest(),
        floor=ber_floor(scenario, run.modulation_order),
    )
    curve.write(out / "ber.csv", out / "ber.json")
    return {"floor": curve.floor, "points": [[watts_to_dbm(p), b] for p, b in points]}


def cmd_multicell(config: RunConfig, out) -> dict:
    """BER of the five-AP layout over an (R_c, D_c) grid, with target flags."""
    run = config.run
    scenario = config.scenario
    out = _outdir(out)
    if not run.rc_grid or not run.dc_grid:
        raise ConfigError("run.rc_grid and run.dc_grid must list at least one value each",
                          key="run.rc_grid")
    if not run.powers_dbm:
        raise ConfigError("run.powers_dbm must list at least one power", key="run.powers_dbm")
    powers_w = np.asarray([dbm_to_watts(p) for p in run.powers_dbm])
    rows = []
    for rc in run.rc_grid:
        for dc in run.dc_grid:
            layout = MulticellLayout(R_c=rc, D_c=dc)
            bers, ses = multicell_ber(
                layout, scenario, powers_w, run.sigma_a, run.modulation_order,
                n=max(run.n, 10**5), seed=run.seed,
            )
            for p_dbm, ber, se in zip(run.powers_dbm, bers, ses):
                rows.append({
                    "R_c": rc, "D_c": dc, "P_opt_dBm": p_dbm,
                    "ber": float(ber), "se": float(se),
                    "meets_target": bool(ber <= run.target_ber),
                })
    csv_path = out / "multicell.csv"
    with csv_path.open("w", newline="") as fh:
        import csv as _csv
        writer = _csv.writer(fh)
        writer.writerow(["R_c", "D_c", "P_opt_dBm", "ber", "se", "meets_target"])
        for row in rows:
            writer.writerow([
                repr(row["R_c"]), repr(row["D_c"]), repr(row["P_opt_dBm"]),
                repr(row["ber"]), repr(row["se"]), str(row["meets_target"]).lower(),
            ])
    header = {
        "format_version": 1,
        "target_ber": run.target_ber,
        "M": run.modulation_order,
        "sigma": run.sigma_a,
        "n": max(run.n, 10**5),
        "seed": run.seed,
        "scenario_digest": scenario.digest(),
    }
    (out / "multicell.json").write_text(json.dumps(header, indent=2) + "\n")
    return {"rows": len(rows), "target_ber": run.target_ber}


_COMMANDS = {
    "sample": cmd_sample,
    "exact": cmd_exact,
    "fit": cmd_fit,
    "ber": cmd_ber,
    "multicell": cmd_multicell,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lifichan",
        description="Channel-gain statistics and error-rate analysis for indoor LiFi attocells",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the run config (INI)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--workers", type=int, default=None, help="override run.workers")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        run = config.run
        if args.seed is not None:
            run = RunOptions(**{**run.__dict__, "seed": args.seed})
        if args.workers is not None:
            run = RunOptions(**{**run.__dict__, "workers": args.workers})
        config = RunConfig(scenario=config.scenario, run=run)
        result = _COMMANDS[args.command](config, args.out)
    except ConfigError as exc:
        print(exc.as_json(), file=sys.stderr)
        return 2
    except (QuadratureError, FitError) as exc:
        diag = {"error": "numerical", "message": str(exc)}
        if isinstance(exc, QuadratureError) and exc.estimate is not None:
            diag["estimate"] = np.asarray(exc.estimate).tolist()
            diag["error_estimate"] = np.asarray(exc.error).tolist()
        if isinstance(exc, FitError) and exc.trace is not None:
            diag["trace"] = [[int(i), float(v)] for i, v in exc.trace]
        print(json.dumps(diag), file=sys.stderr)
        return 3
    print(json.dumps({"command": args.command, "out": str(args.out), "result": result}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
