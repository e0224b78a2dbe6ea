"""Command-line interface: config loading, subcommand dispatch, machine output.

Exit codes: 0 success, 1 usage/config error, 2 physics failure (residuals or
oracle mismatch beyond threshold), 3 numerical error.  Output files are
written atomically (temp file + rename) and every output embeds a canonical
echo of the configuration it was produced from.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import incoming, oracle, suites, transport
from .errors import ConfigError, NesslabError
from .model import (INF_BETA, ChainSpec, FrequencyGrid, PowerLawChannel,
                    SystemSpec, ThermoState, band_intersection, band_union,
                    make_chain_system)

SCHEMA_VERSION = 1

_REQUIRED_KEYS = {
    "system.N": int,
    "system.t": float,
    "system.U": float,
    "coupling.vL": float,
    "coupling.vR": float,
    "reservoir.alpha": float,
    "reservoir.thetaF": float,
    "reservoir.k0": float,
    "thermo.betaL": "beta",
    "thermo.betaR": "beta",
    "thermo.muL": float,
    "thermo.muR": float,
    "grid.points": int,
    "grid.delta": float,
}
_OPTIONAL_KEYS = {
    "reservoir.kmax": float,   # default 10 * (k0 + 1)
    "current.measure_2pi": bool,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with the builders every subcommand needs."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def system(self) -> SystemSpec:
        chain = ChainSpec(self["system.N"], self["system.t"], self["system.U"])
        # reservoir amplitudes live on the channels; the chain carries the
        # bare sine weights
        return make_chain_system(chain, 1.0, 1.0)

    def channel(self, side: str) -> PowerLawChannel:
        v = self["coupling.vL"] if side == "L" else self["coupling.vR"]
        return PowerLawChannel(v=v, alpha=self["reservoir.alpha"],
                               theta_f=self["reservoir.thetaF"],
                               k0=self["reservoir.k0"],
                               k_max=self["reservoir.kmax"])

    def thermo(self) -> ThermoState:
        return ThermoState(self["thermo.betaL"], self["thermo.betaR"],
                           self["thermo.muL"], self["thermo.muR"])

    def echo_lines(self) -> list[str]:
        return [f"{k} = {_format_value(self.values[k])}"
                for k in sorted(self.values)]

    def echo_dict(self) -> dict:
        return {k: self.values[k] if not isinstance(self.values[k], float)
                or math.isfinite(self.values[k]) else "inf"
                for k in sorted(self.values)}


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return repr(v) if isinstance(v, float) else str(v)


def _parse_scalar(key: str, raw: str, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "beta":
            if raw.lower() in ("inf", "infinity"):
                return INF_BETA
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for config key {key}: {raw!r}") from exc
    raise ConfigError(f"unhandled kind for {key}")


def parse_config_text(text: str) -> RunConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key in values:
            raise ConfigError(f"duplicate config key: {key}")
        if key in _REQUIRED_KEYS:
            values[key] = _parse_scalar(key, raw, _REQUIRED_KEYS[key])
        elif key in _OPTIONAL_KEYS:
            values[key] = _parse_scalar(key, raw, _OPTIONAL_KEYS[key])
        else:
            raise ConfigError(f"unknown config key: {key}")
    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing config key: {key}")
    values.setdefault("reservoir.kmax", 10.0 * (values["reservoir.k0"] + 1.0))
    values.setdefault("current.measure_2pi", False)
    _validate_ranges(values)
    return RunConfig(values)


def _validate_ranges(v: dict) -> None:
    checks = [
        (v["system.N"] >= 1, "system.N must be >= 1"),
        (v["reservoir.thetaF"] > 0, "reservoir.thetaF must be positive"),
        (v["reservoir.k0"] >= 0, "reservoir.k0 must be nonnegative"),
        (v["reservoir.kmax"] > v["reservoir.k0"],
         "reservoir.kmax must exceed reservoir.k0"),
        (v["thermo.betaL"] > 0, "thermo.betaL must be positive"),
        (v["thermo.betaR"] > 0, "thermo.betaR must be positive"),
        (v["grid.points"] >= 8, "grid.points must be >= 8"),
        (v["grid.delta"] >= 0, "grid.delta must be >= 0 (0 = automatic)"),
        (v["coupling.vL"] >= 0, "coupling.vL must be >= 0"),
        (v["coupling.vR"] >= 0, "coupling.vR must be >= 0"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".nesslab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit_json(payload: dict, output: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if output:
        _atomic_write(output, text)
    sys.stdout.write(text)


def _delta_or_none(cfg: RunConfig):
    d = cfg["grid.delta"]
    return d if d > 0 else None


def cmd_transmission(cfg: RunConfig, args) -> int:
    sys_spec = cfg.system()
    res_l, res_r = cfg.channel("L"), cfg.channel("R")
    lo, hi = band_union(res_l, res_r)
    points = args.points or cfg["grid.points"]
    grid = FrequencyGrid.midpoint(lo, hi, points)
    prefactor = args.prefactor
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    for line in cfg.echo_lines():
        buf.write(f"# config: {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["omega", "T", "re_xi", "im_xi", "re_eta", "im_eta",
                     "abs_lambda"])
    from .selfenergy import boundary_or_exterior
    from .sfunc import s_matrix
    for w in grid.nodes:
        xi = boundary_or_exterior(res_l, w)
        eta = boundary_or_exterior(res_r, w)
        t_val = transport.transmission(sys_spec, res_l, res_r, w, prefactor,
                                       delta=_delta_or_none(cfg))
        try:
            lam = transport.lambda_minus(s_matrix(sys_spec, complex(w)), xi, eta)
            abs_lam = abs(lam)
        except NesslabError:
            abs_lam = float("inf")
        writer.writerow([f"{w:.12g}", f"{t_val:.12g}",
                         f"{xi.real:.12g}", f"{xi.imag:.12g}",
                         f"{eta.real:.12g}", f"{eta.imag:.12g}",
                         f"{abs_lam:.12g}"])
    if args.output:
        _atomic_write(args.output, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_current(cfg: RunConfig, args) -> int:
    sys_spec = cfg.system()
    res_l, res_r = cfg.channel("L"), cfg.channel("R")
    measure_2pi = cfg["current.measure_2pi"]
    j = transport.steady_current(sys_spec, res_l, res_r, cfg.thermo(),
                                 prefactor=args.prefactor,
                                 measure_2pi=measure_2pi)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "J": j,
        "prefactor": args.prefactor,
        "measure_2pi": measure_2pi,
        "grid_points": cfg["grid.points"],
        "config": cfg.echo_dict(),
    }
    _emit_json(payload, args.output)
    return 0


def cmd_check_completeness(cfg: RunConfig, args) -> int:
    sys_spec = cfg.system()
    res_l, res_r = cfg.channel("L"), cfg.channel("R")
    modes = args.modes or cfg["grid.points"]
    delta = _delta_or_none(cfg)
    bound = incoming.bound_state_scan(sys_spec, res_l, res_r)
    field = incoming.incoming_coefficients(sys_spec, res_l, res_r, modes,
                                           delta=delta)
    report = incoming.completeness_residuals(field)
    ok = report.max_condition() < args.threshold and not bound
    payload = {
        "schema_version": SCHEMA_VERSION,
        **report.as_dict(),
        "bound_states": bound,
        "threshold": args.threshold,
        "modes": modes,
        "pass": bool(ok),
        "config": cfg.echo_dict(),
    }
    _emit_json(payload, args.output)
    return 0 if ok else 2


def cmd_oracle_compare(cfg: RunConfig, args) -> int:
    sys_spec = cfg.system()
    res_l, res_r = cfg.channel("L"), cfg.channel("R")
    th = cfg.thermo()
    j_landauer = transport.steady_current(sys_spec, res_l, res_r, th,
                                          prefactor=args.prefactor,
                                          measure_2pi=cfg["current.measure_2pi"])
    model = oracle.discretize(sys_spec, res_l, res_r, args.modes)
    c0 = oracle.initial_correlation(model, th, 0.5)
    mean, spread = oracle.plateau_current(model, c0, args.tmax,
                                          window=args.window)
    rel_err = abs(j_landauer - mean) / max(abs(mean), 1e-300)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "J_landauer": j_landauer,
        "J_lattice_mean": mean,
        "J_lattice_spread": spread,
        "rel_err": rel_err,
        "prefactor": args.prefactor,
        "measure_2pi": cfg["current.measure_2pi"],
        "modes": args.modes,
        "tmax": args.tmax,
        "window": args.window,
        "config": cfg.echo_dict(),
    }
    _emit_json(payload, args.output)
    return 0 if rel_err <= 0.05 else 2


def cmd_verify(args) -> int:
    runner = suites.SUITES[args.suite]
    result = runner(seed=args.seed)
    text = json.dumps(result, sort_keys=True, indent=2, default=float) + "\n"
    if args.output:
        _atomic_write(args.output, text)
    sys.stdout.write(text)
    return 0 if result["pass"] else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nesslab",
        description="Steady-state transport and operator-calculus checks for "
                    "a finite fermionic system between two reservoirs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=True, help="key = value text file")
        p.add_argument("--output", default=None, help="write output here "
                       "(atomic); default stdout")

    p_t = sub.add_parser("transmission", help="per-frequency CSV dump")
    add_config(p_t)
    p_t.add_argument("--points", type=int, default=None)
    p_t.add_argument("--prefactor", type=float, default=2.0)

    p_c = sub.add_parser("current", help="steady-state current JSON")
    add_config(p_c)
    p_c.add_argument("--prefactor", type=float, default=2.0)

    p_k = sub.add_parser("check-completeness",
                         help="residuals of the uniqueness conditions")
    add_config(p_k)
    p_k.add_argument("--modes", type=int, default=None)
    p_k.add_argument("--threshold", type=float, default=1e-2)

    p_o = sub.add_parser("oracle-compare",
                         help="frequency-space current vs the lattice plateau")
    add_config(p_o)
    p_o.add_argument("--modes", type=int, default=400)
    p_o.add_argument("--tmax", type=float, default=200.0)
    p_o.add_argument("--window", type=float, default=0.2)
    p_o.add_argument("--prefactor", type=float, default=2.0)

    p_v = sub.add_parser("verify", help="randomized verification suites")
    p_v.add_argument("--suite", required=True, choices=sorted(suites.SUITES))
    p_v.add_argument("--seed", type=int, default=0)
    p_v.add_argument("--output", default=None)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        if args.command == "verify":
            return cmd_verify(args)
        cfg = load_config(args.config)
        handler = {
            "transmission": cmd_transmission,
            "current": cmd_current,
            "check-completeness": cmd_check_completeness,
            "oracle-compare": cmd_oracle_compare,
        }[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NesslabError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
