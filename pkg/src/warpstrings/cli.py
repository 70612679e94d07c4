"""Command line front end: ``warpstrings {curvature,census,family}``.

The run configuration is a YAML or JSON mapping::

    profile: "x^2+1"                 # or profile_family: "(1-s)*exp(x)+s*(x^2+1)"
    fiber: {kind: circle, length: 6.283185307179586,
            transverse_dimension: 0, transverse_curvature: 0.0}
    class: {winding: 1}
    window: {half_width: 10, grid_n: 1001, probe_radii: [20, 40, 80]}
    solver: {n_points: 256, tol_grad: null, tol_zero: null, max_iter: 5000,
             starts: 17, dedup_tol: null, eps_len: null}
    family: {samples: [0, 0.5, 1]}   # or {count: 11}; direction: down|up; k: 0|1|2
    output: {format: json, path: report.json}

Exit status: 0 when a report is written (including degenerate or escaped
results), 2 for configuration errors, 3 for domain errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import report
from .census import enumerate_strings
from .family import MetricPath, run_family
from .geometry import FiberModel, MetricError, WarpedMetric, membership
from .loops import HomotopyClass, SolverOptions
from .profile import ProfileDomainError, ProfileError, parse

EXIT_CONFIG = 2
EXIT_DOMAIN = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    profile: Optional[str] = None
    profile_family: Optional[str] = None
    fiber: FiberModel = field(default_factory=FiberModel.circle)
    winding: int = 1
    half_width: float = 10.0
    grid_n: int = 1001
    probe_radii: Tuple[float, ...] = (20.0, 40.0, 80.0)
    solver: SolverOptions = field(default_factory=SolverOptions)
    samples: Optional[Tuple[float, ...]] = None
    direction: str = "down"
    k: int = 2
    workers: int = 1
    out_format: str = "json"
    out_path: Optional[str] = None

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        known = {"profile", "profile_family", "fiber", "class", "window", "solver",
                 "family", "output"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls._build(data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def _build(cls, data: Dict[str, Any]) -> "RunConfig":
        cfg = cls()
        cfg.profile = data.get("profile")
        cfg.profile_family = data.get("profile_family")
        for key in ("profile", "profile_family"):
            v = getattr(cfg, key)
            if v is not None and not isinstance(v, str):
                raise ConfigError(f"{key} must be a string")

        fib = _section(data, "fiber")
        kind = fib.get("kind", "circle")
        length = float(fib.get("length", 2 * math.pi))
        if kind == "circle":
            cfg.fiber = FiberModel.circle(length)
        else:
            cfg.fiber = FiberModel.geodesic(length, int(fib.get("transverse_dimension", 1)),
                                            float(fib.get("transverse_curvature", 0.0)))

        w = _section(data, "class").get("winding", 1)
        if not isinstance(w, int) or isinstance(w, bool) or w == 0:
            raise ConfigError("class.winding must be a nonzero integer")
        cfg.winding = w

        win = _section(data, "window")
        cfg.half_width = float(win.get("half_width", cfg.half_width))
        cfg.grid_n = int(win.get("grid_n", cfg.grid_n))
        cfg.probe_radii = tuple(float(r) for r in win.get("probe_radii", cfg.probe_radii))
        if cfg.half_width <= 0 or cfg.grid_n < 2:
            raise ConfigError("window.half_width must be > 0 and grid_n >= 2")

        sol = _section(data, "solver")
        allowed = {"n_points", "tol_grad", "tol_zero", "max_iter", "starts", "dedup_tol",
                   "eps_len", "switch_tol", "workers"}
        if set(sol) - allowed:
            raise ConfigError(f"unknown solver keys: {sorted(set(sol) - allowed)}")
        cfg.workers = int(sol.get("workers", 1))
        kwargs = {}
        for key, target in (("n_points", "n_points"), ("max_iter", "max_iter"),
                            ("starts", "starts")):
            if sol.get(key) is not None:
                kwargs[target] = int(sol[key])
        for key, target in (("tol_grad", "tol_grad"), ("tol_zero", "tol_zero"),
                            ("dedup_tol", "dedup_tol_abs"), ("eps_len", "eps_len_abs"),
                            ("switch_tol", "switch_tol")):
            if sol.get(key) is not None:
                kwargs[target] = float(sol[key])
        cfg.solver = SolverOptions(**kwargs)

        fam = _section(data, "family")
        if "samples" in fam:
            cfg.samples = tuple(float(s) for s in fam["samples"])
        elif "count" in fam:
            count = int(fam["count"])
            if count < 2:
                raise ConfigError("family.count must be >= 2")
            cfg.samples = tuple(np.linspace(0.0, 1.0, count).tolist())
        cfg.direction = fam.get("direction", "down")
        if cfg.direction not in ("down", "up"):
            raise ConfigError("family.direction must be 'down' or 'up'")
        cfg.k = int(fam.get("k", 2))
        if cfg.k not in (0, 1, 2):
            raise ConfigError("family.k must be 0, 1 or 2")

        out = _section(data, "output")
        cfg.out_format = out.get("format", "json")
        if cfg.out_format not in ("json", "csv"):
            raise ConfigError("output.format must be json or csv")
        cfg.out_path = out.get("path")
        return cfg

    def echo(self) -> Dict[str, Any]:
        """Resolved configuration, including every default, for provenance."""
        s = self.solver
        return {
            "profile": self.profile,
            "profile_family": self.profile_family,
            "fiber": {"kind": self.fiber.kind, "length": self.fiber.length,
                      "transverse_dimension": self.fiber.transverse_dimension,
                      "transverse_curvature": self.fiber.transverse_curvature},
            "class": {"winding": self.winding},
            "window": {"half_width": self.half_width, "grid_n": self.grid_n,
                       "probe_radii": list(self.probe_radii)},
            "solver": {
                "n_points": s.n_points,
                "tol_grad": s.grad_tol(s.n_points),
                "tol_zero": s.zero_tol(s.n_points),
                "switch_tol": s.switch_tol,
                "max_iter": s.max_iter,
                "starts": s.starts,
                "dedup_tol": s.dedup_tol(self.fiber.length),
                "eps_len": s.eps_len(self.fiber.length, self.winding),
                "tol_curv": 1e-9,
            },
            "family": {"samples": list(self.samples) if self.samples else None,
                       "direction": self.direction, "k": self.k},
        }

    def metric(self) -> WarpedMetric:
        if self.profile is None:
            raise ConfigError("this command needs 'profile'")
        expr = parse(self.profile, window=(-self.half_width, self.half_width))
        return WarpedMetric(expr, self.fiber, self.half_width, self.probe_radii)

    def path(self) -> MetricPath:
        if self.profile_family is None:
            raise ConfigError("the family command needs 'profile_family'")
        if self.samples is None:
            raise ConfigError("the family command needs family.samples or family.count")
        try:
            return MetricPath.from_text(self.profile_family, self.samples, self.fiber,
                                        self.half_width, self.probe_radii)
        except (ProfileError, MetricError):
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _section(data: Dict[str, Any], key: str) -> Dict[str, Any]:
    sec = data.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    return sec


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return RunConfig.from_mapping(data)


# ---------------------------------------------------------------------------


def cmd_curvature(cfg: RunConfig) -> Dict[str, str]:
    g = cfg.metric()
    verdict = membership(g, cfg.grid_n)
    series = report.curvature_series(g, cfg.grid_n)
    body = report.envelope("curvature", cfg.echo(), {
        "membership": report.verdict_dict(verdict),
        "series": series,
    })
    return {"json": report.dumps(body), "csv": report.curvature_csv(series)}


def cmd_census(cfg: RunConfig) -> Dict[str, str]:
    g = cfg.metric()
    c = enumerate_strings(g, HomotopyClass(cfg.winding), cfg.solver, workers=cfg.workers)
    body = report.envelope("census", cfg.echo(), {
        "membership": report.verdict_dict(membership(g, cfg.grid_n)),
        "census": report.census_dict(c),
    })
    return {"json": report.dumps(body), "csv": report.census_csv(c)}


def cmd_family(cfg: RunConfig) -> Dict[str, str]:
    rep = run_family(cfg.path(), HomotopyClass(cfg.winding), cfg.solver,
                     direction=cfg.direction, k=cfg.k, grid_n=cfg.grid_n,
                     workers=cfg.workers)
    body = report.envelope("family", cfg.echo(), report.family_dict(rep))
    return {"json": report.dumps(body), "csv": report.family_csv(rep)}


COMMANDS = {"curvature": cmd_curvature, "census": cmd_census, "family": cmd_family}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="warpstrings",
        description="Closed geodesic strings and their signed count on warped products.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"),
                   help="output format (overrides output.format)")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        fmt = args.format or cfg.out_format
        out_path = args.out or cfg.out_path
        outputs = COMMANDS[args.command](cfg)
    except (ConfigError, ProfileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MetricError, ProfileDomainError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN

    if out_path is None:
        sys.stdout.write(outputs[fmt])
        return 0
    out = Path(out_path)
    out.write_text(outputs[fmt])
    if args.command == "family":
        # the family command always ships the report and the plot-ready series
        other = "csv" if fmt == "json" else "json"
        companion = out.with_suffix("." + other)
        if companion != out:
            companion.write_text(outputs[other])
    return 0


if __name__ == "__main__":
    sys.exit(main())
