"""Command line front end.

    levyforge <command> --config run.json [--seed N] [--out DIR] [--workers K]

Commands are ``simulate``, ``integrate``, ``solve`` and ``validate``.  The
config is one JSON document; see the README for its keys.  Exit codes:
0 success, 1 runtime failure, 2 unreadable/unparsable config, 3 invalid
config, and for ``validate`` 1 when any check fails.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .integrals import left_riemann_integral, stieltjes_integral
from .io import write_jsonl, write_jumps_csv, write_paths_csv
from .levy_model import LevyTriplet, canonical_drift
from .paths import TimeGrid, compensate, simulate_jump_diffusion, simulate_poisson
from .randomness import Dirac, JumpLaw
from .solvers import (
    SddeProblem,
    SdeProblem,
    bs_explicit,
    delay_steps,
    euler_maruyama,
    euler_sdde,
    theta_linear_bs,
)
from .validation import (
    DEFAULT_MULTIPLE,
    cf_check,
    compensator_check,
    doleans_density_check,
    martingale_check,
    mean_check,
    poisson_pmf_check,
    qv_check,
)

COMMANDS = ("simulate", "integrate", "solve", "validate")
_SEED_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid config; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ConfigParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# built-in coefficient functions
#
# Two-argument coefficients take the current state x and the delayed state y.

def _mackey_glass(r=10.0, p=6.0, q=1.0, gamma=1.0):
    return lambda x, y: r * np.exp(q * y - x) / (1 + np.exp(p * y)) - gamma


COEFFICIENTS: dict[str, tuple[Callable[..., Callable], bool]] = {
    # name: (builder, uses the delayed argument)
    "constant": (lambda c=0.0: (lambda x, y: c + 0.0 * x), False),
    "linear": (lambda k=1.0: (lambda x, y: k * x), False),
    "affine": (lambda c=0.0, kx=0.0, ky=0.0: (lambda x, y: c + kx * x + ky * y), None),
    "delay_linear": (lambda k=1.0: (lambda x, y: k * y), True),
    "mackey_glass": (_mackey_glass, True),
}

HISTORIES: dict[str, Callable[..., Callable]] = {
    "constant": lambda c=0.0: (lambda s: c),
    "affine": lambda c=0.0, k=0.0: (lambda s: c + k * s),
}

INTEGRANDS: dict[str, Callable[..., Callable]] = {
    "constant": lambda c=1.0: (lambda s: c + 0.0 * np.asarray(s)),
    "linear": lambda k=1.0: (lambda s: k * np.asarray(s)),
    "exp_sin": lambda scale=0.5: (lambda s: scale * np.exp(-np.sin(s))),
}


@dataclass
class RunConfig:
    command: str
    grid: TimeGrid
    n_paths: int
    seed: int
    driver: LevyTriplet
    section: dict = field(default_factory=dict)
    output_dir: Path = Path(".")
    workers: int = 1


def _num(d: dict, key: str, path: str, default=None, *, positive=False, integer=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}".lstrip("."), "missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}".lstrip("."), f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{path}.{key}".lstrip("."), "must be finite")
    if integer and int(v) != v:
        raise ConfigError(f"{path}.{key}".lstrip("."), "must be an integer")
    if positive and v <= 0:
        raise ConfigError(f"{path}.{key}".lstrip("."), "must be positive")
    return int(v) if integer else float(v)


def _section(d: dict, key: str, path: str = "") -> dict:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"{path}.{key}".lstrip("."), "expected an object")
    return v


def _coefficient(spec: Any, path: str, allow_delay: bool) -> Callable:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(path, "expected an object with a 'name'")
    name = spec["name"]
    if name not in COEFFICIENTS:
        raise ConfigError(f"{path}.name", f"unknown coefficient {name!r}")
    builder, delayed = COEFFICIENTS[name]
    params = _section(spec, "params", path)
    for k, v in params.items():
        _num(params, k, f"{path}.params")
    if delayed is None:
        delayed = params.get("ky", 0.0) != 0.0
    if delayed and not allow_delay:
        raise ConfigError(f"{path}.name", f"{name!r} uses the delayed state; only the "
                          "sdde scheme provides one")
    try:
        return builder(**params)
    except TypeError as e:
        raise ConfigError(f"{path}.params", str(e)) from None


def _named(spec: Any, path: str, catalog: dict) -> Callable:
    if not isinstance(spec, dict) or spec.get("name") not in catalog:
        raise ConfigError(f"{path}.name", f"unknown function {spec!r}")
    params = _section(spec, "params", path)
    for k in params:
        _num(params, k, f"{path}.params")
    try:
        return catalog[spec["name"]](**params)
    except TypeError as e:
        raise ConfigError(f"{path}.params", str(e)) from None


def _triplet(d: Any, path: str = "driver") -> LevyTriplet:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    for key in ("b", "sigma2", "lambda", "cutoff"):
        if key in d:
            _num(d, key, path)
    law = d.get("jump_law")
    try:
        jump_law = JumpLaw.from_dict(law) if law is not None else Dirac()
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path}.jump_law", str(e)) from None
    try:
        return LevyTriplet(
            b=float(d.get("b", 0.0)),
            sigma2=float(d.get("sigma2", 0.0)),
            intensity=float(d.get("lambda", 0.0)),
            jump_law=jump_law,
            cutoff=float(d.get("cutoff", 1.0)),
        )
    except ValueError as e:
        raise ConfigError(path, str(e)) from None


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate a JSON run config.

    Raises :class:`ConfigParseError` for malformed JSON and
    :class:`ConfigError` (naming the key) for invalid content.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigParseError("config must be a JSON object")

    cmd = doc.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError("command", f"config says {cmd!r} but {command!r} was requested")
    if cmd not in COMMANDS:
        raise ConfigError("command", f"must be one of {COMMANDS}, got {cmd!r}")

    g = _section(doc, "grid")
    try:
        grid = TimeGrid(_num(g, "horizon", "grid", positive=True),
                        _num(g, "dt", "grid", positive=True))
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("grid.dt", str(e)) from None

    n_paths = _num(doc, "n_paths", "", 1, positive=True, integer=True)
    seed = _num(doc, "seed", "", 0, integer=True)
    workers = _num(doc, "workers", "", 1, positive=True, integer=True)
    driver = _triplet(doc.get("driver", {"sigma2": 1.0}))
    section = _section(doc, cmd)
    out = doc.get("output_dir", ".")
    if not isinstance(out, str):
        raise ConfigError("output_dir", "expected a string")

    cfg = RunConfig(cmd, grid, n_paths, int(seed) & _SEED_MASK, driver, section,
                    Path(out), workers)
    _validate_section(cfg)
    return cfg


def _validate_section(cfg: RunConfig) -> None:
    s = cfg.section
    if cfg.command == "integrate":
        _integrand(s)
        method = s.get("method", "left_riemann")
        if method not in ("left_riemann", "stieltjes"):
            raise ConfigError("integrate.method", f"unknown method {method!r}")
        if method == "stieltjes":
            if cfg.driver.sigma2 > 0:
                raise ConfigError("driver.sigma2", "stieltjes needs a driver without diffusion")
            if s.get("rule", "left_limit") not in ("left_limit", "node_value"):
                raise ConfigError("integrate.rule", f"unknown rule {s.get('rule')!r}")
    elif cfg.command == "solve":
        _solver(cfg)
    elif cfg.command == "validate":
        _checks(cfg)


def _integrand(s: dict):
    spec = s.get("integrand", {"kind": "driver"})
    if not isinstance(spec, dict):
        raise ConfigError("integrate.integrand", "expected an object")
    kind = spec.get("kind", "function")
    if kind == "driver":
        return None
    if kind == "function":
        return _named(spec, "integrate.integrand", INTEGRANDS)
    raise ConfigError("integrate.integrand.kind", f"unknown kind {kind!r}")


def _solver(cfg: RunConfig):
    s = cfg.section
    scheme = s.get("scheme", "euler")
    if scheme == "euler":
        return SdeProblem(
            drift=_two_to_time(_coefficient(s.get("drift"), "solve.drift", False)),
            diffusion=_two_to_time(_coefficient(s.get("diffusion"), "solve.diffusion", False)),
            x0=_num(s, "x0", "solve"),
        )
    if scheme == "sdde":
        try:
            delay_steps(cfg.grid.dt)
        except ValueError as e:
            raise ConfigError("grid.dt", str(e)) from None
        return SddeProblem(
            f=_coefficient(s.get("f"), "solve.f", True),
            g=_coefficient(s.get("g"), "solve.g", True),
            history=_named(s.get("history"), "solve.history", HISTORIES),
        )
    if scheme in ("theta", "bs_explicit"):
        params = {k: _num(s, k, "solve") for k in ("alpha", "beta", "y0")}
        if scheme == "theta":
            theta = _num(s, "theta", "solve")
            if not 0 <= theta <= 1:
                raise ConfigError("solve.theta", "must lie in [0, 1]")
            params["theta"] = theta
        return params
    raise ConfigError("solve.scheme", f"unknown scheme {scheme!r}")


def _two_to_time(fn):
    # SDE coefficients are called as (x, t); the catalog functions take (x, y)
    return lambda x, t: fn(x, x)


CHECKS = ("poisson_pmf", "cf", "martingale", "qv", "compensator", "doleans_density", "mean")


def _checks(cfg: RunConfig) -> list[dict]:
    checks = cfg.section.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ConfigError("validate.checks", "expected a non-empty list")
    for i, c in enumerate(checks):
        path = f"validate.checks[{i}]"
        if not isinstance(c, dict) or c.get("check") not in CHECKS:
            raise ConfigError(f"{path}.check", f"unknown check {c!r}")
        for key in ("lambda", "t", "time", "target", "n_paths"):
            if key in c:
                _num(c, key, path)
        for key in ("u", "times"):
            if key in c:
                if not isinstance(c[key], list):
                    raise ConfigError(f"{path}.{key}", "expected a list")
                for j in range(len(c[key])):
                    _num({str(j): c[key][j]}, str(j), f"{path}.{key}")
        for key in ("t", "time"):
            if key in c:
                _node(cfg.grid, c[key], f"{path}.{key}")
        for key in ("times",):
            for j, t in enumerate(c.get(key, [])):
                _node(cfg.grid, t, f"{path}.{key}[{j}]")
    mult = cfg.section.get("multiple", DEFAULT_MULTIPLE)
    _num({"multiple": mult}, "multiple", "validate", positive=True)
    return checks


def _node(grid: TimeGrid, t, path: str) -> None:
    try:
        grid.node(float(t))
    except ValueError:
        raise ConfigError(path, f"{t} is not a grid node") from None


# ---------------------------------------------------------------------------
# execution


def _driver_paths(cfg: RunConfig, seed: int | None = None):
    return simulate_jump_diffusion(cfg.grid, cfg.n_paths, cfg.driver,
                                   cfg.seed if seed is None else seed, workers=cfg.workers)


def _run_simulate(cfg: RunConfig, out: Path) -> None:
    ps = _driver_paths(cfg)
    write_paths_csv(out / "paths.csv", ps.grid.times, ps.values)
    write_jumps_csv(out / "jumps.csv", ps)


def _run_integrate(cfg: RunConfig, out: Path) -> None:
    s = cfg.section
    ps = _driver_paths(cfg)
    H = _integrand(s)
    if H is None:
        H = ps
    if s.get("method", "left_riemann") == "stieltjes":
        integral = stieltjes_integral(H, ps, rule=s.get("rule", "left_limit"))
    else:
        integral = left_riemann_integral(H, ps)
    write_paths_csv(out / "paths.csv", ps.grid.times, ps.values)
    write_jumps_csv(out / "jumps.csv", ps)
    write_paths_csv(out / "integral.csv", ps.grid.times, integral.values)


def _run_solve(cfg: RunConfig, out: Path) -> None:
    s = cfg.section
    scheme = s.get("scheme", "euler")
    problem = _solver(cfg)
    ps = _driver_paths(cfg)
    if scheme == "euler":
        res = euler_maruyama(problem, ps)
    elif scheme == "sdde":
        res = euler_sdde(problem, ps)
    elif scheme == "theta":
        res = theta_linear_bs(problem["alpha"], problem["beta"], problem["theta"],
                              problem["y0"], ps)
    else:
        res = bs_explicit(problem["alpha"], problem["beta"], problem["y0"], ps)
    if res.n_diverged == len(ps):
        raise RuntimeError("every path diverged")
    if res.n_diverged:
        print(f"warning: {res.n_diverged} of {len(ps)} paths diverged", file=sys.stderr)
    write_paths_csv(out / "paths.csv", ps.grid.times, ps.values)
    write_jumps_csv(out / "jumps.csv", ps)
    write_paths_csv(out / "solution.csv", res.times, res.values)


def retry_seed(seed: int) -> int:
    """Fresh, deterministic seed for the single rerun of a failing check."""
    ss = np.random.SeedSequence([seed, 0x5EED])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _one_check(cfg: RunConfig, c: dict, seed: int, multiple: float):
    kind = c["check"]
    if kind == "poisson_pmf":
        lam = float(c.get("lambda", 1.0))
        t = float(c.get("t", cfg.grid.horizon))
        ps = simulate_poisson(cfg.grid, cfg.n_paths, lam, seed, workers=cfg.workers)
        return poisson_pmf_check(ps, lam, t, multiple=multiple)
    if kind == "compensator":
        lam = float(c.get("lambda", 1.0))
        t = float(c.get("t", cfg.grid.horizon))
        law = JumpLaw.from_dict(c["jump_law"]) if "jump_law" in c else None
        return [compensator_check(lam, t, law, n_paths=int(c.get("n_paths", cfg.n_paths)),
                                  seed=seed, dt=cfg.grid.dt, multiple=multiple)]
    ps = _driver_paths(cfg, seed)
    if kind == "cf":
        return cf_check(ps, cfg.driver, float(c.get("time", cfg.grid.horizon)),
                        [float(u) for u in c.get("u", [1.0])], multiple)
    if kind == "martingale":
        mps = compensate(ps, canonical_drift(cfg.driver))
        return martingale_check(mps, [float(t) for t in c.get("times", [cfg.grid.horizon])],
                                multiple)
    if kind == "qv":
        return [qv_check(ps, cfg.driver, float(c.get("t", cfg.grid.horizon)), multiple)]
    if kind == "doleans_density":
        rects = [tuple(float(v) for v in r) for r in c.get("rectangles", [])]
        return doleans_density_check(ps, cfg.driver, rects, multiple)
    if kind == "mean":
        return [mean_check(ps, float(c.get("time", cfg.grid.horizon)), float(c["target"]),
                           multiple=multiple)]
    raise ConfigError("validate.checks", f"unknown check {kind!r}")


def _run_validate(cfg: RunConfig, out: Path) -> bool:
    multiple = float(cfg.section.get("multiple", DEFAULT_MULTIPLE))
    lines, records, ok = [], [], True
    for c in cfg.section["checks"]:
        reports = _one_check(cfg, c, cfg.seed, multiple)
        retried = False
        if not all(r.passed for r in reports):
            reports = _one_check(cfg, c, retry_seed(cfg.seed), multiple)
            retried = True
        for r in reports:
            ok &= r.passed
            lines.append(r.line() + (" (retried)" if retried else ""))
            records.append(r.record() | {"retried": retried})
    lines.append(f"{'ALL PASS' if ok else 'SOME FAILED'}: {len(records)} checks")
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    write_jsonl(out / "report.jsonl", records)
    return ok


def run(cfg: RunConfig) -> int:
    """Execute a parsed config; returns the process exit code."""
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"output directory {out} is not writable")
        if cfg.command == "simulate":
            _run_simulate(cfg, out)
        elif cfg.command == "integrate":
            _run_integrate(cfg, out)
        elif cfg.command == "solve":
            _run_solve(cfg, out)
        else:
            return 0 if _run_validate(cfg, out) else 1
    except (OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levyforge",
                                description="Simulate Lévy processes and check stochastic "
                                            "calculus identities.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--seed", type=int, help="override the config seed (u64)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--workers", type=int, help="worker threads for path generation")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, args.command)
    except (OSError, UnicodeDecodeError, ConfigParseError) as e:
        print(f"error: cannot parse config: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return 3
    if args.seed is not None:
        if not 0 <= args.seed <= _SEED_MASK:
            print("error: invalid config: --seed must be an unsigned 64-bit integer",
                  file=sys.stderr)
            return 3
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = Path(args.out)
    if args.workers is not None:
        if args.workers < 1:
            print("error: invalid config: --workers must be positive", file=sys.stderr)
            return 3
        cfg.workers = args.workers
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
