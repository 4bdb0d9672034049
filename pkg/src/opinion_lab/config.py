"""Declarative scenario configs (YAML).

A scenario names a kernel, an initial opinion profile, the discretization
size, integrator settings, and the list of checks to run, e.g.::

    name: hk_baseline
    kernel: {family: hegselmann_krause, r: 0.2}
    initial_profile: {kind: uniform}
    n: 200
    rng_seed: 42
    integrator: {method: rk4, dt: 0.01, t_end: 30.0, record_every: 10}
    diagnostics:
      - {name: moment_monotone_k1, tolerance: 1.0e-8}
      - {name: mean_conserved}
    output_dir: runs/hk_baseline

Kernel specs are tagged unions on ``family``; per-agent parameters (radius,
sigma) take either a scalar or {breakpoints: [...], values: [...]} for a
piecewise-constant profile over the agent index.  Validation collects every
error before failing, not just the first.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import yaml

from . import checks as checks_mod
from . import kernels as K
from .ensemble import IntegratorConfig

__all__ = ["ScenarioConfig", "ConfigError", "load_config", "build_profile_fn"]

KNOWN_FAMILIES = [
    "constant",
    "hegselmann_krause",
    "bounded_confidence",
    "bounded_influence",
    "gaussian_decay",
    "ring_sensing",
    "typed_confidence",
    "finite_consensus",
    "custom_expression",
]

PROFILE_KINDS = ["uniform", "constant", "piecewise", "expression"]

_EXPR_GLOBALS = {"__builtins__": {}}
_EXPR_NAMES = {name: getattr(math, name) for name in dir(math) if not name.startswith("_")}


class ConfigError(ValueError):
    """Carries every validation problem found in a config file."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid config:\n  " + "\n  ".join(errors))


@dataclass
class ScenarioConfig:
    name: str
    kernel_spec: dict
    kernel: K.Kernel
    profile_spec: dict
    n: int
    integrator: IntegratorConfig
    diagnostics: list[dict]
    output_dir: str | None
    rng_seed: int
    picard: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def initial_profile(self):
        return build_profile_fn(self.profile_spec)


def _parse_profile_param(spec, errors, what: str):
    """Scalar or piecewise {breakpoints, values} parameter over alpha."""
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, dict) and "values" in spec:
        try:
            return K.PiecewiseProfile(tuple(spec.get("breakpoints", ())),
                                      tuple(spec["values"]))
        except (ValueError, TypeError) as exc:
            errors.append(f"{what}: {exc}")
            return None
    errors.append(f"{what}: expected a number or {{breakpoints, values}}")
    return None


def build_kernel(spec, errors: list[str]) -> K.Kernel | None:
    if not isinstance(spec, dict) or "family" not in spec:
        errors.append("kernel: expected a mapping with a 'family' tag")
        return None
    family = spec["family"]
    try:
        if family == "constant":
            return K.constant(float(spec["c"]))
        if family == "hegselmann_krause":
            return K.hegselmann_krause(float(spec["r"]))
        if family == "bounded_confidence":
            prof = _parse_profile_param(spec["r"], errors, "kernel.r")
            return K.bounded_confidence(prof) if prof is not None else None
        if family == "bounded_influence":
            prof = _parse_profile_param(spec["r"], errors, "kernel.r")
            return K.bounded_influence(prof) if prof is not None else None
        if family == "gaussian_decay":
            prof = _parse_profile_param(spec["sigma"], errors, "kernel.sigma")
            return K.gaussian_decay(prof) if prof is not None else None
        if family == "ring_sensing":
            return K.ring_sensing(float(spec["r_min"]), float(spec["r_max"]))
        if family == "typed_confidence":
            return K.typed_confidence(float(spec["r"]), float(spec["r_prime"]))
        if family == "finite_consensus":
            sched = K.MatrixSchedule(
                tuple(float(b) for b in spec.get("breakpoints", (0.0,))),
                tuple(tuple(tuple(float(v) for v in row) for row in mat)
                      for mat in spec["matrices"]),
                period=spec.get("period"),
            )
            return K.finite_consensus_embed(int(spec["n_blocks"]), sched)
        if family == "custom_expression":
            expr = compile(str(spec["expr"]), "<kernel expr>", "eval")

            def rule(t, alpha, beta, x_alpha, x_beta):
                return float(eval(expr, _EXPR_GLOBALS,
                                  {"t": t, "alpha": alpha, "beta": beta,
                                   "x_alpha": x_alpha, "x_beta": x_beta,
                                   **_EXPR_NAMES}))

            return K.custom(rule, w_bound=float(spec["w_bound"]),
                            lipschitz_l=spec.get("lipschitz_l"),
                            symmetric=bool(spec.get("symmetric", False)),
                            name="custom_expression")
    except KeyError as exc:
        errors.append(f"kernel family {family!r}: missing parameter {exc}")
        return None
    except (ValueError, TypeError, K.ScheduleError) as exc:
        errors.append(f"kernel family {family!r}: {exc}")
        return None
    errors.append(f"unknown kernel family {family!r}; known families: "
                  f"{', '.join(KNOWN_FAMILIES)}")
    return None


def build_profile_fn(spec: dict):
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        return lambda a: a
    if kind == "constant":
        v = float(spec["value"])
        return lambda a: v
    if kind == "piecewise":
        prof = K.PiecewiseProfile(tuple(spec.get("breakpoints", ())),
                                  tuple(spec["values"]))
        return prof.value
    if kind == "expression":
        code = compile(str(spec["expr"]), "<profile expr>", "eval")
        return lambda a: float(eval(code, _EXPR_GLOBALS, {"alpha": a, **_EXPR_NAMES}))
    raise ValueError(f"unknown profile kind {kind!r}; known kinds: "
                     f"{', '.join(PROFILE_KINDS)}")


def _validate_profile(spec, errors: list[str]):
    if not isinstance(spec, dict):
        errors.append("initial_profile: expected a mapping with a 'kind' tag")
        return
    try:
        fn = build_profile_fn(spec)
        for a in (0.0, 0.25, 0.5, 0.75, 1.0):
            v = fn(a)
            if not (0.0 <= v <= 1.0):
                errors.append(
                    f"initial_profile: value {v} at alpha={a} is outside [0, 1]")
                return
    except (ValueError, TypeError, KeyError, SyntaxError) as exc:
        errors.append(f"initial_profile: {exc}")


def _writable_dir(path: str) -> bool:
    probe = os.path.abspath(path)
    while probe and not os.path.exists(probe):
        parent = os.path.dirname(probe)
        if parent == probe:
            break
        probe = parent
    return os.path.isdir(probe) and os.access(probe, os.W_OK)


def load_config(path: str) -> ScenarioConfig:
    """Parse and fully validate a scenario file; raises ConfigError with the
    complete list of problems found."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError([f"parse error{loc}: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a mapping"])

    errors: list[str] = []
    name = raw.get("name") or os.path.splitext(os.path.basename(path))[0]
    kernel = build_kernel(raw.get("kernel", {}), errors)

    profile_spec = raw.get("initial_profile", {"kind": "uniform"})
    _validate_profile(profile_spec, errors)

    n = raw.get("n", 100)
    if not isinstance(n, int) or n < 2:
        errors.append(f"n: need an integer >= 2, got {n!r}")

    integ_raw = raw.get("integrator", {})
    integrator = None
    try:
        integrator = IntegratorConfig(
            method=integ_raw.get("method", "rk4"),
            dt=float(integ_raw.get("dt", 0.01)),
            t_end=float(integ_raw.get("t_end", 1.0)),
            clamp_to_box=bool(integ_raw.get("clamp_to_box", True)),
            record_every=int(integ_raw.get("record_every", 1)),
            stop_max_velocity=integ_raw.get("stop_max_velocity"),
        )
    except (ValueError, TypeError) as exc:
        errors.append(f"integrator: {exc}")

    diag = raw.get("diagnostics", [])
    specs: list[dict] = []
    for item in diag:
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, dict) or "name" not in item:
            errors.append(f"diagnostics: bad entry {item!r}")
            continue
        if item["name"] not in checks_mod.known_checks():
            errors.append(f"diagnostics: unknown check {item['name']!r}; known "
                          f"checks: {', '.join(checks_mod.known_checks())}")
            continue
        specs.append(item)

    output_dir = raw.get("output_dir")
    if output_dir is not None and not _writable_dir(output_dir):
        errors.append(f"output_dir: {output_dir!r} is not writable")

    rng_seed = raw.get("rng_seed", 0)
    if not isinstance(rng_seed, int):
        errors.append(f"rng_seed: need an integer, got {rng_seed!r}")

    if errors:
        raise ConfigError(errors)
    assert kernel is not None and integrator is not None
    return ScenarioConfig(name=name, kernel_spec=raw.get("kernel", {}),
                          kernel=kernel, profile_spec=profile_spec, n=n,
                          integrator=integrator, diagnostics=specs,
                          output_dir=output_dir, rng_seed=rng_seed,
                          picard=raw.get("picard", {}), raw=raw)
