"""Agent-continuum discretization and trajectory integration.

The continuum of agents indexed by alpha in [0, 1] is discretized into
quadrature nodes (index, opinion, mass).  The evolution rule is

    dx_i/dt = sum_j m_j * w(t, a_i, a_j, x_i, x_j) * (x_j - x_i)

and the box [0, 1] is invariant for initial data in [0, 1].  Sums run in
fixed node order with compensated summation, so trajectories are bit-exactly
reproducible (including across thread counts).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import backend
from .kernels import Kernel

__all__ = [
    "Ensemble",
    "Trajectory",
    "IntegratorConfig",
    "StepSizeError",
    "BoxViolationError",
    "uniform_ensemble",
    "rhs",
    "integrate",
]


class StepSizeError(ValueError):
    """dt violates the explicit-integrator stability guard dt <= 0.5 / W."""


class BoxViolationError(RuntimeError):
    """A step left [0, 1] by more than the discretization-error allowance."""


@dataclass(frozen=True)
class Ensemble:
    """Immutable snapshot: quadrature nodes (alpha, opinion, mass) at time t.

    Masses must sum to 1 (within 1e-12) and agent indices must be strictly
    increasing.  Opinions are unconstrained here; trajectories produced by
    ``integrate`` from data in [0, 1] stay in [0, 1].
    """

    alphas: np.ndarray
    opinions: np.ndarray
    masses: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        alphas = np.ascontiguousarray(self.alphas, dtype=np.float64)
        opinions = np.ascontiguousarray(self.opinions, dtype=np.float64)
        masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "opinions", opinions)
        object.__setattr__(self, "masses", masses)
        if not (len(alphas) == len(opinions) == len(masses)):
            raise ValueError("alphas, opinions, masses must have equal length")
        if len(alphas) == 0:
            raise ValueError("ensemble must contain at least one node")
        if np.any(np.diff(alphas) <= 0):
            raise ValueError("agent indices must be strictly increasing")
        if np.any(masses <= 0):
            raise ValueError("masses must be positive")
        if abs(float(masses.sum()) - 1.0) > 1e-12:
            raise ValueError(f"masses must sum to 1, got {masses.sum()!r}")
        if self.t < 0:
            raise ValueError("time must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.alphas)

    def with_opinions(self, opinions: np.ndarray, t: float) -> "Ensemble":
        return Ensemble(self.alphas, opinions, self.masses, t)


@dataclass(frozen=True)
class StepRecord:
    t: float
    dt: float
    max_velocity: float
    max_step_displacement: float
    max_overshoot: float


@dataclass
class Trajectory:
    """Time-ordered snapshots plus per-step records from one integration."""

    snapshots: list[Ensemble]
    step_records: list[StepRecord] = field(default_factory=list)
    method: str = ""
    dt: float = 0.0
    w_bound: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def initial(self) -> Ensemble:
        return self.snapshots[0]

    @property
    def final(self) -> Ensemble:
        return self.snapshots[-1]

    def opinions_matrix(self) -> np.ndarray:
        return np.stack([s.opinions for s in self.snapshots])


@dataclass(frozen=True)
class IntegratorConfig:
    """Explicit integrator settings.

    dt must satisfy dt <= 0.5 / W_bound (checked against the kernel at run
    time).  ``stop_max_velocity`` ends the run early once max |dx/dt| falls
    below it (steady-state detection).
    """

    method: str = "rk4"
    dt: float = 0.01
    t_end: float = 1.0
    clamp_to_box: bool = True
    record_every: int = 1
    stop_max_velocity: float | None = None

    def __post_init__(self):
        if self.method not in ("explicit_euler", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


def uniform_ensemble(n: int, initial_profile: Callable[[float], float] | Sequence[float] | float) -> Ensemble:
    """Midpoint quadrature: nodes at (i - 1/2)/n with mass 1/n each.

    ``initial_profile`` maps alpha to an opinion in [0, 1]; a scalar means a
    constant profile and a sequence is used verbatim.
    """
    if n < 2:
        raise ValueError("need n >= 2 nodes")
    alphas = (np.arange(n, dtype=np.float64) + 0.5) / n
    if callable(initial_profile):
        opinions = np.array([float(initial_profile(a)) for a in alphas])
    elif np.isscalar(initial_profile):
        opinions = np.full(n, float(initial_profile))
    else:
        opinions = np.asarray(initial_profile, dtype=np.float64)
        if len(opinions) != n:
            raise ValueError("profile sequence length must equal n")
    if np.any(opinions < 0) or np.any(opinions > 1):
        raise ValueError("initial opinions must lie in [0, 1]")
    masses = np.full(n, 1.0 / n)
    return Ensemble(alphas, opinions, masses, 0.0)


def _rhs_arrays(kernel: Kernel, t: float, alphas, x, m, out, n_threads: int,
                validate: bool) -> np.ndarray:
    plan = kernel.core_plan(alphas, t)
    if plan is not None and not validate:
        backend.rhs_builtin(plan.code, t, plan.scal, plan.node_param, plan.mat,
                            plan.block, alphas, x, m, out, n_threads)
        return out
    evaluate = kernel.evaluate_checked if validate else kernel.evaluate
    n = len(x)
    for i in range(n):
        xi = x[i]
        ai = alphas[i]
        s = 0.0
        c = 0.0
        for j in range(n):
            w = evaluate(t, ai, alphas[j], xi, x[j])
            term = m[j] * w * (x[j] - xi)
            y = term - c
            tt = s + y
            c = (tt - s) - y
            s = tt
        out[i] = s
    return out


def rhs(ensemble: Ensemble, kernel: Kernel, n_threads: int = 1,
        validate: bool = False) -> np.ndarray:
    """Velocities dx_i/dt for every node of the ensemble.

    Fixed-order compensated summation; built-in kernel families dispatch to
    the selected core backend, other kernels use the generic evaluation loop
    (bit-identical arithmetic either way).  ``validate`` forces the generic
    loop with per-evaluation bound assertions.
    """
    out = np.empty(ensemble.n, dtype=np.float64)
    return _rhs_arrays(kernel, ensemble.t, ensemble.alphas, ensemble.opinions,
                       ensemble.masses, out, n_threads, validate)


def dissipation_rate(ensemble: Ensemble, kernel: Kernel, n_threads: int = 1) -> float:
    """D = sum_ij m_i m_j w(t, a_i, a_j, x_i, x_j) (x_j - x_i)^2 (>= 0).

    Under a symmetric kernel the second moment of the opinions decays at
    exactly this rate along the continuous-time dynamics.
    """
    plan = kernel.core_plan(ensemble.alphas, ensemble.t)
    if plan is not None:
        return backend.dissipation_builtin(
            plan.code, ensemble.t, plan.scal, plan.node_param, plan.mat,
            plan.block, ensemble.alphas, ensemble.opinions, ensemble.masses,
            n_threads)
    x = ensemble.opinions
    m = ensemble.masses
    alphas = ensemble.alphas
    t = ensemble.t
    outer_s = 0.0
    outer_c = 0.0
    for i in range(ensemble.n):
        s = 0.0
        c = 0.0
        for j in range(ensemble.n):
            w = kernel.evaluate(t, alphas[i], alphas[j], x[i], x[j])
            d = x[j] - x[i]
            term = m[j] * w * (d * d)
            y = term - c
            tt = s + y
            c = (tt - s) - y
            s = tt
        term = m[i] * s
        y = term - outer_c
        tt = outer_s + y
        outer_c = (tt - outer_s) - y
        outer_s = tt
    return outer_s


def integrate(initial: Ensemble, kernel: Kernel, config: IntegratorConfig,
              n_threads: int = 1) -> Trajectory:
    """Integrate the pairwise-attraction dynamics from ``initial``.

    Snapshots are recorded every ``record_every`` steps plus the final state.
    With clamping enabled (the default), initial opinions must lie in [0, 1];
    after every step opinions are clamped back to [0, 1] and an overshoot
    beyond the discretization allowance 10 * dt^2 * W^2 raises
    BoxViolationError rather than being silently absorbed.
    """
    w_bound = kernel.W_bound
    if w_bound > 0 and config.dt > 0.5 / w_bound:
        raise StepSizeError(
            f"dt={config.dt} violates the stability guard dt <= 0.5/W_bound "
            f"= {0.5 / w_bound} (W_bound={w_bound})")
    x = initial.opinions.copy()
    if config.clamp_to_box and (np.any(x < 0) or np.any(x > 1)):
        raise ValueError("initial opinions must lie in [0, 1] when clamping")

    alphas = initial.alphas
    masses = initial.masses
    tol_box = 10.0 * config.dt ** 2 * w_bound ** 2
    n_steps = max(1, int(round(config.t_end / config.dt)))
    dt = config.dt

    k1 = np.empty_like(x)
    k2 = np.empty_like(x)
    k3 = np.empty_like(x)
    k4 = np.empty_like(x)

    snapshots = [initial.with_opinions(x.copy(), initial.t)]
    records: list[StepRecord] = []

    t = initial.t
    for step in range(n_steps):
        if config.method == "explicit_euler":
            _rhs_arrays(kernel, t, alphas, x, masses, k1, n_threads, False)
            v = k1
            x_new = x + dt * k1
        else:
            _rhs_arrays(kernel, t, alphas, x, masses, k1, n_threads, False)
            _rhs_arrays(kernel, t + 0.5 * dt, alphas, x + (0.5 * dt) * k1,
                        masses, k2, n_threads, False)
            _rhs_arrays(kernel, t + 0.5 * dt, alphas, x + (0.5 * dt) * k2,
                        masses, k3, n_threads, False)
            _rhs_arrays(kernel, t + dt, alphas, x + dt * k3,
                        masses, k4, n_threads, False)
            v = k1
            x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if not np.all(np.isfinite(x_new)):
            raise RuntimeError(
                f"non-finite state at t={t + dt:.6g}; kernel "
                f"{kernel.family!r} produced invalid values")

        max_velocity = float(np.max(np.abs(v)))
        overshoot = 0.0
        if config.clamp_to_box:
            overshoot = float(max(np.max(x_new) - 1.0, 0.0 - np.min(x_new), 0.0))
            if overshoot > tol_box:
                raise BoxViolationError(
                    f"step at t={t:.6g} left [0,1] by {overshoot:.3e} "
                    f"(allowance {tol_box:.3e})")
            if overshoot > 0.0:
                np.clip(x_new, 0.0, 1.0, out=x_new)

        disp = float(np.max(np.abs(x_new - x)))
        t_new = initial.t + (step + 1) * dt
        records.append(StepRecord(t, dt, max_velocity, disp, overshoot))
        x = x_new
        t = t_new

        done = (step == n_steps - 1)
        if config.stop_max_velocity is not None and max_velocity < config.stop_max_velocity:
            done = True
        if done or (step + 1) % config.record_every == 0:
            snapshots.append(initial.with_opinions(x.copy(), t))
        if done:
            break

    return Trajectory(snapshots=snapshots, step_records=records,
                      method=config.method, dt=dt, w_bound=w_bound)
