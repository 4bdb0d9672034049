"""Named pass/fail checks that render theory claims as run diagnostics.

Each check evaluates one property of a finished trajectory at a tolerance
and reports the worst violation.  The registry maps stable check names (the
ones scenario configs refer to) to implementations, default tolerances, and
a one-line statement of the underlying mathematical fact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import diagnostics
from .ensemble import Trajectory
from .kernels import Kernel

__all__ = ["CheckResult", "RunContext", "run_checks", "known_checks", "default_tolerance"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_violation: float
    tolerance: float
    theory_ref: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "theory_ref": self.theory_ref,
            "detail": self.detail,
        }


@dataclass
class RunContext:
    """A finished run plus lazily computed series shared between checks."""

    trajectory: Trajectory
    kernel: Kernel
    n_threads: int = 1
    rng_seed: int = 0

    @cached_property
    def moments(self) -> diagnostics.MomentSeries:
        return diagnostics.moment_series(self.trajectory, range(1, 7))

    @cached_property
    def w1_to_final(self) -> np.ndarray:
        final = self.trajectory.final
        return np.array([diagnostics.wasserstein1(s, final)
                         for s in self.trajectory.snapshots])

    @cached_property
    def order_report(self) -> diagnostics.OrderAuditReport:
        return diagnostics.order_audit(self.trajectory, rng_seed=self.rng_seed,
                                       kernel=self.kernel)


def _moment_monotone(order: int):
    def check(ctx: RunContext, tol: float, **kw) -> tuple[bool, float, str]:
        rep = diagnostics.monotonicity_report(
            ctx.moments.times, ctx.moments.values_per_order[order], tol)
        return rep.passed, rep.worst_uptick, f"worst uptick at t={rep.worst_time:g}"
    return check


def _mean_conserved(ctx: RunContext, tol: float, **kw):
    m1 = ctx.moments.values_per_order[1]
    worst = float(np.max(np.abs(m1 - m1[0])))
    return worst <= tol, worst, ""


def _dissipation_identity(ctx: RunContext, tol: float, **kw):
    skip = ctx.kernel.lipschitz_L is None
    res = diagnostics.dissipation_identity_residuals(
        ctx.trajectory, ctx.kernel, ctx.n_threads, skip_switching=skip)
    if len(res) == 0:
        return True, 0.0, "no eligible steps"
    worst = float(np.max(np.abs(res)))
    return worst <= tol, worst, f"{len(res)} steps checked"


def _dissipation_telescope(ctx: RunContext, tol: float, **kw):
    err = diagnostics.dissipation_telescope_error(ctx.trajectory, ctx.kernel,
                                                  ctx.n_threads)
    return err <= tol, err, ""


def _box_invariant(ctx: RunContext, tol: float, **kw):
    traj = ctx.trajectory
    allowance = tol if tol > 0 else 10.0 * traj.dt ** 2 * traj.w_bound ** 2
    worst = max((r.max_overshoot for r in traj.step_records), default=0.0)
    inside = all(np.all((s.opinions >= 0) & (s.opinions <= 1))
                 for s in traj.snapshots)
    return worst <= allowance and inside, worst, "post-clamp snapshots in [0,1]"


def _time_lipschitz(ctx: RunContext, tol: float, **kw):
    traj = ctx.trajectory
    if not traj.step_records or traj.w_bound == 0:
        return True, 0.0, "no steps or zero bound"
    worst = max(r.max_step_displacement / (traj.w_bound * r.dt) - 1.0
                for r in traj.step_records)
    return worst <= tol, max(worst, 0.0), ""


def _cluster_separation(ctx: RunContext, tol: float, r: float | None = None,
                        gap_threshold: float | None = None,
                        mass_floor: float = 0.0, **kw):
    if r is None and ctx.kernel.default_gamma is not None:
        r = ctx.kernel.default_gamma[0]
    if r is None:
        return False, float("inf"), "no interaction radius available"
    g = gap_threshold if gap_threshold is not None else r / 4.0
    clusters = diagnostics.detect_clusters(ctx.trajectory.final, g, mass_floor)
    required = r - 2.0 * g - tol
    observed = clusters.min_separation()
    worst = max(0.0, required - observed)
    return observed >= required, worst, (
        f"{len(clusters.centers)} clusters, min separation {observed:.4g}, "
        f"required {required:.4g}")


def _order_preserved(ctx: RunContext, tol: float, **kw):
    rep = ctx.order_report
    return (len(rep.violations) <= tol, float(len(rep.violations)),
            f"{rep.pairs_checked} pairs audited")


def _order_rate_bound(ctx: RunContext, tol: float, **kw):
    if not (ctx.kernel.position_only and ctx.kernel.lipschitz_L is not None):
        return True, 0.0, "skipped: kernel is not Lipschitz position-only"
    rep = diagnostics.order_audit(ctx.trajectory, rng_seed=ctx.rng_seed,
                                  kernel=ctx.kernel, rate_slack=tol)
    return (not rep.rate_bound_violations,
            float(len(rep.rate_bound_violations)),
            f"min observed log gap rate {rep.min_gap_ratio_log:.3g}")


def _w1_converged(ctx: RunContext, tol: float, tail_fraction: float = 0.25, **kw):
    times = ctx.trajectory.times
    span = times[-1] - times[0]
    tail = times >= times[-1] - tail_fraction * span
    worst = float(np.max(ctx.w1_to_final[tail]))
    return worst < tol, worst, f"{int(tail.sum())} tail snapshots"


def _steady_state(ctx: RunContext, tol: float, **kw):
    if not ctx.trajectory.step_records:
        return False, float("inf"), "no step records"
    final_v = ctx.trajectory.step_records[-1].max_velocity
    return final_v < tol, final_v, ""


_REGISTRY: dict[str, tuple] = {
    "mean_conserved": (_mean_conserved, 1e-8,
                       "the mean opinion is conserved under symmetric interactions"),
    "dissipation_identity": (_dissipation_identity, 1e-4,
                             "the second moment decays at exactly the pairwise "
                             "dissipation rate under symmetric interactions"),
    "dissipation_telescope": (_dissipation_telescope, 1e-5,
                              "the time integral of the dissipation equals the "
                              "total second-moment drop"),
    "box_invariant": (_box_invariant, 0.0,
                      "opinions started in [0,1] remain in [0,1]"),
    "time_lipschitz": (_time_lipschitz, 1e-6,
                       "each opinion moves at most W per unit time"),
    "cluster_separation": (_cluster_separation, 0.0,
                           "steady-state cluster centers are separated by at "
                           "least the interaction radius"),
    "order_preserved": (_order_preserved, 0.0,
                        "pairwise opinion differences never change sign for "
                        "Lipschitz position-only interactions"),
    "order_rate_bound": (_order_rate_bound, 0.05,
                         "pairwise gaps shrink no faster than exp(-(L+W) t)"),
    "w1_converged": (_w1_converged, 0.01,
                     "the opinion distribution converges (W1 to the final "
                     "snapshot stays small over the tail of the run)"),
    "steady_state": (_steady_state, 1e-8,
                     "the run reached a stationary configuration"),
}
for _k in range(1, 7):
    _REGISTRY[f"moment_monotone_k{_k}"] = (
        _moment_monotone(_k), 1e-6,
        f"the order-{_k} opinion moment is nonincreasing under symmetric "
        "interactions")


def known_checks() -> list[str]:
    return sorted(_REGISTRY)


def default_tolerance(name: str) -> float:
    return _REGISTRY[name][1]


def run_checks(ctx: RunContext, specs: list[dict]) -> list[CheckResult]:
    """Run the named checks; each spec is {name, tolerance?, ...params}."""
    results = []
    for spec in specs:
        name = spec["name"]
        if name not in _REGISTRY:
            raise KeyError(f"unknown check {name!r}; known checks: "
                           f"{', '.join(known_checks())}")
        fn, default_tol, ref = _REGISTRY[name]
        tol = float(spec.get("tolerance", default_tol))
        params = {k: v for k, v in spec.items() if k not in ("name", "tolerance")}
        passed, worst, detail = fn(ctx, tol, **params)
        results.append(CheckResult(name=name, passed=bool(passed),
                                   worst_violation=float(worst), tolerance=tol,
                                   theory_ref=ref, detail=detail))
    return results
