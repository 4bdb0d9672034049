"""Theory-derived observables and pass/fail property reports.

Everything here is a pure function of immutable snapshots: moments and
convex functionals (which are nonincreasing under symmetric interactions),
the pairwise dissipation rate and its exchange with the second moment, the
1-D Wasserstein distance (distributional-convergence diagnostic), cluster
detection, and the order-preservation audit for Lipschitz position-only
kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ensemble import Ensemble, Trajectory, dissipation_rate
from .kernels import Kernel

__all__ = [
    "MomentSeries",
    "ClusterSet",
    "OrderAuditReport",
    "MonotonicityReport",
    "moment",
    "lyapunov",
    "convex_dictionary",
    "dissipation",
    "variance_identity_check",
    "wasserstein1",
    "w1_to_uniform",
    "detect_clusters",
    "order_audit",
    "monotonicity_report",
    "moment_series",
    "dissipation_identity_residuals",
    "dissipation_telescope_error",
]


def moment(ensemble: Ensemble, k: int) -> float:
    """Mass-weighted power sum m(k) = sum_i m_i x_i^k."""
    if k < 1:
        raise ValueError("moment order must be >= 1")
    return float(np.sum(ensemble.masses * ensemble.opinions ** k))


def lyapunov(ensemble: Ensemble, f: Callable[[float], float]) -> float:
    """Mass-weighted sum of a scalar function over opinions.

    For convex f this quantity is nonincreasing along trajectories of any
    symmetric kernel.
    """
    return float(sum(m * f(x) for m, x in zip(ensemble.masses, ensemble.opinions)))


def _huber(c: float, delta: float = 0.01) -> Callable[[float], float]:
    def f(x: float) -> float:
        u = x - c
        if abs(u) <= delta:
            return 0.5 * u * u / delta
        return abs(u) - 0.5 * delta
    return f


def convex_dictionary(rng_seed: int | None = None, n_random: int = 0):
    """Named convex test functions; a finite stand-in for 'every convex f'.

    The fixed entries are x, -x, x^2, x^4, exp(x), exp(-x) and smoothed
    |x - c| for c in {0.25, 0.5, 0.75}.  Optionally appends random convex
    piecewise-linear functions (maxima of affine pieces).
    """
    entries: list[tuple[str, Callable[[float], float]]] = [
        ("x", lambda x: x),
        ("neg_x", lambda x: -x),
        ("x2", lambda x: x * x),
        ("x4", lambda x: x ** 4),
        ("exp", math.exp),
        ("exp_neg", lambda x: math.exp(-x)),
        ("huber_025", _huber(0.25)),
        ("huber_050", _huber(0.5)),
        ("huber_075", _huber(0.75)),
    ]
    if n_random:
        rng = np.random.default_rng(rng_seed)
        for k in range(n_random):
            slopes = np.sort(rng.uniform(-3.0, 3.0, 4))
            offsets = rng.uniform(-1.0, 1.0, 4)
            entries.append((
                f"pwl_{k}",
                lambda x, s=slopes, o=offsets: float(np.max(s * x + o)),
            ))
    return entries


def dissipation(ensemble: Ensemble, kernel: Kernel, n_threads: int = 1) -> float:
    """Pairwise dissipation D(t) = sum_ij m_i m_j w (x_j - x_i)^2."""
    return dissipation_rate(ensemble, kernel, n_threads)


def variance_identity_check(values, masses) -> tuple[float, float, float]:
    """Exact discrete identity: sum_ij m_i m_j (a_i - a_j)^2 = 2 M sum_i m_i (a_i - abar)^2.

    Both sides are computed by independent routes; the absolute difference is
    a regression tripwire for the summation code.  Returns (lhs, rhs, abs_error).
    """
    a = np.asarray(values, dtype=np.float64)
    m = np.asarray(masses, dtype=np.float64)
    if np.any(m <= 0):
        raise ValueError("masses must be positive")
    diff = a[:, None] - a[None, :]
    lhs = float(np.sum((m[:, None] * m[None, :]) * diff * diff))
    big_m = float(np.sum(m))
    abar = float(np.sum(m * a)) / big_m
    rhs = float(2.0 * big_m * np.sum(m * (a - abar) ** 2))
    return lhs, rhs, abs(lhs - rhs)


def _quantile_l1(xa, ma, xb, mb) -> float:
    """L1 distance between the quantile functions of two discrete measures."""
    oa = np.argsort(xa, kind="stable")
    ob = np.argsort(xb, kind="stable")
    xa, ma = xa[oa], ma[oa]
    xb, mb = xb[ob], mb[ob]
    ia = ib = 0
    rem_a = ma[0]
    rem_b = mb[0]
    total = 0.0
    while ia < len(xa) and ib < len(xb):
        step = min(rem_a, rem_b)
        total += step * abs(xa[ia] - xb[ib])
        rem_a -= step
        rem_b -= step
        if rem_a <= 1e-15:
            ia += 1
            rem_a = ma[ia] if ia < len(xa) else 0.0
        if rem_b <= 1e-15:
            ib += 1
            rem_b = mb[ib] if ib < len(xb) else 0.0
    return total


def wasserstein1(a: Ensemble, b: Ensemble) -> float:
    """W1 distance between the opinion measures of two ensembles.

    On a bounded domain W1 metrizes convergence in distribution, so a
    W1-to-limit series falling to zero is the operational convergence
    diagnostic.
    """
    return _quantile_l1(a.opinions, a.masses, b.opinions, b.masses)


def w1_to_uniform(positions, masses, lo: float, hi: float) -> float:
    """Exact W1 between a discrete measure and the uniform measure on [lo, hi].

    Integrates |x_i - q(u)| in the quantile variable u, where q is the
    uniform quantile function; both measures are normalized to mass 1.
    """
    x = np.asarray(positions, dtype=np.float64)
    m = np.asarray(masses, dtype=np.float64)
    m = m / m.sum()
    order = np.argsort(x, kind="stable")
    x = x[order]
    m = m[order]
    width = hi - lo
    total = 0.0
    q0 = 0.0
    for xi, mi in zip(x, m):
        q1 = q0 + mi
        # integral of |xi - (lo + width u)| du over [q0, q1]
        u_star = (xi - lo) / width
        if u_star <= q0 or u_star >= q1:
            mid = 0.5 * (q0 + q1)
            total += abs(xi - (lo + width * mid)) * (q1 - q0)
        else:
            left = u_star - q0
            right = q1 - u_star
            total += 0.5 * width * (left * left + right * right)
        q0 = q1
    return total


@dataclass(frozen=True)
class MomentSeries:
    times: np.ndarray
    values_per_order: dict[int, np.ndarray]


def moment_series(trajectory: Trajectory, orders: Sequence[int] = range(1, 7)) -> MomentSeries:
    times = trajectory.times
    values = {k: np.array([moment(s, k) for s in trajectory.snapshots]) for k in orders}
    return MomentSeries(times=times, values_per_order=values)


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    worst_uptick: float
    worst_time: float
    tolerance: float


def monotonicity_report(times, series, tolerance: float) -> MonotonicityReport:
    """Pass iff every consecutive difference is <= tolerance."""
    series = np.asarray(series, dtype=np.float64)
    if len(series) == 0:
        raise ValueError("series must be nonempty")
    diffs = np.diff(series)
    if len(diffs) == 0:
        return MonotonicityReport(True, 0.0, float(times[0]), tolerance)
    worst_idx = int(np.argmax(diffs))
    worst = max(0.0, float(diffs[worst_idx]))
    return MonotonicityReport(worst <= tolerance, worst,
                              float(np.asarray(times)[worst_idx + 1]), tolerance)


@dataclass(frozen=True)
class ClusterSet:
    centers: list[float]
    masses: list[float]
    residual_mass: float

    def min_separation(self) -> float:
        if len(self.centers) < 2:
            return math.inf
        return float(np.min(np.diff(self.centers)))


def detect_clusters(ensemble: Ensemble, gap_threshold: float,
                    mass_floor: float = 0.0) -> ClusterSet:
    """1-D gap clustering: sort opinions, split where a gap exceeds the threshold.

    Groups lighter than mass_floor are reported as residual mass rather than
    centers.  Centers are mass-weighted means, strictly increasing.
    """
    if not (0 < gap_threshold < 1):
        raise ValueError("gap_threshold must lie in (0, 1)")
    order = np.argsort(ensemble.opinions, kind="stable")
    x = ensemble.opinions[order]
    m = ensemble.masses[order]
    centers: list[float] = []
    masses: list[float] = []
    residual = 0.0
    start = 0
    for i in range(1, len(x) + 1):
        if i == len(x) or x[i] - x[i - 1] > gap_threshold:
            mass = float(m[start:i].sum())
            if mass < mass_floor:
                residual += mass
            else:
                centers.append(float(np.sum(m[start:i] * x[start:i])) / mass)
                masses.append(mass)
            start = i
    return ClusterSet(centers=centers, masses=masses, residual_mass=residual)


@dataclass(frozen=True)
class OrderAuditReport:
    pairs_checked: int
    violations: list[tuple[int, int, float]]
    min_gap_ratio_log: float
    rate_bound_violations: list[tuple[int, int, float]]

    @property
    def order_preserved(self) -> bool:
        return not self.violations


def order_audit(trajectory: Trajectory, pair_budget: int = 10_000,
                rng_seed: int = 0, kernel: Kernel | None = None,
                rate_slack: float = 0.05) -> OrderAuditReport:
    """Check that pairwise opinion differences never change sign.

    All pairs are audited when the ensemble is small (n < 200) or fits the
    budget; otherwise ``pair_budget`` pairs are sampled.  For a kernel that
    depends only on time and positions with declared Lipschitz constant L,
    also checks the exponential gap floor
    |x_i(t) - x_j(t)| >= |x_i(0) - x_j(0)| * exp(-(L + W) t) * (1 - slack).
    Sign flips are data, not errors.
    """
    if len(trajectory.snapshots) < 2:
        raise ValueError("trajectory needs at least two snapshots")
    n = trajectory.initial.n
    all_pairs = n * (n - 1) // 2
    if n < 200 or all_pairs <= pair_budget:
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        rng = np.random.default_rng(rng_seed)
        seen = set()
        while len(seen) < pair_budget:
            i, j = rng.integers(0, n, 2)
            if i != j:
                seen.add((min(i, j), max(i, j)))
        pairs = sorted(seen)

    xmat = trajectory.opinions_matrix()
    times = trajectory.times
    t0 = times[0]
    check_rate = (kernel is not None and kernel.position_only
                  and kernel.lipschitz_L is not None)
    rate = (kernel.lipschitz_L + kernel.W_bound) if check_rate else 0.0

    violations: list[tuple[int, int, float]] = []
    rate_violations: list[tuple[int, int, float]] = []
    min_log_rate = math.inf
    for i, j in pairs:
        gaps = xmat[:, i] - xmat[:, j]
        signs = np.sign(gaps)
        flip = (signs[:-1] * signs[1:]) < 0
        if np.any(flip):
            violations.append((i, j, float(times[1:][flip][0])))
            continue
        if check_rate and gaps[0] != 0.0:
            g0 = abs(gaps[0])
            floors = g0 * np.exp(-rate * (times[1:] - t0)) * (1.0 - rate_slack)
            bad = np.abs(gaps[1:]) < floors
            if np.any(bad):
                rate_violations.append((i, j, float(times[1:][bad][0])))
            with np.errstate(divide="ignore"):
                ratios = np.log(np.abs(gaps[1:]) / g0) / (times[1:] - t0)
            finite = ratios[np.isfinite(ratios)]
            if len(finite):
                min_log_rate = min(min_log_rate, float(np.min(finite)))
    return OrderAuditReport(
        pairs_checked=len(pairs),
        violations=violations,
        min_gap_ratio_log=min_log_rate,
        rate_bound_violations=rate_violations,
    )


def dissipation_identity_residuals(trajectory: Trajectory, kernel: Kernel,
                                   n_threads: int = 1,
                                   skip_switching: bool = False) -> np.ndarray:
    """Residuals of the second-moment/dissipation exchange per recorded step.

    Along the continuous dynamics dm2/dt = -D(t) exactly (symmetric kernel).
    On a recorded trajectory the residual is measured second-order as

        (m2(t+h) - m2(t)) / h + (D(t) + D(t+h)) / 2

    For indicator kernels, steps during which any pair crosses the
    interaction radius are excluded when ``skip_switching`` is set (the
    identity assumes no switching inside the step).
    """
    snaps = trajectory.snapshots
    m2 = np.array([moment(s, 2) for s in snaps])
    d = np.array([dissipation_rate(s, kernel, n_threads) for s in snaps])
    times = trajectory.times
    res = []
    for k in range(len(snaps) - 1):
        h = times[k + 1] - times[k]
        if kernel.time_breakpoints_in(float(times[k]), float(times[k + 1])):
            continue
        if skip_switching and _switching_between(snaps[k], snaps[k + 1], kernel):
            continue
        res.append((m2[k + 1] - m2[k]) / h + 0.5 * (d[k] + d[k + 1]))
    return np.array(res)


def _switching_between(a: Ensemble, b: Ensemble, kernel: Kernel) -> bool:
    """True if any pair's interaction indicator differs between two snapshots."""
    xa = a.opinions
    xb = b.opinions
    wa = np.array([[kernel.evaluate(a.t, a.alphas[i], a.alphas[j], xa[i], xa[j])
                    for j in range(a.n)] for i in range(a.n)])
    wb = np.array([[kernel.evaluate(b.t, b.alphas[i], b.alphas[j], xb[i], xb[j])
                    for j in range(b.n)] for i in range(b.n)])
    return bool(np.any((wa > 0) != (wb > 0)))


def dissipation_telescope_error(trajectory: Trajectory, kernel: Kernel,
                                n_threads: int = 1) -> float:
    """|trapezoid sum of D dt - (m2(0) - m2(end))|; telescopes to integrator error."""
    snaps = trajectory.snapshots
    d = np.array([dissipation_rate(s, kernel, n_threads) for s in snaps])
    times = trajectory.times
    total = float(np.trapezoid(d, times))
    drop = moment(snaps[0], 2) - moment(snaps[-1], 2)
    return abs(total - drop)
