"""Closed-form cycling construction: stationary distribution, no pointwise limit.

Three populations evolve under an explicit symmetric weight rule:

* a band of agents indexed by a in [0, 2] whose opinions fold back and forth
  across [-1/2, 1/2] via the triangle map S(u) = -1/2 + |1 - (u mod 2)|,
  advancing with phase speed v(t);
* two clusters that start at +-C0 and drift slowly toward the band, pulled by
  (and pulling) the agents within the window eps(t) = sqrt(2 v(t)) of the
  band edges.

The band's opinion distribution is uniform at all times (the distribution
converges trivially) while every band agent keeps cycling forever, because
the phase integral of v diverges.  The clusters never reach the band because
the integral of v^(3/2) converges.

The speed profile is v(t) = min(1/2, (1+t)^(-p)).  The cap at 1/2 keeps the
attraction window eps(t) <= 1, i.e. no wider than the band itself; without
it the cluster drift rate -eps^3/3 would not match the actual pull of the
corner agents at early times (the corner window would hang past the far edge
of the band).  The cap leaves the defining integrability properties and all
late-time behavior unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ensemble import Ensemble, Trajectory
from .kernels import Kernel, custom
from .diagnostics import w1_to_uniform, wasserstein1

__all__ = [
    "CounterexampleParams",
    "CounterexampleState",
    "TaggedAgent",
    "FoldPointError",
    "INTERVAL",
    "CLUSTER_LEFT",
    "CLUSTER_RIGHT",
    "speed",
    "phase",
    "drift_integral",
    "drift_total",
    "epsilon_window",
    "cluster_position",
    "fold_map",
    "analytic_state",
    "analytic_velocity",
    "counterexample_weight",
    "verify_rhs",
    "embedded_ensemble",
    "analytic_trajectory",
    "as_kernel",
    "run_counterexample_report",
]

SPEED_CAP = 0.5           # eps = sqrt(2 v) <= 1: window no wider than the band
DRIFT_COEF = 2.0 * math.sqrt(2.0) / 3.0

INTERVAL = "interval"
CLUSTER_LEFT = "cluster_left"
CLUSTER_RIGHT = "cluster_right"


class FoldPointError(ValueError):
    """The agent sits exactly on a fold point; its velocity is undefined."""


class TaggedAgent(NamedTuple):
    population: str
    index: float = 0.0


def _t_cap(p: float) -> float:
    """Time until which the speed cap is active: (1 + t)^-p >= 1/2."""
    return SPEED_CAP ** (-1.0 / p) - 1.0


@dataclass(frozen=True)
class CounterexampleParams:
    """Parameters of the construction.

    p in (2/3, 1) makes the phase integral diverge while the drift integral
    converges; C0 must exceed 1/2 plus the total cluster drift so the
    clusters stay strictly outside the band.
    """

    p: float = 0.75
    c0: float = 8.05
    n_interval: int = 2000
    n_cluster: int = 1

    def __post_init__(self):
        if not (2.0 / 3.0 < self.p < 1.0):
            raise ValueError("p must lie in (2/3, 1)")
        if self.n_interval < 2:
            raise ValueError("n_interval must be >= 2")
        if self.n_cluster < 1:
            raise ValueError("n_cluster must be >= 1")
        bound = 0.5 + DRIFT_COEF * drift_total(self)
        if self.c0 <= bound:
            raise ValueError(
                f"c0={self.c0} must exceed 1/2 + total cluster drift = {bound:.6f}")

    @property
    def gap_floor(self) -> float:
        """Guaranteed distance from the right cluster to +1/2, for all time."""
        return self.c0 - 0.5 - DRIFT_COEF * drift_total(self)


def speed(params: CounterexampleParams, t: float) -> float:
    return min(SPEED_CAP, (1.0 + t) ** -params.p)


def phase(params: CounterexampleParams, t: float) -> float:
    """Cumulative phase advance: integral of the speed over [0, t].

    Piecewise closed form: linear while the cap is active, then a power law.
    Diverges as t grows (every band agent cycles forever).
    """
    p = params.p
    t1 = _t_cap(p)
    if t <= t1:
        return SPEED_CAP * t
    head = SPEED_CAP * t1
    return head + ((1.0 + t) ** (1.0 - p) - (1.0 + t1) ** (1.0 - p)) / (1.0 - p)


def drift_integral(params: CounterexampleParams, t: float) -> float:
    """Integral of speed^(3/2) over [0, t] (closed form); converges as t -> inf."""
    p = params.p
    q = 1.5 * p
    t1 = _t_cap(p)
    if t <= t1:
        return SPEED_CAP ** 1.5 * t
    head = SPEED_CAP ** 1.5 * t1
    return head + ((1.0 + t1) ** (1.0 - q) - (1.0 + t) ** (1.0 - q)) / (q - 1.0)


def drift_total(params: CounterexampleParams) -> float:
    p = params.p
    q = 1.5 * p
    t1 = _t_cap(p)
    return SPEED_CAP ** 1.5 * t1 + (1.0 + t1) ** (1.0 - q) / (q - 1.0)


def epsilon_window(params: CounterexampleParams, t: float) -> float:
    """Attraction window eps(t) with eps^2 / 2 = v(t)."""
    return math.sqrt(2.0 * speed(params, t))


def cluster_position(params: CounterexampleParams, t: float) -> float:
    """Opinion of the right cluster; the left cluster mirrors it."""
    return params.c0 - DRIFT_COEF * drift_integral(params, t)


def fold_map(u: float) -> float:
    """Triangle map onto [-1/2, 1/2]."""
    return -0.5 + abs(1.0 - (u % 2.0))


def _is_rightward(a: float, ph: float) -> bool:
    """Band agent parity: odd fold segment moves right, even moves left."""
    return math.floor(a + ph) % 2 == 1


def interval_nodes(params, n_interval=None) -> np.ndarray:
    """Midpoint discretization of the band index set [0, 2]."""
    n = n_interval or params.n_interval
    return 2.0 * (np.arange(n, dtype=np.float64) + 0.5) / n


@dataclass(frozen=True)
class CounterexampleState:
    t: float
    phase: float
    interval_indices: np.ndarray
    interval_positions: np.ndarray
    cluster_left: float
    cluster_right: float


def analytic_state(params: CounterexampleParams, t: float,
                   n_interval: int | None = None) -> CounterexampleState:
    """Exact state at time t on the midpoint discretization of the band."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    ph = phase(params, t)
    a = interval_nodes(params, n_interval)
    u = a + ph
    pos = -0.5 + np.abs(1.0 - (u % 2.0))
    cr = cluster_position(params, t)
    return CounterexampleState(t=t, phase=ph, interval_indices=a,
                               interval_positions=pos,
                               cluster_left=-cr, cluster_right=cr)


def analytic_velocity(params: CounterexampleParams, t: float, alpha: float = 0.0,
                      population: str = INTERVAL) -> float:
    """Exact velocity: +-v(t) for band agents by parity, -+drift rate for clusters."""
    v = speed(params, t)
    if population == CLUSTER_LEFT:
        return DRIFT_COEF * v ** 1.5
    if population == CLUSTER_RIGHT:
        return -DRIFT_COEF * v ** 1.5
    if population != INTERVAL:
        raise ValueError(f"unknown population {population!r}")
    u = alpha + phase(params, t)
    if u == math.floor(u):
        raise FoldPointError(
            f"agent {alpha} sits on a fold at t={t}; velocity undefined")
    return v if _is_rightward(alpha, phase(params, t)) else -v


def counterexample_weight(params: CounterexampleParams, t: float,
                          agent_a: TaggedAgent, agent_b: TaggedAgent,
                          x_a: float, x_b: float) -> float:
    """Symmetric interaction weight in original band coordinates.

    Band pairs interact with weight 1 when the leftward-moving agent is less
    than eps(t) ahead of the rightward-moving one.  Band agents within eps of
    the edge they approach interact with the nearer cluster with the weight
    (eps^2 - edge_dist^2) / (2 * cluster_dist), which tops up their pull to
    exactly the band speed.  Zero outside these windows.
    """
    eps = epsilon_window(params, t)
    pa, pb = agent_a.population, agent_b.population
    if pa == INTERVAL and pb == INTERVAL:
        ph = phase(params, t)
        ra = _is_rightward(agent_a.index, ph)
        rb = _is_rightward(agent_b.index, ph)
        if ra == rb:
            return 0.0
        x_right, x_left = (x_a, x_b) if ra else (x_b, x_a)
        return 1.0 if 0.0 < x_left - x_right < eps else 0.0
    if pa != INTERVAL and pb != INTERVAL:
        return 0.0
    (iv, x_iv), (cl, x_cl) = ((agent_a, x_a), (agent_b, x_b)) if pa == INTERVAL \
        else ((agent_b, x_b), (agent_a, x_a))
    ph = phase(params, t)
    if cl.population == CLUSTER_RIGHT:
        if not _is_rightward(iv.index, ph):
            return 0.0
        num = eps * eps - (0.5 - x_iv) ** 2
        den = 2.0 * (x_cl - x_iv)
        return num / den if (num > 0.0 and den > 0.0) else 0.0
    if cl.population == CLUSTER_LEFT:
        if _is_rightward(iv.index, ph):
            return 0.0
        num = eps * eps - (0.5 + x_iv) ** 2
        den = 2.0 * (x_iv - x_cl)
        return num / den if (num > 0.0 and den > 0.0) else 0.0
    raise ValueError(f"unknown population {cl.population!r}")


def verify_rhs(params: CounterexampleParams, t: float,
               n_interval: int | None = None,
               exclusion_radius: float = 0.01) -> float:
    """Max |quadrature of the interaction integral - analytic velocity|.

    Evaluates the pairwise integral under the construction's weights on the
    midpoint discretization (band measure 2/n per node, cluster measure 1)
    and compares with the exact velocities.  Band agents within
    ``exclusion_radius`` of a fold point are excluded as targets (their
    velocity is undefined there) but still contribute as sources.  The error
    decays like O(1/n) + O(exclusion_radius).
    """
    if exclusion_radius <= 0:
        raise ValueError("exclusion radius must be positive")
    n = n_interval or params.n_interval
    ph = phase(params, t)
    eps = epsilon_window(params, t)
    v = speed(params, t)
    a = interval_nodes(params, n)
    u = a + ph
    pos = -0.5 + np.abs(1.0 - (u % 2.0))
    rightward = (np.floor(u) % 2.0) == 1.0
    meas = 2.0 / n
    x_cr = cluster_position(params, t)
    x_cl = -x_cr

    # band-band pull, chunked over targets to bound the n^2 temporaries
    vel = np.zeros(n)
    chunk = 512
    for s in range(0, n, chunk):
        sl = slice(s, min(s + chunk, n))
        xi = pos[sl][:, None]
        ri = rightward[sl][:, None]
        dx = pos[None, :] - xi
        pull = (ri & ~rightward[None, :] & (dx > 0.0) & (dx < eps))
        drag = (~ri & rightward[None, :] & (dx < 0.0) & (dx > -eps))
        vel[sl] = meas * np.sum(np.where(pull | drag, dx, 0.0), axis=1)

    # corner-cluster pull (cluster measure 1 on each side)
    num_r = eps * eps - (0.5 - pos) ** 2
    w_r = np.where(rightward & (num_r > 0.0), num_r / (2.0 * (x_cr - pos)), 0.0)
    vel += w_r * (x_cr - pos)
    num_l = eps * eps - (0.5 + pos) ** 2
    w_l = np.where(~rightward & (num_l > 0.0), num_l / (2.0 * (pos - x_cl)), 0.0)
    vel += w_l * (x_cl - pos)

    expected = np.where(rightward, v, -v)
    included = np.abs(u - np.round(u)) >= exclusion_radius
    max_err = float(np.max(np.abs(vel - expected)[included])) if included.any() else 0.0

    # cluster targets: pulled by their corner agents through the same weights
    drift_rate = DRIFT_COEF * v ** 1.5
    vel_cr = float(np.sum(meas * w_r * (pos - x_cr)))
    vel_cl = float(np.sum(meas * w_l * (pos - x_cl)))
    max_err = max(max_err, abs(vel_cr - (-drift_rate)), abs(vel_cl - drift_rate))
    return max_err


def embedded_ensemble(params: CounterexampleParams, t: float,
                      n_interval: int | None = None) -> Ensemble:
    """The construction as a unit-mass ensemble on agent indices [0, 1].

    The band maps to [0, 1/2] (half the mass), the clusters to one block of
    mass 1/4 each.  Weights on the embedded index space pick up a factor 4
    from the change of variables; see ``as_kernel``.
    """
    state = analytic_state(params, t, n_interval)
    n = len(state.interval_indices)
    k = params.n_cluster
    alphas = np.concatenate([
        state.interval_indices / 4.0,
        0.5 + 0.25 * (np.arange(k) + 0.5) / k,
        0.75 + 0.25 * (np.arange(k) + 0.5) / k,
    ])
    opinions = np.concatenate([
        state.interval_positions,
        np.full(k, state.cluster_left),
        np.full(k, state.cluster_right),
    ])
    masses = np.concatenate([
        np.full(n, 0.5 / n),
        np.full(k, 0.25 / k),
        np.full(k, 0.25 / k),
    ])
    return Ensemble(alphas, opinions, masses, t)


def analytic_trajectory(params: CounterexampleParams, times,
                        n_interval: int | None = None) -> Trajectory:
    """Exact snapshots of the embedded ensemble at the given times."""
    snaps = [embedded_ensemble(params, float(t), n_interval) for t in sorted(times)]
    return Trajectory(snapshots=snaps, method="analytic", dt=0.0, w_bound=4.0)


def _tag_unit_index(alpha: float) -> TaggedAgent:
    if alpha < 0.5:
        return TaggedAgent(INTERVAL, 4.0 * alpha)
    if alpha < 0.75:
        return TaggedAgent(CLUSTER_LEFT)
    return TaggedAgent(CLUSTER_RIGHT)


def as_kernel(params: CounterexampleParams) -> Kernel:
    """The construction's weight rule as a kernel on the unit index space.

    Intended for probing and weight-level checks; the analytic machinery
    above is the simulation path (the construction lives outside [0, 1], so
    the box-clamping integrator does not apply).
    """
    # the corner-cluster weight is largest where v / gap peaks; scan for it
    probe = np.concatenate([[0.0], np.logspace(-2, 5, 200)])
    corner_sup = max(
        speed(params, t) / (cluster_position(params, t) - 0.5) for t in probe
    )
    w_bound = 4.0 * max(1.0, corner_sup)

    def rule(t, alpha, beta, x_alpha, x_beta):
        return 4.0 * counterexample_weight(
            params, t, _tag_unit_index(alpha), _tag_unit_index(beta),
            x_alpha, x_beta)

    return custom(rule, w_bound=w_bound, symmetric=True,
                  name="counterexample_weights")


@dataclass(frozen=True)
class CounterexampleReport:
    params: CounterexampleParams
    t_end: float
    n_interval: int
    sampled_times: list[float]
    w1_uniform: list[float]
    w1_uniform_max: float
    w1_uniform_bound: float
    uniformity_ok: bool
    tracked_agents: list[float]
    fold_crossings: list[int]
    total_variation: list[float]
    cluster_gap: list[float]
    cluster_gap_min: float
    cluster_gap_floor: float
    cluster_gap_ok: bool
    w1_full_to_final: list[float]

    def to_dict(self) -> dict:
        return {
            "t_end": self.t_end,
            "n_interval": self.n_interval,
            "p": self.params.p,
            "c0": self.params.c0,
            "sampled_times": self.sampled_times,
            "band_w1_to_uniform": self.w1_uniform,
            "band_w1_to_uniform_max": self.w1_uniform_max,
            "band_w1_to_uniform_bound": self.w1_uniform_bound,
            "uniformity_ok": self.uniformity_ok,
            "tracked_agents": self.tracked_agents,
            "fold_crossings": self.fold_crossings,
            "total_variation": self.total_variation,
            "cluster_gap": self.cluster_gap,
            "cluster_gap_min": self.cluster_gap_min,
            "cluster_gap_floor": self.cluster_gap_floor,
            "cluster_gap_ok": self.cluster_gap_ok,
            "w1_full_to_final": self.w1_full_to_final,
        }


def run_counterexample_report(params: CounterexampleParams, t_end: float,
                              n_interval: int | None = None,
                              sample_times=None,
                              tracked_agents=(0.25, 0.61, 1.13, 1.57)) -> CounterexampleReport:
    """Distribution-vs-agent dichotomy report.

    The band's opinion measure stays within O(1/n) of the uniform measure on
    [-1/2, 1/2] at every sampled time, while each tracked band agent keeps
    crossing folds (its total variation grows like the phase integral) and
    the clusters stay strictly outside the band.
    """
    n = n_interval or params.n_interval
    if sample_times is None:
        sample_times = [t for t in (1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0) if t < t_end]
        sample_times.append(float(t_end))
    sample_times = sorted(set(float(t) for t in sample_times))

    w1_uniform = []
    gaps = []
    for t in sample_times:
        st = analytic_state(params, t, n)
        w1_uniform.append(w1_to_uniform(
            st.interval_positions, np.full(n, 1.0 / n), -0.5, 0.5))
        gaps.append(st.cluster_right - 0.5)

    phi_end = phase(params, t_end)
    crossings = [math.floor(a + phi_end) - math.floor(a) for a in tracked_agents]
    tv = [phi_end for _ in tracked_agents]

    final = embedded_ensemble(params, t_end, min(n, 2000))
    w1_full = [wasserstein1(embedded_ensemble(params, t, min(n, 2000)), final)
               for t in sample_times]

    bound = 10.0 / n
    return CounterexampleReport(
        params=params, t_end=float(t_end), n_interval=n,
        sampled_times=list(sample_times),
        w1_uniform=w1_uniform, w1_uniform_max=max(w1_uniform),
        w1_uniform_bound=bound, uniformity_ok=max(w1_uniform) < bound,
        tracked_agents=list(tracked_agents),
        fold_crossings=crossings, total_variation=tv,
        cluster_gap=gaps, cluster_gap_min=min(gaps),
        cluster_gap_floor=params.gap_floor,
        cluster_gap_ok=min(gaps) >= params.gap_floor - 1e-12,
        w1_full_to_final=w1_full,
    )
