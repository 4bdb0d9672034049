"""Interaction weight functions.

A kernel is a nonnegative bounded rule w(t, alpha, beta, x_alpha, x_beta)
giving the weight agent alpha accords agent beta.  Built-in families cover
the classical bounded-confidence models plus block-consensus embeddings;
arbitrary rules can be wrapped as custom kernels with declared bounds.

Every built-in family mirrors the arithmetic of the compiled core exactly
(see ``_core_py``), so the generic evaluation path and the fast path agree
bit-for-bit.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import backend

__all__ = [
    "Kernel",
    "KernelProbeReport",
    "PiecewiseProfile",
    "MatrixSchedule",
    "constant",
    "hegselmann_krause",
    "bounded_confidence",
    "bounded_influence",
    "gaussian_decay",
    "ring_sensing",
    "typed_confidence",
    "finite_consensus_embed",
    "custom",
    "probe_kernel",
]


class ScheduleError(ValueError):
    """Raised for invalid block-weight schedules (e.g. negative entries)."""


@dataclass(frozen=True)
class PiecewiseProfile:
    """Piecewise-constant map over agent index alpha in [0, 1].

    breakpoints are the interior split points; values has one more entry.
    value(alpha) returns values[k] for alpha in [b_{k-1}, b_k).
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("need len(values) == len(breakpoints) + 1")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if self.breakpoints and not (0.0 < self.breakpoints[0] and self.breakpoints[-1] < 1.0):
            raise ValueError("breakpoints must lie strictly inside (0, 1)")

    def value(self, alpha: float) -> float:
        return self.values[bisect.bisect_right(self.breakpoints, alpha)]

    def values_at(self, alphas: np.ndarray) -> np.ndarray:
        # scalar lookup per node keeps the result identical to value()
        return np.array([self.value(a) for a in alphas], dtype=np.float64)

    @classmethod
    def uniform(cls, v: float) -> "PiecewiseProfile":
        return cls((), (float(v),))


def as_profile(spec) -> PiecewiseProfile:
    if isinstance(spec, PiecewiseProfile):
        return spec
    return PiecewiseProfile.uniform(float(spec))


@dataclass(frozen=True)
class MatrixSchedule:
    """Piecewise-constant-in-time nonnegative block weight matrices.

    The active matrix for time t is matrices[k] where breakpoints[k] <= t <
    breakpoints[k+1]; breakpoints[0] must be 0.  With ``period`` set, t is
    first reduced modulo the period (switching systems repeat forever).
    """

    breakpoints: tuple[float, ...]
    matrices: tuple[tuple[tuple[float, ...], ...], ...]
    period: float | None = None

    def __post_init__(self):
        if not self.breakpoints or self.breakpoints[0] != 0.0:
            raise ScheduleError("schedule breakpoints must start at 0")
        if len(self.breakpoints) != len(self.matrices):
            raise ScheduleError("need one matrix per breakpoint")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ScheduleError("breakpoints must be strictly increasing")
        if self.period is not None and self.period <= self.breakpoints[-1]:
            raise ScheduleError("period must exceed the last breakpoint")
        for mat in self.matrices:
            for row in mat:
                if any(v < 0 for v in row):
                    raise ScheduleError("schedule entries must be nonnegative")

    @classmethod
    def constant(cls, matrix) -> "MatrixSchedule":
        mat = tuple(tuple(float(v) for v in row) for row in matrix)
        return cls((0.0,), (mat,))

    def matrix_at(self, t: float) -> tuple[tuple[float, ...], ...]:
        if self.period is not None:
            t = t % self.period
        k = bisect.bisect_right(self.breakpoints, t) - 1
        return self.matrices[max(k, 0)]

    def max_entry(self) -> float:
        return max(v for mat in self.matrices for row in mat for v in row)

    def is_symmetric(self) -> bool:
        return all(
            mat[i][j] == mat[j][i]
            for mat in self.matrices
            for i in range(len(mat))
            for j in range(len(mat))
        )

    def breakpoints_in(self, t0: float, t1: float) -> list[float]:
        """Switching times strictly inside (t0, t1)."""
        out = []
        if self.period is None:
            out = [b for b in self.breakpoints if t0 < b < t1]
        else:
            k0 = math.floor(t0 / self.period)
            k1 = math.floor(t1 / self.period) + 1
            for k in range(k0, k1 + 1):
                for b in self.breakpoints:
                    tb = k * self.period + b
                    if t0 < tb < t1:
                        out.append(tb)
        return sorted(out)


@dataclass(frozen=True)
class _CorePlan:
    """Prepared arrays for the compiled/fallback pairwise core."""

    code: int
    scal: np.ndarray
    node_param: np.ndarray
    mat: np.ndarray
    block: np.ndarray


_EMPTY_F = np.empty(0, dtype=np.float64)
_EMPTY_I = np.empty(0, dtype=np.int32)


@dataclass(frozen=True)
class Kernel:
    """An interaction rule with its declared bounds.

    W_bound is the declared uniform upper bound on the weight; lipschitz_L,
    when present, bounds the variation in the last two (opinion) arguments.
    The library trusts these declarations but ``probe_kernel`` spot-checks
    them.
    """

    family: str
    W_bound: float
    lipschitz_L: float | None = None
    symmetric_declared: bool = False
    position_only: bool = False
    params: dict = field(default_factory=dict)
    rule: Callable[[float, float, float, float, float], float] | None = None
    code: int | None = None
    scal: tuple[float, ...] = ()
    node_profile: PiecewiseProfile | None = None
    schedule: MatrixSchedule | None = None
    default_gamma: tuple[float, float] | None = None

    def evaluate(self, t: float, alpha: float, beta: float,
                 x_alpha: float, x_beta: float) -> float:
        """Weight that agent alpha accords agent beta.  Total on its domain."""
        if self.code is not None:
            scal = self.scal
            if self.code == backend.FINITE_EMBED:
                k = int(scal[0])
                mat = self._flat_matrix_at(t)
                ki = _block_index(alpha, k)
                kj = _block_index(beta, k)
                return mat[ki * k + kj]
            npi = npj = 0.0
            if self.node_profile is not None:
                npi = self.node_profile.value(alpha)
                npj = self.node_profile.value(beta)
            return _core_eval(self.code, scal, npi, npj, alpha, beta, x_alpha, x_beta)
        assert self.rule is not None
        return self.rule(t, alpha, beta, x_alpha, x_beta)

    def evaluate_checked(self, t, alpha, beta, x_alpha, x_beta) -> float:
        """Evaluation with bound assertions (debug path)."""
        w = self.evaluate(t, alpha, beta, x_alpha, x_beta)
        if not (w >= 0.0):
            raise AssertionError(f"kernel {self.family} produced negative weight {w}")
        if w > self.W_bound * (1 + 1e-12):
            raise AssertionError(
                f"kernel {self.family} exceeded declared bound: {w} > {self.W_bound}")
        return w

    def core_plan(self, alphas: np.ndarray, t: float) -> _CorePlan | None:
        """Arrays for the fast pairwise core, or None for generic kernels."""
        if self.code is None:
            return None
        node_param = _EMPTY_F
        mat = _EMPTY_F
        block = _EMPTY_I
        if self.node_profile is not None:
            node_param = self.node_profile.values_at(alphas)
        if self.code == backend.FINITE_EMBED:
            k = int(self.scal[0])
            mat = self._flat_matrix_at(t)
            block = np.array([_block_index(a, k) for a in alphas], dtype=np.int32)
        return _CorePlan(self.code, np.asarray(self.scal, dtype=np.float64),
                         node_param, mat, block)

    def _flat_matrix_at(self, t: float) -> np.ndarray:
        assert self.schedule is not None
        k = int(self.scal[0])
        raw = self.schedule.matrix_at(t)
        flat = np.empty(k * k, dtype=np.float64)
        for i in range(k):
            for j in range(k):
                flat[i * k + j] = k * raw[i][j]
        return flat

    def time_breakpoints_in(self, t0: float, t1: float) -> list[float]:
        if self.schedule is None:
            return []
        return self.schedule.breakpoints_in(t0, t1)


def _block_index(alpha: float, k: int) -> int:
    return min(int(alpha * k), k - 1)


def _core_eval(code, scal, npi, npj, ai, aj, xi, xj):
    # mirrors _core_py._eval_w for the non-matrix families
    from ._core_py import _eval_w

    return _eval_w(code, scal, npi, npj, ai, aj, xi, xj, _EMPTY_F, 0, 0)


# ---------------------------------------------------------------------------
# family constructors


def constant(c: float) -> Kernel:
    if c < 0:
        raise ValueError("constant weight must be nonnegative")
    return Kernel("constant", W_bound=float(c), lipschitz_L=0.0,
                  symmetric_declared=True, position_only=True,
                  params={"c": c}, code=backend.CONSTANT, scal=(float(c),))


def hegselmann_krause(r: float) -> Kernel:
    """Indicator of |x_beta - x_alpha| < r (strict; ties get weight 0)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    return Kernel("hegselmann_krause", W_bound=1.0, lipschitz_L=None,
                  symmetric_declared=True, position_only=True,
                  params={"r": r}, code=backend.HEGSELMANN_KRAUSE,
                  scal=(float(r),), default_gamma=(float(r), 1.0))


def bounded_confidence(r_of_alpha) -> Kernel:
    """Each agent has its own openness radius r_alpha (listener-side)."""
    prof = as_profile(r_of_alpha)
    if min(prof.values) <= 0:
        raise ValueError("radius must be positive")
    uniform = len(set(prof.values)) == 1
    return Kernel("bounded_confidence", W_bound=1.0, lipschitz_L=None,
                  symmetric_declared=uniform, position_only=uniform,
                  params={"r_of_alpha": prof}, code=backend.BOUNDED_CONFIDENCE,
                  node_profile=prof, default_gamma=(min(prof.values), 1.0))


def bounded_influence(r_of_beta) -> Kernel:
    """Each agent broadcasts with its own loudness radius r_beta (speaker-side)."""
    prof = as_profile(r_of_beta)
    if min(prof.values) <= 0:
        raise ValueError("radius must be positive")
    uniform = len(set(prof.values)) == 1
    return Kernel("bounded_influence", W_bound=1.0, lipschitz_L=None,
                  symmetric_declared=uniform, position_only=uniform,
                  params={"r_of_beta": prof}, code=backend.BOUNDED_INFLUENCE,
                  node_profile=prof, default_gamma=(min(prof.values), 1.0))


def gaussian_decay(sigma_of_alpha) -> Kernel:
    """w = exp(-(x_alpha - x_beta)^2 / sigma_alpha^2).

    Symmetric only when all sigma_alpha are identical.  The true opinion
    Lipschitz constant is sqrt(2)*exp(-1/2)/sigma ~= 0.858/sigma; 1/sigma_min
    is declared as a conservative round number.
    """
    prof = as_profile(sigma_of_alpha)
    if min(prof.values) <= 0:
        raise ValueError("sigma must be positive")
    uniform = len(set(prof.values)) == 1
    return Kernel("gaussian_decay", W_bound=1.0,
                  lipschitz_L=1.0 / min(prof.values),
                  symmetric_declared=uniform, position_only=uniform,
                  params={"sigma_of_alpha": prof}, code=backend.GAUSSIAN_DECAY,
                  node_profile=prof)


def ring_sensing(r_min: float, r_max: float) -> Kernel:
    """Indicator of |x_alpha - x_beta| in [r_min, r_max] (sensing annulus)."""
    if not (0 <= r_min < r_max):
        raise ValueError("need 0 <= r_min < r_max")
    return Kernel("ring_sensing", W_bound=1.0, lipschitz_L=None,
                  symmetric_declared=True, position_only=True,
                  params={"r_min": r_min, "r_max": r_max},
                  code=backend.RING_SENSING, scal=(float(r_min), float(r_max)))


def typed_confidence(r: float, r_prime: float) -> Kernel:
    """Ignore agents that are distant in opinion (>= r) or in identity (>= r')."""
    if r <= 0 or r_prime <= 0:
        raise ValueError("radius must be positive")
    return Kernel("typed_confidence", W_bound=1.0, lipschitz_L=None,
                  symmetric_declared=True, position_only=False,
                  params={"r": r, "r_prime": r_prime},
                  code=backend.TYPED_CONFIDENCE, scal=(float(r), float(r_prime)))


def finite_consensus_embed(n_blocks: int, schedule) -> Kernel:
    """Embed an n-block consensus system as a block-constant kernel.

    Agents in block i occupy [(i-1)/n, i/n]; the kernel value between blocks
    i and j is n * w_ij(t), so block-constant initial data reproduces the
    n-dimensional consensus ODE dz_i/dt = sum_j w_ij(t) (z_j - z_i).
    """
    if n_blocks < 1:
        raise ValueError("need at least one block")
    if not isinstance(schedule, MatrixSchedule):
        schedule = MatrixSchedule.constant(schedule)
    for mat in schedule.matrices:
        if len(mat) != n_blocks or any(len(row) != n_blocks for row in mat):
            raise ScheduleError(f"schedule matrices must be {n_blocks}x{n_blocks}")
    return Kernel("finite_consensus_embed",
                  W_bound=n_blocks * schedule.max_entry(), lipschitz_L=0.0,
                  symmetric_declared=schedule.is_symmetric(), position_only=False,
                  params={"n_blocks": n_blocks}, code=backend.FINITE_EMBED,
                  scal=(float(n_blocks),), schedule=schedule)


def custom(rule, w_bound: float, lipschitz_l: float | None = None,
           symmetric: bool = False, position_only: bool = False,
           name: str = "custom") -> Kernel:
    """Wrap a user rule (t, alpha, beta, x_alpha, x_beta) -> weight.

    The declared bounds are trusted; run probe_kernel to spot-check them.
    """
    if w_bound < 0:
        raise ValueError("W bound must be nonnegative")
    return Kernel(name, W_bound=float(w_bound), lipschitz_L=lipschitz_l,
                  symmetric_declared=symmetric, position_only=position_only,
                  rule=rule)


# ---------------------------------------------------------------------------
# probing


@dataclass(frozen=True)
class KernelProbeReport:
    samples_tested: int
    max_symmetry_violation: float
    gamma_r: float
    gamma_delta: float
    gamma_holds: bool
    lipschitz_estimate: float
    max_weight_seen: float
    bound_violations: int


def probe_kernel(kernel: Kernel, sample_count: int, rng_seed: int,
                 gamma_r: float | None = None,
                 gamma_delta: float | None = None,
                 t_max: float = 10.0) -> KernelProbeReport:
    """Spot-check declared kernel properties on random samples.

    Samples (t, alpha, beta, x_alpha, x_beta) uniformly, recording the worst
    symmetry violation, whether weights stay within [0, W_bound], a
    finite-difference lower estimate of the opinion Lipschitz constant, and
    whether weights are at least gamma_delta whenever opinions are within
    gamma_r.  The gamma pair defaults to the family's natural one (e.g. the
    confidence radius with floor 1) and the gamma check is vacuous when no
    pair is available.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if gamma_r is None and kernel.default_gamma is not None:
        gamma_r, gamma_delta = kernel.default_gamma
    rng = np.random.default_rng(rng_seed)
    ts = rng.uniform(0.0, t_max, sample_count)
    al = rng.uniform(0.0, 1.0, sample_count)
    be = rng.uniform(0.0, 1.0, sample_count)
    xa = rng.uniform(0.0, 1.0, sample_count)
    xb = rng.uniform(0.0, 1.0, sample_count)
    dx = rng.uniform(1e-6, 1e-2, sample_count)

    max_sym = 0.0
    max_w = 0.0
    violations = 0
    gamma_holds = True
    lip = 0.0
    for k in range(sample_count):
        w = kernel.evaluate(ts[k], al[k], be[k], xa[k], xb[k])
        if w < 0.0 or w > kernel.W_bound * (1 + 1e-12):
            violations += 1
        max_w = max(max_w, w)
        if kernel.symmetric_declared:
            w_swapped = kernel.evaluate(ts[k], be[k], al[k], xb[k], xa[k])
            max_sym = max(max_sym, abs(w - w_swapped))
        if gamma_r is not None and abs(xa[k] - xb[k]) <= gamma_r and w < gamma_delta:
            gamma_holds = False
        w_pert = kernel.evaluate(ts[k], al[k], be[k], xa[k], xb[k] + dx[k])
        lip = max(lip, abs(w_pert - w) / dx[k])
        w_pert = kernel.evaluate(ts[k], al[k], be[k], xa[k] + dx[k], xb[k])
        lip = max(lip, abs(w_pert - w) / dx[k])
    return KernelProbeReport(
        samples_tested=sample_count,
        max_symmetry_violation=max_sym,
        gamma_r=0.0 if gamma_r is None else float(gamma_r),
        gamma_delta=0.0 if gamma_r is None else float(gamma_delta),
        gamma_holds=gamma_holds,
        lipschitz_estimate=lip,
        max_weight_seen=max_w,
        bound_violations=violations,
    )
