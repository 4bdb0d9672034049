"""Windowed fixed-point solver for the interaction integral equation.

For kernels with a declared opinion Lipschitz constant L and bound W, the
integral operator

    [P y]_t(alpha) = x0(alpha) + int_0^t sum_beta m_beta
                     w(u, alpha, beta, y_u(alpha), y_u(beta)) (y_u(beta) - y_u(alpha)) du

is a contraction on windows shorter than min(1/(4W), 1/(2(W+4L))), with
contraction factor at most 2b(W+4L) on a window of length b.  Iterating P to
its fixed point and chaining windows yields the unique solution; this module
cross-validates that solution against the direct time stepper.

Window functions are stored on a uniform time grid with linear interpolation
between grid points; the time integral uses the trapezoid rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import Ensemble, IntegratorConfig, Trajectory, integrate, _rhs_arrays
from .kernels import Kernel

__all__ = [
    "LipschitzRequiredError",
    "WindowBoundError",
    "SupNormError",
    "BreakpointError",
    "ConvergenceError",
    "PicardWindow",
    "window_bound",
    "picard_operator_apply",
    "picard_window_solve",
    "picard_solve",
    "picard_solve_windows",
    "cross_validate",
]

SUP_NORM_CAP = 2.0  # iterate space: sup-norm at most 2 (initial data in [0, 1])
DEFAULT_GRID_POINTS = 128


class LipschitzRequiredError(ValueError):
    """Kernel has no declared Lipschitz constant (e.g. an indicator family)."""


class WindowBoundError(ValueError):
    """Window length is not strictly below the contraction bound."""


class SupNormError(ValueError):
    """A window function left the iterate space (sup-norm above 2)."""


class BreakpointError(ValueError):
    """The window contains a schedule switching time; w must be continuous in t."""


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach tolerance within max_iters."""


def window_bound(kernel: Kernel) -> float:
    """Largest admissible window length min(1/(4W), 1/(2(W+4L))) (exclusive)."""
    if kernel.lipschitz_L is None:
        raise LipschitzRequiredError(
            f"kernel {kernel.family!r} declares no Lipschitz constant; the "
            "fixed-point construction requires one (indicator kernels are "
            "outside its smoothness class)")
    w = kernel.W_bound
    l = kernel.lipschitz_L
    b1 = 1.0 / (4.0 * w) if w > 0 else math.inf
    b2 = 1.0 / (2.0 * (w + 4.0 * l)) if (w + 4.0 * l) > 0 else math.inf
    return min(b1, b2)


def contraction_factor(kernel: Kernel, b: float) -> float:
    return 2.0 * b * (kernel.W_bound + 4.0 * kernel.lipschitz_L)


@dataclass
class PicardWindow:
    """One windowed fixed-point solve: grid, iterate history, residuals."""

    t_start: float
    b: float
    times: np.ndarray
    values: np.ndarray               # fixed point, shape (grid+1, n)
    residuals: list[float]
    iterations: int
    converged: bool
    iterates: list[np.ndarray] | None = None

    def contraction_ratios(self, floor: float = 1e-12) -> list[float]:
        """Residual ratios past the first iterate, above the noise floor."""
        out = []
        for k in range(1, len(self.residuals) - 1):
            if self.residuals[k] > floor and self.residuals[k + 1] > floor:
                out.append(self.residuals[k + 1] / self.residuals[k])
        return out


def _check_window(kernel: Kernel, t_start: float, b: float) -> None:
    b_max = window_bound(kernel)
    if not (0.0 < b < b_max):
        raise WindowBoundError(
            f"window b={b} must satisfy 0 < b < {b_max} "
            f"(W={kernel.W_bound}, L={kernel.lipschitz_L})")
    cuts = kernel.time_breakpoints_in(t_start, t_start + b)
    if cuts:
        raise BreakpointError(
            f"window [{t_start}, {t_start + b}] contains schedule switching "
            f"times {cuts}; shrink the window or split at the breakpoint")


def _apply(kernel: Kernel, x0_vals: np.ndarray, alphas: np.ndarray,
           masses: np.ndarray, times: np.ndarray, y: np.ndarray,
           n_threads: int) -> np.ndarray:
    g = np.empty_like(y)
    for k in range(len(times)):
        _rhs_arrays(kernel, float(times[k]), alphas, y[k], masses, g[k],
                    n_threads, False)
    out = np.empty_like(y)
    out[0] = x0_vals
    incr = 0.5 * (g[:-1] + g[1:]) * np.diff(times)[:, None]
    out[1:] = x0_vals[None, :] + np.cumsum(incr, axis=0)
    return out


def picard_operator_apply(kernel: Kernel, x0: Ensemble, times: np.ndarray,
                          y: np.ndarray, n_threads: int = 1) -> np.ndarray:
    """One application of the integral operator P to a window function.

    ``times`` is the window grid (absolute times); ``y`` holds the function
    values with shape (len(times), n).  Requires a declared Lipschitz
    constant and sup|y| <= 2; the output again satisfies the sup bound and is
    Lipschitz in t with constant at most 4W.
    """
    if kernel.lipschitz_L is None:
        raise LipschitzRequiredError(
            f"kernel {kernel.family!r} declares no Lipschitz constant")
    if np.max(np.abs(y)) > SUP_NORM_CAP * (1 + 1e-12):
        raise SupNormError(f"window function sup-norm {np.max(np.abs(y))} exceeds 2")
    return _apply(kernel, x0.opinions, x0.alphas, x0.masses, times, y, n_threads)


def picard_window_solve(kernel: Kernel, x0: Ensemble, t_start: float, b: float,
                        tol: float = 1e-9, max_iters: int = 200,
                        grid_points: int = DEFAULT_GRID_POINTS,
                        keep_iterates: bool = False, n_threads: int = 1,
                        initial_iterate: np.ndarray | None = None,
                        raise_on_failure: bool = True) -> PicardWindow:
    """Iterate P to its fixed point on [t_start, t_start + b].

    The initial iterate is the constant-in-time extension of x0 unless one is
    supplied.  Residuals are sup-norm distances between consecutive iterates;
    convergence means residual < tol.
    """
    if np.any(x0.opinions < 0) or np.any(x0.opinions > 1):
        raise ValueError("initial opinions must lie in [0, 1]")
    _check_window(kernel, t_start, b)
    times = t_start + np.linspace(0.0, b, grid_points + 1)
    if initial_iterate is None:
        y = np.tile(x0.opinions, (grid_points + 1, 1))
    else:
        y = np.array(initial_iterate, dtype=np.float64)
        if y.shape != (grid_points + 1, x0.n):
            raise ValueError("initial iterate has the wrong shape")
    history = [y.copy()] if keep_iterates else None
    residuals: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        y_new = picard_operator_apply(kernel, x0, times, y, n_threads)
        res = float(np.max(np.abs(y_new - y)))
        residuals.append(res)
        y = y_new
        if history is not None:
            history.append(y.copy())
        if res < tol:
            converged = True
            break
    if not converged and raise_on_failure:
        ratio = (residuals[-1] / residuals[-2]) if len(residuals) > 1 else math.nan
        raise ConvergenceError(
            f"window at t={t_start} did not converge in {max_iters} iterations; "
            f"final residual {residuals[-1]:.3e}, final ratio {ratio:.3f}")
    return PicardWindow(t_start=t_start, b=b, times=times, values=y,
                        residuals=residuals, iterations=iterations,
                        converged=converged, iterates=history)


def picard_solve_windows(kernel: Kernel, x0: Ensemble, t_end: float,
                         tol: float = 1e-9, window_fraction: float = 0.9,
                         grid_points: int = DEFAULT_GRID_POINTS,
                         max_iters: int = 200, n_threads: int = 1,
                         b: float | None = None) -> tuple[Trajectory, list[PicardWindow]]:
    """Chain window solves from x0.t to t_end; the last window is truncated."""
    b_max = window_bound(kernel)
    if b is None:
        if not math.isfinite(b_max):
            b = t_end - x0.t
        else:
            b = window_fraction * b_max
    t0 = x0.t
    x = x0.opinions.copy()
    windows: list[PicardWindow] = []
    snapshots: list[Ensemble] = [x0]
    k = 0
    while True:
        t_next = min(t0 + (k + 1) * b, t_end)
        t_cur = t0 + k * b
        if t_next - t_cur <= 1e-14:
            break
        ens = Ensemble(x0.alphas, x, x0.masses, t_cur)
        try:
            win = picard_window_solve(kernel, ens, t_cur, t_next - t_cur,
                                      tol=tol, max_iters=max_iters,
                                      grid_points=grid_points,
                                      n_threads=n_threads)
        except (WindowBoundError, BreakpointError, ConvergenceError, SupNormError) as exc:
            raise type(exc)(f"window starting at t={t_cur:.6g}: {exc}") from None
        windows.append(win)
        for row, tt in zip(win.values[1:], win.times[1:]):
            snapshots.append(Ensemble(x0.alphas, row.copy(), x0.masses, float(tt)))
        x = win.values[-1].copy()
        k += 1
        if t_next >= t_end - 1e-14:
            break
    traj = Trajectory(snapshots=snapshots, method="picard",
                      dt=b / grid_points, w_bound=kernel.W_bound)
    return traj, windows


def picard_solve(kernel: Kernel, x0: Ensemble, t_end: float,
                 tol: float = 1e-9, **kwargs) -> Trajectory:
    """Fixed-point solution from x0.t to t_end as a dense trajectory."""
    traj, _ = picard_solve_windows(kernel, x0, t_end, tol=tol, **kwargs)
    return traj


def _interp_rows(times: np.ndarray, values: np.ndarray, query: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(times, query), 1, len(times) - 1)
    t0 = times[idx - 1]
    t1 = times[idx]
    w = np.clip((query - t0) / (t1 - t0), 0.0, 1.0)
    return values[idx - 1] * (1.0 - w[:, None]) + values[idx] * w[:, None]


def cross_validate(kernel: Kernel, x0: Ensemble, t_end: float,
                   tol: float = 1e-9, grid_points: int = DEFAULT_GRID_POINTS,
                   window_fraction: float = 0.9, rk4_dt: float = 1e-3,
                   n_threads: int = 1, b: float | None = None) -> dict:
    """Compare the fixed-point solution against direct rk4 integration.

    Returns the sup-norm distance sampled on the fixed-point grid plus the
    per-window iteration counts and contraction ratios.  The two solvers
    share only the kernel evaluation, so agreement validates both.
    """
    traj, windows = picard_solve_windows(
        kernel, x0, t_end, tol=tol, window_fraction=window_fraction,
        grid_points=grid_points, n_threads=n_threads, b=b)
    ref = integrate(x0, kernel,
                    IntegratorConfig(method="rk4", dt=rk4_dt, t_end=t_end - x0.t,
                                     record_every=1), n_threads)
    ref_times = ref.times
    ref_values = ref.opinions_matrix()
    q_times = traj.times
    q_values = traj.opinions_matrix()
    ref_at_q = _interp_rows(ref_times, ref_values, q_times)
    sup = float(np.max(np.abs(q_values - ref_at_q)))
    return {
        "sup_distance": sup,
        "windows": windows,
        "trajectory": traj,
        "max_ratio": max((max(w.contraction_ratios(), default=0.0) for w in windows),
                         default=0.0),
        "contraction_bound": contraction_factor(kernel, windows[0].b) if windows else None,
    }
