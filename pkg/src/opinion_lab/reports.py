"""Artifact writers: trajectory/summary CSV and JSON reports.

Floats are formatted with shortest round-trip decimals so identical runs
produce bit-identical files (regression goldens can diff them directly).
Writers emit to ``<path>.partial`` and rename on completion; a crash leaves
the partial file behind instead of a truncated artifact.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager

import numpy as np

from . import diagnostics
from .ensemble import Trajectory
from .kernels import Kernel

__all__ = ["fmt", "atomic_file", "write_trajectory_csv", "write_summary_csv",
           "write_json"]


def fmt(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


@contextmanager
def atomic_file(path: str):
    partial = path + ".partial"
    fh = open(partial, "w")
    try:
        yield fh
    except BaseException:
        fh.close()
        raise
    fh.close()
    os.replace(partial, path)


def write_trajectory_csv(path: str, trajectory: Trajectory) -> None:
    """One row per recorded node per snapshot: t,agent_index,opinion."""
    with atomic_file(path) as fh:
        fh.write("t,agent_index,opinion\n")
        for snap in trajectory.snapshots:
            t = fmt(snap.t)
            for a, x in zip(snap.alphas, snap.opinions):
                fh.write(f"{t},{fmt(a)},{fmt(x)}\n")


def write_summary_csv(path: str, trajectory: Trajectory, kernel: Kernel | None,
                      n_threads: int = 1) -> None:
    """Per-snapshot observables: moments, dissipation, W1 to final, max speed."""
    from .ensemble import rhs

    final = trajectory.final
    with atomic_file(path) as fh:
        fh.write("t,m1,m2,m3,m4,m5,m6,dissipation,w1_to_final,max_velocity\n")
        for snap in trajectory.snapshots:
            moments = [diagnostics.moment(snap, k) for k in range(1, 7)]
            if kernel is not None:
                d = diagnostics.dissipation(snap, kernel, n_threads)
                vmax = float(np.max(np.abs(rhs(snap, kernel, n_threads))))
            else:
                d = 0.0
                vmax = 0.0
            w1 = diagnostics.wasserstein1(snap, final)
            row = [snap.t, *moments, d, w1, vmax]
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(path: str, payload: dict) -> None:
    with atomic_file(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
