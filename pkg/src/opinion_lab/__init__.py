"""opinion_lab: a numerical laboratory for continuum opinion dynamics.

Simulates discretized agent continua whose opinions evolve by mutual
attraction under configurable interaction kernels, and verifies the
structural properties of such systems (moment monotonicity, dissipation
accounting, cluster separation, order preservation, distributional
convergence, and the cycling construction where the distribution converges
while no single agent does) as executable checks.
"""

__version__ = "0.1.0"

from .backend import BACKEND
from .ensemble import (Ensemble, IntegratorConfig, Trajectory, integrate, rhs,
                       uniform_ensemble)
from .kernels import (Kernel, KernelProbeReport, MatrixSchedule,
                      PiecewiseProfile, bounded_confidence, bounded_influence,
                      constant, custom, finite_consensus_embed, gaussian_decay,
                      hegselmann_krause, probe_kernel, ring_sensing,
                      typed_confidence)

__all__ = [
    "BACKEND",
    "Ensemble",
    "IntegratorConfig",
    "Kernel",
    "KernelProbeReport",
    "MatrixSchedule",
    "PiecewiseProfile",
    "Trajectory",
    "bounded_confidence",
    "bounded_influence",
    "constant",
    "custom",
    "finite_consensus_embed",
    "gaussian_decay",
    "hegselmann_krause",
    "integrate",
    "probe_kernel",
    "rhs",
    "ring_sensing",
    "typed_confidence",
    "uniform_ensemble",
]
