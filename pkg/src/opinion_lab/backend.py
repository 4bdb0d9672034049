"""Backend selection: compiled extension if available, pure-Python twin otherwise.

Both backends are bit-identical by contract; the compiled one is just fast.
``benchmarks/bench_core.py`` measures the gap.
"""

from . import _core_py

try:
    from . import _core as _compiled
except ImportError:  # running from an unbuilt source tree
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"

# Family codes are shared constants; the python twin is their home.
CONSTANT = _core_py.CONSTANT
HEGSELMANN_KRAUSE = _core_py.HEGSELMANN_KRAUSE
BOUNDED_CONFIDENCE = _core_py.BOUNDED_CONFIDENCE
BOUNDED_INFLUENCE = _core_py.BOUNDED_INFLUENCE
GAUSSIAN_DECAY = _core_py.GAUSSIAN_DECAY
RING_SENSING = _core_py.RING_SENSING
TYPED_CONFIDENCE = _core_py.TYPED_CONFIDENCE
FINITE_EMBED = _core_py.FINITE_EMBED


def get_backend(name: str | None = None):
    """Return the backend module: 'compiled', 'python', or the default."""
    if name is None:
        return _compiled if _compiled is not None else _core_py
    if name == "python":
        return _core_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled core is not available; build with "
                               "'pip install -e . --no-build-isolation'")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


rhs_builtin = get_backend().rhs_builtin
dissipation_builtin = get_backend().dissipation_builtin
