import warnings

from opinion_lab import BACKEND


def pytest_configure(config):
    if BACKEND != "compiled":
        warnings.warn(
            "compiled core not available; running on the pure-Python fallback. "
            "Numerical results are identical but the timed acceptance criteria "
            "will not meet their runtime budgets.")
