"""Pure-Python core for the hot pairwise loops.

This is the fallback twin of the compiled extension ``opinion_lab._core``.
Both backends must produce bit-identical output: same evaluation formulas,
same fixed j-order, same compensated (Kahan) accumulation.  Keep every
floating-point expression structurally identical to the .pyx file.
"""

import math

# Kernel family codes shared with the compiled core.
CONSTANT = 0
HEGSELMANN_KRAUSE = 1
BOUNDED_CONFIDENCE = 2
BOUNDED_INFLUENCE = 3
GAUSSIAN_DECAY = 4
RING_SENSING = 5
TYPED_CONFIDENCE = 6
FINITE_EMBED = 7


def _eval_w(code, scal, np_i, np_j, ai, aj, xi, xj, mat, ki, kj):
    if code == CONSTANT:
        return scal[0]
    if code == HEGSELMANN_KRAUSE:
        return 1.0 if abs(xj - xi) < scal[0] else 0.0
    if code == BOUNDED_CONFIDENCE:
        return 1.0 if abs(xj - xi) < np_i else 0.0
    if code == BOUNDED_INFLUENCE:
        return 1.0 if abs(xj - xi) < np_j else 0.0
    if code == GAUSSIAN_DECAY:
        d = xj - xi
        return math.exp(-((d * d) / (np_i * np_i)))
    if code == RING_SENSING:
        d = abs(xj - xi)
        return 1.0 if (d >= scal[0] and d <= scal[1]) else 0.0
    if code == TYPED_CONFIDENCE:
        return 1.0 if (abs(aj - ai) < scal[1] and abs(xj - xi) < scal[0]) else 0.0
    if code == FINITE_EMBED:
        return mat[ki * int(scal[0]) + kj]
    raise ValueError(f"unknown kernel family code {code}")


def rhs_builtin(code, t, scal, node_param, mat, block, alphas, x, m, out, num_threads=1):
    """v[i] = sum_j m[j] * w(t, a_i, a_j, x_i, x_j) * (x_j - x_i), Kahan, fixed order."""
    n = len(x)
    for i in range(n):
        xi = x[i]
        ai = alphas[i]
        npi = node_param[i] if len(node_param) else 0.0
        ki = block[i] if len(block) else 0
        s = 0.0
        c = 0.0
        for j in range(n):
            npj = node_param[j] if len(node_param) else 0.0
            kj = block[j] if len(block) else 0
            w = _eval_w(code, scal, npi, npj, ai, alphas[j], xi, x[j], mat, ki, kj)
            term = m[j] * w * (x[j] - xi)
            y = term - c
            tt = s + y
            c = (tt - s) - y
            s = tt
        out[i] = s
    return out


def dissipation_builtin(code, t, scal, node_param, mat, block, alphas, x, m, num_threads=1):
    """D = sum_i m[i] * sum_j m[j] * w * (x_j - x_i)^2, two-level Kahan."""
    n = len(x)
    outer_s = 0.0
    outer_c = 0.0
    for i in range(n):
        xi = x[i]
        ai = alphas[i]
        npi = node_param[i] if len(node_param) else 0.0
        ki = block[i] if len(block) else 0
        s = 0.0
        c = 0.0
        for j in range(n):
            npj = node_param[j] if len(node_param) else 0.0
            kj = block[j] if len(block) else 0
            w = _eval_w(code, scal, npi, npj, ai, alphas[j], xi, x[j], mat, ki, kj)
            d = x[j] - xi
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
