"""Compiled inner loops.

Sums are accumulated with Neumaier's compensated summation so that the
estimator identities survive paths of length 1e8.
"""

import numba as nb
import numpy as np

_OPTS = dict(nogil=True, cache=True)


@nb.njit(**_OPTS)
def _neumaier(total, comp, x):
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


@nb.njit(**_OPTS)
def fill_steps(u, q, a, s0, n0, out):
    """Draw ``len(u)`` steps after ``n0`` steps ending at position ``s0``.

    Step ``k + 1`` is +1 iff its uniform falls below the conditional
    probability of moving right (``q`` for the first step).
    """
    s = s0
    for i in range(u.shape[0]):
        k = n0 + i
        if k == 0:
            prob = q
        else:
            prob = 0.5 * (1.0 + a * s / k)
        if u[i] < prob:
            out[i] = 1
            s += 1
        else:
            out[i] = -1
            s -= 1
    return s


@nb.njit(**_OPTS)
def path_sums(steps, positions):
    """Return (sum_cross, sum_sq, sum_quad) and their compensations."""
    c_s = 0.0
    c_c = 0.0
    q_s = 0.0
    q_c = 0.0
    f_s = 0.0
    f_c = 0.0
    for k in range(1, steps.shape[0]):
        r = positions[k - 1] / k
        r2 = r * r
        c_s, c_c = _neumaier(c_s, c_c, r * steps[k])
        q_s, q_c = _neumaier(q_s, q_c, r2)
        f_s, f_c = _neumaier(f_s, f_c, r2 * r2)
    return c_s, c_c, q_s, q_c, f_s, f_c


@nb.njit(**_OPTS)
def martingale_sum(steps, positions, a):
    """M_n = sum_k (S_k/k) * (X_{k+1} - a S_k/k), compensated."""
    m_s = 0.0
    m_c = 0.0
    for k in range(1, steps.shape[0]):
        r = positions[k - 1] / k
        m_s, m_c = _neumaier(m_s, m_c, r * (steps[k] - a * r))
    return m_s + m_c


@nb.njit(**_OPTS)
def sq_sum_at(positions, checkpoints):
    """sum_{k<m} (S_k/k)^2 evaluated at each checkpoint length m (ascending)."""
    out = np.empty(checkpoints.shape[0])
    q_s = 0.0
    q_c = 0.0
    j = 0
    for k in range(1, positions.shape[0] + 1):
        while j < checkpoints.shape[0] and checkpoints[j] == k:
            out[j] = q_s + q_c
            j += 1
        if k < positions.shape[0]:
            r = positions[k - 1] / k
            q_s, q_c = _neumaier(q_s, q_c, r * r)
    return out
