"""Independent reference computations used by the oracle tests."""

import math

import numpy as np


def rk4(rhs, y0, T, h):
    """Classical fixed-step RK4 from 0 to T (last step shortened)."""
    y = np.array(y0, float)
    n = int(math.ceil(T / h))
    if n == 0:
        return y
    h = T / n
    for _ in range(n):
        k1 = np.asarray(rhs(y))
        k2 = np.asarray(rhs(y + 0.5 * h * k1))
        k3 = np.asarray(rhs(y + 0.5 * h * k2))
        k4 = np.asarray(rhs(y + h * k3))
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def rk4_until(rhs, y0, h, stop, t_max):
    """RK4 until stop(y) turns positive; the crossing is refined by bisection
    on the step length.  Returns (t, y) or (None, y) at t_max."""
    y = np.array(y0, float)
    t = 0.0

    def step(y, h):
        k1 = np.asarray(rhs(y))
        k2 = np.asarray(rhs(y + 0.5 * h * k1))
        k3 = np.asarray(rhs(y + 0.5 * h * k2))
        k4 = np.asarray(rhs(y + h * k3))
        return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    while t < t_max:
        yn = step(y, h)
        if stop(yn) > 0:
            lo, hi = 0.0, h
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if stop(step(y, mid)) > 0:
                    hi = mid
                else:
                    lo = mid
            return t + hi, step(y, hi)
        y, t = yn, t + h
    return None, y


def angle_distance_brute(a, b):
    return min(abs(a - b + 2 * math.pi * k) for k in range(-4, 5))
