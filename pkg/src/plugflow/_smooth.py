"""Scalar C-infinity building blocks shared by the profiles and the kernels.

Everything here is compiled with numba so the integrator kernels can inline
the calls; the functions also work as ordinary Python callables.
"""

import math

from numba import njit

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def smooth_step(x):
    """0 for x <= 0, 1 for x >= 1, C-infinity in between (exp(-1/x) transition)."""
    # exp(-1/x) already underflows to 0.0 below 1e-3; returning early keeps
    # 1/x from overflowing on subnormal inputs and changes no value
    if x <= 1e-3:
        return 0.0
    if x >= 1.0 - 1e-3:
        return 1.0
    a = math.exp(-1.0 / x)
    b = math.exp(-1.0 / (1.0 - x))
    return a / (a + b)


@njit(cache=True)
def plateau(u, a, b):
    """1 for u <= a, 0 for u >= b, strictly between 0 and 1 on (a, b)."""
    return 1.0 - smooth_step((u - a) / (b - a))


@njit(cache=True)
def peak(u, w):
    """Bump equal to 1 only at u = 0, vanishing for |u| >= w.

    Near the apex peak(u, w) = 1 - (u/w)**2 + O(u**4), so 1 - peak has a
    quadratic minimum.
    """
    q = u / w
    if q >= 1.0 or q <= -1.0:
        return 0.0
    return math.exp(1.0 - 1.0 / (1.0 - q * q))


@njit(cache=True)
def wrap_angle(a):
    """Normalize to [0, 2pi)."""
    r = a % TWO_PI
    if r >= TWO_PI:
        r -= TWO_PI
    return r


@njit(cache=True)
def signed_angle(a):
    """Normalize to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


@njit(cache=True)
def arc_distance(a, b):
    d = abs(signed_angle(a - b))
    return d
