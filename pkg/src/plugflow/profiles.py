"""Scalar profiles of the Wilson plugs, the homotopy ramps and the eta family.

All profiles are small frozen dataclasses holding the handful of numbers
that pin down the smooth functions; evaluation is delegated to the compiled
primitives in :mod:`plugflow._kernel` so the integrator and the Python API
evaluate bit-identical functions.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernel as K
from ._smooth import arc_distance, plateau, smooth_step
from .core import DomainError

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Wilson3Profile:
    """f(z, r), g(z, r) of the 3-D Wilson plug.

    g = 1 - peak(|z| - 1) * peak(r - 2) vanishes exactly on B = {|z| = 1, r = 2}
    with quadratic contact; f = F(z) Q(r) is odd in z with F = 1 on
    [1/4, 7/4] and Q = 1 on [5/4, 11/4].  Both are trivial on a collar of
    width ``collar``.
    """

    collar: float = 0.15
    z_width: float = 0.7
    r_width: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.collar < 0.25:
            raise ValueError("collar must lie in (0, 1/4) so it misses the f = 1 block")
        if not 0.0 < self.z_width < 1.0 - self.collar:
            raise ValueError("z_width must keep the g-dip inside the collar")
        if not 0.0 < self.r_width < 1.0 - self.collar:
            raise ValueError("r_width must keep the g-dip inside the collar")

    def f(self, z, r):
        return _vec(K.w3_f)(z, r, self.collar)

    def g(self, z, r):
        return _vec(K.w3_g)(z, r, self.z_width, self.r_width)

    def in_collar(self, z, r):
        c = self.collar
        return (np.abs(z) >= 2.0 - c) | (r <= 1.0 + c) | (r >= 3.0 - c)

    def validate(self, nz: int = 401, nr: int = 201) -> dict:
        """Grid check of the four constraints; returns the worst violation of each."""
        z = np.linspace(-2.0, 2.0, nz)
        r = np.linspace(1.0, 3.0, nr)
        Z, R = np.meshgrid(z, r, indexing="ij")
        f, g = self.f(Z, R), self.g(Z, R)
        fm, gm = self.f(-Z, R), self.g(-Z, R)
        collar = self.in_collar(Z, R)
        on_b = (np.abs(np.abs(Z) - 1.0) < 1e-12) & (np.abs(R - 2.0) < 1e-12)
        block = (Z >= 0.25) & (Z <= 1.75) & (R >= 1.25) & (R <= 2.75)
        checks = {
            "f_odd": float(np.max(np.abs(f + fm))),
            "g_even": float(np.max(np.abs(g - gm))),
            "collar_f": float(np.max(np.abs(f[collar]))),
            "collar_g": float(np.max(np.abs(g[collar] - 1.0))),
            "g_nonneg": float(max(0.0, -np.min(g))),
            "g_zero_on_B": float(np.max(np.abs(g[on_b]))) if on_b.any() else 0.0,
            "g_positive_off_B": float(0.0 if np.all(g[~on_b] > 0) else 1.0),
            "f_nonneg_upper": float(max(0.0, -np.min(f[Z > 0]))),
            "f_one_on_block": float(np.max(np.abs(f[block] - 1.0))),
        }
        return checks

    def to_dict(self) -> dict:
        return {"kind": "wilson3_profile", **asdict(self)}


@dataclass(frozen=True)
class WilsonNdProfile:
    """f, g of the n-dimensional Wilson plug on (z; s, t; r; x; y).

    With box(r, x, y) = 1 exactly on {|r| <= 1, |x| <= 1/2, |y| <= 1/2}:
    g = 1 - peak(|z| - 1) box and f = F(z) box, F = 1 on [-3/2, -1/2].
    """

    n: int = 4
    l: int = 1
    b: float = SQRT2
    collar: float = 0.15
    z_width: float = 0.4

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("the n-dimensional construction needs n >= 4")
        if self.l < 0:
            raise ValueError("l must be non-negative")
        if not 0.0 < self.collar < 0.35:
            raise ValueError("collar too wide")
        if not 0.0 < self.z_width <= 0.5:
            raise ValueError("z_width must keep the g-dip inside the plateau of F")

    def box(self, r, xn, yn):
        return _vec(K.nd_box)(r, xn, yn, self.collar)

    def f(self, z, r, xn=0.0, yn=0.0):
        return _vec(K.nd_fz)(z, self.collar) * self.box(r, xn, yn)

    def g(self, z, r, xn=0.0, yn=0.0):
        from ._smooth import peak

        return 1.0 - _vec(peak)(np.abs(z) - 1.0, self.z_width) * self.box(r, xn, yn)

    def in_collar(self, z, r, xn, yn):
        c = self.collar
        return (np.abs(z) >= 2.0 - c) | (np.abs(r) >= 2.0 - c) | (xn >= 1.0 - c) | (yn >= 1.0 - c)

    def validate(self, n_grid: int = 41) -> dict:
        z = np.linspace(-2, 2, 4 * n_grid + 1)
        r = np.linspace(-2, 2, n_grid)
        xn = np.linspace(0, 1, 11)
        yn = np.linspace(0, 1, 11)
        Z, R, X, Y = np.meshgrid(z, r, xn, yn, indexing="ij")
        f, g = self.f(Z, R, X, Y), self.g(Z, R, X, Y)
        fm, gm = self.f(-Z, R, X, Y), self.g(-Z, R, X, Y)
        collar = self.in_collar(Z, R, X, Y)
        zero_set = (np.abs(np.abs(Z) - 1.0) < 1e-12) & (np.abs(R) <= 1) & (X <= 0.5) & (Y <= 0.5)
        block = (Z >= -1.5) & (Z <= -0.5) & (np.abs(R) <= 1) & (X <= 0.5) & (Y <= 0.5)
        return {
            "f_odd": float(np.max(np.abs(f + fm))),
            "g_even": float(np.max(np.abs(g - gm))),
            "collar_f": float(np.max(np.abs(f[collar]))),
            "collar_g": float(np.max(np.abs(g[collar] - 1.0))),
            "g_nonneg": float(max(0.0, -np.min(g))),
            "g_zero_on_set": float(np.max(np.abs(g[zero_set]))),
            "g_positive_off_set": float(0.0 if np.all(g[~zero_set] > 0) else 1.0),
            "f_one_on_block": float(np.max(np.abs(f[block] - 1.0))),
        }

    def to_dict(self) -> dict:
        return {"kind": "wilson_nd_profile", **asdict(self)}


@dataclass(frozen=True)
class Arc:
    """Concentric arcs: the inner one (half-width ``half``) where a bump is 1,
    the outer one (``half_prime``) outside of which it vanishes."""

    center: float
    half: float
    half_prime: float

    def __post_init__(self):
        if not 0.0 < self.half < self.half_prime < math.pi:
            raise ValueError("need 0 < half < half_prime < pi")

    def bump(self, theta):
        return _vec(K.arc_bump)(theta, self.center, self.half, self.half_prime)

    def outer_disjoint(self, other: "Arc") -> bool:
        return arc_distance(self.center, other.center) > self.half_prime + other.half_prime


@dataclass(frozen=True)
class HomotopyProfile:
    """Bumps alpha (arcs I_i within I_i'), beta (arcs of the flowbox images)
    and the ramps phi, psi on [0, 2].

    The two flowbox images sweep about 4 radians of their closed orbits each,
    so their arcs cannot be disjoint from each other; they sit at opposite
    heights z = -1, +1 and may share one arc.  Only alpha enters the fields.
    """

    insert_arcs: tuple = (Arc(5.15, 0.27, 0.35), Arc(5.95, 0.27, 0.35))
    image_arcs: tuple = (Arc(2.62, 2.05, 2.12), Arc(2.62, 2.05, 2.12))

    def alpha(self, theta):
        return np.maximum(self.insert_arcs[0].bump(theta), self.insert_arcs[1].bump(theta))

    def beta(self, theta):
        return np.maximum(self.image_arcs[0].bump(theta), self.image_arcs[1].bump(theta))

    @staticmethod
    def phi(t):
        return _vec(K.ramp_phi)(t)

    @staticmethod
    def psi(t):
        return _vec(K.ramp_psi)(t)

    def validate(self, n: int = 4001) -> dict:
        I1, I2 = self.insert_arcs
        ok_disjoint = I1.outer_disjoint(I2) and all(a.outer_disjoint(b) for a in self.insert_arcs for b in self.image_arcs)
        th = np.linspace(0, 2 * np.pi, n, endpoint=False)
        t = np.linspace(0, 2, n)
        al, be = self.alpha(th), self.beta(th)
        phi, psi = self.phi(t), self.psi(t)

        def in_arc(a, inner):
            return _vec(arc_distance)(th, a.center) <= (a.half if inner else a.half_prime)

        inner_I = in_arc(I1, True) | in_arc(I2, True)
        outer_I = in_arc(I1, False) | in_arc(I2, False)
        inner_J = in_arc(self.image_arcs[0], True) | in_arc(self.image_arcs[1], True)
        outer_J = in_arc(self.image_arcs[0], False) | in_arc(self.image_arcs[1], False)
        first = t <= 1.0
        return {
            "arcs_disjoint": 0.0 if ok_disjoint else 1.0,
            "alpha_one_inside": float(np.max(np.abs(al[inner_I] - 1.0))),
            "alpha_zero_outside": float(np.max(np.abs(al[~outer_I]))),
            "beta_one_inside": float(np.max(np.abs(be[inner_J] - 1.0))),
            "beta_zero_outside": float(np.max(np.abs(be[~outer_J]))),
            "phi_start": float(abs(phi[0])),
            "phi_increasing": float(max(0.0, -np.min(np.diff(phi[first])))),
            "phi_one_late": float(np.max(np.abs(phi[~first] - 1.0))) if np.any(~first) else 0.0,
            "psi_zero_early": float(np.max(np.abs(psi[first]))),
            "psi_end": float(abs(psi[-1] - 1.0)),
        }

    def to_dict(self) -> dict:
        return {
            "kind": "homotopy_profile",
            "insert_arcs": [asdict(a) for a in self.insert_arcs],
            "image_arcs": [asdict(a) for a in self.image_arcs],
        }


@dataclass(frozen=True)
class EtaProfile:
    """eta(u) = 2 * step((u - start) / (full - start)): 0 on [0, start], 2 on [full, 1]."""

    start: float = 0.5
    full: float = 0.8

    def __post_init__(self):
        if not 0.5 <= self.start < self.full < 1.0:
            raise ValueError("need 1/2 <= start < full < 1")

    def eta(self, u):
        return 2.0 * _vec(smooth_step)((np.asarray(u, float) - self.start) / (self.full - self.start))

    def to_dict(self) -> dict:
        return {"kind": "eta_profile", **asdict(self)}


def make_wilson3_profile(**overrides) -> Wilson3Profile:
    return Wilson3Profile(**overrides)


def make_wilson_nd_profile(n: int = 4, l: int = 1, b: float = SQRT2, **overrides) -> WilsonNdProfile:
    if n < 4:
        raise ValueError("the n-dimensional construction needs n >= 4")
    return WilsonNdProfile(n=n, l=l, b=b, **overrides)


def homotopy_scalars(hp: HomotopyProfile, base: Wilson3Profile, t: float, z: float, theta: float, r: float):
    """(f_t, g_t) at (z, theta, r)."""
    if not 0.0 <= t <= 2.0:
        raise DomainError(f"t={t} outside [0, 2]")
    f = float(base.f(z, r))
    g = float(base.g(z, r))
    a = float(hp.alpha(theta))
    m = float(hp.phi(t)) * a + float(hp.psi(t)) * (1.0 - a)
    return f * (1.0 - m), g + (1.0 - g) * m


def eta_value(ep: EtaProfile, s: float, u: float) -> float:
    """eta_s(u) = (1 - s) eta(u) + 2 s."""
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"s={s} outside [0, 1]")
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u={u} outside [0, 1]")
    return (1.0 - s) * float(ep.eta(u)) + 2.0 * s


# ------------------------------------------------------------------ json

def profile_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if kind == "wilson3_profile":
        return Wilson3Profile(**d)
    if kind == "wilson_nd_profile":
        return WilsonNdProfile(**d)
    if kind == "eta_profile":
        return EtaProfile(**d)
    if kind == "homotopy_profile":
        return HomotopyProfile(
            insert_arcs=tuple(Arc(**a) for a in d["insert_arcs"]),
            image_arcs=tuple(Arc(**a) for a in d["image_arcs"]),
        )
    raise ValueError(f"unknown profile kind {kind!r}")


def dumps(profile) -> str:
    return json.dumps(profile.to_dict(), sort_keys=True)


def loads(text: str):
    return profile_from_dict(json.loads(text))


_VEC_CACHE: dict = {}


def _vec(fn):
    """numpy-broadcasting wrapper around a compiled scalar function."""
    v = _VEC_CACHE.get(fn)
    if v is None:
        v = np.vectorize(fn, otypes=[float])
        _VEC_CACHE[fn] = v
    return v
