"""The 3-D and n-D Wilson plugs as evaluable vector fields, their homotopies,
and the placement of a plug inside an ambient flowbox."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel as K
from .core import DomainError, PointW3, PointWNd, Tangent
from .profiles import HomotopyProfile, Wilson3Profile, WilsonNdProfile, homotopy_scalars


@dataclass(frozen=True)
class Wilson3Plug:
    profile: Wilson3Profile = field(default_factory=Wilson3Profile)

    gamma_1 = (-1.0, 2.0)  # (z, r) of the closed orbit at the bottom
    gamma_2 = (1.0, 2.0)
    trapped_entry = (-2.0, 2.0)

    def kernel_params(self, t: float = 0.0, hp: HomotopyProfile | None = None) -> np.ndarray:
        hp = hp or HomotopyProfile()
        P = np.zeros(K.W3_LEN)
        P[K.P_COLLAR] = self.profile.collar
        P[K.P_WZ] = self.profile.z_width
        P[K.P_WR] = self.profile.r_width
        P[K.P_T] = t
        for k, arc in enumerate(hp.insert_arcs):
            P[K.P_ARCS + 3 * k: K.P_ARCS + 3 * k + 3] = (arc.center, arc.half, arc.half_prime)
        return P

    def to_dict(self) -> dict:
        return {"kind": "wilson3", "profile": self.profile.to_dict()}


@dataclass(frozen=True)
class WilsonNdPlug:
    profile: WilsonNdProfile = field(default_factory=WilsonNdProfile)

    @property
    def n(self) -> int:
        return self.profile.n

    @property
    def l(self) -> int:
        return self.profile.l

    def check_point(self, p: PointWNd) -> None:
        if len(p.x) != self.n - 4 or len(p.y) != self.l:
            raise DomainError(f"expected {self.n - 4} x- and {self.l} y-coordinates")

    def kernel_params(self, p: PointWNd, t: float = 0.0) -> np.ndarray:
        P = np.zeros(K.ND_LEN)
        P[K.N_COLLAR] = self.profile.collar
        P[K.N_WZ] = self.profile.z_width
        P[K.N_B] = self.profile.b
        P[K.N_T] = t
        P[K.N_R] = p.r
        P[K.N_X] = p.x_norm
        P[K.N_Y] = p.y_norm
        return P

    def in_trapped_entry(self, p: PointWNd) -> bool:
        return abs(p.r) <= 1.0 and p.x_norm <= 0.5 and p.y_norm <= 0.5

    def to_dict(self) -> dict:
        return {"kind": "wilson_nd", "profile": self.profile.to_dict()}


def _check_w3(p: PointW3) -> None:
    if not isinstance(p, PointW3):
        raise DomainError("expected a PointW3")


def wilson3_field(plug: Wilson3Plug, p: PointW3) -> Tangent:
    _check_w3(p)
    dz, dth, dr = K.field(K.MODE_W3, plug.kernel_params(0.0), 0.0, p.z, p.theta, p.r)
    return Tangent(z=dz, theta=dth, r=dr)


def wilson3_homotopy_field(plug: Wilson3Plug, hp: HomotopyProfile, t: float, p: PointW3) -> Tangent:
    """X_W^t = f_t d/dtheta + g_t d/dz."""
    _check_w3(p)
    f_t, g_t = homotopy_scalars(hp, plug.profile, t, p.z, p.theta, p.r)
    return Tangent(z=g_t, theta=f_t, r=0.0)


def _nd_tangent(plug: WilsonNdPlug, p: PointWNd, dz: float, ds: float, dt: float) -> Tangent:
    comps = {"z": dz, "s": ds, "t": dt, "r": 0.0}
    comps.update({f"x{i + 5}": 0.0 for i in range(plug.n - 4)})
    comps.update({f"y{j + 1}": 0.0 for j in range(plug.l)})
    return Tangent(**comps)


def wilson_nd_field(plug: WilsonNdPlug, p: PointWNd) -> Tangent:
    """f (d/ds + b d/dt) + g d/dz."""
    plug.check_point(p)
    dz, ds, dt = K.field(K.MODE_ND, plug.kernel_params(p, 0.0), 0.0, p.z, p.s, p.t)
    return _nd_tangent(plug, p, dz, ds, dt)


def nd_homotopy_field(plug: WilsonNdPlug, t: float, p: PointWNd) -> Tangent:
    """g is pushed linearly to 1 on [0, 1/2], then f to 0 on [1/2, 1]."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]")
    plug.check_point(p)
    dz, ds, dt = K.field(K.MODE_ND, plug.kernel_params(p, t), t, p.z, p.s, p.t)
    return _nd_tangent(plug, p, dz, ds, dt)


def nd_embedding_coords(p: PointWNd) -> np.ndarray:
    """Coordinates of the box point in R^{n+l}, for visualisation only."""
    rho = 6.0 + (3.0 + p.r) * math.cos(p.t)
    return np.array([p.z, math.cos(p.s) * rho, math.sin(p.s) * rho, (3.0 + p.r) * math.sin(p.t), *p.x, *p.y])


@dataclass(frozen=True)
class PlugEmbedding:
    """Cylindrical placement of W inside an ambient flowbox with coordinates
    (Z, X1, X2, y...): Z = z0 + dz_scale * z, (X1, X2) = center + scale * r (cos, sin).

    The y coordinates are untouched and d/dz maps to dz_scale * d/dZ.
    """

    z0: float = 0.0
    dz_scale: float = 1.0
    center: tuple = (0.0, 0.0)
    scale: float = 1.0

    def __post_init__(self):
        if self.dz_scale <= 0 or self.scale <= 0:
            raise ValueError("scales must be positive")

    @property
    def delta(self) -> float:
        return self.dz_scale

    def forward(self, p: PointW3) -> np.ndarray:
        return np.array([
            self.z0 + self.dz_scale * p.z,
            self.center[0] + self.scale * p.r * math.cos(p.theta),
            self.center[1] + self.scale * p.r * math.sin(p.theta),
        ])

    def inverse(self, q) -> PointW3 | None:
        """Plug point whose image is q, or None outside the image."""
        z = (q[0] - self.z0) / self.dz_scale
        dx, dy = q[1] - self.center[0], q[2] - self.center[1]
        r = math.hypot(dx, dy) / self.scale
        if not (-2.0 <= z <= 2.0 and 1.0 <= r <= 3.0):
            return None
        return PointW3(z, math.atan2(dy, dx), r)

    def push_forward(self, p: PointW3, v: Tangent) -> np.ndarray:
        c, s = math.cos(p.theta), math.sin(p.theta)
        dz, dth, dr = v.get("z", 0.0), v.get("theta", 0.0), v.get("r", 0.0)
        return np.array([
            self.dz_scale * dz,
            self.scale * (dr * c - p.r * s * dth),
            self.scale * (dr * s + p.r * c * dth),
        ])


def embed_plug_field(emb: PlugEmbedding, plug_field, q, normalize: bool = False) -> Tangent:
    """Ambient field after replacing d/dZ by the plug field inside the image.

    ``plug_field`` maps a PointW3 to a Tangent.  Raw push-forwards equal
    delta * d/dZ on the plug collar; with ``normalize`` they are divided by
    delta so the result is continuous with d/dZ across the seam.
    """
    extra = {f"y{j + 1}": 0.0 for j in range(len(q) - 3)}
    p = emb.inverse(q)
    if p is None:
        return Tangent(Z=1.0, X1=0.0, X2=0.0, **extra)
    w = emb.push_forward(p, plug_field(p))
    if normalize:
        w = w / emb.delta
    return Tangent(Z=w[0], X1=w[1], X2=w[2], **extra)


def export_field_csv(path, plug: Wilson3Plug, nz: int = 81, nr: int = 41, hp: HomotopyProfile | None = None,
                     t: float = 0.0, theta: float = 0.0) -> None:
    """Sample X_W^t on a (z, r) grid at fixed theta for external plotting."""
    hp = hp or HomotopyProfile()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "theta", "r", "dz", "dtheta", "dr"])
        for z in np.linspace(-2, 2, nz):
            for r in np.linspace(1, 3, nr):
                v = wilson3_homotopy_field(plug, hp, t, PointW3(z, theta, r))
                w.writerow([f"{z:.17g}", f"{theta:.17g}", f"{r:.17g}", repr(v["z"]), repr(v["theta"]), repr(v["r"])])


# ------------------------------------------------------------ flow adapters
# Objects handed to :func:`plugflow.integrate.integrate` describe how to run
# the compiled kernel: mode, parameter vector, and the map between point
# records and the kernel's (z, angle, third) state.

@dataclass(frozen=True)
class DzFlow:
    """The trivial plug: the constant field d/dz on W."""

    mode = K.MODE_DZ
    teleport = False
    coords = ("z", "theta", "r")

    def kernel_params(self, seed) -> np.ndarray:
        return np.zeros(K.W3_LEN)

    def encode(self, p: PointW3) -> np.ndarray:
        return p.as_array()

    def decode(self, y, seed) -> PointW3:
        return PointW3(min(2.0, max(-2.0, y[0])), y[1], y[2])

    def to_dict(self) -> dict:
        return {"kind": "dz"}


@dataclass(frozen=True)
class Wilson3Flow:
    """X_W^t on W (t = 0 is the Wilson field itself)."""

    plug: Wilson3Plug = field(default_factory=Wilson3Plug)
    t: float = 0.0
    homotopy: HomotopyProfile = field(default_factory=HomotopyProfile)

    mode = K.MODE_W3
    teleport = False
    coords = ("z", "theta", "r")

    def __post_init__(self):
        if not 0.0 <= self.t <= 2.0:
            raise DomainError(f"t={self.t} outside [0, 2]")

    def kernel_params(self, seed=None) -> np.ndarray:
        return self.plug.kernel_params(self.t, self.homotopy)

    def encode(self, p: PointW3) -> np.ndarray:
        return p.as_array()

    def decode(self, y, seed=None) -> PointW3:
        return PointW3(min(2.0, max(-2.0, y[0])), y[1], y[2])

    def field(self, p: PointW3) -> Tangent:
        return wilson3_homotopy_field(self.plug, self.homotopy, self.t, p)

    def to_dict(self) -> dict:
        return {"kind": "wilson3", "t": self.t, "profile": self.plug.profile.to_dict()}


@dataclass(frozen=True)
class WilsonNdFlow:
    """The n-D Wilson field (or its homotopy at t).  Only (z, s, t) move;
    r, x, y are constants of motion and are carried over from the seed."""

    plug: WilsonNdPlug = field(default_factory=WilsonNdPlug)
    t: float = 0.0

    mode = K.MODE_ND
    teleport = False
    coords = ("z", "s", "t")

    def kernel_params(self, seed: PointWNd) -> np.ndarray:
        self.plug.check_point(seed)
        return self.plug.kernel_params(seed, self.t)

    def encode(self, p: PointWNd) -> np.ndarray:
        return np.array([p.z, p.s, p.t])

    def decode(self, y, seed: PointWNd) -> PointWNd:
        return PointWNd(min(2.0, max(-2.0, y[0])), y[1], y[2], seed.r, seed.x, seed.y)

    def field(self, p: PointWNd) -> Tangent:
        return nd_homotopy_field(self.plug, self.t, p)

    def to_dict(self) -> dict:
        return {"kind": "wilson_nd", "t": self.t, "profile": self.plug.profile.to_dict()}


def deactivation_constant(plug: Wilson3Plug, hp: HomotopyProfile, t: float, n: int = 101) -> float:
    """Grid minimum of g_t over the arcs I_1, I_2 (all z and r).

    Positive for t > 0 once phi(t) > 0; orbits then gain height at a rate of
    at least this constant while they cross the arcs.
    """
    if not 0.0 <= t <= 2.0:
        raise DomainError(f"t={t} outside [0, 2]")
    z = np.linspace(-2.0, 2.0, n)
    r = np.linspace(1.0, 3.0, n)
    Z, R = np.meshgrid(z, r, indexing="ij")
    g = plug.profile.g(Z, R)
    phi, psi = float(hp.phi(t)), float(hp.psi(t))
    best = math.inf
    for arc in hp.insert_arcs:
        for th in arc.center + np.linspace(-arc.half, arc.half, 21):
            a = float(hp.alpha(th))
            m = phi * a + psi * (1.0 - a)
            best = min(best, float(np.min(g + (1.0 - g) * m)))
    return best


def estimated_exit_time(plug: Wilson3Plug, hp: HomotopyProfile, t: float) -> float:
    """Order-of-magnitude exit time for orbits near the former closed orbits.

    Such an orbit must climb about 2 units in z and only gains height at rate
    >= C_t while inside the arcs, which it visits once per turn of length 2 pi.
    """
    c = deactivation_constant(plug, hp, t)
    if c <= 0.0:
        return math.inf
    arc_len = sum(2 * a.half for a in hp.insert_arcs)
    return 2.0 * 2 * math.pi / (c * arc_len)
