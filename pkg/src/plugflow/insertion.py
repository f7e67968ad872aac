"""Insertion data of the Kuperberg construction: the regions L_i, the entry
faces, the maps sigma_i and their deformed family, and radius certificates.

Geometry of insertion i (all defaults below):

* L_i = [theta_i - half, theta_i + half] x [r_a, r_b] and D_i = [-2, 2] x L_i.
* The entry face lies in the half-plane theta = face_theta.  The embedding
  e_i(theta, r) = (z_c + slope * (theta - theta_i), face_theta, rho) with
  rho = r - kappa * (u**2 + (r - 2)**2), u = (theta - theta_i) / half, so
  rho <= r with equality exactly at (theta_i, 2), which lands on the Wilson
  circle {z = z_c, r = 2}.
* sigma_i(z, theta, r) is the X_W flow for time z + 2 from e_i(theta, r).
* shrink_t(theta, r) = r - t * shrink * b(theta, r) with b a product bump
  equal to 1 only at the centre of L_i and vanishing on its boundary.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernel as K
from ._smooth import arc_distance
from .core import DomainError, GeometryError, PointW3, normalize_angle
from .profiles import Wilson3Profile

SIGMA_RTOL = 1e-12
SIGMA_ATOL = 1e-12
SIGMA_MAX_ARC = 0.5


@dataclass(frozen=True)
class InsertionSpec:
    index: int
    theta_i: float
    half: float = 0.25
    r_a: float = 1.9
    r_b: float = 2.1
    z_c: float = -1.0
    slope: float = 0.1
    face_theta: float = 4.62
    kappa: float = 0.05
    shrink: float = 0.02
    transit_time: float = 4.0

    def __post_init__(self):
        if self.index not in (1, 2):
            raise ValueError("insertion index must be 1 or 2")
        if not 0.0 < self.half < math.pi / 2:
            raise ValueError("angular half-width out of range")
        if not 1.0 < self.r_a < 2.0 < self.r_b < 3.0:
            raise ValueError("L_i must straddle r = 2 inside (1, 3)")
        if self.slope == 0.0:
            raise ValueError("slope must be non-zero so the face is transverse")

    @property
    def theta_range(self) -> tuple:
        return (normalize_angle(self.theta_i - self.half), normalize_angle(self.theta_i + self.half))

    def contains(self, theta: float, r: float, tol: float = 0.0) -> bool:
        return arc_distance(theta, self.theta_i) <= self.half + tol and self.r_a - tol <= r <= self.r_b + tol

    def block(self, t: float = 0.0) -> np.ndarray:
        return np.array([self.theta_i, self.half, self.r_a, self.r_b, self.z_c, self.slope,
                         self.face_theta, self.kappa, self.shrink, t, self.transit_time])

    def entry_embedding(self, theta: float, r: float) -> PointW3:
        u = math.remainder(theta - self.theta_i, 2 * math.pi)
        z = self.z_c + self.slope * u
        rho = r - self.kappa * ((u / self.half) ** 2 + (r - 2.0) ** 2)
        return PointW3(z, self.face_theta, rho)

    def to_dict(self) -> dict:
        return asdict(self)


def default_insertions() -> tuple:
    """Insertion 1 wraps onto gamma_1 (z = -1, theta decreasing), insertion 2 onto gamma_2."""
    return (
        InsertionSpec(index=1, theta_i=5.15, z_c=-1.0, face_theta=4.62),
        InsertionSpec(index=2, theta_i=5.95, z_c=1.0, face_theta=0.62),
    )


@dataclass(frozen=True)
class DeformedInsertion:
    base: InsertionSpec
    t: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.t <= 2.0:
            raise DomainError(f"t={self.t} outside [0, 2]")

    @property
    def index(self) -> int:
        return self.base.index

    def block(self) -> np.ndarray:
        return self.base.block(self.t)

    def shrink_t(self, theta: float, r: float) -> float:
        P = _single_params(self.base, self.t)
        return float(K.shrink(P, 0, theta, r))

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "t": self.t}


def as_deformed(ins) -> DeformedInsertion:
    return ins if isinstance(ins, DeformedInsertion) else DeformedInsertion(ins, 0.0)


def _single_params(ins: InsertionSpec, t: float, profile: Wilson3Profile | None = None) -> np.ndarray:
    """W3 parameter vector with ``ins`` in slot 0 and the unhomotoped field."""
    profile = profile or Wilson3Profile()
    P = np.zeros(K.W3_LEN)
    P[K.P_COLLAR] = profile.collar
    P[K.P_WZ] = profile.z_width
    P[K.P_WR] = profile.r_width
    P[K.P_ARCS:K.P_ARCS + 6] = (0.0, 0.1, 0.2, math.pi, 0.1, 0.2)
    P[K.P_INS:K.P_INS + K.INS_LEN] = ins.block(t)
    return P


def _check_local(ins: InsertionSpec, z: float, theta: float, r: float) -> None:
    if not -2.0 <= z <= 2.0:
        raise DomainError(f"z={z} outside [-2, 2]")
    if not ins.contains(theta, r, 1e-12):
        raise DomainError(f"({theta}, {r}) outside L_{ins.index}")


def _flow_from_face(P: np.ndarray, ins: InsertionSpec, theta: float, r_img: float, time: float) -> PointW3:
    fz, fth, fr = K.face_point(P, 0, theta, r_img)
    if time == 0.0:
        return PointW3(fz, fth, fr)
    out = np.empty(3)
    ok = K.flow_fixed(K.MODE_W3, P, 0.0, np.array([fz, fth, fr]), time, SIGMA_RTOL, SIGMA_ATOL, SIGMA_MAX_ARC, out)
    if not ok:
        raise GeometryError(f"flow from the entry face of insertion {ins.index} leaves W")
    return PointW3.from_array(out)


def sigma(ins: InsertionSpec, z: float, theta: float, r: float, profile: Wilson3Profile | None = None) -> PointW3:
    """sigma_i(z, theta, r): X_W flow for time z + 2 from e_i(theta, r)."""
    _check_local(ins, z, theta, r)
    P = _single_params(ins, 0.0, profile)
    return _flow_from_face(P, ins, theta, r, z + 2.0)


def sigma_t(d: DeformedInsertion, z: float, theta: float, r: float, profile: Wilson3Profile | None = None) -> PointW3:
    """sigma_i o shrink_t."""
    ins = d.base
    _check_local(ins, z, theta, r)
    P = _single_params(ins, d.t, profile)
    return _flow_from_face(P, ins, theta, float(K.shrink(P, 0, theta, r)), z + 2.0)


def sigma_inverse_face(ins, point: PointW3):
    """Chart coordinates (theta_loc, r_loc) of a point on the entry face, or None."""
    d = as_deformed(ins)
    if arc_distance(point.theta, d.base.face_theta) > 1e-9:
        return None
    P = _single_params(d.base, d.t)
    ok, thl, rimg = K.face_inverse(P, 0, point.z, point.r)
    if not ok:
        return None
    return float(thl), float(K.shrink_inverse(P, 0, thl, rimg))


def image_radius(ins, theta: float, r: float) -> float:
    """Radius of sigma_i^t(z, theta, r); independent of z since X_W has no radial part."""
    d = as_deformed(ins)
    P = _single_params(d.base, d.t)
    return float(K.face_radius(P, 0, theta, K.shrink(P, 0, theta, r)))


# ------------------------------------------------------------ certificates

@dataclass
class RadiusCertificate:
    index: int
    t: float
    n: int
    epsilon: float
    min_gap: float
    equality_points: list
    pass_: bool
    witness: dict | None = None
    gaps: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {
            "insertion": self.index,
            "t": self.t,
            "grid": self.n,
            "epsilon": self.epsilon,
            "min_gap": self.min_gap,
            "equality_points": self.equality_points,
            "pass": self.pass_,
            "witness": self.witness,
        }
        if self.gaps is not None:
            d["gap_summary"] = {
                "min": float(self.gaps.min()),
                "max": float(self.gaps.max()),
                "mean": float(self.gaps.mean()),
            }
        return d


def certificate_grid(ins: InsertionSpec, n: int):
    """n x n grid over L_i plus the equality point (theta_i, 2) appended."""
    th = ins.theta_i + np.linspace(-ins.half, ins.half, n)
    rr = np.linspace(ins.r_a, ins.r_b, n)
    return th, rr


def certify_radius(ins, n: int = 128, workers: int = 1, eq_tol: float = 1e-10) -> RadiusCertificate:
    """Evaluate gap = r - radius(sigma^t(z, theta, r)) over L_i.

    Base insertions (t = 0) pass iff gap >= 0 everywhere with |gap| <= eq_tol
    only at (theta_i, 2); deformed insertions pass iff min gap = epsilon > 0.
    """
    if n < 32:
        raise ValueError("grid density must be at least 32 per axis")
    d = as_deformed(ins)
    base = d.base
    P = _single_params(base, d.t)
    th, rr = certificate_grid(base, n)

    def row(i):
        out = np.empty(n)
        for j in range(n):
            rs = K.shrink(P, 0, th[i], rr[j])
            out[j] = rr[j] - K.face_radius(P, 0, th[i], rs)
        return out

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            gaps = np.array(list(ex.map(row, range(n))))
    else:
        gaps = np.array([row(i) for i in range(n)])
    centre = 2.0 - K.face_radius(P, 0, base.theta_i, K.shrink(P, 0, base.theta_i, 2.0))
    all_gaps = np.append(gaps.ravel(), centre)
    all_pts = [(float(a), float(b)) for a in th for b in rr] + [(base.theta_i, 2.0)]

    min_gap = float(all_gaps.min())
    k = int(np.argmin(all_gaps))
    witness = None
    if d.t == 0.0:
        eq_idx = np.flatnonzero(np.abs(all_gaps) <= eq_tol)
        equality = [all_pts[i] for i in eq_idx]
        bad_eq = [p for p in equality if arc_distance(p[0], base.theta_i) > 1e-12 or abs(p[1] - 2.0) > 1e-12]
        ok = min_gap >= -eq_tol and abs(centre) <= eq_tol and not bad_eq
        if not ok:
            if min_gap < -eq_tol:
                witness = {"theta": all_pts[k][0], "r": all_pts[k][1], "gap": float(all_gaps[k])}
            elif bad_eq:
                witness = {"theta": bad_eq[0][0], "r": bad_eq[0][1], "gap": 0.0}
            else:
                witness = {"theta": base.theta_i, "r": 2.0, "gap": float(centre)}
        eps = float(np.min(np.delete(all_gaps, eq_idx))) if len(eq_idx) < len(all_gaps) else 0.0
    else:
        equality = []
        ok = min_gap > 0.0
        if not ok:
            witness = {"theta": all_pts[k][0], "r": all_pts[k][1], "gap": float(all_gaps[k])}
        eps = min_gap
    return RadiusCertificate(base.index, d.t, n, eps, min_gap, equality, bool(ok), witness, gaps)


# ----------------------------------------------------------- validation

def image_samples(ins: InsertionSpec, n_face: int = 9, n_time: int = 41, profile: Wilson3Profile | None = None):
    """Points of the image cylinder sigma_i(D_i) swept from a face sample grid."""
    P = _single_params(ins, 0.0, profile)
    pts = []
    for th in ins.theta_i + np.linspace(-ins.half, ins.half, n_face):
        for r in np.linspace(ins.r_a, ins.r_b, n_face):
            fz, fth, fr = K.face_point(P, 0, th, r)
            y = np.array([fz, fth, fr])
            pts.append(y.copy())
            dt = ins.transit_time / (n_time - 1)
            for _ in range(n_time - 1):
                out = np.empty(3)
                if not K.flow_fixed(K.MODE_W3, P, 0.0, y, dt, SIGMA_RTOL, SIGMA_ATOL, SIGMA_MAX_ARC, out):
                    raise GeometryError(f"flow from the entry face of insertion {ins.index} leaves W")
                y = out
                pts.append(y.copy())
    return np.array(pts)


def validate_insertions(insertions, profile: Wilson3Profile | None = None, homotopy=None) -> dict:
    """Check the construction requirements of a pair of insertions.

    Raises GeometryError on failure; returns the measured margins.
    """
    profile = profile or Wilson3Profile()
    a, b = (as_deformed(i).base for i in insertions)
    report = {}
    sep = arc_distance(a.theta_i, b.theta_i) - a.half - b.half
    report["D_separation"] = sep
    if sep <= 0:
        raise GeometryError("the cylinders D_1 and D_2 overlap")
    margin = math.inf
    for ins in (a, b):
        pts = image_samples(ins, profile=profile)
        for other in (a, b):
            d_theta = np.array([arc_distance(p, other.theta_i) for p in pts[:, 1]]) - other.half
            margin = min(margin, float(d_theta.min()))
        # the entry face must cross the field transversally, away from the collar
        for th in ins.theta_i + np.linspace(-ins.half, ins.half, 9):
            for r in np.linspace(ins.r_a, ins.r_b, 9):
                p = ins.entry_embedding(th, r)
                if abs(K.w3_f(p.z, p.r, profile.collar)) < 0.5:
                    raise GeometryError(f"entry face of insertion {ins.index} is not transverse at ({th}, {r})")
        if arc_distance(ins.face_theta, a.theta_i) <= a.half or arc_distance(ins.face_theta, b.theta_i) <= b.half:
            raise GeometryError("an entry face meets one of the cylinders D_i")
    report["image_vs_D_margin"] = margin
    if margin <= 0:
        raise GeometryError("an image cylinder meets one of the D_i")
    if homotopy is not None:
        for ins in (a, b):
            lo, hi = ins.theta_i - ins.half, ins.theta_i + ins.half
            if not any(arc_distance(lo, arc.center) <= arc.half and arc_distance(hi, arc.center) <= arc.half
                       and arc_distance(ins.theta_i, arc.center) <= arc.half for arc in homotopy.insert_arcs):
                raise GeometryError(f"L_{ins.index} is not inside an arc where alpha = 1")
    return report


def insertion_from_dict(d: dict):
    if "base" in d:
        return DeformedInsertion(InsertionSpec(**d["base"]), d.get("t", 0.0))
    return InsertionSpec(**d)


def dumps(ins) -> str:
    return json.dumps(ins.to_dict(), sort_keys=True)


def loads(text: str):
    return insertion_from_dict(json.loads(text))


def sabotaged(ins: InsertionSpec) -> InsertionSpec:
    """Entry face radially expanded, violating the radius inequality."""
    return replace(ins, kappa=-abs(ins.kappa))
