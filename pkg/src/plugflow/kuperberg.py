"""The Kuperberg quotient flow, its homotopy family and the parametric plug.

The quotient is realized by teleports.  An orbit that crosses the entry
face of insertion i jumps to the bottom (z = -2) of the cylinder D_i, at the
chart coordinates (theta_loc, r_loc) = (sigma_i^t)^{-1}(point), and keeps
following the ambient field there; D_i lies in W, so nothing else changes.
When it reaches z = +2 it returns to sigma_i^t(+2, theta_loc, r_loc) on the
exit face.  Nested entries are kept on a stack so the chart that closes is
always the innermost one; the stack depth is the level function.

Teleports act for t <= 1.  For t in (1, 2] the field on D_i is d/dz and the
identification is dropped, so the flow is X_W^t on W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernel as K
from .core import DomainError, EventKind, GeometryError, PointW3, Tangent, Trajectory
from .insertion import DeformedInsertion, InsertionSpec, as_deformed, default_insertions, validate_insertions
from .profiles import EtaProfile, HomotopyProfile, eta_value
from .wilson import Wilson3Plug


@dataclass(frozen=True)
class QuotientState:
    """A point of the quotient: a point of W plus the stack of open charts.

    Each stack entry is (insertion index 1/2, theta_loc, r_loc) recorded at
    the moment the chart was entered.
    """

    point: PointW3
    stack: tuple = ()

    @property
    def inside_insertion(self):
        return self.stack[-1][0] if self.stack else None

    @property
    def level(self) -> int:
        return len(self.stack)


@lru_cache(maxsize=64)
def _validated(insertions: tuple, homotopy: HomotopyProfile) -> dict:
    return validate_insertions(insertions, homotopy=homotopy)


@dataclass(frozen=True)
class KuperbergFlow:
    wilson: Wilson3Plug = field(default_factory=Wilson3Plug)
    insertions: tuple = field(default_factory=default_insertions)
    t: float = 0.0
    homotopy: HomotopyProfile = field(default_factory=HomotopyProfile)
    validate: bool = True

    mode = K.MODE_W3
    coords = ("z", "theta", "r")

    def __post_init__(self):
        if not 0.0 <= self.t <= 2.0:
            raise DomainError(f"t={self.t} outside [0, 2]")
        if len(self.insertions) != 2:
            raise ValueError("exactly two insertions are required")
        bases = tuple(as_deformed(i).base for i in self.insertions)
        if sorted(b.index for b in bases) != [1, 2]:
            raise ValueError("insertions must carry indices 1 and 2")
        if self.validate:
            _validated(bases, self.homotopy)

    @property
    def bases(self) -> tuple:
        return tuple(sorted((as_deformed(i).base for i in self.insertions), key=lambda b: b.index))

    @property
    def teleport(self) -> bool:
        return self.t <= 1.0

    def deformed(self, i: int) -> DeformedInsertion:
        return DeformedInsertion(self.bases[i - 1], self.t)

    @property
    def params(self) -> np.ndarray:
        P = self.wilson.kernel_params(self.t, self.homotopy)
        for k, b in enumerate(self.bases):
            o = K.P_INS + K.INS_LEN * k
            P[o:o + K.INS_LEN] = b.block(self.t)
        return P

    def kernel_params(self, seed=None) -> np.ndarray:
        return self.params

    def encode(self, p) -> np.ndarray:
        p = p.point if isinstance(p, QuotientState) else p
        return p.as_array()

    def decode(self, y, seed=None) -> PointW3:
        return PointW3(min(2.0, max(-2.0, y[0])), y[1], y[2])

    def initial_stack(self, seed):
        if isinstance(seed, QuotientState) and seed.stack:
            k = np.array([s[0] - 1 for s in seed.stack], np.int64)
            th = np.array([s[1] for s in seed.stack], float)
            r = np.array([s[2] for s in seed.stack], float)
            return k, th, r
        return np.zeros(0, np.int64), np.zeros(0), np.zeros(0)

    def with_t(self, t: float) -> "KuperbergFlow":
        return KuperbergFlow(self.wilson, self.insertions, t, self.homotopy, self.validate)

    def to_dict(self) -> dict:
        return {
            "kind": "kuperberg",
            "t": self.t,
            "profile": self.wilson.profile.to_dict(),
            "insertions": [b.to_dict() for b in self.bases],
        }

    def is_excised(self, p: PointW3) -> bool:
        """True if p lies in the interior of an image cylinder sigma_i^t(D_i).

        The backward X_W orbit of such a point meets the entry face at an
        interior chart point within less than the transit time.
        """
        if not self.teleport:
            return False
        P = self.params
        P[K.P_T] = 0.0
        e = np.zeros(0, np.int64)
        f = np.zeros(0)
        counts, *_rest = K.run(K.MODE_W3, P, p.as_array(), e, f, f, -1, 4.0, 1e-10, 1e-10, 0.5, 1e-8,
                               True, math.nan, 0, 4, 2, 0, 1, 4, 100_000)
        ev_kind, ev_idx, ev_t, ev_y = _rest[3], _rest[4], _rest[5], _rest[6]
        for kind, idx, tt, yy in zip(ev_kind, ev_idx, ev_t, ev_y):
            if kind == K.EV_TDOWN:
                b = self.bases[idx]
                inside = (abs(math.remainder(yy[1] - b.theta_i, 2 * math.pi)) < b.half
                          and b.r_a < yy[2] < b.r_b)
                return bool(inside and 0.0 < tt < b.transit_time)
        return False


def _field_at(flow: KuperbergFlow, t: float, p: PointW3) -> Tangent:
    dz, dth, dr = K.field(K.MODE_W3, flow.params, t, p.z, p.theta, p.r)
    return Tangent(z=dz, theta=dth, r=dr)


def quotient_field(flow: KuperbergFlow, st, check_excision: bool = True) -> Tangent:
    """Y_W^t at a quotient state.

    Inside a chart of D_i the field is X_W^t as well, since D_i is part of W;
    the image cylinders are never evaluated because the states never enter them.
    """
    st = st if isinstance(st, QuotientState) else QuotientState(st)
    if check_excision and flow.is_excised(st.point):
        raise DomainError("state lies in an excised image cylinder")
    return _field_at(flow, flow.t, st.point)


def step_transition(flow: KuperbergFlow, st: QuotientState, kind: EventKind, insertion: int | None = None):
    """Apply the identification at a detected crossing.

    Returns (new_state, terminal).  ``kind`` is EnterInsertion (with the
    index) for a crossing of an entry face, HitTop or HitBottom for z = +-2.
    """
    p = st.point
    if kind is EventKind.EnterInsertion:
        if not flow.teleport:
            raise GeometryError("insertions are inactive for t > 1")
        d = flow.deformed(insertion)
        P = _single_slot(flow, insertion)
        ok, thl, rimg = K.face_inverse(P, 0, p.z, p.r)
        if not ok or abs(math.remainder(p.theta - d.base.face_theta, 2 * math.pi)) > 1e-9:
            raise GeometryError(f"point is not on the entry face of insertion {insertion}")
        rl = float(K.shrink_inverse(P, 0, thl, rimg))
        return QuotientState(PointW3(-2.0, thl, rl), st.stack + ((insertion, float(thl), rl),)), False
    if kind is EventKind.HitTop:
        if not st.stack or not flow.teleport:
            return QuotientState(PointW3(2.0, p.theta, p.r), ()), True
        i, thl, rl = st.stack[-1]
        b = flow.bases[i - 1]
        if not b.contains(p.theta, p.r, 1e-6):
            raise GeometryError(f"orbit left D_{i} through a lateral face")
        P = _single_slot(flow, i)
        rs = K.shrink(P, 0, thl, rl)
        y0 = np.array(K.face_point(P, 0, thl, rs))
        out = np.empty(3)
        if not K.flow_fixed(K.MODE_W3, P, 0.0, y0, b.transit_time, 1e-12, 1e-12, 0.5, out):
            raise GeometryError("transit through the image cylinder leaves W")
        return QuotientState(PointW3.from_array(out), st.stack[:-1]), False
    if kind is EventKind.HitBottom:
        return QuotientState(PointW3(-2.0, p.theta, p.r), st.stack), True
    raise ValueError(f"no transition for {kind}")


def _single_slot(flow: KuperbergFlow, i: int) -> np.ndarray:
    P = flow.params
    o0 = K.P_INS
    oi = K.P_INS + K.INS_LEN * (i - 1)
    P[o0:o0 + K.INS_LEN] = P[oi:oi + K.INS_LEN].copy()
    return P


# ------------------------------------------------------------ level function

@dataclass
class LevelLog:
    entries: dict  # i -> list of (time, location)
    exits: dict
    crossings: list  # merged list of (time, kind, i)
    nu: list  # level after each crossing

    @property
    def max_level(self) -> int:
        return max(self.nu, default=0)

    def recompute(self) -> list:
        out, level = [], 0
        for _t, kind, _i in self.crossings:
            level += 1 if kind == "E" else -1
            out.append(level)
        return out

    def to_dict(self) -> dict:
        return {
            "crossings": [{"time": t, "kind": k, "insertion": i} for t, k, i in self.crossings],
            "nu": self.nu,
            "max_level": self.max_level,
        }


def level_function(traj: Trajectory) -> LevelLog:
    """E_i, S_i, the ordered crossing list and nu = #E - #S after each crossing."""
    entries = {1: [], 2: []}
    exits = {1: [], 2: []}
    crossings = []
    for ev in traj.events:
        if ev.kind is EventKind.EnterInsertion:
            entries[ev.insertion].append((ev.time, ev.location))
            crossings.append((ev.time, "E", ev.insertion))
        elif ev.kind is EventKind.ExitInsertion:
            exits[ev.insertion].append((ev.time, ev.location))
            crossings.append((ev.time, "S", ev.insertion))
    log = LevelLog(entries, exits, crossings, [])
    log.nu = log.recompute()
    return log


def level_bound(flow: KuperbergFlow, epsilon: float) -> int:
    """Nesting bound from the strict radius inequality.

    Chart radii stay in [r_a, r_b] and every nested entry raises the chart
    radius by at least epsilon, so nu <= ceil((r_b - r_a) / epsilon) + 1.
    """
    spread = max(b.r_b - b.r_a for b in flow.bases)
    return int(math.ceil(spread / epsilon)) + 1


# ------------------------------------------------------------ parametric plug

@dataclass(frozen=True)
class ParametricKuperberg:
    """The family on K x D^l: on the slice {y = y0} the field is X_K^{eta_s(|y0|)}."""

    base: KuperbergFlow = field(default_factory=KuperbergFlow)
    eta: EtaProfile = field(default_factory=EtaProfile)
    l: int = 1

    def slice_t(self, s: float, y) -> float:
        y = np.atleast_1d(np.asarray(y, float))
        if len(y) != self.l:
            raise DomainError(f"expected {self.l} parameter coordinates")
        ny = float(np.linalg.norm(y))
        if ny > 1.0 + 1e-12:
            raise DomainError(f"|y|={ny} > 1")
        return eta_value(self.eta, s, min(ny, 1.0))

    def slice_flow(self, s: float, y) -> KuperbergFlow:
        return self.base.with_t(self.slice_t(s, y))


def parametric_field(fam: ParametricKuperberg, s: float, st, y) -> Tangent:
    """quotient field at t = eta_s(|y|) with zero y-components."""
    t = fam.slice_t(s, y)
    st = st if isinstance(st, QuotientState) else QuotientState(st)
    v = _field_at(fam.base, t, st.point)
    return Tangent(**v, **{f"y{j + 1}": 0.0 for j in range(fam.l)})
