"""Points, events, trajectories and the tolerance policy shared by all modules."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from ._smooth import TWO_PI


class SchemaError(ValueError):
    """Two point records with different coordinate schemas were compared."""


class DomainError(ValueError):
    """A point or parameter lies outside the domain of an operation."""


class GeometryError(RuntimeError):
    """A plug or insertion geometry violates a construction requirement."""


def normalize_angle(a: float) -> float:
    r = math.fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r -= TWO_PI
    return r


def angle_distance(a: float, b: float) -> float:
    """Geodesic distance on the unit-speed circle, in [0, pi]."""
    d = math.fmod(abs(a - b), TWO_PI)
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class PointW3:
    """A point (z, theta, r) of W = [-2,2] x S^1 x [1,3]."""

    z: float
    theta: float
    r: float

    _angles = ("theta",)

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))
        if not -2.0 - 1e-12 <= self.z <= 2.0 + 1e-12:
            raise DomainError(f"z={self.z} outside [-2, 2]")
        if not 1.0 - 1e-12 <= self.r <= 3.0 + 1e-12:
            raise DomainError(f"r={self.r} outside [1, 3]")

    def as_array(self) -> np.ndarray:
        return np.array([self.z, self.theta, self.r])

    @classmethod
    def from_array(cls, y) -> "PointW3":
        return cls(float(y[0]), float(y[1]), float(y[2]))


@dataclass(frozen=True)
class PointWNd:
    """A point (z; s, t; r; x; y) of the n-dimensional Wilson box."""

    z: float
    s: float
    t: float
    r: float
    x: tuple = ()
    y: tuple = ()

    _angles = ("s", "t")

    def __post_init__(self):
        object.__setattr__(self, "s", normalize_angle(float(self.s)))
        object.__setattr__(self, "t", normalize_angle(float(self.t)))
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if not -2.0 - 1e-12 <= self.z <= 2.0 + 1e-12:
            raise DomainError(f"z={self.z} outside [-2, 2]")
        if not -2.0 - 1e-12 <= self.r <= 2.0 + 1e-12:
            raise DomainError(f"r={self.r} outside [-2, 2]")
        if math.hypot(*self.x) > 1.0 + 1e-12 or math.hypot(*self.y) > 1.0 + 1e-12:
            raise DomainError("x and y must lie in the closed unit disc")

    @property
    def x_norm(self) -> float:
        return math.hypot(*self.x) if self.x else 0.0

    @property
    def y_norm(self) -> float:
        return math.hypot(*self.y) if self.y else 0.0


def point_distance(p, q) -> float:
    """Max over coordinates of the componentwise distance (angles on the circle)."""
    if type(p) is not type(q):
        raise SchemaError(f"cannot compare {type(p).__name__} with {type(q).__name__}")
    best = 0.0
    for fld in fields(p):
        a, b = getattr(p, fld.name), getattr(q, fld.name)
        if fld.name in p._angles:
            d = angle_distance(a, b)
        elif isinstance(a, tuple):
            if len(a) != len(b):
                raise SchemaError(f"{fld.name} has length {len(a)} vs {len(b)}")
            d = max((abs(u - v) for u, v in zip(a, b)), default=0.0)
        else:
            d = abs(a - b)
        best = max(best, d)
    return best


class Tangent(dict):
    """Tangent vector as components keyed by coordinate name."""

    def __init__(self, **components):
        for k, v in components.items():
            if not math.isfinite(v):
                raise ValueError(f"non-finite component {k}={v}")
        super().__init__(**components)

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values()))

    def close_to(self, other: "Tangent", tol: float = 1e-12) -> bool:
        keys = set(self) | set(other)
        return all(abs(self.get(k, 0.0) - other.get(k, 0.0)) <= tol for k in keys)


class EventKind(enum.IntEnum):
    EnterInsertion = 0
    ExitInsertion = 1
    TeleportDown = 2
    TeleportUp = 3
    HitBottom = 4
    HitTop = 5
    HitLateral = 6


class Terminal(enum.Enum):
    Exited = "exited"
    TimeHorizon = "time_horizon"
    Error = "error"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    time: float
    location: tuple
    insertion: Optional[int] = None  # 1-based insertion index, None for boundary hits

    def to_dict(self) -> dict:
        d = {"kind": self.kind.name, "time": self.time, "location": list(self.location)}
        if self.insertion is not None:
            d["insertion"] = self.insertion
        return d


@dataclass(frozen=True)
class Trajectory:
    """An integrated orbit.

    Teleport events share the time stamp of the crossing that triggers them,
    so event times are non-decreasing and strictly increasing between
    distinct crossings.
    """

    times: np.ndarray
    states: np.ndarray
    events: tuple
    terminal: Terminal
    coords: tuple = ("z", "theta", "r")
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) and np.any(np.diff(self.times) < 0):
            raise ValueError("sample times must be non-decreasing")
        ev_t = [e.time for e in self.events]
        if any(b < a for a, b in zip(ev_t, ev_t[1:])):
            raise ValueError("event times must be non-decreasing")
        if self.terminal is Terminal.Exited:
            if not self.events or self.events[-1].kind not in (EventKind.HitTop, EventKind.HitBottom):
                raise ValueError("an exited trajectory must end with a boundary hit")

    @property
    def end_time(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0

    @property
    def end_state(self) -> np.ndarray:
        return self.states[-1]

    def check_invariants(self) -> bool:
        ok = bool(np.all(np.diff(self.times) >= 0))
        crossings = [e.time for e in self.events if e.kind not in (EventKind.TeleportDown, EventKind.TeleportUp)]
        ok &= all(b > a for a, b in zip(crossings, crossings[1:]))
        if self.terminal is Terminal.Exited:
            ok &= self.events[-1].kind in (EventKind.HitTop, EventKind.HitBottom)
        return ok


@dataclass(frozen=True)
class TolerancePolicy:
    step_abs_tol: float = 1e-10
    step_rel_tol: float = 1e-10
    event_tol: float = 1e-8
    match_tol: float = 1e-6
    recurrence_tol: float = 1e-4

    def __post_init__(self):
        for fld in fields(self):
            if not getattr(self, fld.name) > 0:
                raise ValueError(f"{fld.name} must be positive")
        if self.event_tol > self.match_tol:
            raise ValueError("event_tol must not exceed match_tol")

    def to_dict(self) -> dict:
        return {fld.name: getattr(self, fld.name) for fld in fields(self)}
