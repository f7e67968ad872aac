"""Two-dimensional obstructions: rotation numbers of circle maps, the degree
of a planar field along a closed curve, Reeb components of line fields on
the torus, and closed orbits of leafwise fields on the boundary of the
standard Reeb component D^2 x S^1.

Torus coordinates are (x, y) in R^2 / Z^2; the Reeb solid torus uses
(r, theta, t) with theta and t both 2pi-periodic.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from ._smooth import smooth_step


class InconclusiveError(RuntimeError):
    """The classifier could not decide at the working resolution."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


# ------------------------------------------------------------- circle maps

@dataclass(frozen=True)
class CircleMap:
    """A lift F: R -> R of a circle map with F(x + 1) = F(x) + 1."""

    lift: Callable[[float], float]
    orientation_preserving: bool = True
    name: str = ""

    def __post_init__(self):
        xs = np.linspace(-1.0, 1.0, 41)
        for x in xs:
            if abs(self.lift(x + 1.0) - self.lift(x) - 1.0) > 1e-12:
                raise ValueError("lift does not commute with integer translation")

    def iterate(self, x: float, n: int) -> float:
        for _ in range(n):
            x = self.lift(x)
        return x


def rigid_rotation(alpha: float) -> CircleMap:
    return CircleMap(lambda x: x + alpha, name=f"rotation({alpha})")


def arnold_map(omega: float, k: float) -> CircleMap:
    """x + omega + k sin(2 pi x) / (2 pi); a diffeomorphism for |k| < 1."""
    return CircleMap(lambda x: x + omega + k * math.sin(2 * math.pi * x) / (2 * math.pi),
                     name=f"arnold({omega}, {k})")


@dataclass(frozen=True)
class RotationEstimate:
    value: float
    error: float
    rational: Fraction | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "error": self.error,
                "rational": None if self.rational is None else str(self.rational)}


def find_periodic(m: CircleMap, q_max: int = 20, n_grid: int = 400, tol: float = 1e-12):
    """Smallest (p, q) such that F^q(x) - p - x changes sign or vanishes on a grid."""
    xs = np.linspace(0.0, 1.0, n_grid, endpoint=False)
    ys = xs.copy()
    for q in range(1, q_max + 1):
        ys = np.array([m.lift(v) for v in ys])
        disp = ys - xs
        for p in range(int(math.floor(disp.min())), int(math.ceil(disp.max())) + 1):
            d = disp - p
            if np.any(np.abs(d) <= tol) or (d.min() < 0 < d.max()):
                return p, q
    return None


def rotation_number(m: CircleMap, iterations: int = 10_000, x0: float = 0.0, q_max: int = 20) -> RotationEstimate:
    """Rotation number of an orientation-preserving circle map.

    Periodic orbits of period <= q_max are detected first and give the
    exact value p/q.  Otherwise the Birkhoff average (F^n(x0) - x0) / n is
    returned with the error bound 2/n.
    """
    if iterations < 1000:
        raise ValueError("use at least 1000 iterations")
    if not m.orientation_preserving:
        raise ValueError("rotation numbers need an orientation-preserving map")
    per = find_periodic(m, q_max)
    if per is not None:
        p, q = per
        return RotationEstimate(p / q, 0.0, Fraction(p, q))
    x = m.iterate(x0, iterations)
    return RotationEstimate((x - x0) / iterations, 2.0 / iterations, None)


# ------------------------------------------------------------------ degree

def _angle_steps(vals):
    ang = np.arctan2(vals[:, 1], vals[:, 0])
    nxt = np.roll(ang, -1)
    return np.remainder(nxt - ang + math.pi, 2 * math.pi) - math.pi


def degree_along_curve(field_fn, curve, vanish_tol: float = 1e-8, max_refine: int = 12) -> int:
    """Winding number of the direction of ``field_fn`` along a closed curve.

    ``curve`` is either an (N, 2) array of samples (implicitly closed) or a
    callable s -> point on [0, 1) that is then sampled and refined until no
    step turns the field by more than pi/4.  The pre-rounding value must lie
    within 0.1 of an integer.
    """
    if callable(curve):
        s = np.linspace(0.0, 1.0, 257)[:-1]
        for _ in range(max_refine):
            pts = np.array([curve(v) for v in s])
            vals = np.array([field_fn(*p) for p in pts], float)
            _check_vanish(vals, vanish_tol)
            steps = _angle_steps(vals)
            big = np.flatnonzero(np.abs(steps) > math.pi / 4)
            if not len(big):
                break
            s_next = np.append(s[1:], 1.0)
            s = np.sort(np.concatenate([s, 0.5 * (s[big] + s_next[big])]))
    else:
        pts = np.asarray(curve, float)
        vals = np.array([field_fn(*p) for p in pts], float)
        _check_vanish(vals, vanish_tol)
        steps = _angle_steps(vals)
    total = steps.sum() / (2 * math.pi)
    k = round(total)
    if abs(total - k) > 0.1:
        raise ValueError(f"winding {total:.4f} is not close to an integer; refine the curve")
    return int(k)


def _check_vanish(vals, tol):
    norms = np.hypot(vals[:, 0], vals[:, 1])
    if norms.min() <= tol:
        raise ValueError(f"field vanishes on the curve (|X| = {norms.min():.3g})")


# ---------------------------------------------------------- torus line fields

class TorusClass(enum.Enum):
    ReebComponent = "reeb_component"
    SuspensionNoClosed = "suspension_no_closed"
    SuspensionWithClosed = "suspension_with_closed"


@dataclass(frozen=True)
class TorusLineField:
    """Oriented line field on R^2 / Z^2 given by its direction angle a(x, y)."""

    angle: Callable[[float, float], float]
    name: str = ""
    check_grid: int = 64

    def __post_init__(self):
        n = self.check_grid
        g = np.linspace(0.0, 1.0, n, endpoint=False)
        A = np.array([[self.angle(x, y) for y in g] for x in g])
        for axis in (0, 1):
            d = np.abs(np.remainder(np.roll(A, -1, axis) - A + math.pi, 2 * math.pi) - math.pi)
            if d.max() > math.pi / 2:
                raise ValueError("direction field jumps by more than pi/2 between grid neighbours")

    def vector(self, x, y):
        a = self.angle(x, y)
        return math.cos(a), math.sin(a)


def linear_field(slope: float) -> TorusLineField:
    a = math.atan(slope)
    return TorusLineField(lambda x, y: a, name=f"linear({slope})")


def suspension_field(m: CircleMap) -> TorusLineField:
    """Leaves y(x) = y0 + h(x) (F(y0) - y0) with h a smooth step flat at 0 and 1.

    The section {x = 0} is global and its first-return map is F.
    """

    def y0_of(x, y):
        h = smooth_step(x)
        lo, hi = y - 2.0, y + 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid + h * (m.lift(mid) - mid) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def angle(x, y):
        x = x % 1.0
        y0 = y0_of(x, y)
        dh = _smooth_step_deriv(x)
        return math.atan2(dh * (m.lift(y0) - y0), 1.0)

    return TorusLineField(angle, name=f"suspension({m.name})")


def _smooth_step_deriv(x, eps=1e-6):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return (smooth_step(min(1.0, x + eps)) - smooth_step(max(0.0, x - eps))) / (min(1.0, x + eps) - max(0.0, x - eps))


def doubled_reeb_field() -> TorusLineField:
    """Two Reeb annuli glued along the vertical circles x = 0 and x = 1/2.

    On [0, 1/2] with X = 4x - 1 the leaves are y = c + w / (1 - X^2): they
    run down along x = 0 and up along x = 1/2.  The second annulus is the
    first turned by a half turn, so the orientation is continuous.
    """
    w = 0.05

    def angle(x, y):
        x = x % 1.0
        if x <= 0.5:
            X = 4 * x - 1
            return math.atan2(2 * w * X, (1 - X * X) ** 2)
        X = 4 * x - 3
        return math.atan2(-2 * w * X, -(1 - X * X) ** 2)

    return TorusLineField(angle, name="doubled_reeb")


def _return_map_x(tf: TorusLineField, n: int = 128):
    """First return to {x = 0} along leaves, as a lift in y.

    F is computed on n points of [0, 1) and F(y) - y is interpolated by a
    periodic cubic spline.
    """

    def rhs(x, y):
        return [math.tan(tf.angle(x, y[0]))]

    ys = np.linspace(0.0, 1.0, n + 1)
    disp = np.empty(n + 1)
    for i, y0 in enumerate(ys[:-1]):
        sol = solve_ivp(rhs, (0.0, 1.0), [y0], method="DOP853", rtol=1e-10, atol=1e-12, max_step=0.05)
        disp[i] = sol.y[0, -1] - y0
    disp[-1] = disp[0]
    spline = CubicSpline(ys, disp, bc_type="periodic")

    def F(y):
        return y + float(spline(y % 1.0))

    return F


def detect_reeb_component(tf: TorusLineField, n_grid: int = 128, margin: float = 1e-9, q_max: int = 12,
                          rotation_iterations: int = 2000) -> tuple:
    """Classify a line field on T^2; returns (TorusClass, diagnostics).

    A coordinate circle {x = c} (or {y = c}) met transversally everywhere is a
    global section and the field is a suspension; its return map decides
    whether closed leaves exist.  Otherwise closed leaves among the coordinate
    circles are located, and two of them crossed in opposite directions by a
    common transversal mark a Reeb component.
    """
    g = np.linspace(0.0, 1.0, n_grid, endpoint=False)
    A = np.array([[tf.angle(x, y) for y in g] for x in g])
    C, S = np.cos(A), np.sin(A)
    diag = {"grid": n_grid}
    for comp, axis_name in ((C, "x"), (S, "y")):
        if comp.min() > margin or comp.max() < -margin:
            sgn = 1.0 if comp.min() > margin else -1.0
            src = tf if axis_name == "x" else TorusLineField(lambda x, y: math.pi / 2 - tf.angle(y, x), check_grid=8)
            if sgn < 0:
                src = TorusLineField(lambda x, y, f=src: f.angle(x, y) + math.pi, check_grid=8)
            F = _return_map_x(src)
            base = F(0.0)
            cm = CircleMap(F, name="return_map")
            est = rotation_number(cm, max(1000, rotation_iterations), q_max=q_max)
            diag.update({"section": f"{axis_name} = 0", "rotation_number": est.to_dict(), "F(0)": base})
            if est.rational is not None:
                return TorusClass.SuspensionWithClosed, diag
            return TorusClass.SuspensionNoClosed, diag
    closed = []
    for comp, other, axis_name in ((C, S, "x"), (S, C, "y")):
        colmax = np.abs(comp).max(axis=1) if axis_name == "x" else np.abs(comp).max(axis=0)
        for i in np.flatnonzero(colmax <= margin):
            orient = other[i, :] if axis_name == "x" else other[:, i]
            closed.append({"circle": f"{axis_name} = {g[i]:.6g}", "orientation": int(np.sign(orient.mean()))})
        # refine sign changes that fall between grid columns
        ref = comp[:, 0] if axis_name == "x" else comp[0, :]
        for i in range(n_grid):
            j = (i + 1) % n_grid
            if ref[i] * ref[j] < 0 and colmax[i] > margin and colmax[j] > margin:
                c = _bisect_closed_circle(tf, axis_name, g[i], g[i] + 1.0 / n_grid)
                if c is not None:
                    closed.append(c)
    diag["closed_leaves"] = closed
    orients = {c["orientation"] for c in closed}
    if len(closed) >= 2 and orients == {-1, 1}:
        return TorusClass.ReebComponent, diag
    raise InconclusiveError("no global section and no opposite closed leaves found", diag)


def _bisect_closed_circle(tf, axis_name, lo, hi, tol=1e-12):
    def comp(c, s):
        a = tf.angle(c, s) if axis_name == "x" else tf.angle(s, c)
        return math.cos(a) if axis_name == "x" else math.sin(a)

    f_lo = comp(lo, 0.0)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        fm = comp(mid, 0.0)
        if (fm < 0) == (f_lo < 0):
            lo, f_lo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    c = 0.5 * (lo + hi)
    ss = np.linspace(0.0, 1.0, 64, endpoint=False)
    vals = [comp(c, s) for s in ss]
    if max(abs(v) for v in vals) > 1e-8:
        return None
    other = [math.sin(tf.angle(c, s)) if axis_name == "x" else math.cos(tf.angle(s, c)) for s in ss]
    return {"circle": f"{axis_name} = {c:.12g}", "orientation": int(np.sign(np.mean(other)))}


# ------------------------------------------------------------ Reeb solid torus

def leaf_normal(r: float):
    """(a, b) with the leaves' conormal a dt - b dr; a = 1, b = 0 near the core
    and a = 0, b = 1 on the boundary torus."""
    chi = 0.5 * math.pi * smooth_step(r)
    return math.cos(chi), math.sin(chi)


def rotated_constant_field(beta: float = 0.0, speed=None):
    """Leaf lift of the constant planar field pointing at angle beta,
    tilted so it stays non-singular up to the boundary:

        X = cos(theta - beta) (a e_r + b d/dt) - sin(theta - beta) e_theta.

    On the boundary it is cos(theta - beta) d/dt - sin(theta - beta) e_theta,
    with the two closed orbits theta = beta and theta = beta + pi.
    """

    def X(r, th, t):
        a, b = leaf_normal(r)
        c, s = math.cos(th - beta), math.sin(th - beta)
        h = 1.0 if speed is None else speed(r, th, t)
        return (h * c * a, -h * s, h * c * b)

    return X


def twisted_field(amp: float = 0.3):
    """Like the constant-field lift but with the boundary angle
    psi = theta + amp sin(2 theta) (switched on by r); closed orbits at 0, pi."""

    def X(r, th, t):
        a, b = leaf_normal(r)
        psi = th + smooth_step(r) * amp * math.sin(2 * th)
        c, s = math.cos(psi), math.sin(psi)
        return (c * a, -s, c * b)

    return X


def swirl_field(c: float = math.sqrt(2.0)):
    """e_theta + c (a e_r + b d/dt): tangent to the leaves but singular on the
    core circle; on the boundary it is a linear flow without Reeb components."""

    def X(r, th, t):
        a, b = leaf_normal(r)
        return (c * a, 1.0, c * b)

    return X


@dataclass(frozen=True)
class ReebSolidTorus:
    """The standard Reeb component with a leafwise field X(r, theta, t) given in
    the frame (e_r, e_theta, d/dt)."""

    X: Callable
    name: str = ""
    n_check: int = 24
    require_nonsingular: bool = True

    def __post_init__(self):
        worst_tan, min_norm = self.check()
        if worst_tan > 1e-10:
            raise ValueError(f"X is not tangent to the leaves (|omega(X)| = {worst_tan:.3g})")
        if self.require_nonsingular and min_norm <= 1e-8:
            raise ValueError("X vanishes somewhere in the solid torus")

    def check(self):
        worst, min_norm = 0.0, math.inf
        rs = np.linspace(0.0, 1.0, self.n_check + 1)
        angs = np.linspace(0.0, 2 * math.pi, self.n_check, endpoint=False)
        for r in rs:
            a, b = leaf_normal(r)
            for th in angs:
                for t in angs[::3]:
                    xr, xth, xt = self.X(r, th, t)
                    worst = max(worst, abs(a * xt - b * xr))
                    # Cartesian size of the planar part plus the t-part
                    if r == 0.0:
                        px, py = xr * math.cos(th) - xth * math.sin(th), xr * math.sin(th) + xth * math.cos(th)
                        n = math.hypot(math.hypot(px, py), xt)
                    else:
                        n = math.sqrt(xr * xr + xth * xth + xt * xt)
                    min_norm = min(min_norm, n)
        # the core circle: the planar part must be single-valued there
        vals = np.array([self.X(0.0, th, 0.0) for th in angs])
        cart = np.stack([vals[:, 0] * np.cos(angs) - vals[:, 1] * np.sin(angs),
                         vals[:, 0] * np.sin(angs) + vals[:, 1] * np.cos(angs)], axis=1)
        spread = float(np.max(np.ptp(cart, axis=0)))
        if spread > 1e-8:
            min_norm = 0.0
        return worst, min_norm

    def boundary_field(self, th, t):
        _xr, xth, xt = self.X(1.0, th, t)
        return xth, xt

    def leaf_planar_field(self, x, y):
        """X on the leaf through t = 0, written in the leaf's unit frame
        (a e_r + b d/dt, e_theta) and drawn as a Cartesian vector over the
        (x, y) disc.  This frame projects to (a e_r, e_theta), so the degree
        along circles is that of the projected field, but the components do
        not shrink as the leaves turn vertical near the boundary."""
        r = math.hypot(x, y)
        th = math.atan2(y, x)
        a, b = leaf_normal(r)
        xr, xth, xt = self.X(r, th, 0.0)
        xu = a * xr + b * xt
        return (xu * math.cos(th) - xth * math.sin(th), xu * math.sin(th) + xth * math.cos(th))


@dataclass
class ClosedOrbit:
    theta: float
    period: float
    residual: float
    direction: int

    def to_dict(self) -> dict:
        return {"theta": self.theta, "period": self.period, "residual": self.residual, "direction": self.direction}


def _torus_flow(rst: ReebSolidTorus, sign: float):
    def rhs(s, y):
        a, b = rst.boundary_field(y[0], y[1])
        return [sign * a, sign * b]

    return rhs


def _first_return(rst, theta0, direction, sign=1.0, horizon=200.0):
    """From (theta0, 0) to the next crossing of t = +-2pi; returns (theta, time)."""
    target = 2 * math.pi * direction

    def ev(s, y):
        return y[1] - target
    ev.terminal = True
    sol = solve_ivp(_torus_flow(rst, sign), (0.0, horizon), [theta0, 0.0], method="DOP853",
                    rtol=1e-12, atol=1e-13, events=ev, max_step=0.1)
    if not sol.t_events[0].size:
        return None, None
    return float(sol.y_events[0][0][0]), float(sol.t_events[0][0])


def reeb_boundary_orbits(rst: ReebSolidTorus, n_seeds: int = 16, transient: float = 60.0,
                         recurrence_tol: float = 1e-4, dedupe_tol: float = 1e-6) -> list:
    """Closed orbits of X restricted to the boundary torus.

    Seeds on {t = 0} are flowed forward and backward past a transient; an
    orbit whose successive crossings of the meridian section differ by less
    than recurrence_tol is refined by Newton shooting on the return map and
    kept if the residual drops below 1e-9.
    """
    found: list[ClosedOrbit] = []
    for k in range(n_seeds):
        th0 = 2 * math.pi * k / n_seeds
        for sign in (1.0, -1.0):
            sol = solve_ivp(_torus_flow(rst, sign), (0.0, transient), [th0, 0.0], method="DOP853",
                            rtol=1e-12, atol=1e-13, max_step=0.1)
            th, t = sol.y[0, -1], sol.y[1, -1]
            start = _to_section(rst, th, t, sign)
            if start is None:
                continue
            theta_s, dirn = start
            nxt, _ = _first_return(rst, theta_s, dirn, sign)
            if nxt is None or abs(math.remainder(nxt - theta_s, 2 * math.pi)) > recurrence_tol:
                continue
            orb = _shoot(rst, theta_s, dirn, sign)
            if orb is None:
                continue
            if not any(abs(math.remainder(o.theta - orb.theta, 2 * math.pi)) < dedupe_tol for o in found):
                found.append(orb)
    found.sort(key=lambda o: o.theta)
    return found


def _to_section(rst, th, t, sign):
    """Flow (th, t) on to the next t in 2pi Z; returns (theta, direction)."""
    vt = rst.boundary_field(th, t)[1] * sign
    if vt == 0.0:
        return None
    direction = 1 if vt > 0 else -1
    target = 2 * math.pi * (math.floor(t / (2 * math.pi)) + (1 if direction > 0 else 0))
    if target == t:
        return math.remainder(th, 2 * math.pi) % (2 * math.pi), direction

    def ev(s, y):
        return y[1] - target
    ev.terminal = True
    sol = solve_ivp(_torus_flow(rst, sign), (0.0, 100.0), [th, t], method="DOP853", rtol=1e-12, atol=1e-13,
                    events=ev, max_step=0.1)
    if not sol.t_events[0].size:
        return None
    return float(sol.y_events[0][0][0]) % (2 * math.pi), direction


def _shoot(rst, theta, direction, sign, max_iter=30, fd=1e-7):
    x = theta
    period = math.nan
    res = math.inf
    for _ in range(max_iter):
        nxt, period = _first_return(rst, x, direction, sign)
        if nxt is None:
            return None
        res = math.remainder(nxt - x, 2 * math.pi)
        if abs(res) < 1e-9:
            break
        nxt2, _ = _first_return(rst, x + fd, direction, sign)
        if nxt2 is None:
            return None
        d = (math.remainder(nxt2 - x - fd, 2 * math.pi) - res) / fd
        if d == 0.0:
            return None
        x = x - res / d
    if abs(res) >= 1e-9:
        return None
    # report the orbit's natural direction of travel in t
    return ClosedOrbit(x % (2 * math.pi), period, abs(res), int(direction * sign))


def meridian_degrees(rst: ReebSolidTorus, rho: float = 0.95, n: int = 512) -> dict:
    """Degrees entering the meridian argument.

    * ``boundary``: degree, in the (theta, t) chart of the boundary torus, of
      the boundary field along the meridian {t = 0};
    * ``leaf``: degree of the planar part of X along the leaf circle of
      radius rho, with respect to the standard basis of R^2.
    """
    ths = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    boundary = degree_along_curve(lambda th, t: rst.boundary_field(th, t), np.stack([ths, np.zeros(n)], axis=1))
    circle = np.stack([rho * np.cos(ths), rho * np.sin(ths)], axis=1)
    leaf = degree_along_curve(rst.leaf_planar_field, circle)
    return {"boundary": boundary, "leaf": leaf, "rho": rho}


# ------------------------------------------------------------------ corpus

def corpus_from_json(text: str) -> list:
    """Build (name, object) pairs from a JSON list of item descriptions."""
    items = []
    for d in json.loads(text):
        kind = d["kind"]
        if kind == "linear":
            items.append((d.get("name", kind), linear_field(d["slope"])))
        elif kind == "suspension":
            items.append((d.get("name", kind), suspension_field(arnold_map(d["omega"], d.get("k", 0.0)))))
        elif kind == "doubled_reeb":
            items.append((d.get("name", kind), doubled_reeb_field()))
        elif kind == "reeb_rotated":
            items.append((d.get("name", kind), ReebSolidTorus(rotated_constant_field(d.get("beta", 0.0)))))
        elif kind == "reeb_twisted":
            items.append((d.get("name", kind), ReebSolidTorus(twisted_field(d.get("amp", 0.3)))))
        else:
            raise ValueError(f"unknown corpus item {kind!r}")
    return items


def default_reeb_corpus() -> list:
    mod = lambda r, th, t: 1.0 + 0.3 * math.sin(t) * math.cos(th) ** 2  # noqa: E731
    return [
        ("standard", ReebSolidTorus(rotated_constant_field(0.0), name="standard")),
        ("rotated_modulated", ReebSolidTorus(rotated_constant_field(0.7, speed=mod), name="rotated_modulated")),
        ("twisted", ReebSolidTorus(twisted_field(0.3), name="twisted")),
    ]
