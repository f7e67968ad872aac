"""Command-line front end.

    plugflow [--out DIR] [--workers N] [--quick] COMMAND ...

Commands: build, orbit, scan-exit, scan-closed, scan-trapped, verify,
obstruct.  Reports are JSON, bulk data CSV or JSON lines.  Exit codes: 0
pass, 1 runtime error, 2 validation failure.  The default output directory
is taken from $PLUGFLOW_OUTPUT_DIR (else ./plugflow_out).  ``--quick``
divides grid sizes and horizons by 10.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import _kernel as K
from . import obstruction as ob
from .core import DomainError, GeometryError, PointW3, PointWNd, SchemaError, TolerancePolicy
from .insertion import InsertionSpec, certify_radius, validate_insertions
from .integrate import (
    closed_orbit_scan,
    default_config,
    entry_grid_w3,
    exit_match_scan,
    integrate,
    trapped_scan,
    write_mask_csv,
)
from .kuperberg import KuperbergFlow, ParametricKuperberg, level_bound, level_function, parametric_field
from .profiles import Arc, EtaProfile, HomotopyProfile, Wilson3Profile, WilsonNdProfile
from .wilson import (
    DzFlow,
    Wilson3Flow,
    Wilson3Plug,
    WilsonNdFlow,
    WilsonNdPlug,
    estimated_exit_time,
)

ENV_OUT = "PLUGFLOW_OUTPUT_DIR"
EXIT_PASS, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2
VERSION = "0.1.0"
SUITES = ("property-i", "property-ii", "property-iii", "property-iv", "level-bounds",
          "parametric-consistency", "obstruction-corpus")

log = logging.getLogger("plugflow")


class ValidationFailure(Exception):
    """A check failed; ``report`` is written out before exiting with code 2."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report or {}


# ------------------------------------------------------------------ specs

def schema(name: str) -> dict:
    return json.loads(resources.files("plugflow").joinpath("schemas", f"{name}.schema.json").read_text())


def bundled_spec(name: str) -> Path:
    return Path(str(resources.files("plugflow").joinpath("specs", name)))


def load_spec(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise SchemaError(f"spec file {p} does not exist")
    try:
        spec = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{p}: {e}") from e
    try:
        jsonschema.validate(spec, schema("plug_spec"))
    except jsonschema.ValidationError as e:
        raise SchemaError(f"{p}: {e.message}") from e
    return spec


def _profile3(spec) -> Wilson3Profile:
    d = {k: v for k, v in spec.get("profile", {}).items() if k != "kind"}
    return Wilson3Profile(**d)


def _homotopy(spec) -> HomotopyProfile:
    if "homotopy" not in spec:
        return HomotopyProfile()
    h = spec["homotopy"]
    return HomotopyProfile(tuple(Arc(**a) for a in h["insert_arcs"]), tuple(Arc(**a) for a in h["image_arcs"]))


def _kuperberg(spec, t=None) -> KuperbergFlow:
    ins = spec.get("insertions")
    insertions = tuple(InsertionSpec(**d) for d in ins) if ins else None
    kw = {"insertions": insertions} if insertions else {}
    return KuperbergFlow(Wilson3Plug(_profile3(spec)), t=spec.get("t", 0.0) if t is None else t,
                         homotopy=_homotopy(spec), **kw)


def build_flow(spec: dict):
    """Flow object for a validated spec."""
    kind = spec["kind"]
    t = spec.get("t", 0.0)
    if kind == "dz":
        return DzFlow()
    if kind == "wilson3":
        return Wilson3Flow(Wilson3Plug(_profile3(spec)), t, _homotopy(spec))
    if kind == "wilson_nd":
        d = {k: v for k, v in spec.get("profile", {}).items() if k != "kind"}
        if t > 1.0:
            raise DomainError("the n-dimensional homotopy runs over t in [0, 1]")
        return WilsonNdFlow(WilsonNdPlug(WilsonNdProfile(**d)), t)
    if kind == "kuperberg":
        return _kuperberg(spec)
    if kind == "parametric":
        return parametric_family(spec).slice_flow(spec.get("s", 0.0), spec.get("y", [0.0] * spec.get("l", 1)))
    raise SchemaError(f"unknown plug kind {kind!r}")


def parametric_family(spec: dict) -> ParametricKuperberg:
    eta = {k: v for k, v in spec.get("eta", {}).items() if k != "kind"}
    l = spec.get("l", len(spec.get("y", [0.0])))
    return ParametricKuperberg(_kuperberg(spec, t=0.0), EtaProfile(**eta), l)


# ------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    command: str
    output_dir: str
    spec_path: str | None = None
    tolerance_overrides: dict = field(default_factory=dict)
    seed_grid: dict = field(default_factory=dict)
    budget_seconds: float | None = None
    quick: bool = False
    workers: int = 1
    version: str = VERSION

    def validate(self) -> None:
        if self.spec_path is not None and not Path(self.spec_path).is_file():
            raise SchemaError(f"spec file {self.spec_path} does not exist")
        jsonschema.validate(asdict(self), schema("manifest"))


@dataclass
class Scale:
    quick: bool = False

    def n(self, full: int, floor: int = 4) -> int:
        return max(floor, int(round(full / 10))) if self.quick else full

    def horizon(self, full: float) -> float:
        return full / 10 if self.quick else full


# ------------------------------------------------------------------ output

def clean(v):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(clean(obj), sort_keys=True, indent=2) + "\n")


def write_jsonl(path: Path, rows) -> None:
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(clean(r), sort_keys=True) + "\n")


# ------------------------------------------------------------------ seeds

def parse_floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise SchemaError(f"cannot parse {text!r} as comma-separated numbers") from e


def make_seed(flow, values):
    if isinstance(flow, WilsonNdFlow):
        n, l = flow.plug.n, flow.plug.l
        if len(values) != 4 + (n - 4) + l:
            raise SchemaError(f"an n-D seed needs z,s,t,r plus {n - 4} x and {l} y values")
        return PointWNd(*values[:4], x=tuple(values[4:n]), y=tuple(values[n:]))
    if len(values) != 3:
        raise SchemaError("a seed is z,theta,r")
    return PointW3(*values)


def entry_grid(flow, n_a: int, n_b: int, lo: float, hi: float, exclude=None):
    """Entry seeds on z = -2: (theta, r) for W, (s, r) at t = 0 for the n-D box."""
    if isinstance(flow, WilsonNdFlow):
        seeds = []
        n, l = flow.plug.n, flow.plug.l
        for s in np.linspace(0.0, 2 * math.pi, n_a, endpoint=False):
            for r in np.linspace(lo, hi, n_b):
                if exclude is not None and exclude[0] < r < exclude[1]:
                    continue
                seeds.append(PointWNd(-2.0, s, 0.5 * s, r, (0.0,) * (n - 4), (0.0,) * l))
        return seeds
    return entry_grid_w3(n_a, n_b, lo, hi, exclude)


def closed_scan_seeds(flow, n: int):
    """Seeds for closed-orbit searches spread over the trapping region."""
    seeds = []
    if isinstance(flow, WilsonNdFlow):
        nd = flow.plug
        k = max(1, n // 4)
        for i in range(n):
            s = 2 * math.pi * i / n
            if i < k:  # the invariant tori z = +-1
                seeds.append(PointWNd(-1.0 if i % 2 else 1.0, s, 0.37 * i, -0.9 + 1.8 * i / k,
                                      (0.0,) * (nd.n - 4), (0.0,) * nd.l))
            else:
                z = -1.8 + 3.6 * ((i * 0.618034) % 1.0)
                r = -1.5 + 3.0 * ((i * 0.754878) % 1.0)
                seeds.append(PointWNd(z, s, 0.71 * i, r, (0.0,) * (nd.n - 4), (0.0,) * nd.l))
        return seeds
    k = max(2, n // 16)
    for i in range(k):  # the circles z = -1, +1 at r = 2
        seeds.append(PointW3(-1.0 if i % 2 == 0 else 1.0, 2 * math.pi * (i // 2) / max(1, k // 2), 2.0))
    m = n - len(seeds)
    for i in range(m):
        z = -1.6 + 3.2 * ((i * 0.618034) % 1.0)
        th = 2 * math.pi * ((i * 0.4142136) % 1.0)
        r = 1.85 + 0.3 * ((i * 0.754878) % 1.0)
        seeds.append(PointW3(z, th, r))
    return seeds


# ------------------------------------------------------------------ suites

def _collar_points(flow, n=9):
    if isinstance(flow, WilsonNdFlow):
        c = flow.plug.profile.collar
        pts = []
        for z in np.linspace(-2, 2, 4 * n):
            for r in (-2.0, -2.0 + c, 2.0 - c, 2.0):
                pts.append(PointWNd(z, 0.3, 1.1, r, (0.0,) * (flow.plug.n - 4), (0.0,) * flow.plug.l))
            for y in (1.0 - c, 1.0):
                pts.append(PointWNd(z, 0.3, 1.1, 0.0, (0.0,) * (flow.plug.n - 4), (y,) + (0.0,) * (flow.plug.l - 1)))
        for zc in (-2.0, -2.0 + c, 2.0 - c, 2.0):
            for r in np.linspace(-2, 2, n):
                pts.append(PointWNd(zc, 1.0, 2.0, r, (0.0,) * (flow.plug.n - 4), (0.0,) * flow.plug.l))
        return pts
    c = 0.15 if isinstance(flow, DzFlow) else flow_profile(flow).collar
    pts = []
    for th in np.linspace(0, 2 * math.pi, n, endpoint=False):
        for z in np.linspace(-2, 2, 4 * n):
            for r in (1.0, 1.0 + c, 3.0 - c, 3.0):
                pts.append(PointW3(z, th, r))
        for zc in (-2.0, -2.0 + c, 2.0 - c, 2.0):
            for r in np.linspace(1, 3, n):
                pts.append(PointW3(zc, th, r))
    return pts


def flow_profile(flow) -> Wilson3Profile:
    return flow.wilson.profile if isinstance(flow, KuperbergFlow) else flow.plug.profile


def suite_property_i(flow, scale, workers, **_):
    """The field is d/dz on a collar of the boundary."""
    worst = 0.0
    witness = None
    for p in _collar_points(flow):
        P = flow.kernel_params(p)
        y = flow.encode(p)
        tt = getattr(flow, "t", 0.0)
        v = K.field(flow.mode, P, tt, y[0], y[1], y[2])
        dev = max(abs(v[0] - 1.0), abs(v[1]), abs(v[2]))
        if dev > worst:
            worst, witness = dev, [float(a) for a in y]
    return {"pass": worst == 0.0, "max_deviation": worst, "witness": witness}


def suite_property_ii(flow, scale, workers, **_):
    """Every exiting orbit leaves at the mirror image of its entry point."""
    t = getattr(flow, "t", 0.0)
    n = scale.n(64)
    if isinstance(flow, WilsonNdFlow):
        seeds = entry_grid(flow, n, n, -2.0, 2.0)
    else:
        exclude = (1.8, 2.2) if t == 0.0 and not isinstance(flow, DzFlow) else None
        seeds = entry_grid(flow, n, n, 1.0, 3.0, exclude)
    tol = 1e-6 if t == 0.0 else 1e-5
    cfg = default_config(flow, horizon=scale.horizon(1e4))
    census = exit_match_scan(flow, seeds, cfg, workers)
    ok = census.errors == 0 and census.max_mismatch <= tol
    if t > 0.0 or isinstance(flow, DzFlow):
        ok = ok and census.exited == census.total
    return {"pass": ok, "match_tol": tol, **census.summary()}


def suite_property_iii(flow, scale, workers, **_):
    """No closed orbit survives shooting."""
    n = scale.n(256, floor=16)
    cfg = default_config(flow, horizon=scale.horizon(1e4))
    census = closed_orbit_scan(flow, closed_scan_seeds(flow, n), cfg, workers)
    return {"pass": not census.candidates, "closed_orbits": len(census.candidates), **census.summary()}


def suite_property_iv(flow, scale, workers, **_):
    """Some entry orbit is trapped; the trapped band below r = 2 is measured."""
    if isinstance(flow, WilsonNdFlow):
        seeds = entry_grid(flow, scale.n(16), scale.n(41, floor=5), -1.2, 1.2)
        cfg = default_config(flow, horizon=scale.horizon(1e4))
        census = exit_match_scan(flow, seeds, cfg, workers)
        return {"pass": census.trapped > 0, **census.summary()}
    thetas = np.linspace(0, 2 * math.pi, scale.n(16), endpoint=False)
    rs = np.linspace(1.8, 2.2, scale.n(41, floor=5) | 1)
    cfg = default_config(flow, horizon=scale.horizon(1e4))
    census, mask, delta = trapped_scan(flow, thetas, rs, cfg, workers)
    return {"pass": census.trapped > 0, "grid_cell": float(rs[1] - rs[0]), **census.summary()}


def suite_level_bounds(flow, scale, workers, **_):
    """Max level over exiting orbits against the radius-certificate bound."""
    if not isinstance(flow, KuperbergFlow) or not 0.0 < flow.t <= 1.0:
        raise ValidationFailure("level-bounds needs a kuperberg spec with 0 < t <= 1")
    certs = [certify_radius(flow.deformed(i), n=max(32, scale.n(128))) for i in (1, 2)]
    eps = min(c.epsilon for c in certs)
    spread = max(b.r_b - b.r_a for b in flow.bases)
    bound = int(math.ceil(spread / eps))
    n = scale.n(32)
    census = exit_match_scan(flow, entry_grid_w3(n, n, 1.0, 3.0), default_config(flow, horizon=scale.horizon(1e4)),
                             workers)
    ok = (all(c.pass_ for c in certs) and census.exited == census.total and census.max_mismatch <= 1e-5
          and census.max_level <= bound)
    return {"pass": ok, "epsilon": eps, "bound": bound, "bound_with_first_entry": level_bound(flow, eps),
            "certificates": [c.to_dict() for c in certs], **census.summary()}


def suite_parametric(spec, scale, workers, **_):
    """Slices of the parametric family: trivial parameter directions, X_K^0
    on |y| <= 1/2, d/dz at s = 1, exiting orbits on the deactivated slices."""
    fam = parametric_family(spec)
    rng = np.random.default_rng(12345)
    m = scale.n(10_000, floor=200)
    worst_y, worst_s1, s0_mismatch = 0.0, 0.0, 0
    base = fam.base
    for _ in range(m):
        p = PointW3(rng.uniform(-2, 2), rng.uniform(0, 2 * math.pi), rng.uniform(1, 3))
        y = rng.normal(size=fam.l)
        y *= rng.uniform(0, 1) ** (1.0 / fam.l) / np.linalg.norm(y)
        s = rng.uniform(0, 1)
        v = parametric_field(fam, s, p, y)
        worst_y = max(worst_y, max(abs(v[f"y{j + 1}"]) for j in range(fam.l)))
        y_in = y * (0.5 / max(np.linalg.norm(y), 0.5))
        v0 = parametric_field(fam, 0.0, p, y_in)
        ref = K.field(K.MODE_W3, base.params, 0.0, p.z, p.theta, p.r)
        if (v0["z"], v0["theta"], v0["r"]) != tuple(ref):
            s0_mismatch += 1
        v1 = parametric_field(fam, 1.0, p, y)
        worst_s1 = max(worst_s1, abs(v1["z"] - 1.0), abs(v1["theta"]), abs(v1["r"]))
    slices = {}
    n = scale.n(32)
    for u in (0.6, 0.75, 0.9):
        y = np.zeros(fam.l)
        y[0] = u
        flow = fam.slice_flow(0.0, y)
        census = exit_match_scan(flow, entry_grid_w3(n, n, 1.0, 3.0), default_config(flow, horizon=scale.horizon(1e4)),
                                 workers)
        slices[str(u)] = {"t": flow.t, "exited": census.exited, "total": census.total,
                          "max_mismatch": census.max_mismatch}
    ok = (worst_y == 0.0 and s0_mismatch == 0 and worst_s1 == 0.0
          and all(v["exited"] == v["total"] and v["max_mismatch"] <= 1e-5 for v in slices.values()))
    return {"pass": ok, "samples": m, "max_y_component": worst_y, "s0_not_bit_identical": s0_mismatch,
            "s1_deviation_from_dz": worst_s1, "slices": slices}


def suite_obstruction(corpus_path=None, scale=None, **_):
    """Rotation numbers, torus classification, Reeb boundary orbits and the
    meridian degree pair on the bundled (or given) corpus."""
    path = Path(corpus_path) if corpus_path else bundled_spec("obstruction_corpus.json")
    items_raw = json.loads(path.read_text())
    try:
        jsonschema.validate(items_raw, schema("obstruction_corpus"))
    except jsonschema.ValidationError as e:
        raise SchemaError(f"{path}: {e.message}") from e
    report = {"rotation": [], "torus": [], "reeb": [], "degrees": {}}
    ok = True
    for p, q in ((0, 1), (1, 3), (2, 5), (3, 7)):
        est = ob.rotation_number(ob.rigid_rotation(p / q))
        good = est.rational is not None and est.rational == ob.Fraction(p, q)
        ok &= good
        report["rotation"].append({"map": f"rotation({p}/{q})", **est.to_dict(), "pass": good})
    n_oracle = 1_000_000 if not (scale and scale.quick) else 100_000
    for omega, k in ((0.5, 0.6), (0.3, 0.5), (0.1, 0.9), (0.6180339887498949, 0.3)):
        m = ob.arnold_map(omega, k)
        est = ob.rotation_number(m, iterations=100_000)
        oracle = birkhoff_oracle(m, n_oracle)
        good = abs(est.value - oracle) <= 1e-4
        ok &= good
        report["rotation"].append({"map": m.name, **est.to_dict(), "oracle": oracle, "pass": good})
    for d, (name, obj) in zip(items_raw, ob.corpus_from_json(json.dumps(items_raw))):
        if isinstance(obj, ob.ReebSolidTorus):
            orbits = ob.reeb_boundary_orbits(obj)
            good = len(orbits) >= 2 and {o.direction for o in orbits} == {-1, 1}
            ok &= good
            report["reeb"].append({"name": name, "orbits": [o.to_dict() for o in orbits], "pass": good})
        else:
            try:
                cls, diag = ob.detect_reeb_component(obj)
                got = cls.value
            except ob.InconclusiveError as e:
                got, diag = "inconclusive", e.diagnostics
            good = d.get("expect") in (None, got)
            ok &= good
            report["torus"].append({"name": name, "class": got, "expect": d.get("expect"), "pass": good,
                                    "diagnostics": diag})
    swirl = ob.ReebSolidTorus(ob.swirl_field(), name="swirl", require_nonsingular=False)
    std = ob.ReebSolidTorus(ob.rotated_constant_field(0.0), name="standard")
    deg_swirl = ob.meridian_degrees(swirl)
    deg_std = ob.meridian_degrees(std)
    good = deg_swirl["boundary"] == 0 and deg_swirl["leaf"] == 1 and deg_std["leaf"] == 0
    ok &= good
    report["degrees"] = {"suspension_boundary": deg_swirl, "admissible": deg_std, "pass": good}
    report["pass"] = bool(ok)
    return report


def birkhoff_oracle(m: ob.CircleMap, n: int, x0: float = 0.0) -> float:
    """Plain long-orbit average (F^n(x0) - x0) / n."""
    x = x0
    for _ in range(n):
        x = m.lift(x)
    return (x - x0) / n


def run_suite(name: str, spec: dict | None, scale: Scale, workers: int, corpus=None) -> dict:
    if name == "obstruction-corpus":
        return suite_obstruction(corpus, scale)
    if spec is None:
        raise SchemaError(f"suite {name} needs a spec")
    if name == "parametric-consistency":
        if spec["kind"] != "parametric":
            raise ValidationFailure("parametric-consistency needs a parametric spec")
        return suite_parametric(spec, scale, workers)
    flow = build_flow(spec)
    fn = {
        "property-i": suite_property_i,
        "property-ii": suite_property_ii,
        "property-iii": suite_property_iii,
        "property-iv": suite_property_iv,
        "level-bounds": suite_level_bounds,
    }[name]
    return fn(flow, scale, workers)


# ------------------------------------------------------------------ commands

def cmd_build(args, out: Path, scale: Scale) -> dict:
    spec = load_spec(args.spec)
    report = {"spec": spec, "checks": {}}
    ok = True
    try:
        flow = build_flow(spec)
    except (DomainError, GeometryError, ValueError) as e:
        raise ValidationFailure(str(e), {"spec": spec, "error": str(e)}) from e
    if isinstance(flow, WilsonNdFlow):
        checks = flow.plug.profile.validate()
    elif isinstance(flow, DzFlow):
        checks = {}
    else:
        checks = dict(flow_profile(flow).validate())
        hp = flow.homotopy
        checks.update({f"homotopy_{k}": v for k, v in hp.validate().items()})
    report["checks"] = {k: {"value": v, "pass": v == 0.0} for k, v in checks.items()}
    ok &= all(c["pass"] for c in report["checks"].values())
    if isinstance(flow, KuperbergFlow):
        report["insertion_margins"] = validate_insertions(flow.bases, flow_profile(flow), flow.homotopy)
        certs = [certify_radius(flow.deformed(i), n=max(32, scale.n(128)), workers=args.workers) for i in (1, 2)]
        report["radius_certificates"] = [c.to_dict() for c in certs]
        report["epsilon"] = min(c.epsilon for c in certs)
        ok &= all(c.pass_ for c in certs)
        if not all(c.pass_ for c in certs):
            report["witness"] = next(c.witness for c in certs if not c.pass_)
    if isinstance(flow, (Wilson3Flow, KuperbergFlow)) and flow.t > 0.0:
        est = estimated_exit_time(Wilson3Plug(flow_profile(flow)), flow.homotopy, flow.t)
        report["estimated_exit_time"] = est
    report["pass"] = bool(ok)
    write_json(out / "build_report.json", report)
    if not ok:
        raise ValidationFailure("build checks failed", report)
    return report


def _warn_slow(flow, horizon):
    if isinstance(flow, (Wilson3Flow, KuperbergFlow)) and flow.t > 0.0:
        est = estimated_exit_time(Wilson3Plug(flow_profile(flow)), flow.homotopy, flow.t)
        if est > horizon:
            log.warning("estimated exit time %.3g exceeds the horizon %.3g; expect trapped_by_horizon", est, horizon)


def cmd_orbit(args, out: Path, scale: Scale) -> dict:
    spec = load_spec(args.spec)
    flow = build_flow(spec)
    seed = make_seed(flow, parse_floats(args.seed))
    horizon = scale.horizon(args.horizon)
    _warn_slow(flow, horizon)
    cfg = default_config(flow, horizon=horizon, sample_every=args.sample_every,
                         **_tol_override(args, flow))
    traj = integrate(flow, seed, cfg)
    write_jsonl(out / "orbit_events.jsonl", [e.to_dict() for e in traj.events])
    with open(out / "orbit_samples.csv", "w") as fh:
        fh.write("time," + ",".join(traj.coords) + "\n")
        for tt, y in zip(traj.times, traj.states):
            fh.write(repr(float(tt)) + "," + ",".join(repr(float(v)) for v in y) + "\n")
    report = {
        "seed": list(flow.encode(seed)),
        "terminal": traj.terminal.value,
        "end_time": traj.end_time,
        "end_state": list(traj.end_state),
        "events": len(traj.events),
        "diagnostics": traj.diagnostics,
    }
    if isinstance(flow, KuperbergFlow):
        lv = level_function(traj)
        report["max_level"] = lv.max_level
        report["nu"] = lv.nu
    write_json(out / "orbit_summary.json", report)
    return report


def _tol_override(args, flow) -> dict:
    if getattr(args, "step_tol", None) is None:
        return {}
    return {"tol": TolerancePolicy(step_abs_tol=args.step_tol, step_rel_tol=args.step_tol)}


def cmd_scan_exit(args, out: Path, scale: Scale) -> dict:
    flow = build_flow(load_spec(args.spec))
    exclude = tuple(parse_floats(args.exclude)) if args.exclude else None
    lo, hi = parse_floats(args.r_range)
    seeds = entry_grid(flow, scale.n(args.n_theta), scale.n(args.n_r), lo, hi, exclude)
    horizon = scale.horizon(args.horizon)
    _warn_slow(flow, horizon)
    census = exit_match_scan(flow, seeds, default_config(flow, horizon=horizon, **_tol_override(args, flow)),
                             args.workers)
    census.write_csv(out / "scan_exit.csv")
    report = census.summary()
    write_json(out / "scan_exit.json", report)
    return report


def cmd_scan_closed(args, out: Path, scale: Scale) -> dict:
    flow = build_flow(load_spec(args.spec))
    seeds = closed_scan_seeds(flow, scale.n(args.seeds, floor=16))
    cfg = default_config(flow, horizon=scale.horizon(args.horizon), **_tol_override(args, flow))
    census = closed_orbit_scan(flow, seeds, cfg, args.workers, transient=args.transient)
    census.write_csv(out / "scan_closed.csv")
    write_jsonl(out / "closed_orbits.jsonl", census.candidates)
    report = census.summary()
    write_json(out / "scan_closed.json", report)
    return report


def cmd_scan_trapped(args, out: Path, scale: Scale) -> dict:
    flow = build_flow(load_spec(args.spec))
    lo, hi = parse_floats(args.r_range)
    thetas = np.linspace(0, 2 * math.pi, scale.n(args.n_theta), endpoint=False)
    rs = np.linspace(lo, hi, scale.n(args.n_r, floor=5))
    cfg = default_config(flow, horizon=scale.horizon(args.horizon), **_tol_override(args, flow))
    census, mask, delta = trapped_scan(flow, thetas, rs, cfg, args.workers)
    write_mask_csv(out / "trapped_mask.csv", thetas, rs, mask)
    census.write_csv(out / "scan_trapped.csv")
    report = {**census.summary(), "grid_cell": float(rs[1] - rs[0]) if len(rs) > 1 else 0.0}
    write_json(out / "scan_trapped.json", report)
    return report


def cmd_verify(args, out: Path, scale: Scale) -> dict:
    spec = load_spec(args.spec) if args.spec else None
    report = run_suite(args.suite, spec, scale, args.workers, corpus=getattr(args, "corpus", None))
    report = {"suite": args.suite, **report}
    write_json(out / f"verify_{args.suite}.json", report)
    if not report["pass"]:
        raise ValidationFailure(f"suite {args.suite} failed", report)
    return report


def cmd_obstruct(args, out: Path, scale: Scale) -> dict:
    report = suite_obstruction(args.corpus, scale)
    write_json(out / "obstruct.json", report)
    if not report["pass"]:
        raise ValidationFailure("obstruction corpus failed", report)
    return report


COMMANDS = {
    "build": cmd_build,
    "orbit": cmd_orbit,
    "scan-exit": cmd_scan_exit,
    "scan-closed": cmd_scan_closed,
    "scan-trapped": cmd_scan_trapped,
    "verify": cmd_verify,
    "obstruct": cmd_obstruct,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plugflow", description="Wilson and Kuperberg plug flows.")
    ap.add_argument("--out", default=None, help=f"output directory (default ${ENV_OUT} or ./plugflow_out)")
    ap.add_argument("--workers", type=int, default=1, help="thread-pool size")
    ap.add_argument("--quick", action="store_true", help="grids and horizons 10x smaller")
    ap.add_argument("--budget", type=float, default=None, help="wall-clock budget in seconds (reported)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_spec(p, required=True):
        p.add_argument("spec", nargs=None if required else "?", help="plug spec (JSON)")
        p.add_argument("--step-tol", type=float, default=None, help="override the step tolerance")

    p = sub.add_parser("build", help="validate a spec and certify its insertions")
    with_spec(p)
    p = sub.add_parser("orbit", help="integrate one orbit")
    with_spec(p)
    p.add_argument("--seed", required=True, help="z,theta,r (n-D: z,s,t,r,x...,y...)")
    p.add_argument("--horizon", type=float, default=1e4)
    p.add_argument("--sample-every", type=int, default=50)
    p = sub.add_parser("scan-exit", help="entry/exit matching over an entry grid")
    with_spec(p)
    p.add_argument("--n-theta", type=int, default=64)
    p.add_argument("--n-r", type=int, default=64)
    p.add_argument("--r-range", default="1,3")
    p.add_argument("--exclude", default=None, help="open r-interval lo,hi to skip")
    p.add_argument("--horizon", type=float, default=1e4)
    p = sub.add_parser("scan-closed", help="closed-orbit search")
    with_spec(p)
    p.add_argument("--seeds", type=int, default=256)
    p.add_argument("--horizon", type=float, default=1e4)
    p.add_argument("--transient", type=float, default=0.0)
    p = sub.add_parser("scan-trapped", help="trapped-set mask")
    with_spec(p)
    p.add_argument("--n-theta", type=int, default=16)
    p.add_argument("--n-r", type=int, default=41)
    p.add_argument("--r-range", default="1.8,2.2")
    p.add_argument("--horizon", type=float, default=1e4)
    p = sub.add_parser("verify", help="run a verification suite")
    with_spec(p, required=False)
    p.add_argument("--suite", required=True, choices=SUITES)
    p.add_argument("--corpus", default=None)
    p = sub.add_parser("obstruct", help="obstruction computations on a corpus")
    p.add_argument("--corpus", default=None)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out or os.environ.get(ENV_OUT) or "plugflow_out")
    scale = Scale(args.quick)
    t0 = time.perf_counter()
    try:
        if args.workers < 1:
            raise SchemaError("--workers must be at least 1")
        out.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(
            command=args.command, output_dir=str(out), spec_path=getattr(args, "spec", None),
            tolerance_overrides={"step_tol": args.step_tol} if getattr(args, "step_tol", None) else {},
            seed_grid={k: v for k, v in vars(args).items()
                       if k in ("seed", "n_theta", "n_r", "r_range", "exclude", "seeds", "horizon", "suite")},
            budget_seconds=args.budget, quick=args.quick, workers=args.workers,
        )
        manifest.validate()
        write_json(out / "manifest.json", asdict(manifest))
        report = COMMANDS[args.command](args, out, scale)
    except ValidationFailure as e:
        if e.report:
            write_json(out / "failure.json", {"error": str(e), "report": e.report})
        print(json.dumps({"status": "fail", "error": str(e)}))
        return EXIT_VALIDATION
    except (SchemaError, DomainError, GeometryError, jsonschema.ValidationError) as e:
        print(json.dumps({"status": "invalid", "error": str(e)}))
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001 - any other failure is a runtime error
        log.exception("runtime error")
        print(json.dumps({"status": "error", "error": f"{type(e).__name__}: {e}"}))
        return EXIT_RUNTIME
    elapsed = time.perf_counter() - t0
    if args.budget is not None and elapsed > args.budget:
        log.warning("wall-clock budget %.1fs exceeded (%.1fs)", args.budget, elapsed)
    print(json.dumps({"status": "pass", "command": args.command, "output_dir": str(out)}))
    print(f"elapsed {elapsed:.1f}s", file=sys.stderr)
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
