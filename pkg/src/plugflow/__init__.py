"""Wilson and Kuperberg plugs as executable flows, with verification scans
and two-dimensional obstruction computations."""

from .core import (
    DomainError,
    Event,
    EventKind,
    GeometryError,
    PointW3,
    PointWNd,
    SchemaError,
    Tangent,
    Terminal,
    TolerancePolicy,
    Trajectory,
)
from .insertion import InsertionSpec, certify_radius, default_insertions, sigma, sigma_t
from .integrate import (
    IntegratorConfig,
    closed_orbit_scan,
    default_config,
    exit_match_scan,
    integrate,
    trapped_scan,
)
from .kuperberg import KuperbergFlow, ParametricKuperberg, QuotientState, level_function, quotient_field
from .obstruction import CircleMap, degree_along_curve, detect_reeb_component, reeb_boundary_orbits, rotation_number
from .profiles import EtaProfile, HomotopyProfile, Wilson3Profile, WilsonNdProfile
from .wilson import DzFlow, Wilson3Flow, Wilson3Plug, WilsonNdFlow, WilsonNdPlug

__version__ = "0.1.0"
