"""Closed geodesic strings on warped products R x_f Y and their signed count F."""
from .census import (CensusReport, GeodesicString, UndefinedInvariantError,
                     enumerate_strings, fuller_sum, morse_index, multiplicity,
                     transverse_index)
from .family import FamilyReport, MetricPath, continue_string, detect_events, run_family
from .geometry import (FiberModel, MembershipVerdict, MetricError, WarpedMetric,
                       base_curvature, fiber_plane_curvature, membership,
                       uniform_distance)
from .loops import (DiscreteLoop, HomotopyClass, SolveOutcome, SolverOptions,
                    energy, gradient, hessian, length, minimize, refine_newton)
from .profile import ProfileExpr, parse

__all__ = [
    "CensusReport", "DiscreteLoop", "FamilyReport", "FiberModel", "GeodesicString",
    "HomotopyClass", "MembershipVerdict", "MetricError", "MetricPath", "ProfileExpr",
    "SolveOutcome", "SolverOptions", "UndefinedInvariantError", "WarpedMetric",
    "base_curvature", "continue_string", "detect_events", "energy", "enumerate_strings",
    "fiber_plane_curvature", "fuller_sum", "gradient", "hessian", "length", "membership",
    "minimize", "morse_index", "multiplicity", "parse", "refine_newton", "run_family",
    "transverse_index", "uniform_distance",
]

__version__ = "0.1.0"
