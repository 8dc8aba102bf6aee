"""Renewal processes, their intersections, and the asymptotics of both."""

from .engine import MassFunction, invert_mass, mass_function, increment
from .laws import (
    GapLaw,
    SlowVaryDesc,
    build_reg_varying,
    deterministic_law,
    from_pmf,
    geometric_law,
    load_law,
    ssrw_return_law,
)

__all__ = [
    "GapLaw",
    "MassFunction",
    "SlowVaryDesc",
    "build_reg_varying",
    "deterministic_law",
    "from_pmf",
    "geometric_law",
    "increment",
    "invert_mass",
    "load_law",
    "mass_function",
    "ssrw_return_law",
]
__version__ = "0.1.0"
