"""Moment-map stability, Kempf-Ness flows and certified perturbation to moment-map zeros."""

from __future__ import annotations

from .algebra import GroupAction, OneParameterSubgroup, StatePoint
from .const import TOOL_VERSION
from .exceptions import MomentToolkitError
from .moment import SliceModel, linear_moment, slice_moment
from .perturb import PerturbOptions, ZeroCertificate, perturb_to_zero, scaling_search
from .stability import StabilityClass, cross_validate, kempf_ness_flow, torus_polystability

__version__ = TOOL_VERSION

__all__ = [
    "GroupAction",
    "MomentToolkitError",
    "OneParameterSubgroup",
    "PerturbOptions",
    "SliceModel",
    "StabilityClass",
    "StatePoint",
    "ZeroCertificate",
    "cross_validate",
    "kempf_ness_flow",
    "linear_moment",
    "perturb_to_zero",
    "scaling_search",
    "slice_moment",
    "torus_polystability",
]
