"""Finite Polya-urn approximations of the tree: cells, urns, eigen-systems."""

from .builders import (UrnDReport, UrnEReport, build_urn_d, build_urn_e, check_urn_d_formulas,
                       check_urn_e_formulas, urn_d_closed_form)
from .discretize import DiscretizedModel, discretize
from .urn import LeadingEig, UrnSpec, leading_eig, simulate_urn

__all__ = [
    "DiscretizedModel", "LeadingEig", "UrnDReport", "UrnEReport", "UrnSpec", "build_urn_d",
    "build_urn_e", "check_urn_d_formulas", "check_urn_e_formulas", "discretize", "leading_eig",
    "simulate_urn", "urn_d_closed_form",
]
