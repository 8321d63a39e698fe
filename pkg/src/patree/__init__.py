"""Preferential attachment trees with vertex weights: limit theory, simulation
and finite urn approximations."""

from .errors import PatreeError
from .fitness import DominatingStructure, FitnessModel
from .weightlaw import WeightLaw

__version__ = "0.1.0"

__all__ = ["DominatingStructure", "FitnessModel", "PatreeError", "WeightLaw", "__version__"]
