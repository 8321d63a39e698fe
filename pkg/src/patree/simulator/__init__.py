"""Tree growth at scale, the three-tree coupling and Monte Carlo probes."""

from .coupling import CoupledTrees, coupled_grow, regularized
from .measures import EmpiricalMeasures, measures_from_tree, weight_bins
from .probes import (CondensateTable, MartingaleSeries, condensate_probe,
                     deterministic_z_recursion, martingale_probe)
from .runner import GrowResult, RunConfig, grow, grow_one, replica_rng, replica_seeds
from .tree import GrowthTree, StepRecord, init_tree, step

__all__ = [
    "CondensateTable", "CoupledTrees", "EmpiricalMeasures", "GrowResult", "GrowthTree",
    "MartingaleSeries", "RunConfig", "StepRecord", "condensate_probe", "coupled_grow",
    "deterministic_z_recursion", "grow", "grow_one", "init_tree", "martingale_probe",
    "measures_from_tree", "regularized", "replica_rng", "replica_seeds", "step", "weight_bins",
]
