"""Phase diagram over the exponent of the beta-type weight law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapError
from .fitness import FitnessModel
from .theory import BOUNDARY, CONDENSATION, classify_regime, condensate_mass, malthusian
from .weightlaw import WeightLaw

SWEEP_CAP = 10_000


@dataclass
class SweepRow:
    param: float
    criterion: float
    regime: str
    lambda_or_gstar: float | None
    condensate_mass: float | None


def alpha_sweep(values, model=None):
    """Regime, limit rate and condensate mass for beta_poly(alpha) weights
    under the given model (Bianconi-Barabasi by default)."""
    values = list(values)
    if len(values) > SWEEP_CAP:
        raise CapError(f"{len(values)} grid points exceed the cap of {SWEEP_CAP}")
    model = model or FitnessModel.bianconi_barabasi()
    rows = []
    for alpha in values:
        law = WeightLaw.beta_poly(alpha)
        rep = classify_regime(model, law)
        if rep.regime == CONDENSATION:
            rate, mass = rep.g_tilde_star, condensate_mass(model, law, rep)
        elif rep.regime == BOUNDARY:
            rate, mass = None, None
        else:
            rate, mass = malthusian(model, law, report=rep)[0], 0.0
        rows.append(SweepRow(float(alpha), rep.criterion_value, rep.regime, rate, mass))
    return rows


def phase_boundary(rows):
    """Location of the transition on the grid: the boundary-flagged point if
    there is one, else the midpoint between the last non-condensing and the
    first condensing point, else None."""
    flagged = [r.param for r in rows if r.regime == BOUNDARY]
    if flagged:
        return float(np.mean(flagged))
    prev = None
    for r in sorted(rows, key=lambda r: r.param):
        if r.regime == CONDENSATION and prev is not None:
            return 0.5 * (prev + r.param)
        if r.regime != CONDENSATION:
            prev = r.param
    return None
