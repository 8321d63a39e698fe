"""Regularised kernels around the maximiser and the three-tree coupling that
sandwiches the original process between them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConstructionError, DomainError, UnsupportedFormError
from ..fitness import Clamped, FitnessModel
from . import kernels
from .tree import draw_root

RATIO_TOL = 1e-12


def regularized(model, dom, eps, sign):
    """g_eps (sign '+') replaces the row of every weight in M_eps by the row of
    the maximiser; g_-eps (sign '-') replaces it by that row minus u_eps,
    floored at 0.  h is unchanged."""
    if sign in ("+", 1, +1.0):
        upper = True
    elif sign in ("-", -1, -1.0):
        upper = False
    else:
        raise DomainError(f"sign must be '+' or '-', got {sign!r}")
    if dom.model is not model:
        raise DomainError("dominating structure was built for a different model")
    region = dom.m_epsilon(eps)
    if dom.kind == "table":
        keep = region.contains(model.atom_values)
        row = dom.row_star if upper else np.maximum(dom.row_star * (1.0 - eps), 0.0)
        table = model.table.copy()
        table[keep] = row
        out = FitnessModel.from_table(table, dom.law, model.h_table)
    elif dom.kind == "product":
        value = dom.phi1_max if upper else max(dom.phi1_max - eps, 0.0)
        out = FitnessModel("regularized", model.h_phi, a=Clamped(model.a, region, value),
                           b=model.b, c=model.c, e=model.e, w_star=model.w_star)
    else:
        raise UnsupportedFormError(f"no regularisation for {dom.kind}")
    out.params = {"base": model.form, "eps": eps, "sign": "+" if upper else "-"}
    return out


@dataclass
class CoupledTrees:
    fitness: tuple
    degree: tuple
    Z: tuple
    violations: int
    final_violations: int
    worst_ratio: float
    empty_fallbacks: int
    weight: np.ndarray
    in_m: np.ndarray

    @property
    def ok(self):
        return self.violations == 0 and self.final_violations == 0


def coupled_grow(model, dom, eps, n, rng, tol=RATIO_TOL):
    """Grow (T_-eps, T, T_eps) on one shared weight sequence.

    Returns the three trees' fitness, degree and Z together with the number of
    sandwich violations seen during growth and in the final full sweep.
    """
    law = dom.law
    lower = regularized(model, dom, eps, "-")
    upper = regularized(model, dom, eps, "+")
    w = np.empty(n + 1)
    w[0] = draw_root(model, law, rng)
    if n:
        w[1:] = law.sample(rng, n)
    us = rng.random((5, n + 1))
    in_m = np.asarray(dom.m_epsilon(eps).contains(w), dtype=np.bool_)
    cols = [m.vertex_arrays(w) for m in (lower, model, upper)]
    out = kernels.coupled_kernel(n, *cols[0], *cols[1], *cols[2], in_m,
                                 us[0], us[1], us[2], us[3], us[4], tol)
    fm, ft, fp, dm, dt, dp, Zm, Zt, Zp, viol, worst, empty, final = out
    if worst > 1.0 + tol:
        raise ConstructionError(f"acceptance ratio {worst} exceeds 1")
    return CoupledTrees((fm, ft, fp), (dm, dt, dp), (Zm, Zt, Zp), int(viol), int(final),
                        float(worst), int(empty), w, in_m)
