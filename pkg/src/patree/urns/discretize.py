"""Finite cell approximations of (g, h) with lower and upper envelopes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CapError, DomainError, UnsupportedFormError
from ..fitness import Affine, Constant, Identity, Power
from ..weightlaw import Interval, IntervalUnion, left_open, point

CELL_CAP = 10**4
MONOTONE = (Identity, Constant, Power, Affine)


@dataclass
class DiscretizedModel:
    """Cells of the weight space with their masses and envelope values.

    Cell i is `cells[i]`; g_min[i, j] <= g(x, y) <= g_max[i, j] whenever x lies
    in cell i and y in cell j, and likewise for h_min, h_max.
    """

    m: int
    cells: list
    p: np.ndarray
    g_min: np.ndarray
    g_max: np.ndarray
    h_min: np.ndarray
    h_max: np.ndarray
    model: object
    law: object
    exact: bool

    @property
    def D(self):
        return len(self.cells)

    @property
    def g_tilde_minus(self):
        return self.g_min @ self.p

    @property
    def g_tilde_plus(self):
        return self.g_max @ self.p

    @property
    def g_star(self):
        """Column maxima of g_max: the largest increment a cell-j child can give."""
        return self.g_max.max(axis=0)

    @property
    def g_tilde_star_plus(self):
        return float(self.g_star @ self.p)

    def locate(self, x):
        """Index of the cell containing each weight."""
        x = np.asarray(x, dtype=float)
        if self.exact:
            vals = np.array([c.lo for c in self.cells])
            idx = np.clip(np.searchsorted(vals, x), 0, vals.size - 1)
            if np.any(vals[idx] != x):
                raise DomainError("weight is not an atom of the law")
            return idx
        inner = np.array([c.hi for c in self.cells[:-1]])
        return np.searchsorted(inner, x, side="left")

    def lower_g(self, x, y):
        return self.g_min[self.locate(x), self.locate(y)]

    def upper_g(self, x, y):
        return self.g_max[self.locate(x), self.locate(y)]

    def check_bounds(self, rng, n=1000):
        """Probe the envelope inequalities on random weights; returns failures."""
        law = self.law
        x = np.atleast_1d(law.sample(rng, n))
        y = np.atleast_1d(law.sample(rng, n))
        i, j = self.locate(x), self.locate(y)
        gv = np.asarray(self.model.g(x, y), dtype=float) * np.ones(n)
        hv = np.asarray(self.model.h(x), dtype=float) * np.ones(n)
        tol = 1e-12 * max(1.0, float(self.g_max.max()), float(self.h_max.max()))
        bad = []
        if np.any(gv < self.g_min[i, j] - tol) or np.any(gv > self.g_max[i, j] + tol):
            bad.append("g outside its cell envelope")
        if np.any(hv < self.h_min[i] - tol) or np.any(hv > self.h_max[i] + tol):
            bad.append("h outside its cell envelope")
        if abs(self.p.sum() - 1.0) > 1e-12:
            bad.append("cell masses do not sum to 1")
        return bad


def discretize(model, law, m):
    """Cells and envelopes at dyadic level m.

    Atomic laws use the atoms themselves, so both envelopes equal (g, h).
    Otherwise every non-constant component is cut along the preimages of the
    dyadic grid of its range, the weight axis along its own dyadic grid, and
    the envelopes take the corners of the closed range boxes (the kernel is
    increasing in each nonnegative component).  Constant components are kept
    exact.
    """
    if m < 1:
        raise DomainError("level m must be at least 1")
    if law.is_atomic:
        return _discretize_atoms(model, law, m)
    if model.table is not None:
        raise UnsupportedFormError("table kernels need an atomic law")
    comps = {"h": model.h_phi, "a": model.a, "b": model.b, "c": model.c, "e": model.e}
    for name, phi in comps.items():
        if not isinstance(phi, MONOTONE):
            raise UnsupportedFormError(f"component {name} ({phi.name}) has no monotone cell structure")
    w_star = law.w_star
    n_cut = 2**m
    cuts = {k * w_star / n_cut for k in range(1, n_cut)}
    ranges = {}
    for name, phi in comps.items():
        if phi.is_constant:
            continue
        J = phi.sup_on(0.0, w_star)
        ranges[name] = J
        if J <= 0:
            continue
        for k in range(1, n_cut):
            x = float(phi.inverse(k * J / n_cut))
            if 0.0 < x < w_star and np.isfinite(x):
                cuts.add(x)
    edges = np.array([0.0] + sorted(cuts) + [w_star])
    edges = edges[np.concatenate([[True], np.diff(edges) > 1e-15 * max(1.0, w_star)])]
    if edges[-1] != w_star:
        edges[-1] = w_star
    D = edges.size - 1
    if D > CELL_CAP:
        raise CapError(f"{D} cells exceed the cap of {CELL_CAP}")
    cells = [Interval(edges[0], edges[1])] + [left_open(edges[k], edges[k + 1]) for k in range(1, D)]
    mid = 0.5 * (edges[:-1] + edges[1:])

    def box(name):
        phi = comps[name]
        if phi.is_constant:
            v = float(phi(0.0))
            return np.full(D, v), np.full(D, v)
        J = ranges[name]
        if J <= 0:
            return np.zeros(D), np.zeros(D)
        delta = J / n_cut
        val = np.asarray(phi(mid), dtype=float) * np.ones(D)
        idx = np.clip(np.ceil(val / delta), 1, n_cut)
        return (idx - 1) * delta, idx * delta

    a_lo, a_hi = box("a")
    b_lo, b_hi = box("b")
    c_lo, c_hi = box("c")
    e_lo, e_hi = box("e")
    h_lo, h_hi = box("h")
    g_min = np.outer(a_lo, b_lo) + c_lo[:, None] + e_lo[None, :]
    g_max = np.outer(a_hi, b_hi) + c_hi[:, None] + e_hi[None, :]
    p = np.array([law.measure(IntervalUnion.of(c)) for c in cells])
    p = p / p.sum()
    return DiscretizedModel(m, cells, p, g_min, g_max, h_lo, h_hi, model, law, False)


def _discretize_atoms(model, law, m):
    vals = law.values
    keep = law.probs > 0
    vals, probs = vals[keep], law.probs[keep]
    if vals.size > CELL_CAP:
        raise CapError(f"{vals.size} atoms exceed the cap of {CELL_CAP}")
    G = np.asarray(model.g(vals[:, None], vals[None, :]), dtype=float) * np.ones((vals.size, vals.size))
    H = np.asarray(model.h(vals), dtype=float) * np.ones(vals.size)
    return DiscretizedModel(m, [point(v) for v in vals], probs.astype(float), G, G.copy(), H,
                            H.copy(), model, law, True)
