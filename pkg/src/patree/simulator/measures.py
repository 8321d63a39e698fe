"""Binned edge and degree counts collected from grown trees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError


def bin_edges(w_star, nbins):
    return np.linspace(0.0, w_star, nbins + 1)


def weight_bins(w, w_star, nbins):
    """Equal-width bins over [0, w_star]; the first bin is closed, the rest are
    left-open, matching the dyadic cell convention."""
    w = np.asarray(w, dtype=float)
    b = np.ceil(w * nbins / w_star).astype(np.int64) - 1
    return np.clip(b, 0, nbins - 1)


def degree_table(deg, vbin, nbins, k_max):
    """n_geq[k][b] = #{v : out_degree(v) >= k, bin(v) = b} for k <= k_max, and
    the total degree mass above k_max (so that sum_{k>=1} n_geq[k] plus that
    excess recovers the edge count)."""
    deg = np.asarray(deg, dtype=np.int64)
    capped = np.minimum(deg, k_max)
    hist = np.zeros((k_max + 1, nbins), dtype=np.int64)
    np.add.at(hist, (capped, vbin), 1)
    n_geq = np.cumsum(hist[::-1], axis=0)[::-1].copy()
    excess = int(np.sum(np.maximum(deg - k_max, 0)))
    return n_geq, excess


@dataclass
class EmpiricalMeasures:
    """Counts over an equal-width bin grid, summed over replicas.

    xi2[i, j] counts edges whose parent lies in bin i and child in bin j;
    xi[i] counts edges by parent bin.  n_geq[k, b] counts vertices of
    out-degree at least k; degrees above k_max fall into the top row, and
    degree_excess holds the degree mass beyond k_max.  z_sum holds the sum over
    replicas of Z_t / t at the recorded steps.
    """

    edges: np.ndarray
    xi: np.ndarray
    xi2: np.ndarray
    n_geq: np.ndarray
    degree_excess: int
    z_steps: np.ndarray
    z_sum: np.ndarray
    n_steps: int
    replicas: int = 1

    @property
    def nbins(self):
        return self.xi.size

    @property
    def k_max(self):
        return self.n_geq.shape[0] - 1

    @property
    def n_edges(self):
        return self.n_steps * self.replicas

    @property
    def z_path(self):
        return self.z_steps, self.z_sum / self.replicas

    def merge(self, other):
        if (self.n_steps != other.n_steps or self.xi2.shape != other.xi2.shape
                or self.n_geq.shape != other.n_geq.shape
                or not np.array_equal(self.edges, other.edges)
                or not np.array_equal(self.z_steps, other.z_steps)):
            raise DomainError("measures with different grids or horizons cannot be merged")
        return EmpiricalMeasures(self.edges, self.xi + other.xi, self.xi2 + other.xi2,
                                 self.n_geq + other.n_geq,
                                 self.degree_excess + other.degree_excess, self.z_steps,
                                 self.z_sum + other.z_sum, self.n_steps,
                                 self.replicas + other.replicas)

    def __eq__(self, other):
        if not isinstance(other, EmpiricalMeasures):
            return NotImplemented
        return (self.n_steps == other.n_steps and self.replicas == other.replicas
                and self.degree_excess == other.degree_excess
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("edges", "xi", "xi2", "n_geq", "z_steps", "z_sum")))

    def mass(self, lo, hi):
        """Fraction of edges whose parent bin lies inside [lo, hi]; both ends
        must sit on bin edges."""
        i, j = self._bin_range(lo, hi)
        return float(self.xi[i:j].sum()) / self.n_edges

    def mass2(self, a, b):
        i, j = self._bin_range(*a)
        k, l = self._bin_range(*b)
        return float(self.xi2[i:j, k:l].sum()) / self.n_edges

    def _bin_range(self, lo, hi):
        e = self.edges
        i = int(np.argmin(np.abs(e - lo)))
        j = int(np.argmin(np.abs(e - hi)))
        tol = 1e-9 * e[-1]
        if abs(e[i] - lo) > tol or abs(e[j] - hi) > tol or j <= i:
            raise DomainError(f"[{lo}, {hi}] is not a union of bins")
        return i, j

    def degree_tail(self):
        """N_{>=k}(full) / n for k = 0..k_max, pooled over replicas."""
        return self.n_geq.sum(axis=1) / self.n_edges

    def check(self):
        """Structural invariants; returns a list of failures (empty if fine)."""
        bad = []
        if self.xi.sum() != self.n_edges:
            bad.append("sum of xi differs from the edge count")
        if self.xi2.sum() != self.n_edges:
            bad.append("sum of xi2 differs from the edge count")
        if not np.array_equal(self.xi, self.xi2.sum(axis=1)):
            bad.append("xi is not the row sum of xi2")
        if self.n_geq[0].sum() != self.n_edges + self.replicas:
            bad.append("n_geq[0] does not count every vertex")
        if np.any(np.diff(self.n_geq, axis=0) > 0):
            bad.append("n_geq increases in k")
        if self.n_geq[1:].sum() + self.degree_excess != self.n_edges:
            bad.append("degree counts do not add up to the edge count")
        return bad


def measures_from_tree(parent, weight, deg, w_star, nbins, k_max, z_steps, z_values):
    """Recompute the accumulators of one tree from its edge list."""
    vbin = weight_bins(weight, w_star, nbins)
    n = weight.size - 1
    xi2 = np.zeros((nbins, nbins), dtype=np.int64)
    if n:
        np.add.at(xi2, (vbin[parent[1:]], vbin[1:]), 1)
    if deg is None:
        deg = np.bincount(parent[1:], minlength=n + 1)
    n_geq, excess = degree_table(deg, vbin, nbins, k_max)
    return EmpiricalMeasures(bin_edges(w_star, nbins), xi2.sum(axis=1), xi2, n_geq, excess,
                             np.asarray(z_steps, dtype=np.int64), np.asarray(z_values, dtype=float),
                             n, 1)
