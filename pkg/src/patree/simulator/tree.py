"""A growing tree with an O(log n) proportional sampler over vertex fitness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateLawError
from . import kernels

MAX_ROOT_TRIES = 10**6


@dataclass(frozen=True)
class StepRecord:
    parent: int
    weight: float


def draw_root(model, law, rng, max_tries=MAX_ROOT_TRIES):
    """A weight from the law conditioned on h > 0, by rejection."""
    if law.is_atomic and model.positive_h_mass(law) == 0:
        raise DegenerateLawError("h vanishes on every atom, so no root can be drawn")
    tries = 0
    batch = 1
    while tries < max_tries:
        k = min(batch, max_tries - tries)
        w = np.atleast_1d(law.sample(rng, k))
        ok = np.flatnonzero(np.asarray(model.h(w)) > 0)
        if ok.size:
            return float(w[ok[0]])
        tries += k
        batch = min(batch * 2, 4096)
    raise DegenerateLawError(f"no weight with h > 0 in {max_tries} draws")


class GrowthTree:
    """Per-vertex weight, fitness, out-degree and parent arrays plus Z.

    Vertex 0 is the root.  `parent` is None when the edge list was not kept.
    """

    def __init__(self, model, law, weight, fitness, out_degree, parent, Z):
        self.model = model
        self.law = law
        self.weight = weight
        self.fitness = fitness
        self.out_degree = out_degree
        self.parent = parent
        self.Z = float(Z)
        self._size = weight.size
        self._index = None
        self._cols = None

    @property
    def n(self):
        """Number of edges, i.e. steps taken."""
        return self._size - 1

    @property
    def size(self):
        return self._size

    def _grow_storage(self, need):
        cap = self.weight.size
        if need <= cap and self._index is not None:
            return
        new_cap = max(cap, 16)
        while new_cap < need:
            new_cap *= 2

        def ext(arr, fill=0):
            if arr is None:
                return None
            out = np.full(new_cap, fill, dtype=arr.dtype)
            out[:self._size] = arr[:self._size]
            return out

        self.weight = ext(self.weight)
        self.fitness = ext(self.fitness)
        self.out_degree = ext(self.out_degree)
        self.parent = ext(self.parent, -1)
        size = 1
        while size < new_cap:
            size *= 2
        self._index = np.zeros(size + 1)
        kernels.fen_build(self._index, self.fitness)
        cols = self.model.vertex_arrays(self.weight[:self._size])
        self._cols = [ext(c) for c in cols[:6]] + [cols[6]]

    def step(self, rng):
        """Attach one new vertex; the parent is drawn with probability
        fitness / Z."""
        self._grow_storage(self._size + 1)
        t = self._size
        u = rng.random()
        w = float(law_sample(self.law, rng))
        p = int(kernels.fen_sample(self._index, self.fitness, self.Z, u, t))
        h, a, b, c, e, idx, table = self._cols
        nh, na, nb, nc, ne, nidx, _ = self.model.vertex_arrays(np.array([w]))
        h[t], a[t], b[t], c[t], e[t], idx[t] = nh[0], na[0], nb[0], nc[0], ne[0], nidx[0]
        inc = float(a[p] * b[t] + c[p] + e[t] + table[idx[p], idx[t]])
        self.fitness[p] += inc
        kernels.fen_add(self._index, p, inc)
        self.weight[t] = w
        self.fitness[t] = h[t]
        kernels.fen_add(self._index, t, h[t])
        self.out_degree[p] += 1
        if self.parent is not None:
            self.parent[t] = p
        self.Z += inc + h[t]
        self._size += 1
        return StepRecord(p, w)

    def arrays(self):
        """Trimmed views (weight, fitness, out_degree, parent)."""
        s = self._size
        par = self.parent[:s] if self.parent is not None else None
        return self.weight[:s], self.fitness[:s], self.out_degree[:s], par

    def recompute(self):
        """Fitness and Z rebuilt from the edge list."""
        w, _, _, par = self.arrays()
        if par is None:
            raise ValueError("edge list was not retained")
        f = np.asarray(self.model.h(w), dtype=float).copy() * np.ones(w.size)
        if w.size > 1:
            child = np.arange(1, w.size)
            inc = np.asarray(self.model.g(w[par[1:]], w[child]), dtype=float) * np.ones(child.size)
            np.add.at(f, par[1:], inc)
        return f, float(f.sum())

    def check(self, rel=1e-9):
        """Tree invariants; returns a list of failures."""
        w, f, deg, par = self.arrays()
        bad = []
        total = float(np.sum(f))
        if abs(total - self.Z) > rel * total:
            bad.append(f"Z = {self.Z} but fitness sums to {total}")
        if deg.sum() != self.n:
            bad.append("out-degrees do not sum to the edge count")
        if self.Z < float(self.model.h(w[0])) or self.Z <= 0:
            bad.append("Z fell below the root's h")
        if par is not None:
            if self.n and np.any(par[1:] >= np.arange(1, w.size)):
                bad.append("some parent index is not smaller than its child")
            if not np.array_equal(np.bincount(par[1:], minlength=w.size), deg):
                bad.append("out-degrees disagree with the edge list")
            f2, _ = self.recompute()
            if np.any(np.abs(f2 - f) > rel * np.maximum(1.0, np.abs(f2))):
                bad.append("fitness disagrees with the edge list")
        return bad


def law_sample(law, rng):
    return np.atleast_1d(law.sample(rng, 1))[0]


def init_tree(model, law, rng, keep_parent=True):
    """A one-vertex tree whose root weight is conditioned on h > 0."""
    w0 = draw_root(model, law, rng)
    h0 = float(model.h(w0))
    return GrowthTree(model, law, np.array([w0]), np.array([h0]), np.zeros(1, dtype=np.int64),
                      np.array([-1], dtype=np.int64) if keep_parent else None, h0)


def step(tree, model, rng):
    if model is not tree.model:
        raise ValueError("tree was grown under a different model")
    return tree.step(rng)
