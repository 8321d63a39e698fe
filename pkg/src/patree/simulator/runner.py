"""Replica orchestration: seeding, growth through the compiled kernel, merging."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from . import kernels
from .measures import EmpiricalMeasures, bin_edges, degree_table, weight_bins
from .tree import GrowthTree, draw_root

THREADS_ENV = "PATREE_THREADS"
EDGE_RETENTION_LIMIT = 10**6


@dataclass
class RunConfig:
    model: object
    law: object
    n_steps: int
    replicas: int = 1
    master_seed: int = 0
    bins: int = 64
    k_max: int = 64
    stride: int | None = None
    keep_edges: bool | None = None
    model_id: str = ""
    law_id: str = ""

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise DomainError("n_steps must be at least 1")
        if int(self.replicas) < 1:
            raise DomainError("replicas must be at least 1")
        if self.bins < 1 or self.k_max < 1:
            raise DomainError("bins and k_max must be positive")
        if not 0 <= int(self.master_seed) < 2**64:
            raise DomainError("master_seed must fit in 64 unsigned bits")
        self.n_steps = int(self.n_steps)
        if self.stride is None:
            self.stride = max(1, self.n_steps // 1000)
        if self.keep_edges is None:
            self.keep_edges = self.n_steps <= EDGE_RETENTION_LIMIT


def replica_rng(master_seed, replica):
    """Independent stream for one replica: numpy's SeedSequence hashes
    (master_seed, replica) into the generator state."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(replica),)))


def replica_seeds(master_seed, replicas):
    return [int(np.random.SeedSequence(int(master_seed), spawn_key=(i,)).generate_state(1, np.uint64)[0])
            for i in range(replicas)]


def default_threads():
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


@dataclass
class ReplicaRun:
    tree: GrowthTree
    measures: EmpiricalMeasures
    drift: float
    probe_f: np.ndarray = field(default_factory=lambda: np.zeros(0))
    probe_log: np.ndarray = field(default_factory=lambda: np.zeros(0))


def grow_one(model, law, n, rng, bins=64, k_max=64, stride=None, keep_edges=True,
             probe_v=-1, probe_gt=None, probe_at=()):
    """Grow a single tree for n steps through the compiled kernel.

    The random draws are consumed in a fixed order: root weight, the n vertex
    weights, then the n parent uniforms.
    """
    stride = stride or max(1, n // 1000)
    w = np.empty(n + 1)
    w[0] = draw_root(model, law, rng)
    if n:
        w[1:] = law.sample(rng, n)
    u = np.empty(n + 1)
    u[0] = 0.0
    u[1:] = rng.random(n)
    h, a, b, c, e, idx, table = model.vertex_arrays(w)
    vbin = weight_bins(w, law.w_star, bins)
    probe_at = np.asarray(probe_at, dtype=np.int64)
    if probe_v >= 0 and probe_gt is None:
        from ..fitness import g_tilde
        probe_gt = g_tilde(model, law, w[probe_v])
    fit, deg, parent, xi2, zrec, Z, drift, pf, pl = kernels.grow_kernel(
        n, h, a, b, c, e, idx, table, u, vbin, bins, stride, bool(keep_edges),
        int(probe_v), float(probe_gt or 0.0), probe_at)
    n_geq, excess = degree_table(deg, vbin, bins, k_max)
    steps = np.arange(1, zrec.size + 1, dtype=np.int64) * stride
    meas = EmpiricalMeasures(bin_edges(law.w_star, bins), xi2.sum(axis=1), xi2, n_geq, excess,
                             steps, zrec.copy(), n, 1)
    tree = GrowthTree(model, law, w, fit, deg, parent if keep_edges else None, Z)
    return ReplicaRun(tree, meas, float(drift), pf, pl)


def run_replica(config, replica):
    rng = replica_rng(config.master_seed, replica)
    return grow_one(config.model, config.law, config.n_steps, rng, config.bins, config.k_max,
                    config.stride, config.keep_edges)


@dataclass
class GrowResult:
    measures: EmpiricalMeasures
    trees: list | None
    seeds: list
    max_drift: float


def parallel_map(fn, items, threads=None):
    threads = threads or default_threads()
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def grow(config, threads=None, retain=False):
    """Run config.replicas independent trees and merge their measures in
    replica order, so the result does not depend on scheduling."""
    runs = parallel_map(lambda i: run_replica(config, i), range(config.replicas), threads)
    merged = runs[0].measures
    for r in runs[1:]:
        merged = merged.merge(r.measures)
    return GrowResult(merged, [r.tree for r in runs] if retain else None,
                      replica_seeds(config.master_seed, config.replicas),
                      max(r.drift for r in runs))
