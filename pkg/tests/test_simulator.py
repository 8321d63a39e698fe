import numpy as np
import pytest
from scipy import stats

from patree.errors import DegenerateLawError, DomainError, PreconditionError
from patree.fitness import Constant, DominatingStructure, FitnessModel, Identity
from patree.simulator import (RunConfig, condensate_probe, coupled_grow, deterministic_z_recursion, grow,
                              grow_one, init_tree, martingale_probe, measures_from_tree, regularized,
                              replica_rng, replica_seeds, step)
from patree.simulator import kernels
from patree.simulator.runner import run_replica
from patree.simulator.tree import draw_root
from patree.weightlaw import WeightLaw

UNIFORM = WeightLaw.uniform()
BB = FitnessModel.bianconi_barabasi()
PA = FitnessModel.classic_pa()
RRT = FitnessModel.random_recursive()


def test_root_conditioning():
    rng = np.random.default_rng(0)
    law = WeightLaw.atoms([0.0, 1.0], [0.5, 0.5])
    assert all(draw_root(BB, law, rng) == 1.0 for _ in range(200))
    with pytest.raises(DegenerateLawError):
        draw_root(FitnessModel.constant(1.0, 0.0), law, rng)
    with pytest.raises(DegenerateLawError):
        draw_root(FitnessModel.constant(1.0, 0.0), UNIFORM, rng, max_tries=1000)


def test_first_step_attaches_to_root():
    run = grow_one(BB, UNIFORM, 1, np.random.default_rng(1))
    assert run.tree.parent[1] == 0


@pytest.mark.parametrize("c", [1.0, 2.5])
def test_pa_partition_function_is_deterministic(c):
    n = 50_000
    run = grow_one(FitnessModel.classic_pa(c), UNIFORM, n, np.random.default_rng(2))
    assert run.tree.Z == c * (2 * n + 1)
    steps, z = run.measures.z_path
    assert z[-1] == pytest.approx(2 * c, abs=0.01)


def test_rrt_attaches_uniformly():
    rng = np.random.default_rng(3)
    counts = np.zeros(3, dtype=int)
    for _ in range(10_000):
        tree = init_tree(RRT, UNIFORM, rng)
        for _ in range(3):
            rec = step(tree, RRT, rng)
        counts[rec.parent] += 1
        assert tree.Z == 4.0
    assert stats.chisquare(counts).pvalue > 0.0027


def test_fenwick_sampler_matches_weights():
    rng = np.random.default_rng(4)
    vals = rng.random(1000) * rng.integers(1, 5, 1000)
    size = 1024
    tree = np.zeros(size + 1)
    kernels.fen_build(tree, vals)
    total = vals.sum()
    u = rng.random(1_000_000)
    draws = np.array([kernels.fen_sample(tree, vals, total, x, vals.size) for x in u])
    counts = np.bincount(draws, minlength=vals.size)
    assert stats.chisquare(counts, vals / total * u.size).pvalue > 0.0027
    assert kernels.fen_prefix(tree, 1000) == pytest.approx(total, rel=1e-12)


def test_incremental_tree_matches_edge_list():
    model = FitnessModel.separable_sum(0.5, 1.5, Identity(), Identity(), h=Constant(0.3))
    run = grow_one(model, WeightLaw.beta_poly(1.0), 20_000, np.random.default_rng(5))
    assert run.tree.check() == []
    rng = np.random.default_rng(6)
    for _ in range(500):
        run.tree.step(rng)
    assert run.tree.check() == []
    assert run.tree.n == 20_500


def test_streamed_measures_match_recompute():
    run = grow_one(BB, UNIFORM, 30_000, np.random.default_rng(7), bins=16, k_max=8)
    t = run.tree
    w, f, deg, par = t.arrays()
    steps, z = run.measures.z_path
    again = measures_from_tree(par, w, None, UNIFORM.w_star, 16, 8, steps, z * 1)
    assert again == run.measures
    assert run.measures.check() == []


def test_edge_count_identity():
    run = grow_one(RRT, UNIFORM, 40_000, np.random.default_rng(8), bins=4, k_max=64)
    m = run.measures
    assert m.degree_excess == 0
    assert m.n_geq[1:].sum() == m.n_steps
    assert m.xi.sum() == m.n_steps


def test_degree_overflow_counted():
    run = grow_one(PA, UNIFORM, 40_000, np.random.default_rng(9), bins=2, k_max=4)
    m = run.measures
    assert m.degree_excess > 0
    assert m.n_geq[1:].sum() + m.degree_excess == m.n_steps


def test_replica_merge_and_determinism():
    cfg = RunConfig(BB, UNIFORM, 5_000, replicas=3, master_seed=11, bins=8, k_max=8)
    merged = grow(cfg).measures
    fold = run_replica(cfg, 0).measures
    for i in (1, 2):
        fold = fold.merge(run_replica(cfg, i).measures)
    assert merged == fold
    assert grow(cfg, threads=2).measures == merged
    assert len(set(replica_seeds(11, 5))) == 5


def test_merge_rejects_mismatched_grids():
    a = grow_one(BB, UNIFORM, 100, np.random.default_rng(0), bins=4).measures
    b = grow_one(BB, UNIFORM, 100, np.random.default_rng(0), bins=8).measures
    with pytest.raises(DomainError):
        a.merge(b)


def test_run_config_validation():
    with pytest.raises(DomainError):
        RunConfig(BB, UNIFORM, 0)
    with pytest.raises(DomainError):
        RunConfig(BB, UNIFORM, 10, master_seed=2**64)
    assert RunConfig(BB, UNIFORM, 2_000_000).keep_edges is False


# coupling ------------------------------------------------------------------------

def test_regularized_kernels():
    model = FitnessModel.product(Identity(), Constant(1.0))
    dom = DominatingStructure(model, UNIFORM)
    up, low = regularized(model, dom, 0.1, "+"), regularized(model, dom, 0.1, "-")
    p = np.array([0.2, 0.9, 0.95, 1.0])
    assert np.allclose(up.g(p, 0.4), [0.2, 0.9, 1.0, 1.0])
    assert np.allclose(low.g(p, 0.4), [0.2, 0.9, 0.9, 0.9])


def test_coupling_without_violations():
    law = WeightLaw.beta_poly(2.0)
    dom = DominatingStructure(BB, law)
    for s in range(5):
        ct = coupled_grow(BB, dom, 0.05, 10_000, replica_rng(100, s))
        assert ct.ok and ct.worst_ratio <= 1.0 + 1e-12
        Zm, Zt, Zp = ct.Z
        assert Zm <= Zt <= Zp


def test_coupling_full_support_and_empty_run():
    dom = DominatingStructure(BB, UNIFORM)
    assert coupled_grow(BB, dom, 2.0, 2_000, np.random.default_rng(1)).ok
    ct = coupled_grow(BB, dom, 0.1, 0, np.random.default_rng(2))
    fm, ft, fp = ct.fitness
    assert ct.ok and fm.size == 1 and ft[0] == fm[0] == fp[0]


# probes --------------------------------------------------------------------------

def test_martingale_constant_for_rrt():
    s = martingale_probe(RRT, UNIFORM, 0, 500, 20, np.random.default_rng(3), [0, 10, 500])
    assert np.all(s.mean == 1.0) and np.all(s.std_error == 0.0)


def test_martingale_starts_at_h():
    s = martingale_probe(BB, UNIFORM, 5, 100, 50, np.random.default_rng(4), [5, 50, 100])
    assert s.checkpoints[0] == 5
    assert np.allclose(s.mean[0], s.fitness_mean[0])


def test_martingale_pa_against_recursion():
    cps = [10, 100, 1000]
    s = martingale_probe(PA, UNIFORM, 0, 1000, 2000, np.random.default_rng(5), cps)
    ref = deterministic_z_recursion(PA, cps)
    assert np.all(np.abs(s.fitness_mean - ref) <= 3 * s.fitness_se)
    assert s.max_pairwise_z() <= 3.0


def test_condensate_probe_full_set_and_boundary():
    dom = DominatingStructure(BB, UNIFORM)
    tab = condensate_probe(BB, dom, UNIFORM, [1.0], [100, 1000], 2)
    assert all(r.empirical == 1.0 for r in tab.rows)
    b1 = WeightLaw.beta_poly(1.0)
    with pytest.raises(PreconditionError):
        condensate_probe(BB, DominatingStructure(BB, b1), b1, [0.05], [100], 1)
