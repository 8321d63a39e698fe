from dataclasses import fields

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from patree.fitness import DominatingStructure, FitnessModel, Identity, Power, g_tilde, g_tilde_star
from patree.simulator import coupled_grow, grow_one
from patree.simulator import kernels
from patree.theory import NON_CONDENSATION, classify_regime, malthusian, psi_mass
from patree.urns import build_urn_d, build_urn_e, check_urn_d_formulas, check_urn_e_formulas, discretize, leading_eig
from patree.weightlaw import Interval, IntervalUnion, WeightLaw, closed, dyadic_cells

SETTINGS = settings(max_examples=25, deadline=None, derandomize=True,
                    suppress_health_check=[HealthCheck.too_slow])


@st.composite
def laws(draw):
    kind = draw(st.sampled_from(["uniform", "beta", "atoms", "piecewise"]))
    if kind == "uniform":
        return WeightLaw.uniform(draw(st.floats(0.5, 3.0)))
    if kind == "beta":
        return WeightLaw.beta_poly(draw(st.floats(-0.5, 5.0)))
    if kind == "atoms":
        vals = draw(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5, unique=True))
        w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=len(vals), max_size=len(vals))))
        return WeightLaw.atoms(vals, w / w.sum())
    k = draw(st.integers(1, 4))
    bp = np.linspace(0.0, 1.0, k + 1)
    d = np.array(draw(st.lists(st.floats(0.1, 2.0), min_size=k, max_size=k)))
    return WeightLaw.piecewise(bp, d / (d * np.diff(bp)).sum())


@st.composite
def atomic_laws(draw, max_size=3):
    vals = draw(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=max_size, unique=True))
    w = np.array(draw(st.lists(st.floats(0.1, 1.0), min_size=len(vals), max_size=len(vals))))
    return WeightLaw.atoms(vals, w / w.sum())


@SETTINGS
@given(laws(), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8))
def test_measure_is_additive(law, cuts):
    pts = np.unique(np.clip(np.array(cuts), 0, 1)) * law.w_star
    if pts.size < 2:
        return
    pieces = [Interval(a, b, i == 0, True) for i, (a, b) in enumerate(zip(pts[:-1], pts[1:]))]
    whole = law.measure(IntervalUnion.of(closed(pts[0], pts[-1])))
    parts = sum(law.measure(IntervalUnion.of(p)) for p in pieces)
    assert parts == pytest.approx(whole, abs=1e-12)


@SETTINGS
@given(laws(), st.integers(0, 2**32 - 1))
def test_samples_follow_the_measure(law, seed):
    n = 100_000
    x = np.sort(law.sample(np.random.default_rng(seed), n))
    for t in np.linspace(0, law.w_star, 20):
        emp = np.searchsorted(x, t, side="right") / n
        assert abs(emp - law.measure(IntervalUnion.of(closed(0.0, t)))) <= 2 / np.sqrt(n) * 3 / 2


@settings(max_examples=20, deadline=None, derandomize=True)
@given(st.integers(0, 6), st.floats(0.1, 10.0))
def test_dyadic_refinement(m, x):
    assert dyadic_cells(m + 1, x).refines(dyadic_cells(m, x))


@SETTINGS
@given(laws(), st.floats(0.1, 2.0))
def test_mean_increment_below_its_top(law, p):
    model = FitnessModel.product(Power(p), Identity())
    grid = np.linspace(0, law.w_star, 64)
    top = g_tilde_star(model, law)
    assert np.all(g_tilde(model, law, grid) <= top + 1e-12)


@SETTINGS
@given(laws(), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_near_maximal_sets_nested(law, e1, e2):
    dom = DominatingStructure(FitnessModel.bianconi_barabasi(law.w_star), law)
    lo, hi = sorted((e1, e2))
    assert law.measure(dom.m_epsilon(lo)) <= law.measure(dom.m_epsilon(hi)) + 1e-15
    small = dom.m_epsilon(lo)
    probe = np.linspace(0, law.w_star, 101)
    assert np.all(~small.contains(probe) | dom.m_epsilon(hi).contains(probe))


@SETTINGS
@given(atomic_laws(4))
def test_growth_rate_normalises_and_solves(law):
    model = FitnessModel.bianconi_barabasi(law.w_star)
    if classify_regime(model, law).regime != NON_CONDENSATION:
        return
    lam = malthusian(model, law)[0]
    assert psi_mass(model, law, None, lam) == pytest.approx(1.0, abs=2e-10)
    assert psi_mass(model, law, None, lam * 1.01) < psi_mass(model, law, None, lam)


@SETTINGS
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=300),
       st.lists(st.tuples(st.integers(0, 299), st.floats(0.0, 5.0)), max_size=50))
def test_fenwick_prefix_sums(values, updates):
    vals = np.array(values)
    size = 1
    while size < vals.size:
        size *= 2
    tree = np.zeros(size + 1)
    kernels.fen_build(tree, vals)
    for pos, delta in updates:
        if pos < vals.size:
            vals[pos] += delta
            kernels.fen_add(tree, pos, delta)
    cum = np.cumsum(vals)
    for k in range(1, vals.size + 1, max(1, vals.size // 17)):
        assert kernels.fen_prefix(tree, k) == pytest.approx(cum[k - 1], rel=1e-12, abs=1e-12)


def _same(x, y):
    for f in fields(x):
        u, v = getattr(x, f.name), getattr(y, f.name)
        if f.name == "z_sum":
            np.testing.assert_allclose(u, v, rtol=1e-12)
        else:
            np.testing.assert_array_equal(u, v)


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(1, 400), st.integers(1, 8), st.integers(1, 6))
def test_measure_merge_is_associative(seed, n, bins, k_max):
    rng = np.random.default_rng(seed)
    law = WeightLaw.uniform()
    model = FitnessModel.bianconi_barabasi()
    a, b, c = (grow_one(model, law, n, rng, bins=bins, k_max=k_max, stride=1).measures for _ in range(3))
    _same(a.merge(b).merge(c), a.merge(b.merge(c)))
    _same(a.merge(b), b.merge(a))
    assert a.merge(b).check() == []


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.01, 2.0))
def test_tree_invariants(seed, alpha, beta, h):
    from patree.fitness import Constant
    model = FitnessModel.separable_sum(alpha, beta, Identity(), Power(2.0), h=Constant(h))
    run = grow_one(model, WeightLaw.beta_poly(1.0), 3000, np.random.default_rng(seed), bins=4, k_max=8)
    assert run.tree.check() == []
    m = run.measures
    assert m.check() == []
    assert m.n_geq[1:].sum() + m.degree_excess == m.n_steps


@settings(max_examples=10, deadline=None, derandomize=True)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.9), st.floats(-0.5, 4.0))
def test_coupling_never_violates(seed, eps, alpha):
    law = WeightLaw.beta_poly(alpha)
    model = FitnessModel.bianconi_barabasi()
    ct = coupled_grow(model, DominatingStructure(model, law), eps, 2000, np.random.default_rng(seed))
    assert ct.ok
    Zm, Zt, Zp = ct.Z
    assert Zm <= Zt <= Zp


@SETTINGS
@given(st.integers(2, 4), st.floats(0.1, 1.5), st.integers(0, 2**32 - 1))
def test_envelopes_hold(m, p, seed):
    model = FitnessModel.product(Power(p), Identity())
    d = discretize(model, WeightLaw.beta_poly(1.0), m)
    assert d.check_bounds(np.random.default_rng(seed), 1000) == []
    assert np.all(d.g_min <= d.g_max) and np.all(d.h_min <= d.h_max)


@SETTINGS
@given(atomic_laws(3))
def test_urn_closed_forms_on_atomic_laws(law):
    model = FitnessModel.bianconi_barabasi(law.w_star)
    disc = discretize(model, law, 1)
    urn = build_urn_e(disc)
    eig = leading_eig(urn)
    rep = check_urn_e_formulas(urn, eig)
    assert rep.max_residual < 1e-8 and rep.B == 0 and rep.E == 0
    if classify_regime(model, law).regime == NON_CONDENSATION:
        assert eig.lam == pytest.approx(malthusian(model, law)[0], abs=1e-8)
    urn = build_urn_d(disc, 2)
    rep = check_urn_d_formulas(urn, leading_eig(urn))
    assert rep.max_residual < 1e-8 and rep.residual_degree_exact < 1e-8
