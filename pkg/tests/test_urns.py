import numpy as np
import pytest

from patree.errors import CapError, UnsupportedFormError
from patree.fitness import DominatingStructure, FitnessModel
from patree.simulator import regularized
from patree.theory import malthusian
from patree.urns import (build_urn_d, build_urn_e, check_urn_d_formulas, check_urn_e_formulas,
                         discretize, leading_eig, simulate_urn)
from patree.weightlaw import WeightLaw

BB = FitnessModel.bianconi_barabasi()
TWO = WeightLaw.atoms([0.5, 1.0], [0.5, 0.5])
ONE = WeightLaw.atoms([1.0], [1.0])
UNIT = FitnessModel.constant(1.0, 1.0)


def test_atomic_cells_are_exact():
    d = discretize(BB, TWO, 3)
    assert d.D == 2 and d.exact
    assert np.array_equal(d.g_min, [[0.5, 0.5], [1.0, 1.0]])
    assert np.array_equal(d.g_min, d.g_max)
    d = discretize(FitnessModel.classic_pa(), ONE, 1)
    assert d.D == 1 and d.g_min[0, 0] == 1.0 and d.h_min[0] == 1.0


def test_continuous_envelopes():
    d = discretize(BB, WeightLaw.uniform(), 2)
    rng = np.random.default_rng(0)
    assert d.check_bounds(rng, 1000) == []
    x = rng.random(1000)
    cell = d.locate(x)
    assert np.all(d.g_tilde_minus[cell] <= x + 1e-12) and np.all(x <= d.g_tilde_plus[cell] + 1e-12)
    assert d.p.sum() == pytest.approx(1.0)


def test_table_cells_and_unsupported_components():
    law = WeightLaw.atoms([0.5, 1.0], [0.5, 0.5])
    model = FitnessModel.from_table([[1, 2], [3, 4]], law, [1, 1])
    assert discretize(model, law, 1).D == 2
    u = WeightLaw.uniform()
    clamped = regularized(BB, DominatingStructure(BB, u), 0.1, "+")
    with pytest.raises(UnsupportedFormError):
        discretize(clamped, u, 2)


def test_edge_urn_structure():
    urn = build_urn_e(discretize(UNIT, ONE, 1))
    assert urn.type_count == 3
    assert list(urn.R) == [0, 1] and list(urn.U2) == [2]
    assert np.allclose(urn.gamma[:2], 1.0) and np.allclose(urn.a[:2], 1.0)
    urn = build_urn_e(discretize(BB, TWO, 1))
    assert urn.type_count == 2 + 4 + 2
    live = slice(0, 6)
    assert np.allclose((urn.a * urn.gamma)[live], urn.a[live])
    assert urn.check() == []


def test_edge_urn_eigenvalues():
    eig = leading_eig(build_urn_e(discretize(FitnessModel.constant(1.5, 1.5), ONE, 1)))
    assert eig.lam == pytest.approx(3.0, abs=1e-10)
    eig = leading_eig(build_urn_e(discretize(FitnessModel.constant(0.0, 1.0), ONE, 1)))
    assert eig.lam == pytest.approx(1.0, abs=1e-10)
    eig = leading_eig(build_urn_e(discretize(BB, TWO, 1)))
    assert eig.lam == pytest.approx(malthusian(BB, TWO)[0], abs=1e-8)


def test_edge_urn_closed_forms():
    urn = build_urn_e(discretize(UNIT, ONE, 1))
    eig = leading_eig(urn)
    assert eig.v[1] == pytest.approx(0.5, abs=1e-12)
    assert urn.a @ eig.v == pytest.approx(1.0)
    rep = check_urn_e_formulas(urn, eig)
    assert rep.B == 0.0 and rep.E == 0.0 and rep.max_residual < 1e-10
    urn = build_urn_e(discretize(BB, WeightLaw.uniform(), 3))
    rep = check_urn_e_formulas(urn, leading_eig(urn))
    assert rep.max_residual < 1e-8 and rep.B > 0 and rep.E > 0


def test_edge_urn_refinement_monotone():
    lams, slack = [], []
    for m in (2, 3, 4):
        urn = build_urn_e(discretize(BB, WeightLaw.uniform(), m))
        eig = leading_eig(urn)
        rep = check_urn_e_formulas(urn, eig)
        lams.append(eig.lam)
        slack.append(rep.B + rep.E)
    assert lams[0] >= lams[1] >= lams[2]
    assert slack[0] > slack[1] > slack[2]


def test_neighbourhood_urn_structure():
    urn = build_urn_d(discretize(UNIT, ONE, 1), 2)
    tuples = [u for k, u in urn.types if k == "tuple"]
    assert [len(u) for u in tuples] == [1, 2, 3]
    assert [urn.a[urn.index[("tuple", u)]] for u in tuples] == [1.0, 2.0, 3.0]
    assert urn.gamma[urn.index[("tuple", (0, 0, 0))]] == 0.0
    assert urn.gamma[urn.index[("tuple", (0, 0))]] == 1.0


def test_neighbourhood_urn_closed_forms():
    Fs = []
    for k in (2, 4, 6):
        urn = build_urn_d(discretize(UNIT, ONE, 1), k)
        eig = leading_eig(urn)
        rep = check_urn_d_formulas(urn, eig)
        assert rep.residual_closed_form < 1e-8 and rep.residual_overflow < 1e-10
        assert rep.residual_degree_exact < 1e-10
        assert rep.E == 0.0
        Fs.append(rep.F)
    assert Fs[0] > Fs[1] > Fs[2] > 0


def test_neighbourhood_urn_two_atoms():
    lams = []
    for k in (1, 2, 3):
        urn = build_urn_d(discretize(BB, TWO, 1), k)
        eig = leading_eig(urn)
        rep = check_urn_d_formulas(urn, eig)
        assert rep.max_residual < 1e-8 and rep.residual_degree_exact < 1e-8
        lams.append(eig.lam)
    assert lams[0] >= lams[1] >= lams[2] >= malthusian(BB, TWO)[0] - 1e-9


def test_neighbourhood_urn_cap():
    with pytest.raises(CapError):
        build_urn_d(discretize(BB, WeightLaw.uniform(), 4), 4)


def test_urn_law_of_large_numbers():
    n = 100_000
    for urn in (build_urn_e(discretize(BB, TWO, 1)), build_urn_d(discretize(BB, TWO, 1), 2)):
        eig = leading_eig(urn)
        x, total = simulate_urn(urn, n, np.random.default_rng(1))
        assert np.max(np.abs(x - eig.lam * eig.v)) <= 5 / np.sqrt(n)


def test_edge_urn_adds_two_balls_per_draw():
    urn = build_urn_e(discretize(BB, TWO, 1))
    x, total = simulate_urn(urn, 5_000, np.random.default_rng(2))
    assert np.all(np.diff(total) == 2)
    singles = x[urn.rule["single"]].sum()
    assert singles == pytest.approx(1.0, abs=1e-3)
