import math

import numpy as np
import pytest
from scipy import integrate

from patree.errors import DomainError
from patree.weightlaw import IntervalUnion, WeightLaw, closed, dyadic_cells, left_open


def test_single_atom_always_drawn():
    law = WeightLaw.atoms([0.5], [1.0])
    assert np.all(law.sample(np.random.default_rng(0), 1000) == 0.5)


def test_uniform_sample_mean():
    x = WeightLaw.uniform().sample(np.random.default_rng(1), 100_000)
    assert abs(x.mean() - 0.5) < 0.005


def test_beta_poly_sample_mean():
    x = WeightLaw.beta_poly(2.0).sample(np.random.default_rng(2), 100_000)
    assert abs(x.mean() - 0.25) < 0.005


def test_expectations():
    assert WeightLaw.uniform().expect(lambda w: w) == pytest.approx(0.5, abs=1e-12)
    law = WeightLaw.atoms([0.2, 0.8], [0.5, 0.5])
    assert law.expect(lambda w: w) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 4.0])
def test_singular_ratio_expectation(alpha):
    # independent route: scipy quad straight on the density (alpha + 1)(1 - w)^alpha
    ref = integrate.quad(lambda w: w * (alpha + 1) * (1 - w) ** (alpha - 1), 0, 1)[0]
    got = WeightLaw.beta_poly(alpha).expect(lambda w: w / (1 - w))
    assert ref == pytest.approx(1 / alpha, abs=1e-8)
    assert got == pytest.approx(1 / alpha, abs=1e-6)


def test_divergent_expectation_is_infinite():
    assert math.isinf(WeightLaw.uniform().expect(lambda w: w / (1 - w)))


def test_measures():
    u = WeightLaw.uniform()
    assert u.measure(IntervalUnion.of(closed(0, 0.25))) == pytest.approx(0.25)
    for law in (u, WeightLaw.beta_poly(2), WeightLaw.atoms([0.1, 0.7], [0.3, 0.7])):
        assert law.measure(IntervalUnion.of(closed(0, law.w_star))) == pytest.approx(1.0, abs=1e-12)
    assert WeightLaw.beta_poly(2).measure(IntervalUnion.of(closed(0.9, 1))) == pytest.approx(1e-3, rel=1e-9)


def test_atom_boundaries_follow_closedness():
    law = WeightLaw.atoms([0.5, 1.0], [0.5, 0.5])
    assert law.measure(IntervalUnion.of(left_open(0.5, 1.0))) == pytest.approx(0.5)
    assert law.measure(IntervalUnion.of(closed(0.5, 1.0))) == pytest.approx(1.0)


def test_dyadic_cells():
    d1 = dyadic_cells(1, 1.0)
    c = d1.cells
    assert (c[0].lo, c[0].hi, c[0].lo_closed) == (0.0, 0.5, True)
    assert (c[1].lo, c[1].hi, c[1].lo_closed) == (0.5, 1.0, False)
    d0 = dyadic_cells(0, 2.0)
    assert len(d0.cells) == 1 and d0.cells[0].hi == 2.0
    assert dyadic_cells(2, 1.0).locate(0.3) == 2
    assert dyadic_cells(3, 1.0).refines(dyadic_cells(2, 1.0))


def test_bad_atoms_rejected():
    with pytest.raises(DomainError):
        WeightLaw.atoms([0.1, 0.2], [0.5, 0.4])
    with pytest.raises(DomainError):
        WeightLaw.atoms([0.1, 0.1], [0.5, 0.5])
    # tiny rounding gaps are renormalised
    law = WeightLaw.atoms([0.1, 0.2], [0.5, 0.5 + 5e-10])
    assert law.probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_piecewise_density():
    law = WeightLaw.piecewise([0.0, 0.5, 1.0], [0.4, 1.6])
    assert law.measure(IntervalUnion.of(closed(0, 0.5))) == pytest.approx(0.2)
    assert law.expect(lambda w: w) == pytest.approx(0.4 * 0.125 + 1.6 * 0.375)
