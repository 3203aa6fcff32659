import math

import numpy as np
import pytest

from mismatch_lasso.quadrature import (
    gaussian_excess_sq,
    gaussian_expect,
    rademacher_atoms,
    rademacher_expect,
)

import oracles


@pytest.mark.parametrize(
    "fn",
    [
        lambda t: np.sign(t) * t,
        lambda t: np.tanh(t) * t,
        lambda t: t * t,
        lambda t: np.abs(t) ** 3,
    ],
)
def test_gaussian_expect_matches_adaptive_quadrature(fn):
    assert gaussian_expect(fn) == pytest.approx(oracles.normal_expect(fn), abs=1e-10)


def test_gaussian_expect_nonunit_sigma():
    val = gaussian_expect(lambda t: np.sign(t) * t, sigma=2.5)
    assert val == pytest.approx(2.5 * math.sqrt(2 / math.pi), abs=1e-10)


def test_gaussian_expect_breakpoints_handle_interior_kinks():
    delta = 1.7
    fn = lambda t: np.clip(t, -delta, delta) * t
    val = gaussian_expect(fn, breakpoints=(delta,))
    assert val == pytest.approx(oracles.normal_expect(fn), abs=1e-10)


def test_odd_integrands_cancel_exactly():
    assert gaussian_expect(lambda t: np.abs(t) * t) == 0.0
    assert gaussian_expect(lambda t: t * t * t) == 0.0


def test_gaussian_excess_sq_matches_closed_form():
    taus = [0.0, 0.2, 0.9, 1.7, 3.1, 6.0]
    vals = gaussian_excess_sq(taus)
    for tau, val in zip(taus, vals):
        assert val == pytest.approx(oracles.excess_sq_closed(tau), abs=1e-12)


def test_rademacher_atoms_cover_all_patterns():
    atoms = rademacher_atoms(3)
    assert atoms.shape == (8, 3)
    assert len({tuple(row) for row in atoms.tolist()}) == 8
    assert set(np.unique(atoms)) == {-1, 1}
    with pytest.raises(ValueError):
        rademacher_atoms(21)


def test_rademacher_expect_moments():
    assert rademacher_expect(lambda S: S[:, 0] * S[:, 1], 2) == 0.0
    assert rademacher_expect(lambda S: S[:, 0] ** 2, 2) == 1.0
