import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.integrate import trapezoid

from weakinfo.convergence import (
    AnticipationFamily,
    binomial_endpoint_law,
    convergence_sweep,
    discretize_anticipation,
    embed,
    lemma_integral_check,
    limit_variance,
    parse_family,
    walk_economy,
)
from weakinfo.errors import ValidationError
from weakinfo.lattice import reference_masses
from weakinfo.utility import UtilitySpec
from weakinfo.valuation import GaussianLaw

LOG = UtilitySpec.log()


@pytest.mark.parametrize("walk", ["binomial", "trinomial", "multinomial:4"])
def test_flat_family_reproduces_reference(walk):
    fam = AnticipationFamily.flat(limit_variance(walk))
    disc = discretize_anticipation(fam, 12, walk)
    ref = reference_masses(disc.economy, disc.economy.classes())
    for c, r in zip(disc.economy.classes(), ref):
        assert disc.nu.mass(c) == pytest.approx(r, rel=1e-15, abs=0)


def test_tilted_binomial_masses_exact():
    theta = 0.5
    fam = AnticipationFamily.tilted_gaussian(theta)
    disc = discretize_anticipation(fam, 4)
    weights = {(j, 4 - j): F(math.comb(4, j), 16) for j in range(5)}
    tilt = {c: math.exp(theta * (2 * c[0] - 4) / 2) for c in weights}
    z = math.fsum(float(w) * tilt[c] for c, w in weights.items())
    for c, w in weights.items():
        assert disc.nu.mass(c) == pytest.approx(float(w) * tilt[c] / z, rel=1e-14)


def test_embedding_points():
    assert embed((3, 1), 4) == pytest.approx(1.0)
    assert embed((1, 1, 0), 2) == pytest.approx(2 / math.sqrt(2))
    assert embed((0, 2, 0), 2) == 0


def test_walk_economy_limit_variance():
    for walk, k in (("binomial", 2), ("trinomial", 3), ("multinomial:5", 5)):
        econ = walk_economy(walk, 6)
        assert econ.k == k
        p = np.array([float(v) for v in econ.risk_neutral])
        v = np.array([(k - 1) / 2 - i for i in range(k)])
        assert 4 * float(p @ v**2) == pytest.approx(limit_variance(walk))


def test_exact_walk_economy():
    econ = walk_economy("trinomial", 3, exact=True)
    assert econ.risk_neutral == (F(1, 4), F(1, 2), F(1, 4))


def test_bad_walk():
    with pytest.raises(ValidationError):
        walk_economy("pentagon", 3)
    with pytest.raises(ValidationError):
        parse_family("wave:2", "binomial")


def test_capped_tilt_is_bounded():
    fam = AnticipationFamily.tilted_gaussian(0.5)
    sups = [discretize_anticipation(fam, n).sup_density for n in (64, 256, 1024, 4096)]
    assert max(sups) <= fam.bound * 1.001
    assert math.isfinite(fam.bound)


def test_capped_normaliser_integrates_to_one():
    fam = AnticipationFamily.tilted_gaussian(0.8, variance=2.0, cap_sigmas=1.5)
    nodes, weights = GaussianLaw(0, 2.0).rule(1024)
    # the kink at the cap limits accuracy of the polynomial rule
    assert math.fsum(weights * fam.xi(nodes)) == pytest.approx(1.0, abs=1e-4)
    y = np.linspace(-30, 30, 600001)
    dens = np.exp(-y**2 / 4) / math.sqrt(4 * math.pi)
    assert trapezoid(fam.xi(y) * dens, y) == pytest.approx(1.0, abs=1e-9)


def test_density_converges_at_fixed_points():
    fam = AnticipationFamily.tilted_gaussian(0.5, cap_sigmas=None)
    points = (-1.0, -0.5, 0.0, 0.5, 1.0)
    devs = []
    for n in (16, 64, 256, 1024, 4096):
        disc = discretize_anticipation(fam, n)
        lookup = {round(y, 12): disc.density[c] for c, y in disc.points.items()}
        devs.append([abs(lookup[y] - float(fam.xi(y))) for y in points])
    for i in range(len(points)):
        col = [d[i] for d in devs]
        assert all(a > b for a, b in zip(col, col[1:]))


def test_flat_sweep_error_vanishes():
    fam = AnticipationFamily.flat()
    rep = convergence_sweep(fam, UtilitySpec.power(0.5), 1.0, "binomial", [8, 16, 32])
    assert max(rep.errors) <= 1e-13


def test_sweep_log_converges_short():
    fam = AnticipationFamily.tilted_gaussian(0.5)
    rep = convergence_sweep(fam, LOG, 1.0, "binomial", [32, 64, 128, 256])
    assert rep.u_limit == pytest.approx(0.125, abs=1e-9)
    assert rep.tail_decreasing
    assert all(e >= 0 for e in rep.errors)
    assert rep.rows[-1].multiplier == pytest.approx(rep.multiplier_limit, rel=1e-3)


def test_sweep_trinomial_converges():
    fam = parse_family("tilt:0.5", "trinomial")
    rep = convergence_sweep(fam, LOG, 1.0, "trinomial", [16, 32, 64, 128])
    # variance-2 limit: theta**2 * var / 2
    assert rep.u_limit == pytest.approx(0.25, abs=1e-9)
    assert rep.tail_decreasing
    assert rep.errors[-1] < 1e-2


def test_sweep_threads_do_not_change_values():
    fam = AnticipationFamily.tilted_gaussian(0.5)
    a = convergence_sweep(fam, LOG, 1.0, "binomial", [16, 32, 64], threads=1)
    b = convergence_sweep(fam, LOG, 1.0, "binomial", [16, 32, 64], threads=3)
    assert [r.u_discrete for r in a.rows] == [r.u_discrete for r in b.rows]


def test_sweep_needs_increasing_n():
    with pytest.raises(ValidationError):
        convergence_sweep(AnticipationFamily.flat(), LOG, 1.0, "binomial", [64, 32])


def test_lemma_constant_function():
    rep = lemma_integral_check(lambda n, y: np.full_like(y, 2.5), binomial_endpoint_law, [4, 16, 64])
    assert all(d <= 1e-14 for d in rep.diffs)


def test_lemma_capped_square():
    f = lambda n, y: y**2 if n == 0 else np.minimum(y**2, n) / (1 + 1 / n)
    rep = lemma_integral_check(f, binomial_endpoint_law, [16, 64, 256, 1024])
    assert all(a > b for a, b in zip(rep.diffs, rep.diffs[1:]))
    assert rep.diffs[-1] < 1e-2
