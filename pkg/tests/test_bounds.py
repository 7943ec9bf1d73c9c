import math

import numpy as np
import pytest

from cayleylab.bounds import (BoundParams, ExponentialVolume, FreeGroupVolume,
                              PolynomialVolume, TabulatedVolume, _exp_tail,
                              heat_kernel_bound, hitting_bound_check,
                              occupation_split, return_bound,
                              volume_doubling_table, wsf_split)
from cayleylab.errors import InputError, ParameterError
from cayleylab.groups import FreeGroup, LamplighterZ2OverZ, ZPower, parse_group
from cayleylab.metric import build_ball
from cayleylab.walk import make_step_distribution


def test_return_bound_constant_volume_closed_form():
    """V = 1 collapses the bound to m * int_0^1 e^{-lambda m} = 1 - e^{-m}."""
    v1 = PolynomialVolume(0.0)
    for m in (1, 5, 40):
        got = return_bound(v1, m, BoundParams(c=0.5, c_prime=1.0))
        assert abs(got - (1 - math.exp(-m))) < 1e-9


def test_return_bound_gamma_asymptote():
    """r^D volume: bound -> Gamma(D/2+1) m^{-D/2}; within 1% at m = 1e4."""
    got = return_bound(PolynomialVolume(3.0), 10_000,
                       BoundParams(c=1 - 1e-12, c_prime=1.0))
    want = math.gamma(2.5) * 10_000 ** -1.5
    assert abs(got - want) / want < 0.01


def test_return_bound_monotone_in_m():
    v = PolynomialVolume(3.0)
    p = BoundParams(c=0.5)
    assert return_bound(v, 100, p) >= return_bound(v, 200, p)


def test_return_bound_quadrature_tolerance():
    v = FreeGroupVolume(2)
    p = BoundParams(c=0.5)
    a = return_bound(v, 1000, p, rel_tol=1e-6)
    b = return_bound(v, 1000, p, rel_tol=5e-7)
    assert abs(a - b) < 1e-5 * abs(a)


def test_return_bound_anti_monotone_in_volume():
    """A pointwise larger V gives a pointwise smaller bound."""
    small = PolynomialVolume(2.0)
    large = PolynomialVolume(3.0)  # r^3 >= r^2 for r >= 1 (clamped below)
    p = BoundParams(c=0.5)
    for m in (4, 32, 256, 2048):
        assert return_bound(small, m, p) >= return_bound(large, m, p)
    tab = TabulatedVolume(build_ball(ZPower(3), 8))
    poly = PolynomialVolume(3.0)  # V_Z3(r) >= r^3 pointwise
    for m in (4, 32, 256):
        assert return_bound(poly, m, p) >= return_bound(tab, m, p)


def test_return_bound_requires_positive_m():
    with pytest.raises(InputError):
        return_bound(PolynomialVolume(2.0), 0, BoundParams())


def test_heat_kernel_bound_arithmetic():
    v1 = PolynomialVolume(0.0)
    got = heat_kernel_bound(1, 1, v1, BoundParams(c=1 - 1e-12, c_dprime=1.0,
                                                  k=2))
    assert abs(got - (1 + math.exp(-1))) < 1e-9


def test_heat_kernel_bound_vanishes_for_large_m():
    v = PolynomialVolume(3.0)
    assert heat_kernel_bound(4, 10**8, v, BoundParams(c=0.5, k=3)) < 1e-6


def test_occupation_split_ratio_bounded_exponential_volume():
    """Tail/r^2 spread < 10 and total/(r^2 sqrt(log V)) spread < 4."""
    v = FreeGroupVolume(2)
    p = BoundParams(c=0.8, k=3)
    grid = (4, 8, 16, 32, 64, 128)
    tails = [occupation_split(r, v, p).tail_value / r**2 for r in grid]
    assert max(tails) / min(tails) < 10
    totals = [occupation_split(r, v, p).total
              / (r**2 * math.sqrt(v.log_value(r))) for r in grid]
    assert max(totals) / min(totals) < 4


def test_occupation_split_exponential_part_matches_geometric_series():
    """Direct tail summation vs the closed-form geometric sum (1e-6 rel)."""
    v = FreeGroupVolume(2)
    p = BoundParams(c=0.5, k=3)
    for r in (4, 8, 16):
        res = occupation_split(r, v, p)
        big_m = res.split_point
        beta = p.c ** 2 / r ** 2
        log_vr = v.log_value(float(r))
        direct = _exp_tail(big_m + 1, log_vr, beta)
        q = math.exp(-beta)
        closed = math.exp(log_vr) * q ** (big_m + 1) / (1 - q)
        assert abs(direct - closed) < 1e-6 * closed


def test_wsf_split_ratio_bounded():
    v = FreeGroupVolume(2)
    p = BoundParams(c=0.8, k=5)
    grid = (4, 8, 16, 32, 64)
    tails = [wsf_split(r, v, p).tail_value / r**4 for r in grid]
    assert max(tails) / min(tails) < 10


def test_wsf_split_weight_sanity():
    """(m+1)-weighted prefix bound = (split+1) times the unweighted one."""
    v = FreeGroupVolume(2)
    occ = occupation_split(8, v, BoundParams(c=0.5, k=5))
    wsf = wsf_split(8, v, BoundParams(c=0.5, k=5, alpha=0.5 ** -2))
    assert wsf.split_point == occ.split_point
    big_m = occ.split_point
    assert abs(wsf.prefix_bound - (big_m + 1) * occ.prefix_bound) < 1e-9


def test_polynomial_plain_split_reproduces_expected_orders():
    """With V = r^D and the split at alpha r^2, the tails scale like r^2
    (occupation) and r^4 (forest)."""
    v = PolynomialVolume(5.0)
    p_occ = BoundParams(c=0.5, k=5)
    p_wsf = BoundParams(c=0.5, k=5)
    grid = (8, 16, 32, 64, 128)
    occ = [occupation_split(r, v, p_occ, split_at_log=False).tail_value / r**2
           for r in grid]
    assert max(occ) / min(occ) < 3
    wsf = [wsf_split(r, v, p_wsf, split_at_log=False).tail_value / r**4
           for r in grid]
    assert max(wsf) / min(wsf) < 3


def test_split_parameter_guards():
    v = FreeGroupVolume(2)
    with pytest.raises(ParameterError):
        occupation_split(4, v, BoundParams(c=0.5, k=2))
    with pytest.raises(ParameterError):
        wsf_split(4, v, BoundParams(c=0.5, k=4))
    with pytest.raises(ParameterError):
        BoundParams(c=1.5).validate()


def test_split_tails_decrease_in_k():
    v = FreeGroupVolume(2)
    for r in (4, 16):
        tails = [occupation_split(r, v, BoundParams(c=0.5, k=k)).tail_value
                 for k in (3, 4, 5)]
        assert tails[0] >= tails[1] >= tails[2]


def test_volume_doubling_table_z2():
    """Polynomial growth fails the a^k lower bound for k > D: ratio -> 0."""
    oracle = build_ball(ZPower(2), 12)
    rows = volume_doubling_table(oracle, 3)
    at_r1 = {row.a: row.ratio for row in rows if row.r == 1}
    assert at_r1[1] == 1.0
    assert all(at_r1[a + 1] < at_r1[a] for a in range(1, 12))
    assert at_r1[12] < 0.2 * at_r1[2]


def test_volume_doubling_table_lamplighter():
    oracle = build_ball(LamplighterZ2OverZ(), 8)
    rows = volume_doubling_table(oracle, 2)
    assert all(row.ratio == 1.0 for row in rows if row.a == 1)
    # exponential growth keeps the k=2 ratio away from zero (min is 0.611)
    assert min(row.ratio for row in rows) > 0.5


def test_hitting_bound_f2_exact_decay():
    """P(hit x) = 3^{-|x|} on the 4-regular tree; D=2 dominance holds."""
    model = FreeGroup(2)
    dist = make_step_distribution(model, lazy=False)
    oracle = build_ball(model, 8)
    rng = np.random.default_rng(41)
    report = hitting_bound_check(oracle, dist, 2, 20_000, rng,
                                 distances=(2, 4, 8), escape_factor=4)
    for row in report.rows:
        exact = 3.0 ** -row.distance
        assert abs(row.p_hat - exact) <= 3 * max(row.sem, 1e-4)
    assert report.dominance_holds
    # the exponential decay also beats steeper fitted powers at distance 8
    p2 = next(r.p_hat for r in report.rows if r.distance == 2)
    p8 = next(r.p_hat for r in report.rows if r.distance == 8)
    for degree in (3, 4):
        assert p8 <= p2 * 2 ** degree / 8 ** degree


def test_hitting_bound_distance_zero_excluded_from_fit():
    model = FreeGroup(2)
    dist = make_step_distribution(model, lazy=False)
    oracle = build_ball(model, 4)
    rng = np.random.default_rng(42)
    report = hitting_bound_check(oracle, dist, 2, 500, rng,
                                 distances=(0, 2, 4), escape_factor=4)
    zero = next(r for r in report.rows if r.distance == 0)
    assert zero.p_hat == 1.0
    assert report.fit_distance == 2


def test_hitting_bound_lamplighter_desk_scale():
    """At |x| in {2,4,8} the lamplighter's measured local decay exponent is
    only ~1.5-2.8, so the D=4 fit-at-2 bound cannot dominate yet (the
    superpolynomial regime needs larger |x|); D=1 does dominate."""
    model = LamplighterZ2OverZ()
    dist = make_step_distribution(model, lazy=False)
    oracle = build_ball(model, 8)
    rng = np.random.default_rng(43)
    report1 = hitting_bound_check(oracle, dist, 1, 4000, rng,
                                  distances=(2, 4, 8), escape_factor=4)
    assert report1.dominance_holds
    report4 = hitting_bound_check(oracle, dist, 4, 4000, rng,
                                  distances=(2, 4, 8), escape_factor=4)
    assert not report4.dominance_holds


def test_hitting_bound_requires_superpolynomial_growth():
    model = ZPower(3)
    dist = make_step_distribution(model, lazy=False)
    oracle = build_ball(model, 4)
    with pytest.raises(InputError):
        hitting_bound_check(oracle, dist, 2, 100, np.random.default_rng(44))


def test_tabulated_volume_interpolation_and_extrapolation():
    oracle = build_ball(FreeGroup(2), 6)
    v = TabulatedVolume(oracle)
    for r in range(7):
        assert abs(v(float(r)) - oracle.volume(r)) < 1e-6 * oracle.volume(r)
    assert oracle.volume(3) < v(3.5) < oracle.volume(4)
    assert v.extrapolates_beyond == 6
    assert v(8.0) > v(6.0)
    assert v(0.0) == 1.0


def test_exponential_volume_basics():
    v = ExponentialVolume(3.0, coeff=2.0)
    assert v(0.0) == 1.0
    assert abs(v(4.0) - 2 * 81) < 1e-9
    with pytest.raises(InputError):
        ExponentialVolume(0.9)
