import math
import warnings

import numpy as np
import pytest
from scipy.special import erf

from gappde.equations import DataBundle, lookup
from gappde.fredholm import log_gap
from gappde.painleve import (compare_to_fredholm, fredholm_r, integrate_p4, integrate_p4_span, p4_along_fredholm,
                             p4_residual, p4_rhs, project_rpp, seed, single_endpoint)


def n1_exact(x):
    r = 2 * math.exp(-x * x) / (math.sqrt(math.pi) * (1 + erf(x)))
    rp = -2 * x * r - r * r
    rpp = -2 * r - 2 * x * rp - 2 * r * rp
    return r, rp, rpp


def test_vacuum():
    assert p4_residual(0.0, 0.0, 0.0, 1.3, 4) == 0.0


@pytest.mark.parametrize("x", [-1.5, 0.0, 0.7, 2.5])
def test_exact_n1_solution(x):
    assert p4_residual(*n1_exact(x), x, 1) < 1e-10


def test_jet_data_n2():
    assert p4_residual(*seed(2, 1.0, project=False), 1.0, 2) < 1e-6


def test_explicit_ode_preserves_first_integral():
    # d/dxi of the first integral is 2 r'' (r''' - rhs) for every state
    rng = np.random.default_rng(0)
    for _ in range(50):
        r, rp, rpp, xi = rng.normal(size=4)
        n = int(rng.integers(1, 9))
        r3 = p4_rhs(xi, (r, rp, rpp), n)[2]
        d = 2 * rpp * r3 - 8 * (xi * rp - r) * xi * rpp + 8 * rp * rpp * (rp + 2 * n) + 4 * rp * rp * rpp
        assert abs(d) < 1e-12 * (1 + abs(rpp) * (abs(r3) + 10 * (1 + abs(xi)) ** 3))


def test_projection_keeps_branch():
    r, rp, rpp = n1_exact(0.3)
    assert project_rpp(r, rp, rpp * 1.001, 0.3, 1) == pytest.approx(rpp, rel=1e-12)
    assert project_rpp(r, rp, -1.0, 0.3, 1) < 0


def test_seed_matches_exact():
    got = seed(1, 0.2)
    assert np.allclose(got, n1_exact(0.2), rtol=1e-11, atol=0)


def test_n1_integration_to_zero():
    traj = integrate_p4(1, 3.0, 0.0)
    assert traj.completed and traj.direction == -1
    assert abs(traj.r[-1] - 2 / math.sqrt(math.pi)) < 1e-6
    assert compare_to_fredholm(traj) < 1e-6
    assert traj.conserved()


def test_degenerate_span():
    traj = integrate_p4(1, 0.5, 0.5)
    assert len(traj.xi) == 1 and traj.r[0] == seed(1, 0.5)[0]
    assert compare_to_fredholm(traj) < 1e-15


def test_n4_from_the_right():
    traj = integrate_p4(4, 4.0, -1.0)
    assert len(traj.xi) == 25 and compare_to_fredholm(traj) < 1e-5
    assert traj.conserved()


def test_span_seeds_inside():
    traj = integrate_p4_span(2, -1.0, 2.0, samples=13)
    assert -1.0 < traj.stats["seed"] < 2.0 and len(traj.xi) == 13
    assert np.all(np.diff(traj.xi) > 0)
    assert compare_to_fredholm(traj) < 1e-8


def test_inflections_are_recorded_not_fatal():
    traj = integrate_p4(1, 0.0, 1.0, init=(1.0, 1.0, 0.5))
    assert traj.completed and len(traj.inflections) == 1


def test_failure_returns_partial_trajectory():
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore")
        traj = integrate_p4(1, 0.0, 1e3, init=(1.0, 1.0, 1.0))
    assert not traj.completed and "xi=" in traj.failure


def test_right_tail_behaviour():
    xs = np.linspace(1.0, 6.0, 11)
    r = np.array([fredholm_r(3, x) for x in xs])
    T = np.array([log_gap(3, single_endpoint(x)) for x in xs])
    assert np.all(r > 0) and np.all(np.diff(r) < 0) and r[-1] < 1e-10
    assert np.all(np.diff(T) > 0) and abs(T[-1]) < 1e-10


def test_csv_export():
    traj = integrate_p4(1, 1.0, 0.0, samples=3)
    lines = traj.to_csv().strip().splitlines()
    assert lines[0] == "xi,r,rp,rpp,residual" and len(lines) == 4


def test_residual_along_fredholm_not_projected():
    res = p4_along_fredholm(2, [0.0, 1.0])
    assert np.all(res < 1e-6) and np.all(res > 0)


def test_registry_P4_agrees():
    b = DataBundle(2, single_endpoint(0.5), T_order=3)
    lhs, _ = lookup("APPX.P4").fn(b)
    assert abs(math.fsum(lhs)) / math.fsum(abs(t) for t in lhs) == pytest.approx(
        p4_residual(b.T[(0,)], b.T[(0, 0)], b.T[(0, 0, 0)], 0.5, 2), rel=1e-12)
