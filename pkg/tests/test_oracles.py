import math

import numpy as np
import pytest

from gappde.fredholm import gap_probability
from gappde.geometry import Region, make_endpoint_config as mk
from gappde.oracles import (REAL_LINE, OracleResult, analytic_n1, direct_tau, gue_batch, partition_function,
                            partition_function_closed, sample_gue, thread_count)


def test_analytic_examples():
    assert analytic_n1(mk([0.0])).value == 0.5
    assert abs(analytic_n1(mk([1.0])).value - 0.9213503964748575) < 1e-15
    assert analytic_n1(REAL_LINE).value == 1.0


def test_analytic_tail_no_cancellation():
    v = analytic_n1(mk([-6.0])).value
    assert v == pytest.approx(0.5 * math.erfc(6.0), rel=1e-14)


def test_direct_n2_closed_form():
    r = direct_tau(2, mk([0.0]))
    assert abs(r.value - (0.25 - 1 / (2 * math.pi))) < 1e-13
    assert r.method == "direct_quadrature" and 0 <= r.error_bound < 1e-10
    assert direct_tau(2, REAL_LINE).value == pytest.approx(1.0, abs=1e-14)


def test_direct_n3_matches_fredholm():
    assert abs(direct_tau(3, mk([0.0])).value - gap_probability(3, mk([0.0]))) < 1e-8


def test_direct_n1_matches_analytic():
    for c in (mk([0.3]), mk([-1.0, 1.0], "Jc"), mk([-0.5, 0.5, 1.5], "J")):
        assert abs(direct_tau(1, c).value - analytic_n1(c).value) < 1e-13


def test_direct_monotone():
    small = direct_tau(3, Region(((-1.0, 1.0),))).value
    big = direct_tau(3, Region(((-1.5, 1.5),))).value
    assert small < big


def test_direct_rejects_large_n():
    with pytest.raises(ValueError):
        direct_tau(4, mk([0.0]))


def test_partition_function():
    for n in (1, 2, 3):
        assert partition_function(n) == pytest.approx(partition_function_closed(n), rel=1e-14)


def test_oracle_result_method_checked():
    with pytest.raises(ValueError):
        OracleResult(0.5, 0.0, "guess")


def test_gue_batch_moments():
    H = gue_batch(np.random.default_rng(0), 3, 200_000)
    assert np.allclose(H, np.conj(np.transpose(H, (0, 2, 1))))
    assert abs(np.var(H[:, 0, 0].real) - 0.5) < 5e-3
    assert abs(np.var(H[:, 0, 1].real) - 0.25) < 5e-3
    assert abs(np.var(H[:, 0, 1].imag) - 0.25) < 5e-3


def test_mc_small_count():
    r = sample_gue(2, 1, 7, mk([0.0]))
    assert r.value in (0.0, 1.0) and r.samples == 1
    with pytest.raises(ValueError):
        sample_gue(2, 0, 7, mk([0.0]))


def test_mc_reproducible_and_thread_independent():
    a = sample_gue(3, 60_000, 42, mk([0.5]), threads=1)
    b = sample_gue(3, 60_000, 42, mk([0.5]), threads=4)
    assert a.value == b.value and a.stderr == b.stderr
    assert sample_gue(3, 60_000, 43, mk([0.5])).value != a.value


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("GAPPDE_THREADS", "1")
    assert thread_count() == 1
    monkeypatch.setenv("GAPPDE_THREADS", "junk")
    assert thread_count() >= 1


@pytest.mark.parametrize("n,exact", [(1, 0.5), (2, 0.25 - 1 / (2 * math.pi))])
def test_mc_calibration(n, exact):
    r = sample_gue(n, 1_000_000, 2024, mk([0.0]))
    assert abs(r.value - exact) < 3 * r.stderr
