"""Property-based checks of exact identities (hypothesis)."""

import math

import numpy as np
from hypothesis import assume, given, settings, strategies as st

from gappde.equations import DataBundle, appendix_combination, lookup, redundancy_identities, two_endpoint_reduce
from gappde.geometry import LEFT_J, LEFT_JC, make_endpoint_config, parity_signs
from gappde.jets import JetField, multi_indices
from gappde.quadrature import KernelSpec, gauss_legendre, kernel_eval
from gappde.report import dumps, loads
from gappde.virasoro import apply_word, commutator_residual

finite = st.floats(-1.0, 1.0, allow_nan=False)
kinds = st.sampled_from([LEFT_J, LEFT_JC])


@st.composite
def configs(draw, min_n=1, max_n=3):
    N = draw(st.integers(min_n, max_n))
    pts = sorted(draw(st.lists(st.floats(-2.5, 2.5, allow_nan=False), min_size=N, max_size=N, unique=True)))
    assume(all(b - a > 0.05 for a, b in zip(pts, pts[1:])))
    return make_endpoint_config(pts, draw(kinds))


@st.composite
def jets(draw, order=3, min_n=1, max_n=3):
    c = draw(configs(min_n, max_n))
    vals = draw(st.lists(finite, min_size=len(multi_indices(c.N, order)), max_size=len(multi_indices(c.N, order))))
    return JetField(c.N, order, dict(zip(multi_indices(c.N, order), vals)), config=c)


def _bundle(jet, n=2):
    b = DataBundle(n, jet.config)
    b.__dict__["T"] = jet
    return b


def _signed(key, b, *args):
    lhs, rhs = lookup(key).fn(b, *args)
    return math.fsum(lhs) - math.fsum(rhs)


@given(jets(order=2))
def test_commutation_relations(jet):
    assert commutator_residual("com", jet) < 1e-12
    assert commutator_residual("com1", jet) < 1e-12


@given(jets(order=3), st.floats(-3, 3), st.floats(-3, 3), st.lists(st.integers(-1, 2), min_size=1, max_size=3))
def test_word_linearity(jet, alpha, beta, word):
    other = JetField(jet.N, jet.order, {a: math.sin(i + 1.0) for i, a in enumerate(multi_indices(jet.N, 3))},
                     config=jet.config)
    combo = jet * alpha + other * beta
    expect = alpha * apply_word(word, jet) + beta * apply_word(word, other)
    got = apply_word(word, combo)
    assert abs(got - expect) <= 1e-11 * (1 + abs(alpha) + abs(beta)) * 100


@settings(max_examples=50, deadline=None)
@given(jets(order=4, max_n=2), st.integers(1, 8))
def test_appendix_combination_vanishes(jet, n):
    assert appendix_combination(_bundle(jet, n)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(jets(order=3, min_n=2, max_n=2), st.integers(1, 8))
def test_redundancy_substitution(jet, n):
    s = two_endpoint_reduce(jet, jet.config, n)
    assume(abs(s.F_hat) > 1e-3)
    sub = redundancy_identities(s)
    assert sub["rA"] < 1e-10 and sub["SA"] < 1e-10


@settings(max_examples=50, deadline=None)
@given(jets(order=3, min_n=2, max_n=3), st.integers(1, 8))
def test_second_order_is_a_combination_of_third_order(jet, n):
    b = _bundle(jet, n)
    assume(abs(b.Fhat) > 1e-3)
    j, l = 0, 1
    X, Y = b.t((-1, -1), j), b.t((-1, -1), l)
    ej, el = _signed("THM5.Pj_g", b, j), _signed("THM5.Pj_g", b, l)
    ejl = _signed("THM6.Pjl_g", b, j, l)
    lhs = 16 * b.Fhat * _signed("THM8.second_order", b, j, l)
    rhs = (X * Y - ejl) ** 2 - (X * X - ej) * (Y * Y - el)
    scale = 1 + abs(X * Y) ** 2 + ejl**2 + abs((X * X - ej) * (Y * Y - el)) + 16 * abs(b.Fhat) * sum(
        abs(t) for t in sum(lookup("THM8.second_order").fn(b, j, l), []))
    assert abs(lhs - rhs) < 1e-12 * scale


@given(st.integers(1, 40), st.data())
def test_gauss_legendre_exactness(m, data):
    x, w = gauss_legendre(m)
    deg = data.draw(st.integers(0, 2 * m - 1))
    coeffs = np.array(data.draw(st.lists(finite, min_size=deg + 1, max_size=deg + 1)))
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.integ()(1.0) - poly.integ()(-1.0)
    assert abs(np.dot(w, poly(x)) - exact) < 1e-13 * (1 + np.abs(coeffs).sum())
    assert np.allclose(x, -x[::-1], atol=1e-16) and abs(w.sum() - 2) < 1e-14


@given(configs(1, 5))
def test_regions_partition_the_line(c):
    gap, eig = c.gap_region(), c.eigen_region()
    assert sorted(set(gap.finite_endpoints()) | set(eig.finite_endpoints())) == list(c.endpoints)
    pieces = sorted(gap.intervals + eig.intervals)
    assert pieces[0][0] == -math.inf and pieces[-1][1] == math.inf
    assert all(a[1] == b[0] for a, b in zip(pieces, pieces[1:]))
    for x in np.linspace(-3, 3, 37):
        if x not in c.endpoints:
            assert gap.contains(x) != eig.contains(x)


@given(configs(1, 5))
def test_parity_alternates(c):
    s = parity_signs(c)
    assert all(x * y == -1 for x, y in zip(s, s[1:])) and set(s) <= {1, -1}


@given(configs(1, 5))
def test_gap_region_roundtrip(c):
    # every endpoint bounds exactly one gap component once the J segments are dropped
    ends = []
    for lo, hi in c.gap_region().intervals:
        ends += [x for x in (lo, hi) if math.isfinite(x)]
    assert ends == list(c.endpoints)


@given(st.integers(1, 30), st.floats(-4, 4), st.floats(-4, 4))
def test_kernel_symmetry(n, x, y):
    spec = KernelSpec(n)
    assert abs(kernel_eval(spec, x, y) - kernel_eval(spec, y, x)) < 1e-13


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_json_float_roundtrip(x):
    assert loads(dumps([x]))[0] == x
