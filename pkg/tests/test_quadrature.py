import math

import numpy as np
import pytest

from gappde.geometry import Region
from gappde.quadrature import (KernelSpec, build_grid, gauss_legendre, hermite_functions, kernel_dx,
                               kernel_eval, kernel_matrix, tail_cutoff)


def test_gauss_legendre_closed_forms():
    x, w = gauss_legendre(1)
    assert x[0] == 0.0 and w[0] == 2.0
    x, w = gauss_legendre(2)
    assert np.allclose(x, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-16)
    assert np.allclose(w, [1, 1], atol=1e-15)
    assert abs(np.dot(w, x**2) - 2 / 3) < 1e-15


def test_gauss_legendre_rejects_zero():
    with pytest.raises(ValueError):
        gauss_legendre(0)


def test_gauss_legendre_matches_numpy():
    for m in (5, 17, 40, 80):
        x, w = gauss_legendre(m)
        xr, wr = np.polynomial.legendre.leggauss(m)
        assert np.max(np.abs(x - xr)) < 1e-14 and np.max(np.abs(w - wr)) < 1e-14


def test_tail_cutoff_example():
    L = tail_cutoff(1, 1e-16)
    assert L >= 6.1
    assert abs(math.exp(-L * L) * L**2 - 1e-16) < 1e-20


def test_grid_on_bounded_interval():
    g = build_grid(Region(((-1.0, 1.0),)), 20)
    assert g.size == 20
    assert np.all((g.nodes > -1) & (g.nodes < 1)) and np.all(g.weights > 0)
    assert abs(g.weights.sum() - 2.0) < 1e-14


def test_grid_empty_region():
    g = build_grid(Region(()), 20)
    assert g.is_empty


def test_grid_truncates_infinite_component():
    g = build_grid(Region(((0.0, math.inf),)), 20, 1e-16, n=1)
    assert g.tail_cutoff >= 6.1 and g.nodes.max() < g.tail_cutoff and g.nodes.min() > 0


def test_grid_rejects_small_m():
    with pytest.raises(ValueError):
        build_grid(Region(((0.0, 1.0),)), 3)


def test_hermite_values():
    phi = hermite_functions(3, 0.0)
    assert abs(phi[0] - 0.7511255444649425) < 1e-15
    assert phi[1] == 0.0


def test_hermite_orthonormal():
    t, w = gauss_legendre(200)
    x, w = 10 * t, 10 * w
    P = hermite_functions(12, x)
    G = (P * w) @ P.T
    assert np.max(np.abs(G - np.eye(13))) < 1e-12


def test_hermite_large_index_finite():
    v = hermite_functions(200, np.linspace(-30, 30, 7))
    assert np.all(np.isfinite(v))


def test_kernel_examples():
    s1 = KernelSpec(1)
    assert abs(kernel_eval(s1, 0.0, 0.0) - 1 / math.sqrt(math.pi)) < 1e-15
    s2 = KernelSpec(2)
    phi_a, phi_b = hermite_functions(1, 0.3), hermite_functions(1, 0.7)
    assert abs(kernel_eval(s2, 0.3, 0.7) - float(phi_a @ phi_b)) < 1e-13
    assert kernel_dx(s1, 0.0, 1.0) == pytest.approx(0.0, abs=1e-16)


def test_kernel_spec_rejects_zero():
    with pytest.raises(ValueError):
        KernelSpec(0)


@pytest.mark.parametrize("n", [1, 2, 5, 13, 30])
def test_cd_quotient_matches_sum(n):
    rng = np.random.default_rng(n)
    spec = KernelSpec(n)
    for _ in range(20):
        x, y = rng.uniform(-4, 4, 2)
        if abs(x - y) < 1e-4:
            continue
        s = float(hermite_functions(n - 1, x) @ hermite_functions(n - 1, y))
        assert abs(kernel_eval(spec, x, y) - s) < 1e-12


def test_kernel_near_diagonal_continuous():
    spec = KernelSpec(4)
    for x in (-1.3, 0.0, 0.8):
        d = kernel_eval(spec, x, x)
        assert abs(kernel_eval(spec, x, x + 1e-9) - d) < 1e-8
        assert abs(d - float(np.sum(hermite_functions(3, x) ** 2))) < 1e-14


def test_kernel_symmetric():
    spec = KernelSpec(6)
    rng = np.random.default_rng(1)
    for x, y in rng.uniform(-3, 3, (10, 2)):
        assert kernel_eval(spec, x, y) == pytest.approx(kernel_eval(spec, y, x), abs=1e-15)


def test_trace_identity():
    t, w = gauss_legendre(200)
    x, w = 12 * t, 12 * w
    for n in (1, 4, 9):
        K = kernel_matrix(n, x, x)
        assert abs(np.dot(w, np.diag(K)) - n) < 1e-10


def test_kernel_dx_against_fd():
    rng = np.random.default_rng(2)
    for n in (1, 3, 7):
        spec = KernelSpec(n)
        pts = [(0.3, 0.7)] + [tuple(p) for p in rng.uniform(-2, 2, (5, 2))]
        for x, y in pts:
            h = 1e-5
            fd = (kernel_eval(spec, x + h, y) - kernel_eval(spec, x - h, y)) / (2 * h)
            assert abs(kernel_dx(spec, x, y) - fd) < 1e-8
        assert math.isfinite(kernel_dx(spec, 0.4, 0.4))
