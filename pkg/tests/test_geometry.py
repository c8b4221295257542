import math

import pytest

from gappde.geometry import (LEFT_J, LEFT_JC, GeometryError, Region, geometric_sign,
                             make_endpoint_config, parity_sign, parity_signs, parse_config)


def test_single_endpoint_largest_eigenvalue():
    c = make_endpoint_config([0.0], LEFT_J)
    assert c.eigen_region().intervals == ((-math.inf, 0.0),)
    assert c.gap_region().intervals == ((0.0, math.inf),)


def test_two_endpoint_bounded_J():
    c = make_endpoint_config([-1.0, 1.0], LEFT_JC)
    assert c.gap_region().intervals == ((-math.inf, -1.0), (1.0, math.inf))
    assert c.eigen_region().intervals == ((-1.0, 1.0),)


@pytest.mark.parametrize("bad", [[1.0, 1.0], [2.0, 1.0], [0.0, math.inf], [math.nan], []])
def test_invalid_endpoints_rejected(bad):
    with pytest.raises(GeometryError):
        make_endpoint_config(bad, LEFT_J)


def test_unknown_kind_rejected():
    with pytest.raises(GeometryError):
        make_endpoint_config([0.0], "middle")


def test_parse_config():
    c = parse_config("-0.5,0.5,1.5;left=Jc")
    assert c.endpoints == (-0.5, 0.5, 1.5) and c.leftmost == LEFT_JC
    assert parse_config("0").leftmost == LEFT_J


def test_parity_alternates():
    two = make_endpoint_config([-0.5, 0.7], LEFT_J)
    assert parity_sign(two, 1) == -parity_sign(two, 2)
    three = make_endpoint_config([-1, 0, 1], LEFT_JC)
    assert parity_sign(three, 1) == parity_sign(three, 3)
    assert set(parity_signs(three)) == {1, -1}


def test_parity_index_range():
    c = make_endpoint_config([0.0], LEFT_J)
    for j in (0, 2):
        with pytest.raises(IndexError):
            parity_sign(c, j)


def test_geometric_sign():
    c = make_endpoint_config([0.0, 1.0], LEFT_J)
    assert geometric_sign(c, 1) == -1 and geometric_sign(c, 2) == 1


def test_region_validation_and_membership():
    r = Region(((-math.inf, 0.0), (1.0, 2.0)))
    assert r.contains(-5) and r.contains(1.5) and not r.contains(0.5) and not r.contains(0.0)
    with pytest.raises(GeometryError):
        Region(((0.0, 2.0), (1.0, 3.0)))
    with pytest.raises(GeometryError):
        Region(((1.0, 1.0),))


def test_config_is_hashable_and_immutable():
    c = make_endpoint_config([0.0, 1.0])
    assert {c: 1}[make_endpoint_config([0.0, 1.0])] == 1
    with pytest.raises(AttributeError):
        c.endpoints = (1.0,)
