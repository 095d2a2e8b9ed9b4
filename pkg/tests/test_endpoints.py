import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fiolab.endpoints import (INF, EndpointError, ExponentTuple, check_linearity, coverage_check,
                              critical_order, decompose_domain, endpoints_json, enumerate_endpoints,
                              function_F, hull_contains, n_prime, sample_domain, vertex_set)


def test_F_at_origin():
    assert function_F([0.0, 0.0]) == 1.5


@pytest.mark.parametrize("N", [2, 3, 4])
def test_F_on_unit_vectors(N):
    for j in range(N):
        e = np.zeros(N)
        e[j] = 1
        assert function_F(e) == pytest.approx((N - 1) / 2 + 1, abs=1e-15)


@pytest.mark.parametrize("N", [2, 3])
def test_F_is_constant_on_the_middle_region(N):
    region = [r for r in decompose_domain(N) if r.label == "D01"][0]
    x = region.sample(np.random.default_rng(0), 1000)
    assert np.max(np.abs(function_F(x) - (N - 1) / 2)) <= 1e-14


def test_critical_order_examples():
    t = ExponentTuple.from_all([1, 2, 2])
    assert critical_order(2, t) == -0.5
    for N in (2, 3, 4):
        for n in (1, 2, 3):
            t = ExponentTuple.from_inputs([INF] * N)
            assert critical_order(n, t) == -(n - 1) * (N + 1) / 2


def test_critical_order_matches_F():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        N = int(rng.integers(2, 5))
        x = sample_domain(rng, N, 1)[0]
        ps = [INF if v == 0 else 1 / v for v in x]
        t = ExponentTuple.from_inputs(ps)
        n = int(rng.integers(1, 4))
        assert abs(critical_order(n, t) + (n - 1) * function_F(t.x())) <= 1e-14 * (1 + n)


def test_hoelder_relation_is_exact():
    t = ExponentTuple.from_inputs([3, 6])
    assert t.recips[0] == Fraction(1, 2)
    with pytest.raises(EndpointError):
        ExponentTuple.from_all([1, 2, 3])
    with pytest.raises(EndpointError):
        ExponentTuple.from_inputs([0.5, INF])
    with pytest.raises(EndpointError):
        ExponentTuple.from_inputs([-2, INF])


def test_infinite_exponents_serialize():
    t = ExponentTuple.from_inputs([INF, 2], "x")
    d = t.to_dict()
    assert d["p"] == [2.0, "inf", 2.0] and d["recips"][1] == "0"


def test_first_region_vertices_for_two_variables():
    D00 = decompose_domain(2)[0]
    assert D00.label == "D00"
    assert {tuple(v) for v in D00.vertices} == {(0, 0), (0.5, 0), (0, 0.5)}


@pytest.mark.parametrize("N", [2, 3])
def test_F_is_linear_on_each_region(N):
    for region in decompose_domain(N):
        rep = check_linearity(region, np.random.default_rng(N))
        assert rep["linearity_dev"] <= 1e-12
        assert rep["affine_dev"] <= 1e-12


@pytest.mark.parametrize("N, count", [(2, 10_000), (3, 2000)])
def test_regions_cover_the_domain(N, count):
    rep = coverage_check(N, np.random.default_rng(0), count=count)
    assert rep["uncovered"] == 0


def test_hull_contains_with_and_without_lp():
    V = np.array([[0, 0], [1, 0], [0, 1.0]])
    for use_lp in (False, True):
        assert hull_contains(V, np.array([0.2, 0.2]), use_lp=use_lp)
        assert not hull_contains(V, np.array([0.8, 0.8]), use_lp=use_lp)
    square = np.array([[0, 0], [1, 0], [0, 1.0], [1, 1.0]])
    assert hull_contains(square, np.array([0.9, 0.9]))


@pytest.mark.parametrize("N, expected", [(2, 6), (3, 10)])
def test_endpoint_counts(N, expected):
    assert len(enumerate_endpoints(N)) == expected


@pytest.mark.parametrize("N", [2, 3, 4])
def test_endpoints_are_listed_vertices(N):
    V = {tuple(v) for v in vertex_set(N)}
    for t in enumerate_endpoints(N):
        assert tuple(t.x()) in V


def test_endpoints_json_document():
    doc = json.loads(endpoints_json(3, n=2))
    assert doc["N"] == 3 and len(doc["endpoints"]) == 10
    assert {r["symmetry_class"] for r in doc["endpoints"]} == {"i", "ii", "iii", "iv"}
    with pytest.raises(EndpointError):
        enumerate_endpoints(1)


def test_F_is_convex():
    rng = np.random.default_rng(2)
    for N in (2, 3, 4):
        x, y = sample_domain(rng, N, 10_000), sample_domain(rng, N, 10_000)
        assert np.all(function_F((x + y) / 2) <= (function_F(x) + function_F(y)) / 2 + 1e-14)


def test_coordinate_count_is_at_most_two():
    rng = np.random.default_rng(3)
    for N in (2, 3, 5):
        c = n_prime(sample_domain(rng, N, 10_000))
        assert set(np.unique(c)) <= {0, 1, 2}


@settings(max_examples=100, deadline=None)
@given(N=st.integers(2, 5), seed=st.integers(0, 10 ** 6))
def test_F_bounds_on_the_domain(N, seed):
    x = sample_domain(np.random.default_rng(seed), N, 1)[0]
    v = function_F(x)
    assert (N - 1) / 2 - 1e-14 <= v <= (N - 1) / 2 + 1 + 1e-14
