from __future__ import annotations

import random
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from mixivm.classify import C_LIN, classify
from mixivm.parser import load_query, parse_query
from mixivm.vo import VariableOrder, create_vo, enumerate_well_structured, is_well_structured
from mixivm.width import (WidthError, fractional_edge_cover, preprocessing_width,
                          preprocessing_width_of_vo, rho_star, width_profile)

from oracles import edge_cover_by_vertices, random_query, random_well_behaved

QUERIES = Path(__file__).resolve().parent.parent / "queries"


def q(name: str):
    return load_query(QUERIES / f"{name}.cq")


TRIANGLE = parse_query("Q() := R@s(A,B), S@s(B,C), T@s(A,C).")


def test_triangle_cover():
    sol = fractional_edge_cover(TRIANGLE.body, {"A", "B", "C"})
    assert sol.objective == Fraction(3, 2)
    assert sol.covers({"A", "B", "C"})
    assert all(0 <= w <= 1 for w in sol.weights.values())
    assert sum(sol.weights.values()) == sol.objective


def test_trivial_covers():
    q1 = parse_query("Q() := R@s(A,B,C).")
    assert rho_star(q1.body, {"A", "B", "C"}) == 1
    assert rho_star(TRIANGLE.body, set()) == 0


def test_uncoverable_variable():
    with pytest.raises(ValueError):
        fractional_edge_cover(TRIANGLE.body, {"Z"})


@pytest.mark.parametrize("name, width", [
    ("q1", 1), ("q7", 1), ("example", 2), ("q8", 2), ("q2", 2),
])
def test_fixture_widths(name, width):
    assert preprocessing_width(q(name)).width == Fraction(width)


def test_example_width_attained_at_d():
    query = q("example")
    omega = VariableOrder.from_nested(query, {"A": {"B": {}, "C": {"D": {}}}})
    profile = width_profile(omega)
    assert preprocessing_width_of_vo(omega) == 2
    assert profile["D"] == 2 and max(profile.values()) == 2


def test_single_atom_vo():
    query = parse_query("Q(A,B) := R@d(A,B).")
    assert preprocessing_width_of_vo(VariableOrder.from_nested(query, {"A": {"B": {}}})) == 1


def test_twelve_variable_profile_matches_vertex_oracle():
    query = q("twelve")
    omega = create_vo(query)
    profile = width_profile(omega)
    for x in omega.variables():
        atoms = omega.subtree_atoms(x)
        cover = {x} | set(omega.dep()[x])
        assert profile[x] == edge_cover_by_vertices([a.schema for a in atoms], cover), x


def test_width_requires_well_behaved():
    with pytest.raises(WidthError):
        preprocessing_width(q("q3"))


def test_width_result_unpacks():
    w, omega = preprocessing_width(q("q1"))
    assert w == 1 and is_well_structured(omega, q("q1"))


@given(st.integers(0, 10**6))
@settings(max_examples=120, deadline=None)
def test_lp_matches_vertex_enumeration(seed):
    rng = random.Random(seed)
    query = random_query(rng, max_atoms=5)
    cover = set(rng.sample(sorted(query.vars), rng.randint(0, len(query.vars))))
    assert rho_star(query.body, cover) == edge_cover_by_vertices(
        [a.schema for a in query.body], cover)


@given(st.integers(0, 10**6))
@settings(max_examples=80, deadline=None)
def test_lp_invariant_under_reordering_and_renaming(seed):
    rng = random.Random(seed)
    query = random_query(rng)
    cover = set(rng.sample(sorted(query.vars), rng.randint(0, len(query.vars))))
    base = rho_star(query.body, cover)
    rename = dict(zip(sorted(query.vars), rng.sample("UVWXYZ", len(query.vars))))
    atoms = [(a.relation, [rename[v] for v in a.schema], a.kind) for a in query.body]
    rng.shuffle(atoms)
    from mixivm.query import make_query
    other = make_query("Q", [], atoms)
    assert rho_star(other.body, {rename[v] for v in cover}) == base


@given(st.integers(0, 10**6))
@settings(max_examples=80, deadline=None)
def test_lp_monotone(seed):
    rng = random.Random(seed)
    query = random_query(rng)
    big = set(rng.sample(sorted(query.vars), rng.randint(0, len(query.vars))))
    small = {v for v in big if rng.random() < 0.5}
    assert rho_star(query.body, small) <= rho_star(query.body, big)


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_width_is_a_lower_bound_over_well_structured_orders(seed):
    query = random_well_behaved(random.Random(seed), max_vars=5, max_atoms=4)
    res = preprocessing_width(query)
    assert preprocessing_width_of_vo(res.vo) == res.width
    assert preprocessing_width_of_vo(create_vo(query)) >= res.width
    for k, omega in enumerate(enumerate_well_structured(query)):
        assert preprocessing_width_of_vo(omega) >= res.width
        if k > 200:
            break


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_linear_class_has_width_one(seed):
    query = random_well_behaved(random.Random(seed))
    if classify(query).query_class == C_LIN:
        assert preprocessing_width(query).width == 1
        assert preprocessing_width_of_vo(create_vo(query)) == 1


def test_widths_are_exact_rationals():
    res = preprocessing_width(q("example"))
    assert isinstance(res.width, Fraction)
    assert not res.possibly_suboptimal
