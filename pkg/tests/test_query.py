from __future__ import annotations

import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from mixivm.parser import load_query, parse_query
from mixivm.query import (DYNAMIC, STATIC, QueryError, connected_components, dynamic_subquery,
                          exists_path_avoiding, make_query, static_parts, static_subquery)

from oracles import random_query

QUERIES = Path(__file__).resolve().parent.parent / "queries"


def q(name: str):
    return load_query(QUERIES / f"{name}.cq")


def test_disjoint_atoms_are_separate_components():
    query = parse_query("Q() := R@d(A), S@s(B).")
    comps = connected_components(query)
    assert [[a.relation for a in c] for c in comps] == [["R"], ["S"]]


def test_q1_is_connected():
    comps = connected_components(q("q1"))
    assert len(comps) == 1 and len(comps[0]) == 3


def _union_find(query):
    parent = {a.index: a.index for a in query.body}

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for a in query.body:
        for b in query.body:
            if a.vars & b.vars:
                parent[find(a.index)] = find(b.index)
    groups = {}
    for a in query.body:
        groups.setdefault(find(a.index), set()).add(a.index)
    return sorted(map(sorted, groups.values()))


@given(st.integers(0, 10**6))
@settings(max_examples=100, deadline=None)
def test_components_match_union_find(seed):
    query = random_query(random.Random(seed), max_atoms=6)
    comps = sorted(sorted(a.index for a in c) for c in connected_components(query))
    assert comps == _union_find(query)


def test_paths_avoiding():
    assert exists_path_avoiding(q("q3"), "A", "B")
    assert exists_path_avoiding(q("q1"), "C", "C")
    assert not exists_path_avoiding(q("q1"), "D", "C", {"A"})
    with pytest.raises(QueryError):
        exists_path_avoiding(q("q1"), "A", "Z")


def test_q2_subqueries():
    dyn, stat = dynamic_subquery(q("q2")), static_subquery(q("q2"))
    assert [(a.relation, a.schema) for a in dyn.body] == [("R", ("A", "D")), ("U", ("D",))]
    assert dyn.free_vars == {"A", "D"}
    assert [(a.relation, a.schema) for a in stat.body] == [("S", ("A", "B")), ("T", ("B", "C"))]
    assert stat.free_vars == {"A", "C"}


def test_degenerate_subqueries():
    all_static = parse_query("Q(A) := S@s(A,B).")
    assert dynamic_subquery(all_static).body == () and not dynamic_subquery(all_static).free_vars
    all_dynamic = parse_query("Q(A) := R@d(A,B).")
    assert static_subquery(all_dynamic).body == ()


def test_static_parts_of_twelve_variable_query():
    parts = static_parts(q("twelve"))
    assert sorted(sorted(p.intersection_set) for p in parts) == sorted(
        [["B", "D"], ["F"], ["C", "F"], ["C", "E"]])


def test_static_parts_trivial_cases():
    assert static_parts(parse_query("Q(A) := R@d(A,B).")) == []
    parts = static_parts(q("q3"))
    assert len(parts) == 1
    assert [a.relation for a in parts[0].atoms] == ["S"]
    assert parts[0].intersection_set == {"A", "B"}


def test_intersection_set_is_covered_by_a_dynamic_atom_when_well_behaved():
    for name in ("q1", "q2", "q7", "q8", "example", "twelve"):
        query = q(name)
        for part in static_parts(query):
            assert any(part.intersection_set <= a.vars for a in query.dynamic_atoms), name


def test_model_validation():
    with pytest.raises(QueryError):
        make_query("Q", ["Z"], [("R", "A", DYNAMIC)])
    with pytest.raises(QueryError):
        make_query("Q", [], [("R", "A", DYNAMIC), ("R", "A", STATIC)], allow_repeats=True)
    with pytest.raises(QueryError):
        make_query("Q", [], [("R", "A", DYNAMIC), ("R", "B", DYNAMIC)])
    query = make_query("Q", [], [("R", "A", DYNAMIC), ("R", "B", DYNAMIC)], allow_repeats=True)
    assert query.has_repeats


def test_adjacency_is_the_incident_atoms():
    query = q("q1")
    hg = query.hypergraph()
    for v in query.vars:
        assert {a.index for a in hg.adjacency[v]} == {a.index for a in query.body if v in a.vars}
