from __future__ import annotations

import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from mixivm.oracle import evaluate
from mixivm.parser import DELETE, INSERT, UpdateEvent, load_database, load_query
from mixivm.transition import (EAGER, LAZY, TransitionError, TransitionSystem,
                               build_transition_system, eager_cap, max_dynamic_database)

QUERIES = Path(__file__).resolve().parent.parent / "queries"
Q3 = load_query(QUERIES / "q3.cq")


def toy():
    return load_database(QUERIES / "q3_data", Q3)


def facts(ts, sid):
    return set(ts.facts_of(ts.states[sid].subset))


def random_s(rng: random.Random, values: int = 4, size: int = 6):
    return {(f"a{rng.randrange(values)}", f"b{rng.randrange(values)}") for _ in range(size)}


def test_toy_max_dynamic_database():
    md = max_dynamic_database(Q3, toy())
    assert md.by_relation() == {"R": {("a1",)}, "T": {("b1",), ("b2",)}}


def test_empty_static_relation_gives_empty_max_database():
    assert len(max_dynamic_database(Q3, {"S": set(), "R": {("a1",)}})) == 0
    ts = build_transition_system(Q3, {"S": set()})
    assert len(ts) == 1 and ts.states[ts.initial].subset == 0


@given(st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_max_database_is_the_projection_of_s(seed):
    s = random_s(random.Random(seed), values=10, size=20)
    md = max_dynamic_database(Q3, {"S": s})
    assert md.by_relation().get("R", set()) == {(a,) for a, _ in s}
    assert md.by_relation().get("T", set()) == {(b,) for _, b in s}


def test_toy_system():
    ts = build_transition_system(Q3, toy(), EAGER)
    assert len(ts) == 8
    assert facts(ts, ts.initial) == {("R", ("a1",))}
    assert list(ts.enumerate(ts.initial)) == []
    nxt = ts.apply_update(ts.initial, UpdateEvent(INSERT, "T", ("b1",)))
    assert facts(ts, nxt) == {("R", ("a1",)), ("T", ("b1",))}
    assert list(ts.enumerate(nxt)) == [("a1", "b1")]
    full = ts.global_index[(1 << ts.p) - 1]
    assert set(ts.enumerate(full)) == {("a1", "b1"), ("a1", "b2")}


def test_irrelevant_updates_are_absorbed():
    ts = build_transition_system(Q3, toy())
    s0 = ts.initial
    assert ts.apply_update(s0, UpdateEvent(INSERT, "R", ("a9",))) == s0
    assert ts.apply_update(s0, UpdateEvent(DELETE, "T", ("b3",))) == s0
    assert ts.apply_update(s0, UpdateEvent(INSERT, "R", ("a1",))) == s0


def test_insert_then_delete_is_identity():
    ts = build_transition_system(Q3, toy())
    for sid in range(len(ts)):
        for rel, t in ts.max_db.facts:
            mid = ts.apply_update(sid, (INSERT, rel, t))
            back = ts.apply_update(mid, (DELETE, rel, t))
            if (rel, t) in ts.facts_of(ts.states[sid].subset):
                assert ts.apply_update(sid, (DELETE, rel, t)) != sid
            else:
                assert back == sid


def test_static_and_unknown_updates_rejected():
    ts = build_transition_system(Q3, toy())
    with pytest.raises(TransitionError):
        ts.apply_update(ts.initial, UpdateEvent(INSERT, "S", ("a", "b")))
    with pytest.raises(TransitionError):
        ts.apply_update(ts.initial, UpdateEvent(INSERT, "X", ("a",)))


def test_queries_outside_the_class_are_refused():
    with pytest.raises(TransitionError):
        TransitionSystem(load_query(QUERIES / "q4.cq"), {})


def test_eager_cap(monkeypatch):
    s = {(f"a{i}", f"b{i}") for i in range(3)}
    with pytest.raises(TransitionError):
        TransitionSystem(Q3, {"S": s}, EAGER, cap=5)
    monkeypatch.setenv("MIXIVM_EAGER_CAP", "4")
    assert eager_cap() == 4
    lazy = TransitionSystem(Q3, {"S": s, "R": {("a0",)}}, LAZY)
    assert len(lazy) == 1


def _oracle(ts, sid, static):
    data = dict(static)
    for rel, t in ts.facts_of(ts.states[sid].subset):
        data.setdefault(rel, set()).add(t)
    return evaluate(Q3, data).as_set()


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_every_eager_state_matches_oracle(seed):
    rng = random.Random(seed)
    s = random_s(rng)
    ts = TransitionSystem(Q3, {"S": s}, EAGER)
    assert len(ts) == 2 ** ts.p
    for sid in range(len(ts)):
        assert set(ts.enumerate(sid)) == _oracle(ts, sid, {"S": s})


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_lazy_and_eager_agree_along_random_paths(seed):
    rng = random.Random(seed)
    s = random_s(rng)
    dyn0 = {"R": {(f"a{rng.randrange(5)}",)}, "T": {(f"b{rng.randrange(5)}",)}}
    eager = TransitionSystem(Q3, {"S": s, **dyn0}, EAGER)
    lazy = TransitionSystem(Q3, {"S": s, **dyn0}, LAZY)
    cur = {k: set(v) for k, v in dyn0.items()}
    se, sl = eager.initial, lazy.initial
    for _ in range(40):
        rel = rng.choice("RT")
        t = (f"{'a' if rel == 'R' else 'b'}{rng.randrange(5)}",)
        op = INSERT if rng.random() < 0.5 else DELETE
        se = eager.apply_update(se, (op, rel, t))
        sl = lazy.apply_update(sl, (op, rel, t))
        (cur[rel].add if op == INSERT else cur[rel].discard)(t)
        expected_subset = {f for f in eager.max_db.facts if f[1] in cur[f[0]]}
        assert set(eager.facts_of(eager.states[se].subset)) == expected_subset
        assert eager.states[se] == lazy.states[sl]
        assert set(eager.enumerate(se)) == evaluate(Q3, {"S": s, **cur}).as_set()


def test_dot_output():
    dot = build_transition_system(Q3, toy()).to_dot()
    assert dot.count("->") == 12 and "color=blue" in dot
