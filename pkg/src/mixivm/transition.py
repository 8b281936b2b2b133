"""Transition systems for queries whose dynamic variables are all static-covered.

Every dynamic fact that can ever contribute to the result lies in the
maximum dynamic database, derived from the static relations alone. A state
pairs a subset of those facts with the materialised query result; updates
move between states by flipping one bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

from .engine import generic_join
from .parser import DELETE, INSERT, UpdateEvent
from .query import ConjunctiveQuery, atom_components

DEFAULT_EAGER_CAP = 20
EAGER = "eager"
LAZY = "lazy"

Value = Hashable
Fact = tuple[str, tuple[Value, ...]]


class TransitionError(ValueError):
    pass


def eager_cap() -> int:
    raw = os.environ.get("MIXIVM_EAGER_CAP")
    return int(raw) if raw else DEFAULT_EAGER_CAP


def _join_project(atoms, rows_of, head: Sequence[str]) -> set[tuple[Value, ...]]:
    """Evaluate a conjunction of atoms and project onto ``head``."""
    order = list(head) + [v for a in atoms for v in a.schema if v not in head]
    order = list(dict.fromkeys(order))
    rels = [(a.schema, rows_of(a)) for a in atoms]
    k = len(head)
    return {row[:k] for row in generic_join(order, rels)}


@dataclass(frozen=True)
class MaxDynamicDatabase:
    facts: tuple[Fact, ...]
    position: Mapping[Fact, int] = field(hash=False)

    def __len__(self) -> int:
        return len(self.facts)

    def by_relation(self) -> dict[str, set[tuple[Value, ...]]]:
        out: dict[str, set[tuple[Value, ...]]] = {}
        for rel, t in self.facts:
            out.setdefault(rel, set()).add(t)
        return out


def _check_query(q: ConjunctiveQuery) -> None:
    if not q.dynamic_vars <= q.static_vars:
        raise TransitionError(f"query {q.name} has dynamic variables outside static atoms; "
                              "it is not in C_exp")


def max_dynamic_database(q: ConjunctiveQuery, data: Mapping[str, Iterable[Sequence[Value]]]
                         ) -> MaxDynamicDatabase:
    """Per dynamic atom, the static sub-query's result over that atom's variables."""
    _check_query(q)
    static = {a.relation: {tuple(t) for t in data.get(a.relation, ())} for a in q.static_atoms}
    facts: set[Fact] = set()
    if q.static_atoms and all(static[r] for r in static):
        comps = atom_components(q.static_atoms)
        for a in q.dynamic_atoms:
            touching = [c for c in comps if any(set(s.schema) & a.vars for s in c)]
            atoms = [s for c in touching for s in c]
            rows = _join_project(atoms, lambda s: static[s.relation], a.schema)
            facts.update((a.relation, t) for t in rows)
    order = {a.relation: i for i, a in reversed(list(enumerate(q.dynamic_atoms)))}
    ordered = tuple(sorted(facts, key=lambda f: (order[f[0]], f[1])))
    return MaxDynamicDatabase(ordered, {f: i for i, f in enumerate(ordered)})


@dataclass(frozen=True)
class TransitionState:
    subset: int
    result: tuple[tuple[Value, ...], ...]


class TransitionSystem:
    def __init__(self, q: ConjunctiveQuery, data: Mapping[str, Iterable[Sequence[Value]]],
                 mode: str = EAGER, cap: int | None = None) -> None:
        if mode not in (EAGER, LAZY):
            raise TransitionError(f"unknown mode {mode!r}")
        self.query = q
        self.mode = mode
        self.static = {a.relation: {tuple(t) for t in data.get(a.relation, ())}
                       for a in q.static_atoms}
        self.max_db = max_dynamic_database(q, data)
        self.p = len(self.max_db)
        self.cap = eager_cap() if cap is None else cap
        if mode == EAGER and self.p > self.cap:
            raise TransitionError(f"|D^d_max| = {self.p} exceeds the eager cap {self.cap}; "
                                  "use lazy mode or raise MIXIVM_EAGER_CAP")
        self.states: list[TransitionState] = []
        self.global_index: dict[int, int] = {}
        self.transitions: list[list[int]] = []
        if mode == EAGER:
            for mask in range(1 << self.p):
                self._state(mask)
            for sid, st in enumerate(self.states):
                self.transitions.append([self.global_index[st.subset ^ (1 << i)]
                                         for i in range(self.p)])
        initial = 0
        for a in q.dynamic_atoms:
            for t in data.get(a.relation, ()):
                pos = self.max_db.position.get((a.relation, tuple(t)))
                if pos is not None:
                    initial |= 1 << pos
        self.initial = self._state(initial)

    # -- states ----------------------------------------------------------------
    def facts_of(self, mask: int) -> list[Fact]:
        return [f for i, f in enumerate(self.max_db.facts) if mask >> i & 1]

    def _evaluate(self, mask: int) -> tuple[tuple[Value, ...], ...]:
        dyn: dict[str, set[tuple[Value, ...]]] = {}
        for rel, t in self.facts_of(mask):
            dyn.setdefault(rel, set()).add(t)

        def rows_of(a):
            return self.static[a.relation] if a.is_static else dyn.get(a.relation, ())

        return tuple(sorted(_join_project(self.query.body, rows_of, self.query.head.schema),
                            key=_sort_key))

    def _state(self, mask: int) -> int:
        sid = self.global_index.get(mask)
        if sid is None:
            sid = len(self.states)
            self.states.append(TransitionState(mask, self._evaluate(mask)))
            self.global_index[mask] = sid
        return sid

    def __len__(self) -> int:
        return len(self.states)

    # -- runtime ---------------------------------------------------------------
    def apply_update(self, current: int, event: UpdateEvent | tuple[str, str, Sequence[Value]]
                     ) -> int:
        if isinstance(event, UpdateEvent):
            op, rel, values = event.op, event.relation, event.tuple
        else:
            op, rel, values = event
        kinds = {a.relation: a.kind for a in self.query.body}
        if rel not in kinds:
            raise TransitionError(f"unknown relation {rel}")
        if kinds[rel] != "dynamic":
            raise TransitionError(f"relation {rel} is static")
        if op not in (INSERT, DELETE):
            raise TransitionError(f"not an update: {op}")
        pos = self.max_db.position.get((rel, tuple(values or ())))
        if pos is None:
            return current
        mask = self.states[current].subset
        present = bool(mask >> pos & 1)
        if present == (op == INSERT):
            return current
        if self.mode == EAGER:
            return self.transitions[current][pos]
        return self._state(mask ^ (1 << pos))

    def enumerate(self, current: int) -> Iterator[tuple[Value, ...]]:
        return iter(self.states[current].result)

    def to_dot(self, max_facts: int = 4) -> str:
        if self.p > max_facts:
            raise TransitionError(f"DOT output is limited to {max_facts} facts")
        def fmt(f: Fact) -> str:
            return f"{f[0]}({','.join(map(str, f[1]))})"
        lines = ["digraph transitions {", "  node [shape=box];"]
        for sid, st in enumerate(self.states):
            facts = ", ".join(fmt(f) for f in self.facts_of(st.subset)) or "{}"
            res = ", ".join("(" + ",".join(map(str, t)) + ")" for t in st.result) or "{}"
            style = ", color=blue" if sid == self.initial else ""
            lines.append(f"  s{sid} [label=\"I: {facts}\\nR: {res}\"{style}];")
        for sid, st in enumerate(self.states):
            for i, f in enumerate(self.max_db.facts):
                if st.subset >> i & 1:
                    continue
                tgt = self.global_index.get(st.subset | (1 << i))
                if tgt is not None:
                    lines.append(f"  s{sid} -> s{tgt} [label=\"+{fmt(f)}\", dir=both];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _sort_key(t: tuple[Value, ...]) -> tuple:
    return tuple((type(v).__name__, v) for v in t)


def build_transition_system(q: ConjunctiveQuery, data: Mapping[str, Iterable[Sequence[Value]]],
                            mode: str = EAGER, cap: int | None = None) -> TransitionSystem:
    return TransitionSystem(q, data, mode, cap)
