"""Reference evaluators used to check the incremental runtimes.

Two deliberately naive implementations are provided: a nested-loop join in
body order and a sort-merge join. They share no code beyond input checks so
that one can catch mistakes in the other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

from .query import ConjunctiveQuery

Tuple = tuple[Hashable, ...]
Database = Mapping[str, Iterable[Tuple]]


@dataclass(frozen=True)
class OracleResult:
    tuples: tuple[Tuple, ...]

    def as_set(self) -> set[Tuple]:
        return set(self.tuples)

    def __len__(self) -> int:
        return len(self.tuples)


def _relation(q: ConjunctiveQuery, data: Database, rel: str, arity: int) -> list[Tuple]:
    rows = list(data.get(rel, ()))
    for row in rows:
        if len(row) != arity:
            raise ValueError(f"relation {rel} expects arity {arity}, got {row!r}")
    return rows


def evaluate(q: ConjunctiveQuery, data: Database) -> OracleResult:
    """Nested-loop join over the body atoms in declaration order."""
    bindings: list[dict[str, Hashable]] = [{}]
    for atom in q.body:
        rows = _relation(q, data, atom.relation, len(atom.schema))
        extended = []
        for b in bindings:
            for row in rows:
                nb = dict(b)
                ok = True
                for var, val in zip(atom.schema, row):
                    if nb.setdefault(var, val) != val:
                        ok = False
                        break
                if ok:
                    extended.append(nb)
        bindings = extended
    head = q.head.schema
    return OracleResult(tuple(sorted({tuple(b[v] for v in head) for b in bindings})))


def _sort_merge(left_vars: tuple[str, ...], left: list[Tuple],
                right_vars: tuple[str, ...], right: list[Tuple]
                ) -> tuple[tuple[str, ...], list[Tuple]]:
    shared = [v for v in left_vars if v in right_vars]
    lk = [left_vars.index(v) for v in shared]
    rk = [right_vars.index(v) for v in shared]
    extra = [i for i, v in enumerate(right_vars) if v not in left_vars]
    out_vars = left_vars + tuple(right_vars[i] for i in extra)
    ls = sorted(left, key=lambda t: tuple(t[i] for i in lk))
    rs = sorted(right, key=lambda t: tuple(t[i] for i in rk))
    out: list[Tuple] = []
    i = j = 0
    while i < len(ls) and j < len(rs):
        ki = tuple(ls[i][k] for k in lk)
        kj = tuple(rs[j][k] for k in rk)
        if ki < kj:
            i += 1
        elif kj < ki:
            j += 1
        else:
            i2 = i
            while i2 < len(ls) and tuple(ls[i2][k] for k in lk) == ki:
                i2 += 1
            j2 = j
            while j2 < len(rs) and tuple(rs[j2][k] for k in rk) == kj:
                j2 += 1
            for a in ls[i:i2]:
                for b in rs[j:j2]:
                    out.append(a + tuple(b[k] for k in extra))
            i, j = i2, j2
    return out_vars, out


def evaluate_sort_merge(q: ConjunctiveQuery, data: Database) -> OracleResult:
    """Left-deep sort-merge join; values must be mutually comparable."""
    vars_: tuple[str, ...] = ()
    rows: list[Tuple] = [()]
    for atom in q.body:
        rel = _relation(q, data, atom.relation, len(atom.schema))
        vars_, rows = _sort_merge(vars_, rows, atom.schema, rel)
    idx = [vars_.index(v) for v in q.head.schema]
    return OracleResult(tuple(sorted({tuple(r[i] for i in idx) for r in rows})))
