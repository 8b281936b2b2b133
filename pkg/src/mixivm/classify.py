"""Structural tests and class membership for mixed static/dynamic queries."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import combinations

from .query import ConjunctiveQuery, bfs_path, gaifman_neighbours

C_LIN = "C_lin"
C_POLY = "C_poly"
C_EXP = "C_exp"
OUTSIDE = "outside_C_exp"


@dataclass(frozen=True)
class Witness:
    """A path that is not body-safe (two atoms) or not head-safe (atom and head)."""

    kind: str  # "body" or "head"
    path: tuple[str, ...]
    atoms: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "path": list(self.path), "atoms": list(self.atoms)}


@dataclass(frozen=True)
class ClassificationReport:
    query: str
    is_hierarchical: bool
    is_q_hierarchical: bool
    is_alpha_acyclic: bool
    is_free_connex: bool
    is_well_behaved: bool
    unsafe_witness: Witness | None
    query_class: str
    dichotomy_applies: bool
    note: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("query_class")
        d["unsafe_witness"] = self.unsafe_witness.to_dict() if self.unsafe_witness else None
        return d

    def to_json(self, **extra) -> str:
        d = self.to_dict()
        d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True)


# -- hierarchy ----------------------------------------------------------------

def _atom_sets(q: ConjunctiveQuery) -> dict[str, frozenset[int]]:
    return {v: frozenset(a.index for a in q.body if v in a.vars) for v in q.variables}


def is_hierarchical(q: ConjunctiveQuery) -> bool:
    sets = _atom_sets(q)
    for x, y in combinations(sets, 2):
        a, b = sets[x], sets[y]
        if not (a <= b or b <= a or not (a & b)):
            return False
    return True


def is_q_hierarchical(q: ConjunctiveQuery) -> bool:
    if not is_hierarchical(q):
        return False
    sets = _atom_sets(q)
    free = q.free_vars
    for x in sets:
        for y in sets:
            if sets[x] > sets[y] and y in free and x not in free:
                return False
    return True


# -- acyclicity ---------------------------------------------------------------

def gyo_reduce(edges: list[frozenset[str]]) -> list[frozenset[str]]:
    """Run the GYO reduction and return whatever hyperedges survive.

    Rules, applied to the smallest index first: drop a vertex occurring in a
    single edge, drop an edge contained in another edge (or empty).
    """
    edges = [set(e) for e in edges]
    changed = True
    while changed and edges:
        changed = False
        for i, e in enumerate(edges):
            lonely = {v for v in e if sum(v in f for f in edges) == 1}
            if lonely:
                e -= lonely
                changed = True
                break
        if changed:
            continue
        for i, e in enumerate(edges):
            if not e or any(j != i and e <= f for j, f in enumerate(edges)):
                del edges[i]
                changed = True
                break
    return [frozenset(e) for e in edges]


def is_alpha_acyclic(q: ConjunctiveQuery) -> bool:
    return not gyo_reduce([a.vars for a in q.body])


def is_free_connex(q: ConjunctiveQuery) -> bool:
    if not is_alpha_acyclic(q):
        return False
    return not gyo_reduce([a.vars for a in q.body] + [q.free_vars])


# -- well-behavedness ---------------------------------------------------------

def body_safety_witness(q: ConjunctiveQuery) -> Witness | None:
    for r, s in combinations(q.dynamic_atoms, 2):
        common = r.vars & s.vars
        left, right = r.vars - common, s.vars - common
        if not left or not right:
            continue
        path = bfs_path(gaifman_neighbours(q.body, common), left, right)
        if path is not None:
            return Witness("body", tuple(path), (str(r), str(s)))
    return None


def head_safety_witness(q: ConjunctiveQuery) -> Witness | None:
    free = q.free_vars
    for r in q.dynamic_atoms:
        shared = r.vars & free
        left, right = r.vars - free, free - r.vars
        if not left or not right:
            continue
        path = bfs_path(gaifman_neighbours(q.body, shared), left, right)
        if path is not None:
            return Witness("head", tuple(path), (str(r), str(q.head)))
    return None


def check_well_behaved(q: ConjunctiveQuery) -> tuple[bool, Witness | None]:
    """Head-safety violations are reported before body-safety ones."""
    w = head_safety_witness(q) or body_safety_witness(q)
    return w is None, w


def dynamic_vars_covered_statically(q: ConjunctiveQuery) -> bool:
    return q.dynamic_vars <= q.static_vars


def classify(q: ConjunctiveQuery) -> ClassificationReport:
    ok, witness = check_well_behaved(q)
    fc = is_free_connex(q)
    note = None
    if ok and fc:
        cls = C_LIN
    elif ok:
        cls = C_POLY
    elif dynamic_vars_covered_statically(q):
        cls = C_EXP
    else:
        cls = OUTSIDE
        note = "outside C_exp: no constant-update strategy is provided for this query"
    if q.has_repeats:
        note = "repeated relation symbols: the class is an upper bound only"
    return ClassificationReport(
        query=q.name,
        is_hierarchical=is_hierarchical(q),
        is_q_hierarchical=is_q_hierarchical(q),
        is_alpha_acyclic=is_alpha_acyclic(q),
        is_free_connex=fc,
        is_well_behaved=ok,
        unsafe_witness=witness,
        query_class=cls,
        dichotomy_applies=not q.has_repeats,
        note=note,
    )
