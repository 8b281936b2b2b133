"""Conjunctive queries over static and dynamic relations.

Variables are plain strings. Atoms remember their position in the body so
that two occurrences of the same relation symbol stay distinguishable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

STATIC = "static"
DYNAMIC = "dynamic"
HEAD = "head"
_KINDS = (STATIC, DYNAMIC, HEAD)


class QueryError(ValueError):
    """Raised when a query violates a structural invariant."""


@dataclass(frozen=True)
class Atom:
    relation: str
    schema: tuple[str, ...]
    kind: str
    index: int = -1

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise QueryError(f"unknown atom kind {self.kind!r}")
        if len(set(self.schema)) != len(self.schema):
            raise QueryError(f"duplicate variable in atom {self.relation}{self.schema}")

    @property
    def vars(self) -> frozenset[str]:
        return frozenset(self.schema)

    @property
    def is_dynamic(self) -> bool:
        return self.kind == DYNAMIC

    @property
    def is_static(self) -> bool:
        return self.kind == STATIC

    def __str__(self) -> str:
        tag = {STATIC: "@s", DYNAMIC: "@d", HEAD: ""}[self.kind]
        return f"{self.relation}{tag}({','.join(self.schema)})"


@dataclass(frozen=True)
class Hypergraph:
    nodes: frozenset[str]
    hyperedges: tuple[Atom, ...]
    adjacency: dict[str, frozenset[Atom]] = field(compare=False, hash=False)


@dataclass(frozen=True)
class StaticPart:
    atoms: tuple[Atom, ...]
    intersection_set: frozenset[str]
    part_free_vars: frozenset[str]

    @property
    def vars(self) -> frozenset[str]:
        return frozenset().union(*(a.vars for a in self.atoms))


@dataclass(frozen=True)
class ConjunctiveQuery:
    head: Atom
    body: tuple[Atom, ...]
    allow_repeats: bool = False

    def __post_init__(self) -> None:
        if self.head.kind != HEAD:
            raise QueryError("head atom must have kind 'head'")
        for pos, atom in enumerate(self.body):
            if atom.kind == HEAD:
                raise QueryError("body atoms must be static or dynamic")
            if not atom.schema:
                raise QueryError(f"body atom {atom.relation} has no variables")
            if atom.index != pos:
                object.__setattr__(self, "body", _reindex(self.body))
                break
        missing = set(self.head.schema) - self.vars
        if missing:
            raise QueryError(f"head variables {sorted(missing)} do not occur in the body")
        kinds: dict[str, str] = {}
        for atom in self.body:
            seen = kinds.setdefault(atom.relation, atom.kind)
            if seen != atom.kind:
                raise QueryError(f"relation {atom.relation} is used both static and dynamic")
        if self.has_repeats and not self.allow_repeats:
            raise QueryError("repeating relation symbols require allow_repeats=True")

    # -- basic sets ---------------------------------------------------------
    @property
    def name(self) -> str:
        return self.head.relation

    @property
    def vars(self) -> frozenset[str]:
        return frozenset(v for a in self.body for v in a.schema)

    @property
    def variables(self) -> tuple[str, ...]:
        """Variables in order of first appearance in the body."""
        return tuple(dict.fromkeys(v for a in self.body for v in a.schema))

    @property
    def free_vars(self) -> frozenset[str]:
        return frozenset(self.head.schema)

    @property
    def bound_vars(self) -> frozenset[str]:
        return self.vars - self.free_vars

    @property
    def dynamic_atoms(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.body if a.is_dynamic)

    @property
    def static_atoms(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.body if a.is_static)

    @property
    def dynamic_vars(self) -> frozenset[str]:
        return frozenset(v for a in self.dynamic_atoms for v in a.schema)

    @property
    def static_vars(self) -> frozenset[str]:
        return frozenset(v for a in self.static_atoms for v in a.schema)

    @property
    def has_repeats(self) -> bool:
        names = [a.relation for a in self.body]
        return len(names) != len(set(names))

    def relations(self) -> dict[str, Atom]:
        """First atom per relation symbol."""
        out: dict[str, Atom] = {}
        for a in self.body:
            out.setdefault(a.relation, a)
        return out

    def atoms_of(self, var: str) -> frozenset[Atom]:
        return frozenset(a for a in self.body if var in a.vars)

    def hypergraph(self) -> Hypergraph:
        adj: dict[str, set[Atom]] = {v: set() for v in self.vars}
        for a in self.body:
            for v in a.schema:
                adj[v].add(a)
        return Hypergraph(
            nodes=self.vars,
            hyperedges=self.body,
            adjacency={v: frozenset(s) for v, s in adj.items()},
        )

    def with_body(self, body: Iterable[Atom], head_name: str | None = None,
                  free: Iterable[str] | None = None) -> ConjunctiveQuery:
        body = _reindex(tuple(body))
        body_vars = {v for a in body for v in a.schema}
        wanted = self.head.schema if free is None else tuple(free)
        head = Atom(head_name or self.head.relation,
                    tuple(v for v in wanted if v in body_vars), HEAD)
        return ConjunctiveQuery(head, body, allow_repeats=self.allow_repeats)

    def __str__(self) -> str:
        return f"{self.head} := {', '.join(str(a) for a in self.body)}."


def _reindex(body: tuple[Atom, ...]) -> tuple[Atom, ...]:
    return tuple(Atom(a.relation, a.schema, a.kind, i) for i, a in enumerate(body))


def make_query(head: str, head_vars: Iterable[str],
               body: Iterable[tuple[str, Iterable[str], str]],
               allow_repeats: bool = False) -> ConjunctiveQuery:
    """Build a query from ``(relation, schema, kind)`` triples.

    ``kind`` may be spelled ``"d"``/``"s"`` or ``"dynamic"``/``"static"``.
    """
    atoms = []
    for i, (rel, schema, kind) in enumerate(body):
        kind = {"d": DYNAMIC, "s": STATIC}.get(kind, kind)
        atoms.append(Atom(rel, tuple(schema), kind, i))
    return ConjunctiveQuery(Atom(head, tuple(head_vars), HEAD), tuple(atoms), allow_repeats)


# -- graph helpers ----------------------------------------------------------

def gaifman_neighbours(atoms: Iterable[Atom], forbidden: frozenset[str] = frozenset()
                       ) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for a in atoms:
        vs = [v for v in a.schema if v not in forbidden]
        for v in vs:
            adj.setdefault(v, set()).update(w for w in vs if w != v)
    return adj


def bfs_path(adj: dict[str, set[str]], sources: Iterable[str],
             targets: Iterable[str]) -> list[str] | None:
    """Shortest path from any source to any target, or None."""
    targets = set(targets)
    parent: dict[str, str | None] = {}
    queue: deque[str] = deque()
    for s in sorted(set(sources)):
        if s in adj or s in targets:
            parent[s] = None
            queue.append(s)
    while queue:
        v = queue.popleft()
        if v in targets:
            path = [v]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])  # type: ignore[arg-type]
            return path[::-1]
        for w in sorted(adj.get(v, ())):
            if w not in parent:
                parent[w] = v
                queue.append(w)
    return None


def connected_components(q: ConjunctiveQuery) -> list[tuple[Atom, ...]]:
    """Maximal sets of body atoms connected through shared variables."""
    return atom_components(q.body)


def atom_components(atoms: Iterable[Atom]) -> list[tuple[Atom, ...]]:
    atoms = list(atoms)
    parent = list(range(len(atoms)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[str, int] = {}
    for i, a in enumerate(atoms):
        for v in a.schema:
            if v in owner:
                ri, rj = find(i), find(owner[v])
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            else:
                owner[v] = i
    groups: dict[int, list[Atom]] = {}
    for i, a in enumerate(atoms):
        groups.setdefault(find(i), []).append(a)
    return [tuple(g) for _, g in sorted(groups.items())]


def find_path_avoiding(q: ConjunctiveQuery, src: str, dst: str,
                       forbidden: Iterable[str] = ()) -> list[str] | None:
    forbidden = frozenset(forbidden)
    for v in (src, dst):
        if v not in q.vars:
            raise QueryError(f"variable {v} does not occur in {q.name}")
        if v in forbidden:
            raise QueryError(f"endpoint {v} is forbidden")
    if src == dst:
        return [src]
    return bfs_path(gaifman_neighbours(q.body, forbidden), [src], [dst])


def exists_path_avoiding(q: ConjunctiveQuery, src: str, dst: str,
                         forbidden: Iterable[str] = ()) -> bool:
    return find_path_avoiding(q, src, dst, forbidden) is not None


def dynamic_subquery(q: ConjunctiveQuery) -> ConjunctiveQuery:
    return q.with_body(q.dynamic_atoms, head_name=f"{q.name}_dyn")


def static_subquery(q: ConjunctiveQuery) -> ConjunctiveQuery:
    return q.with_body(q.static_atoms, head_name=f"{q.name}_stat")


def static_parts(q: ConjunctiveQuery) -> list[StaticPart]:
    """Group static atoms by connectivity once dynamic variables are dropped."""
    dyn = q.dynamic_vars
    statics = q.static_atoms
    reduced = [Atom(a.relation, tuple(v for v in a.schema if v not in dyn), a.kind, k)
               for k, a in enumerate(statics)]
    parts = []
    for comp in atom_components(reduced):
        members = tuple(statics[r.index] for r in comp)
        part_vars = frozenset(v for a in members for v in a.schema)
        parts.append(StaticPart(members, part_vars & dyn, part_vars & q.free_vars))
    return parts

