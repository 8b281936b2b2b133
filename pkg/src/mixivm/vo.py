"""Variable orders, their dependency sets, and the CreateVO construction."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from itertools import islice, product
from typing import Iterable, Iterator, Mapping

from .query import (Atom, ConjunctiveQuery, QueryError, gaifman_neighbours,
                    static_parts)

DepMap = dict[str, frozenset[str]]

LAYOUT_CAP = 2_000


@dataclass(frozen=True)
class VariableOrder:
    """A forest over the variables of ``query`` given by a parent map.

    Insertion order of ``parent`` fixes sibling order. Atoms are not stored:
    each one hangs below the deepest of its variables.
    """

    query: ConjunctiveQuery
    parent: Mapping[str, str | None] = field(hash=False)

    @classmethod
    def from_nested(cls, q: ConjunctiveQuery, forest: Mapping[str, Mapping]) -> VariableOrder:
        """Build from nested dicts, e.g. ``{"A": {"B": {}, "C": {"D": {}}}}``."""
        parent: dict[str, str | None] = {}

        def walk(node: Mapping[str, Mapping], up: str | None) -> None:
            for var, sub in node.items():
                parent[var] = up
                walk(sub, var)

        walk(forest, None)
        return cls(q, parent)

    # -- shape ----------------------------------------------------------------
    @cached_property
    def children(self) -> dict[str | None, tuple[str, ...]]:
        out: dict[str | None, list[str]] = {None: []}
        for v in self.parent:
            out.setdefault(v, [])
        for v, p in self.parent.items():
            out.setdefault(p, []).append(v)
        return {k: tuple(vs) for k, vs in out.items()}

    @property
    def roots(self) -> tuple[str, ...]:
        return self.children[None]

    def variables(self) -> list[str]:
        """Variables in preorder."""
        out: list[str] = []
        stack = list(reversed(self.roots))
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children.get(v, ())))
        return out

    def ancestors(self, var: str) -> list[str]:
        """Ancestors of ``var`` from the root downwards."""
        out = []
        p = self.parent[var]
        while p is not None:
            out.append(p)
            p = self.parent[p]
        return out[::-1]

    @cached_property
    def depth(self) -> dict[str, int]:
        return {v: len(self.ancestors(v)) for v in self.parent}

    def subtree_vars(self, var: str) -> list[str]:
        out = [var]
        i = 0
        while i < len(out):
            out.extend(self.children.get(out[i], ()))
            i += 1
        return out

    def lowest(self, atom: Atom) -> str:
        return max(atom.schema, key=lambda v: self.depth[v])

    @cached_property
    def attached(self) -> dict[str, tuple[Atom, ...]]:
        out: dict[str, list[Atom]] = {v: [] for v in self.parent}
        for a in self.query.body:
            out[self.lowest(a)].append(a)
        return {v: tuple(a) for v, a in out.items()}

    def subtree_atoms(self, var: str) -> list[Atom]:
        return [a for v in self.subtree_vars(var) for a in self.attached[v]]

    def dep(self) -> DepMap:
        return self._dep

    @cached_property
    def _dep(self) -> DepMap:
        out: DepMap = {}
        for x in self.parent:
            anc = set(self.ancestors(x))
            below = set(self.subtree_vars(x))
            out[x] = frozenset(y for a in self.query.body if a.vars & below
                               for y in a.vars & anc)
        return out

    def key(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted((v, p or "") for v, p in self.parent.items()))

    def to_nested(self) -> dict:
        def build(v: str) -> dict:
            return {c: build(c) for c in self.children.get(v, ())}
        return {r: build(r) for r in self.roots}

    def __str__(self) -> str:
        def fmt(v: str) -> str:
            kids = [fmt(c) for c in self.children.get(v, ())]
            kids += [str(a) for a in self.attached[v]]
            return v + (" -> {" + ", ".join(kids) + "}" if kids else "")
        return "; ".join(fmt(r) for r in self.roots)

    def to_dot(self) -> str:
        free = self.query.free_vars
        lines = ["digraph vo {", "  node [fontname=\"Helvetica\"];"]
        for v in self.variables():
            label = f"<<U>{v}</U>>" if v in free else f"\"{v}\""
            lines.append(f"  \"v_{v}\" [shape=ellipse, label={label}];")
            p = self.parent[v]
            if p is not None:
                lines.append(f"  \"v_{p}\" -> \"v_{v}\";")
            for a in self.attached[v]:
                color = "red" if a.is_dynamic else "blue"
                lines.append(f"  \"a_{a.index}\" [shape=box, color={color}, label=\"{a}\"];")
                lines.append(f"  \"v_{v}\" -> \"a_{a.index}\";")
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- checks -------------------------------------------------------------------

def validate(omega: VariableOrder, q: ConjunctiveQuery) -> list[str]:
    """Return human-readable violations of the VO invariants (empty if valid)."""
    problems: list[str] = []
    nodes = set(omega.parent)
    if nodes != set(q.vars):
        missing, extra = sorted(q.vars - nodes), sorted(nodes - q.vars)
        if missing:
            problems.append(f"variables missing from the order: {missing}")
        if extra:
            problems.append(f"unknown variables in the order: {extra}")
    for v, p in omega.parent.items():
        if p is not None and p not in nodes:
            problems.append(f"parent {p} of {v} is not a node")
    for v in omega.parent:
        seen = {v}
        p = omega.parent[v]
        while p is not None and p in nodes:
            if p in seen:
                problems.append(f"cycle through {v}")
                break
            seen.add(p)
            p = omega.parent[p]
    if problems:
        return problems
    for a in q.body:
        low = omega.lowest(a)
        anc = set(omega.ancestors(low)) | {low}
        if not a.vars <= anc:
            problems.append(f"atom {a} does not lie on a root-to-leaf path")
    return problems


def compute_dep(omega: VariableOrder, q: ConjunctiveQuery | None = None) -> DepMap:
    return dict(omega.dep())


def is_canonical(omega: VariableOrder) -> bool:
    for a in omega.query.dynamic_atoms:
        low = omega.lowest(a)
        if set(omega.ancestors(low)) | {low} != a.vars:
            return False
    return True


def is_free_top(omega: VariableOrder) -> bool:
    free = omega.query.free_vars
    return all(all(y in free for y in omega.ancestors(x)) for x in free)


def is_well_structured(omega: VariableOrder, q: ConjunctiveQuery | None = None) -> bool:
    if validate(omega, omega.query):
        return False
    return is_canonical(omega) and is_free_top(omega)


# -- enumeration of free-top, canonical layouts ---------------------------------

Layout = tuple[tuple[str, str | None], ...]


def _components(vars_: frozenset[str], atoms: Iterable[Atom]) -> list[list[str]]:
    adj = gaifman_neighbours(atoms)
    left = set(vars_)
    comps = []
    for start in sorted(vars_):
        if start not in left:
            continue
        comp, stack = [], [start]
        left.discard(start)
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in adj.get(v, ()):
                if w in left:
                    left.discard(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def _forests(vars_: frozenset[str], atoms: tuple[Atom, ...], dynamic: tuple[Atom, ...],
             free: frozenset[str], up: str | None) -> Iterator[Layout]:
    """Yield parent assignments for ``vars_`` hanging below ``up``.

    Components of the Gaifman graph become sibling trees; the root of each
    one must be free when the component has a free variable, and must occur
    in every dynamic atom that still has variables in the component.
    """
    if not vars_:
        yield ()
        return
    local = [a for a in atoms if a.vars & vars_]
    comps = _components(vars_, local)
    per_comp = [_trees(frozenset(c), local, dynamic, free, up) for c in comps]
    if len(per_comp) == 1:
        yield from per_comp[0]
        return
    for combo in product(*[list(g) for g in per_comp]):
        yield tuple(p for part in combo for p in part)


def _trees(comp: frozenset[str], atoms: list[Atom], dynamic: tuple[Atom, ...],
           free: frozenset[str], up: str | None) -> Iterator[Layout]:
    roots = sorted(comp)
    if comp & free:
        roots = [r for r in roots if r in free]
    for a in dynamic:
        if a.vars & comp:
            roots = [r for r in roots if r in a.vars]
    for r in roots:
        for rest in _forests(comp - {r}, tuple(atoms), dynamic, free, r):
            yield ((r, up),) + rest


def enumerate_well_structured(q: ConjunctiveQuery) -> Iterator[VariableOrder]:
    """Yield canonical free-top VOs that split at connected components."""
    for layout in _forests(q.vars, q.body, q.dynamic_atoms, q.free_vars, None):
        yield VariableOrder(q, dict(layout))


# -- CreateVO -----------------------------------------------------------------

def dynamic_order(q: ConjunctiveQuery) -> dict[str, str | None]:
    """Parent map of the well-structured VO for the dynamic sub-query.

    Variables with equal sets of dynamic atoms form a chain (free first,
    then alphabetical); a chain hangs below the chain whose atom set is the
    smallest strict superset.
    """
    groups: dict[frozenset[int], list[str]] = {}
    for v in sorted(q.dynamic_vars):
        key = frozenset(a.index for a in q.dynamic_atoms if v in a.vars)
        groups.setdefault(key, []).append(v)
    order = sorted(groups, key=lambda k: (-len(k), sorted(groups[k])))
    parent: dict[str, str | None] = {}
    for key in order:
        chain = sorted(groups[key], key=lambda v: (v not in q.free_vars, v))
        supers = [k for k in groups if key < k]
        up = groups[min(supers, key=len)] if supers else None
        last = None if up is None else sorted(up, key=lambda v: (v not in q.free_vars, v))[-1]
        for v in chain:
            parent[v] = last
            last = v
    return parent


def _local_width(part_q: ConjunctiveQuery, parent: dict[str, str | None],
                 rest: frozenset[str]) -> Fraction:
    from .width import _CoverCache, width_profile

    prof = width_profile(VariableOrder(part_q, parent), _CoverCache())
    return max((w for v, w in prof.items() if v in rest), default=Fraction(0))


def part_layout(q: ConjunctiveQuery, atoms: tuple[Atom, ...], neck: list[str]
                ) -> Layout:
    """Free-top layout of a static part's non-neck variables.

    Among component-split layouts the one with the smallest width on the
    part's own atoms wins; the first in generation order breaks ties.
    """
    part_vars = frozenset(v for a in atoms for v in a.schema)
    rest = part_vars - set(neck)
    if not rest:
        return ()
    bottom = neck[-1] if neck else None
    free = q.free_vars & part_vars
    part_q = q.with_body(atoms, head_name=f"{q.name}_part")
    neck_parent: dict[str, str | None] = {}
    up = None
    for v in neck:
        neck_parent[v] = up
        up = v
    chain = sorted(rest, key=lambda v: (v not in free, v))
    path: list[tuple[str, str | None]] = []
    up = bottom
    for v in chain:
        path.append((v, up))
        up = v
    candidates = list(islice(_forests(rest, atoms, (), free, bottom), LAYOUT_CAP))
    candidates.append(tuple(path))
    best, best_w = None, None
    for layout in candidates:
        w = _local_width(part_q, {**neck_parent, **dict(layout)}, rest)
        if best_w is None or w < best_w:
            best, best_w = layout, w
    assert best is not None
    return best


def create_vo(q: ConjunctiveQuery) -> VariableOrder:
    """Well-structured VO for a well-behaved query."""
    from .classify import check_well_behaved

    ok, _ = check_well_behaved(q)
    if not ok:
        raise QueryError(f"query {q.name} is not well-behaved")
    parent = dynamic_order(q)
    depth: dict[str, int] = {}
    for v in parent:
        d, p = 0, parent[v]
        while p is not None:
            d, p = d + 1, parent[p]
        depth[v] = d
    for part in static_parts(q):
        neck = sorted(part.intersection_set, key=lambda v: depth[v])
        for v, up in part_layout(q, part.atoms, neck):
            parent[v] = up
    return VariableOrder(q, parent)
