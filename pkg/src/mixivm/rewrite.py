"""View trees: compiling a variable order into views and checking safety."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

from .query import Atom, ConjunctiveQuery, connected_components
from .vo import VariableOrder

ATOM = "atom"
JOIN = "join"
PROJECTION = "projection"


@dataclass(frozen=True, eq=False)
class ViewNode:
    name: str
    kind: str
    schema: tuple[str, ...]
    children: tuple[ViewNode, ...] = ()
    atom: Atom | None = None
    var: str | None = None

    @cached_property
    def is_dynamic(self) -> bool:
        if self.atom is not None:
            return self.atom.is_dynamic
        return any(c.is_dynamic for c in self.children)

    def atoms(self) -> list[Atom]:
        if self.atom is not None:
            return [self.atom]
        return [a for c in self.children for a in c.atoms()]

    def walk(self) -> Iterator[ViewNode]:
        yield self
        for c in self.children:
            yield from c.walk()

    def label(self) -> str:
        if self.atom is not None:
            return str(self.atom)
        return f"{self.name}({','.join(self.schema)})"

    def __repr__(self) -> str:
        return f"ViewNode({self.label()})"


def leaf(atom: Atom) -> ViewNode:
    return ViewNode(atom.relation, ATOM, atom.schema, atom=atom)


def join_view(name: str, children: Sequence[ViewNode], schema: Sequence[str] | None = None
              ) -> ViewNode:
    if schema is None:
        schema = tuple(dict.fromkeys(v for c in children for v in c.schema))
    return ViewNode(name, JOIN, tuple(schema), tuple(children))


def projection_view(name: str, schema: Sequence[str], child: ViewNode) -> ViewNode:
    return ViewNode(name, PROJECTION, tuple(schema), (child,))


@dataclass(frozen=True, eq=False)
class ViewTree:
    query: ConjunctiveQuery
    roots: tuple[ViewNode, ...]
    vo: VariableOrder | None = field(default=None)

    def nodes(self) -> list[ViewNode]:
        return [n for r in self.roots for n in r.walk()]

    @cached_property
    def parent(self) -> dict[int, ViewNode | None]:
        out: dict[int, ViewNode | None] = {}
        for r in self.roots:
            out[id(r)] = None
            for n in r.walk():
                for c in n.children:
                    out[id(c)] = n
        return out

    def siblings(self, node: ViewNode) -> list[ViewNode]:
        p = self.parent[id(node)]
        if p is None:
            return []
        return [c for c in p.children if c is not node]

    def root_of(self, node: ViewNode) -> ViewNode:
        while self.parent[id(node)] is not None:
            node = self.parent[id(node)]  # type: ignore[assignment]
        return node

    @cached_property
    def enumeration_subtrees(self) -> tuple[tuple[ViewNode, ...], ...]:
        """Per tree, the largest connected set of free-only views holding the root."""
        free = self.query.free_vars
        out = []
        for r in self.roots:
            chosen: list[ViewNode] = []
            if set(r.schema) <= free:
                stack = [r]
                while stack:
                    n = stack.pop()
                    chosen.append(n)
                    stack.extend(c for c in reversed(n.children) if set(c.schema) <= free)
            out.append(tuple(chosen))
        return tuple(out)

    def __str__(self) -> str:
        def fmt(n: ViewNode, indent: int) -> list[str]:
            lines = ["  " * indent + n.label()]
            for c in n.children:
                lines.extend(fmt(c, indent + 1))
            return lines
        return "\n".join(line for r in self.roots for line in fmt(r, 0))

    def to_dot(self) -> str:
        free = self.query.free_vars
        ids = {id(n): f"n{i}" for i, n in enumerate(self.nodes())}
        lines = ["digraph viewtree {", "  rankdir=BT;", "  node [shape=plaintext];"]
        for n in self.nodes():
            cols = ",".join(f"<U>{v}</U>" if v in free else v for v in n.schema)
            name = n.atom.relation if n.atom is not None else n.name
            color = "red" if n.is_dynamic else "blue"
            lines.append(f"  {ids[id(n)]} [label=<{name}({cols})>, fontcolor={color}];")
            for c in n.children:
                lines.append(f"  {ids[id(c)]} -> {ids[id(n)]} [arrowhead=none];")
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- Rewrite --------------------------------------------------------------------

def rewrite(omega: VariableOrder, q: ConjunctiveQuery | None = None) -> ViewTree:
    """Turn a well-structured VO into a view tree.

    At each variable X with ``S = {X} u dep(X)``: several children are joined
    into ``V_X(S)``, a single child already has schema ``S`` and is reused.
    A projection ``V'_X(dep(X))`` is added above when X has a parent or when
    X is a bound root, so every tree is rooted at a free-only view.
    """
    q = q or omega.query
    dep = omega.dep()
    depth = omega.depth
    free = q.free_vars
    used: dict[str, int] = {}

    def fresh(base: str) -> str:
        n = used.get(base, 0)
        used[base] = n + 1
        return base if n == 0 else f"{base}_{n}"

    def ordered(vs) -> tuple[str, ...]:
        return tuple(sorted(vs, key=lambda v: (depth[v], v)))

    def build(x: str) -> ViewNode:
        kids = [build(c) for c in omega.children.get(x, ())]
        kids += [leaf(a) for a in omega.attached[x]]
        s = ordered({x} | dep[x])
        if len(kids) == 1:
            core = kids[0]
        else:
            core = ViewNode(fresh(f"V_{x}"), JOIN, s, tuple(kids), var=x)
        if omega.parent[x] is not None or x not in free:
            return ViewNode(fresh(f"V'_{x}"), PROJECTION, ordered(dep[x]), (core,), var=x)
        return core

    return ViewTree(q, tuple(build(r) for r in omega.roots), omega)


# -- safety -------------------------------------------------------------------

def check_safe(t: ViewTree, q: ConjunctiveQuery | None = None) -> list[str]:
    """List violations of the correctness, update and enumeration properties."""
    q = q or t.query
    problems: list[str] = []
    leaves = sorted(a.index for r in t.roots for a in r.atoms())
    if leaves != sorted(a.index for a in q.body):
        problems.append("structure: leaves are not exactly the body atoms")
    for n in t.nodes():
        if n.kind == PROJECTION:
            if len(n.children) != 1 or not set(n.schema) <= set(n.children[0].schema):
                problems.append(f"structure: {n.label()} is not a projection of its child")
        elif n.kind == JOIN:
            union = {v for c in n.children for v in c.schema}
            if set(n.schema) != union:
                problems.append(f"structure: {n.label()} is not the join of its children")

    tree_of = {a.index: i for i, r in enumerate(t.roots) for a in r.atoms()}
    for comp in connected_components(q):
        trees = {tree_of.get(a.index) for a in comp}
        if len(trees) > 1:
            problems.append("correctness(1): component "
                            f"{{{', '.join(str(a) for a in comp)}}} spans several trees")

    for n in t.nodes():
        if n.kind != PROJECTION or not n.children:
            continue
        child = n.children[0]
        dropped = set(child.schema) - set(n.schema)
        inside = {a.index for a in child.atoms()}
        for a in q.body:
            if a.vars & dropped and a.index not in inside:
                problems.append(f"correctness(2): {a} uses a variable projected away "
                                f"by {n.label()} outside its subtree")

    for n in t.nodes():
        if not n.is_dynamic:
            continue
        for s in t.siblings(n):
            if not set(s.schema) <= set(n.schema):
                problems.append(f"update: dynamic view {n.label()} does not cover "
                                f"sibling {s.label()}")

    free = q.free_vars
    covered: set[str] = set()
    for r, sub in zip(t.roots, t.enumeration_subtrees):
        if not sub:
            problems.append(f"enumeration: root {r.label()} has bound variables "
                            f"{sorted(set(r.schema) - free)}")
        for n in sub:
            covered |= set(n.schema)
    if covered != set(free) and all(t.enumeration_subtrees):
        problems.append(f"enumeration: free variables {sorted(free - covered)} "
                        "are not reachable from the roots")
    return problems
