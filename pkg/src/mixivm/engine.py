"""Maintaining a safe view tree under single-tuple updates.

Views are materialised bottom-up with a generic (attribute-at-a-time) join.
An update enters at the leaves of its relation and climbs to the root: join
views probe each sibling once, projection views keep support counts and only
pass on 0->1 and 1->0 transitions. Enumeration walks the free-only top of
each tree in preorder using prefix indexes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

from .parser import DELETE, INSERT, UpdateEvent
from .query import ConjunctiveQuery
from .rewrite import ATOM, JOIN, PROJECTION, ViewNode, ViewTree
from .storage import Interner, RelationStore, Row


class EngineError(ValueError):
    pass


class StaticUpdateError(EngineError):
    pass


class ConcurrentModification(RuntimeError):
    pass


def generic_join(order: Sequence[str], relations: Sequence[tuple[Sequence[str], Iterable[Row]]]
                 ) -> Iterator[Row]:
    """Join ``relations`` one variable at a time, yielding rows over ``order``.

    Each relation is loaded into a trie following ``order``; at every level
    the candidate values come from the smallest participating trie node and
    are probed in the others.
    """
    pos = {v: i for i, v in enumerate(order)}
    tries: list[dict] = []
    levels: list[list[str]] = []
    for schema, rows in relations:
        vs = sorted(schema, key=pos.__getitem__)
        perm = [list(schema).index(v) for v in vs]
        root: dict = {}
        for row in rows:
            node = root
            for p in perm:
                node = node.setdefault(row[p], {})
        tries.append(root)
        levels.append(vs)
    members = [[i for i, vs in enumerate(levels) if v in vs] for v in order]
    n = len(order)
    out = [0] * n

    def rec(level: int, nodes: list[dict]) -> Iterator[Row]:
        part = members[level]
        cands = [nodes[i] for i in part]
        smallest = min(cands, key=len)
        others = [c for c in cands if c is not smallest]
        if level == n - 1:
            prefix = tuple(out[:level])
            if others:
                for val in smallest:
                    if all(val in c for c in others):
                        yield prefix + (val,)
            else:
                for val in smallest:
                    yield prefix + (val,)
            return
        for val in smallest:
            if all(val in c for c in others):
                nxt = list(nodes)
                for i in part:
                    nxt[i] = nodes[i][val]
                out[level] = val
                yield from rec(level + 1, nxt)

    if n == 0 or any(not t for t in tries):
        return iter([()] if n == 0 and all(tries) else ())
    return rec(0, tries)


@dataclass(eq=False)
class _Runtime:
    node: ViewNode
    parent: _Runtime | None = None
    siblings: list[_Runtime] = field(default_factory=list)
    store: RelationStore | None = None
    counts: dict[Row, int] | None = None
    # how a child's delta row maps into this view
    to_parent: tuple[int, ...] = ()
    sibling_proj: list[tuple[int, ...]] = field(default_factory=list)


@dataclass
class EngineStats:
    updates: int = 0
    effective_updates: int = 0
    lookups_last: int = 0
    lookups_max: int = 0
    lookups_total: int = 0
    tuples_enumerated: int = 0
    epoch: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _positions(src: Sequence[str], dst: Sequence[str]) -> tuple[int, ...]:
    return tuple(src.index(v) for v in dst)


class Engine:
    """A materialised view tree plus update and enumeration entry points."""

    def __init__(self, plan: ViewTree) -> None:
        self.plan = plan
        self.query: ConjunctiveQuery = plan.query
        self.interner = Interner()
        self.stats = EngineStats()
        self._rt: dict[int, _Runtime] = {}
        self._leaves: dict[str, list[_Runtime]] = {}
        self._enum: list[list[tuple[_Runtime, tuple[int, ...], tuple[int, ...], tuple[int, ...]]]] = []
        self._build_runtime()

    # -- plan compilation -------------------------------------------------------
    def _build_runtime(self) -> None:
        plan = self.plan
        for root in plan.roots:
            for n in root.walk():
                self._rt[id(n)] = _Runtime(n)
        for n in plan.nodes():
            rt = self._rt[id(n)]
            p = plan.parent[id(n)]
            if p is not None:
                rt.parent = self._rt[id(p)]
                rt.siblings = [self._rt[id(s)] for s in plan.siblings(n)]
                if n.is_dynamic:
                    if p.kind == JOIN:
                        if not set(p.schema) <= set(n.schema):
                            raise EngineError(f"view {n.label()} breaks the update property")
                        rt.to_parent = _positions(n.schema, p.schema)
                        rt.sibling_proj = [_positions(n.schema, s.node.schema)
                                           for s in rt.siblings]
                    else:
                        rt.to_parent = _positions(n.schema, p.schema)
            if n.atom is not None:
                self._leaves.setdefault(n.atom.relation, []).append(rt)
        for root, sub in zip(plan.roots, plan.enumeration_subtrees):
            if not sub:
                raise EngineError(f"root {root.label()} has bound variables; plan is not safe")
        stored: set[int] = set()
        for n in plan.nodes():
            if n.kind == ATOM or n.is_dynamic:
                stored.add(id(n))
                for s in plan.siblings(n):
                    if n.is_dynamic:
                        stored.add(id(s))
        for sub in plan.enumeration_subtrees:
            stored.update(id(n) for n in sub)
        for i in stored:
            rt = self._rt[i]
            rt.store = RelationStore(len(rt.node.schema))
            if rt.node.kind == PROJECTION and rt.node.is_dynamic:
                rt.counts = {}
        for sub in plan.enumeration_subtrees:
            fixed: list[str] = []
            steps = []
            for n in sub:
                rt = self._rt[id(n)]
                new = [v for v in n.schema if v not in fixed]
                if not new:
                    continue
                key_vars = tuple(v for v in n.schema if v in fixed)
                key_pos = _positions(n.schema, key_vars)
                if key_pos:
                    rt.store.add_index(key_pos)  # type: ignore[union-attr]
                steps.append((rt, key_pos, tuple(fixed.index(v) for v in key_vars),
                              _positions(n.schema, new)))
                fixed.extend(new)
            self._enum.append(steps)
        self._enum_vars = []
        for sub in plan.enumeration_subtrees:
            fixed = []
            for n in sub:
                fixed.extend(v for v in n.schema if v not in fixed)
            self._enum_vars.append(fixed)

    # -- materialisation -------------------------------------------------------
    def load(self, data: Mapping[str, Iterable[Sequence[Hashable]]]) -> None:
        arity = {a.relation: len(a.schema) for a in self.query.body}
        for rel in data:
            if rel not in arity:
                raise EngineError(f"relation {rel} does not occur in {self.query.name}")
        rows: dict[str, list[Row]] = {}
        for rel, k in arity.items():
            out = []
            for t in data.get(rel, ()):
                if len(t) != k:
                    raise EngineError(f"relation {rel} expects arity {k}, got {tuple(t)!r}")
                out.append(self.interner.row(t))
            rows[rel] = out
        for root in self.plan.roots:
            for _ in self._content(root, rows):
                pass

    def _content(self, n: ViewNode, rows: Mapping[str, list[Row]]) -> Iterable[Row]:
        """Materialise ``n`` if it is stored and return (or stream) its rows."""
        rt = self._rt[id(n)]
        if n.kind == ATOM:
            produced: Iterable[Row] = rows[n.atom.relation]  # type: ignore[union-attr]
        elif n.kind == JOIN:
            kids = [(c.schema, list(self._content(c, rows))) for c in n.children]
            produced = generic_join(n.schema, kids)
        elif n.kind == PROJECTION:
            child = n.children[0]
            proj = _positions(child.schema, n.schema)
            if rt.counts is not None:
                counts: dict[Row, int] = {}
                for r in self._content(child, rows):
                    key = tuple(r[p] for p in proj)
                    counts[key] = counts.get(key, 0) + 1
                rt.counts = counts
                produced = counts.keys()
            else:
                produced = {tuple(r[p] for p in proj) for r in self._content(child, rows)}
        else:  # pragma: no cover
            raise EngineError(f"unknown view kind {n.kind}")
        if rt.store is None:
            return produced
        for r in produced:
            rt.store.insert(r)
        return rt.store

    # -- updates ---------------------------------------------------------------
    def apply_update(self, event: UpdateEvent | tuple[str, str, Sequence[Hashable]]) -> bool:
        """Apply one insert or delete; returns whether any view changed."""
        if isinstance(event, UpdateEvent):
            op, rel, values = event.op, event.relation, event.tuple
        else:
            op, rel, values = event
        if op not in (INSERT, DELETE):
            raise EngineError(f"not an update: {op}")
        leaves = self._leaves.get(rel or "")
        if not leaves:
            raise EngineError(f"unknown relation {rel}")
        if not leaves[0].node.atom.is_dynamic:  # type: ignore[union-attr]
            raise StaticUpdateError(f"relation {rel} is static")
        if len(values or ()) != len(leaves[0].node.schema):
            raise EngineError(f"relation {rel} expects arity {len(leaves[0].node.schema)}")
        self.stats.epoch += 1
        self.stats.updates += 1
        row = self.interner.row(values or ())
        sign = 1 if op == INSERT else -1
        self._lookups = 0
        changed = False
        for leaf in leaves:
            if self._touch(leaf, row, sign):
                changed = True
                self._propagate(leaf, row, sign)
        if changed:
            self.stats.effective_updates += 1
        self.stats.lookups_last = self._lookups
        self.stats.lookups_max = max(self.stats.lookups_max, self._lookups)
        self.stats.lookups_total += self._lookups
        return changed

    def _touch(self, rt: _Runtime, row: Row, sign: int) -> bool:
        store = rt.store
        assert store is not None
        self._lookups += store.cost
        return store.insert(row) if sign > 0 else store.delete(row)

    def _propagate(self, rt: _Runtime, row: Row, sign: int) -> None:
        while rt.parent is not None:
            parent = rt.parent
            if parent.node.kind == JOIN:
                for sib, proj in zip(rt.siblings, rt.sibling_proj):
                    self._lookups += 1
                    if tuple(row[p] for p in proj) not in sib.store:  # type: ignore[operator]
                        return
                prow = tuple(row[p] for p in rt.to_parent)
                if not self._touch(parent, prow, sign):  # pragma: no cover - update property
                    raise EngineError(f"join view {parent.node.label()} out of sync")
            else:
                prow = tuple(row[p] for p in rt.to_parent)
                counts = parent.counts
                assert counts is not None
                self._lookups += 1
                c = counts.get(prow, 0) + sign
                if c < 0:  # pragma: no cover
                    raise EngineError(f"negative support in {parent.node.label()}")
                if c:
                    counts[prow] = c
                else:
                    del counts[prow]
                if not ((sign > 0 and c == 1) or (sign < 0 and c == 0)):
                    return
                self._touch(parent, prow, sign)
            rt, row = parent, prow

    # -- enumeration -----------------------------------------------------------
    def _tree_rows(self, steps, width: int) -> Iterator[list[int]]:
        vals = [0] * width
        depth = len(steps)

        def rec(i: int, filled: int) -> Iterator[list[int]]:
            if i == depth:
                yield vals
                return
            rt, key_pos, key_slots, new_pos = steps[i]
            key = tuple(vals[s] for s in key_slots)
            for row in rt.store.matching(key_pos, key):
                for j, p in enumerate(new_pos):
                    vals[filled + j] = row[p]
                yield from rec(i + 1, filled + len(new_pos))

        return rec(0, 0)

    def enumerate(self) -> Iterator[tuple[Hashable, ...]]:
        """Yield each result tuple (in head order) exactly once."""
        epoch = self.stats.epoch
        for sub in self.plan.enumeration_subtrees:
            if not len(self._rt[id(sub[0])].store):  # type: ignore[arg-type]
                return
        head = self.query.head.schema
        trees = list(zip(self._enum, self._enum_vars))
        slot: dict[str, tuple[int, int]] = {}
        for t, (_, vs) in enumerate(trees):
            for i, v in enumerate(vs):
                slot[v] = (t, i)
        where = [slot[v] for v in head]
        current: list[list[int]] = [[] for _ in trees]

        def nest(t: int) -> Iterator[tuple[Hashable, ...]]:
            if t == len(trees):
                if self.stats.epoch != epoch:
                    raise ConcurrentModification("engine updated during enumeration")
                self.stats.tuples_enumerated += 1
                yield tuple(self.interner.value(current[a][b]) for a, b in where)
                if self.stats.epoch != epoch:
                    raise ConcurrentModification("engine updated during enumeration")
                return
            steps, vs = trees[t]
            for vals in self._tree_rows(steps, len(vs)):
                current[t] = vals
                yield from nest(t + 1)

        try:
            yield from nest(0)
        except RuntimeError as exc:
            if isinstance(exc, ConcurrentModification) or self.stats.epoch == epoch:
                raise
            raise ConcurrentModification("engine updated during enumeration") from exc

    # -- introspection ---------------------------------------------------------
    def view_contents(self, node: ViewNode) -> set[tuple[Hashable, ...]] | None:
        rt = self._rt[id(node)]
        if rt.store is None:
            return None
        return {self.interner.values(r) for r in rt.store}

    def compute_view(self, node: ViewNode) -> set[tuple[Hashable, ...]]:
        """Contents of any view, recomputed from the current base relations."""

        def rows(n: ViewNode) -> set[Row]:
            if n.kind == ATOM:
                return set(self._rt[id(n)].store)  # type: ignore[arg-type]
            if n.kind == JOIN:
                return set(generic_join(n.schema, [(c.schema, rows(c)) for c in n.children]))
            child = n.children[0]
            proj = _positions(child.schema, n.schema)
            return {tuple(r[p] for p in proj) for r in rows(child)}

        return {self.interner.values(r) for r in rows(node)}

    def support_counts(self, node: ViewNode) -> dict[tuple[Hashable, ...], int] | None:
        rt = self._rt[id(node)]
        if rt.counts is None:
            return None
        return {self.interner.values(r): c for r, c in rt.counts.items()}

    def stored_nodes(self) -> list[ViewNode]:
        return [n for n in self.plan.nodes() if self._rt[id(n)].store is not None]

    def snapshot(self) -> dict[str, tuple]:
        """Deterministic dump of every stored view (for equality checks)."""
        out = {}
        for i, n in enumerate(self.plan.nodes()):
            rt = self._rt[id(n)]
            if rt.store is not None:
                out[f"{i}:{n.label()}"] = (tuple(sorted(rt.store.rows)),
                                           tuple(sorted((rt.counts or {}).items())))
        return out


def materialize(plan: ViewTree, data: Mapping[str, Iterable[Sequence[Hashable]]]) -> Engine:
    engine = Engine(plan)
    engine.load(data)
    return engine


def apply_update(engine: Engine, event: UpdateEvent) -> bool:
    return engine.apply_update(event)


def enumerate_results(engine: Engine) -> Iterator[tuple[Hashable, ...]]:
    return engine.enumerate()
