"""Hash-indexed tuple stores with prefix indexes.

A store keeps its tuples in an insertion-ordered dict (a set with stable
iteration) and, for every declared key, a map from key values to the
matching tuples. All operations touch a number of hash entries bounded by
the number of declared keys.
"""

from __future__ import annotations

from typing import Hashable, Iterable, Iterator, Sequence

Row = tuple[int, ...]


class Interner:
    """Bidirectional map between external values and dense integers."""

    def __init__(self) -> None:
        self._ids: dict[Hashable, int] = {}
        self._values: list[Hashable] = []

    def intern(self, value: Hashable) -> int:
        ids = self._ids
        i = ids.setdefault(value, len(ids))
        if i == len(self._values):
            self._values.append(value)
        return i

    def lookup(self, value: Hashable) -> int | None:
        return self._ids.get(value)

    def row(self, values: Iterable[Hashable]) -> Row:
        return tuple(map(self.intern, values))

    def value(self, i: int) -> Hashable:
        return self._values[i]

    def values(self, row: Sequence[int]) -> tuple[Hashable, ...]:
        return tuple(self._values[i] for i in row)

    def __len__(self) -> int:
        return len(self._values)


class RelationStore:
    def __init__(self, arity: int, keys: Iterable[Sequence[int]] = ()) -> None:
        self.arity = arity
        self.rows: dict[Row, None] = {}
        self.indexes: dict[tuple[int, ...], dict[Row, dict[Row, None]]] = {}
        for k in keys:
            self.add_index(k)

    def add_index(self, positions: Sequence[int]) -> None:
        positions = tuple(positions)
        if positions in self.indexes:
            return
        idx: dict[Row, dict[Row, None]] = {}
        for row in self.rows:
            idx.setdefault(tuple(row[p] for p in positions), {})[row] = None
        self.indexes[positions] = idx

    @property
    def cost(self) -> int:
        """Hash operations charged for one insert or delete."""
        return 1 + len(self.indexes)

    def insert(self, row: Row) -> bool:
        if row in self.rows:
            return False
        self.rows[row] = None
        for pos, idx in self.indexes.items():
            idx.setdefault(tuple(row[p] for p in pos), {})[row] = None
        return True

    def delete(self, row: Row) -> bool:
        if row not in self.rows:
            return False
        del self.rows[row]
        for pos, idx in self.indexes.items():
            key = tuple(row[p] for p in pos)
            bucket = idx[key]
            del bucket[row]
            if not bucket:
                del idx[key]
        return True

    def __contains__(self, row: Row) -> bool:
        return row in self.rows

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[Row]:
        return iter(self.rows)

    def matching(self, positions: tuple[int, ...], key: Row) -> Iterable[Row]:
        """Rows whose values at ``positions`` equal ``key``."""
        if not positions:
            return self.rows
        return self.indexes[positions].get(key, ())

    def check_indexes(self) -> bool:
        """True if every index agrees with a rebuild from the rows."""
        for pos, idx in self.indexes.items():
            fresh: dict[Row, set[Row]] = {}
            for row in self.rows:
                fresh.setdefault(tuple(row[p] for p in pos), set()).add(row)
            if {k: set(v) for k, v in idx.items()} != fresh:
                return False
        return True
