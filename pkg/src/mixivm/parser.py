"""Text formats: ``.cq`` queries, ``.upd`` update streams and CSV relations.

Query grammar::

    Head(V1,...,Vk) := Rel1@d(...), Rel2@s(...), ... .

``%`` starts a comment that runs to the end of the line. Update streams hold
one event per line: ``+Rel(v1,...)``, ``-Rel(...)``, ``?`` or ``!``, with
``#`` comments.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .query import DYNAMIC, HEAD, STATIC, Atom, ConjunctiveQuery, QueryError

INSERT = "insert"
DELETE = "delete"
ENUMERATE = "enumerate"
CHECKPOINT = "checkpoint"

_ADORN = {"d": DYNAMIC, "s": STATIC}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_CONST = re.compile(r"\"[^\"]*\"|'[^']*'|-?[0-9][A-Za-z0-9_.]*")


class ParseError(ValueError):
    """A syntax or validity error tied to a source position (1-based)."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class StaticUpdateParseError(ParseError):
    """An update stream line targets a static relation."""


@dataclass(frozen=True)
class UpdateEvent:
    op: str
    relation: str | None = None
    tuple: tuple[str, ...] | None = None

    def __str__(self) -> str:
        if self.op == ENUMERATE:
            return "?"
        if self.op == CHECKPOINT:
            return "!"
        sign = "+" if self.op == INSERT else "-"
        return f"{sign}{self.relation}({','.join(self.tuple or ())})"


# -- query parsing ------------------------------------------------------------

class _Scanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, message: str, pos: int | None = None) -> ParseError:
        return ParseError(message, *self.where(pos))

    def skip(self) -> None:
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch.isspace():
                self.pos += 1
            elif ch == "%":
                nl = text.find("\n", self.pos)
                self.pos = len(text) if nl < 0 else nl
            else:
                break

    def peek(self, literal: str) -> bool:
        self.skip()
        return self.text.startswith(literal, self.pos)

    def expect(self, literal: str) -> int:
        self.skip()
        if not self.text.startswith(literal, self.pos):
            found = self.text[self.pos:self.pos + 1] or "end of input"
            raise self.error(f"expected {literal!r}, found {found!r}")
        start = self.pos
        self.pos += len(literal)
        return start

    def ident(self, what: str) -> tuple[str, int]:
        self.skip()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            if _CONST.match(self.text, self.pos):
                raise self.error("constants are not supported in atoms")
            found = self.text[self.pos:self.pos + 1] or "end of input"
            raise self.error(f"expected {what}, found {found!r}")
        self.pos = m.end()
        return m.group(), m.start()

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)


def _var_list(sc: _Scanner, rel: str) -> list[tuple[str, int]]:
    sc.expect("(")
    out: list[tuple[str, int]] = []
    if sc.peek(")"):
        sc.expect(")")
        return out
    while True:
        name, pos = sc.ident("variable")
        if any(name == n for n, _ in out):
            raise sc.error(f"duplicate variable {name} in atom {rel}", pos)
        out.append((name, pos))
        if sc.peek(","):
            sc.expect(",")
            continue
        sc.expect(")")
        return out


def parse_query(src: str, allow_repeats: bool = True) -> ConjunctiveQuery:
    """Parse one query; every error carries a (line, column) position."""
    sc = _Scanner(src)
    head_name, _ = sc.ident("head relation name")
    head_vars = _var_list(sc, head_name)
    sc.expect(":=")
    body: list[Atom] = []
    kinds: dict[str, str] = {}
    while True:
        rel, rel_pos = sc.ident("relation name")
        sc.skip()
        at = sc.pos
        sc.expect("@")
        sc.skip()
        m = _IDENT.match(sc.text, sc.pos)
        if not m or m.group() not in _ADORN:
            tag = m.group() if m else sc.text[sc.pos:sc.pos + 1]
            raise sc.error(f"unknown adornment {tag!r} (use @d or @s)", at)
        sc.pos = m.end()
        kind = _ADORN[m.group()]
        vars_ = _var_list(sc, rel)
        if not vars_:
            raise sc.error(f"atom {rel} has no variables", rel_pos)
        if kinds.setdefault(rel, kind) != kind:
            raise sc.error(f"relation {rel} is used both static and dynamic", rel_pos)
        if rel in kinds and any(a.relation == rel for a in body) and not allow_repeats:
            raise sc.error(f"repeated relation symbol {rel}", rel_pos)
        if any(a.relation == rel and len(a.schema) != len(vars_) for a in body):
            raise sc.error(f"relation {rel} used with different arities", rel_pos)
        body.append(Atom(rel, tuple(n for n, _ in vars_), kind, len(body)))
        if sc.peek(","):
            sc.expect(",")
            continue
        sc.expect(".")
        break
    if not sc.at_end():
        raise sc.error("unexpected text after the query")
    body_vars = {v for a in body for v in a.schema}
    for name, pos in head_vars:
        if name not in body_vars:
            raise sc.error(f"head variable {name} does not occur in the body", pos)
    head = Atom(head_name, tuple(n for n, _ in head_vars), HEAD)
    try:
        return ConjunctiveQuery(head, tuple(body), allow_repeats=allow_repeats)
    except QueryError as exc:  # pragma: no cover - checks above mirror the model
        raise ParseError(str(exc), 1, 1) from exc


def format_query(q: ConjunctiveQuery) -> str:
    """Pretty-print in the grammar accepted by :func:`parse_query`."""
    return str(q)


def load_query(path: str | Path, allow_repeats: bool = True) -> ConjunctiveQuery:
    return parse_query(Path(path).read_text(encoding="utf-8"), allow_repeats)


# -- update streams -----------------------------------------------------------

def _relation_table(schema: ConjunctiveQuery | Mapping[str, tuple[int, str]]
                    ) -> dict[str, tuple[int, str]]:
    if isinstance(schema, ConjunctiveQuery):
        return {a.relation: (len(a.schema), a.kind) for a in schema.body}
    return dict(schema)


def _split_values(body: str) -> tuple[str, ...]:
    if not body.strip():
        return ()
    row = next(csv.reader([body], skipinitialspace=True))
    return tuple(v.strip() for v in row)


_UPDATE = re.compile(r"([+-])\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$")


def parse_update_stream(text: str,
                        schema: ConjunctiveQuery | Mapping[str, tuple[int, str]]
                        ) -> list[UpdateEvent]:
    """Parse an update stream against the relations declared by ``schema``.

    ``schema`` is a query or a mapping ``relation -> (arity, kind)``.
    """
    table = _relation_table(schema)
    events: list[UpdateEvent] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        col = line.index(stripped[0]) + 1
        if stripped == "?":
            events.append(UpdateEvent(ENUMERATE))
            continue
        if stripped == "!":
            events.append(UpdateEvent(CHECKPOINT))
            continue
        m = _UPDATE.match(stripped)
        if not m:
            raise ParseError(f"malformed update {stripped!r}", lineno, col)
        sign, rel, body = m.groups()
        if rel not in table:
            raise ParseError(f"unknown relation {rel}", lineno, col + 1)
        arity, kind = table[rel]
        if kind == STATIC:
            raise StaticUpdateParseError(f"relation {rel} is static and cannot be updated",
                                         lineno, col + 1)
        values = _split_values(body)
        if len(values) != arity:
            raise ParseError(f"relation {rel} has arity {arity}, got {len(values)} values",
                             lineno, col + 1)
        events.append(UpdateEvent(INSERT if sign == "+" else DELETE, rel, values))
    return events


def format_update_stream(events: Iterable[UpdateEvent]) -> str:
    return "".join(f"{e}\n" for e in events)


# -- relation data ------------------------------------------------------------

def read_relation_csv(text: str, arity: int | None = None, name: str = "?"
                      ) -> set[tuple[str, ...]]:
    rows: set[tuple[str, ...]] = set()
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row:
            continue
        if arity is not None and len(row) != arity:
            raise ParseError(f"relation {name} has arity {arity}, got {len(row)} values",
                             lineno, 1)
        rows.add(tuple(row))
    return rows


def write_relation_csv(rows: Iterable[tuple[str, ...]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in sorted(rows):
        writer.writerow(row)
    return buf.getvalue()


def load_database(directory: str | Path, q: ConjunctiveQuery
                  ) -> dict[str, set[tuple[str, ...]]]:
    """Read ``<Rel>.csv`` for each relation of ``q``; absent files mean empty."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"data directory {directory} does not exist")
    data: dict[str, set[tuple[str, ...]]] = {}
    for rel, atom in q.relations().items():
        path = directory / f"{rel}.csv"
        if path.exists():
            data[rel] = read_relation_csv(path.read_text(encoding="utf-8"),
                                          len(atom.schema), rel)
        else:
            data[rel] = set()
    return data


def save_database(directory: str | Path, data: Mapping[str, Iterable[tuple[str, ...]]]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for rel, rows in data.items():
        (directory / f"{rel}.csv").write_text(write_relation_csv(rows), encoding="utf-8")
