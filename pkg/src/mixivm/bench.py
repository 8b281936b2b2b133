"""Reduction workloads (OuMv, OMv) and a small timing harness.

OuMv runs on ``Q_RST() := R@d(A), S@s(A,B), T@d(B)``: the matrix goes into
the static relation S and each vector pair becomes a batch of updates to R
and T. OMv runs on ``Q_ST(A) := S@s(A,B), T@d(B)`` with the matrix in S and
the vector in T. Both queries lie outside the well-behaved fragment, so the
harness drives them through the transition-system runtime.
"""

from __future__ import annotations

import csv
import io
import random
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .parser import (DELETE, ENUMERATE, INSERT, UpdateEvent, format_update_stream, parse_query,
                     save_database)
from .query import ConjunctiveQuery
from .transition import EAGER, LAZY, TransitionSystem, eager_cap, max_dynamic_database

EAGER_PREFERRED = 12

OUMV_QUERY = "Q_RST() := R@d(A), S@s(A,B), T@d(B)."
OMV_QUERY = "Q_ST(A) := S@s(A,B), T@d(B)."

Vector = tuple[bool, ...]
Matrix = tuple[Vector, ...]


@dataclass(frozen=True)
class OuMvInstance:
    n: int
    matrix: Matrix
    vector_pairs: tuple[tuple[Vector, Vector], ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if len(self.matrix) != self.n or any(len(r) != self.n for r in self.matrix):
            raise ValueError("matrix must be n x n")
        for u, v in self.vector_pairs:
            if len(u) != self.n or len(v) != self.n:
                raise ValueError("vectors must have length n")


@dataclass(frozen=True)
class OMvInstance:
    n: int
    matrix: Matrix
    vectors: tuple[Vector, ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if len(self.matrix) != self.n or any(len(r) != self.n for r in self.matrix):
            raise ValueError("matrix must be n x n")
        if any(len(v) != self.n for v in self.vectors):
            raise ValueError("vectors must have length n")


def _bits(rng: random.Random, n: int, density: float) -> Vector:
    return tuple(rng.random() < density for _ in range(n))


def random_oumv(n: int, rng: random.Random, rounds: int | None = None,
                density: float = 0.3) -> OuMvInstance:
    matrix = tuple(_bits(rng, n, density) for _ in range(n))
    pairs = tuple((_bits(rng, n, density), _bits(rng, n, density))
                  for _ in range(n if rounds is None else rounds))
    return OuMvInstance(n, matrix, pairs)


def random_omv(n: int, rng: random.Random, rounds: int | None = None,
               density: float = 0.3) -> OMvInstance:
    matrix = tuple(_bits(rng, n, density) for _ in range(n))
    vectors = tuple(_bits(rng, n, density) for _ in range(n if rounds is None else rounds))
    return OMvInstance(n, matrix, vectors)


def uMv(u: Vector, m: Matrix, v: Vector) -> bool:
    return any(u[i] and m[i][j] and v[j] for i in range(len(u)) for j in range(len(v)))


def Mv(m: Matrix, v: Vector) -> Vector:
    return tuple(any(m[i][j] and v[j] for j in range(len(v))) for i in range(len(m)))


def _matrix_facts(m: Matrix) -> set[tuple[str, str]]:
    return {(str(i + 1), str(j + 1)) for i, row in enumerate(m) for j, x in enumerate(row) if x}


def _diff(rel: str, old: Vector | None, new: Vector) -> list[UpdateEvent]:
    events = []
    for i, bit in enumerate(new):
        was = bool(old and old[i])
        if was and not bit:
            events.append(UpdateEvent(DELETE, rel, (str(i + 1),)))
        elif bit and not was:
            events.append(UpdateEvent(INSERT, rel, (str(i + 1),)))
    return events


def encode_oumv(inst: OuMvInstance) -> tuple[dict[str, set[tuple[str, ...]]], list[UpdateEvent]]:
    """Static data for S and the update stream; one ``?`` closes each round."""
    data: dict[str, set[tuple[str, ...]]] = {"S": _matrix_facts(inst.matrix), "R": set(), "T": set()}
    events: list[UpdateEvent] = []
    prev: tuple[Vector, Vector] | None = None
    for u, v in inst.vector_pairs:
        events += _diff("R", prev[0] if prev else None, u)
        events += _diff("T", prev[1] if prev else None, v)
        events.append(UpdateEvent(ENUMERATE))
        prev = (u, v)
    return data, events


def encode_omv(inst: OMvInstance) -> tuple[dict[str, set[tuple[str, ...]]], list[UpdateEvent]]:
    data: dict[str, set[tuple[str, ...]]] = {"S": _matrix_facts(inst.matrix), "T": set()}
    events: list[UpdateEvent] = []
    prev: Vector | None = None
    for v in inst.vectors:
        events += _diff("T", prev, v)
        events.append(UpdateEvent(ENUMERATE))
        prev = v
    return data, events


def round_sizes(events: Sequence[UpdateEvent]) -> list[int]:
    """Number of updates preceding each ``?`` event."""
    sizes, k = [], 0
    for e in events:
        if e.op == ENUMERATE:
            sizes.append(k)
            k = 0
        elif e.op in (INSERT, DELETE):
            k += 1
    return sizes


def _drive(q: ConjunctiveQuery, data, events: Iterable[UpdateEvent], mode: str | None
           ) -> list[list[tuple]]:
    if mode is None:
        p = len(max_dynamic_database(q, data))
        mode = EAGER if p <= min(EAGER_PREFERRED, eager_cap()) else LAZY
    ts = TransitionSystem(q, data, mode)
    state = ts.initial
    answers = []
    for e in events:
        if e.op == ENUMERATE:
            answers.append(list(ts.enumerate(state)))
        elif e.op in (INSERT, DELETE):
            state = ts.apply_update(state, e)
    return answers


def run_oumv(inst: OuMvInstance, mode: str | None = None) -> list[bool]:
    """Per-round answers ``u_r M v_r`` read off the query result."""
    data, events = encode_oumv(inst)
    return [bool(r) for r in _drive(parse_query(OUMV_QUERY), data, events, mode)]


def run_omv(inst: OMvInstance, mode: str | None = None) -> list[Vector]:
    data, events = encode_omv(inst)
    out = []
    for rows in _drive(parse_query(OMV_QUERY), data, events, mode):
        hits = {int(t[0]) for t in rows}
        out.append(tuple(i + 1 in hits for i in range(inst.n)))
    return out


def write_instance(directory: str | Path, query_text: str,
                   data: dict[str, set[tuple[str, ...]]], events: Sequence[UpdateEvent]) -> None:
    """Write the ``query.cq`` / ``<Rel>.csv`` / ``updates.upd`` triple."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "query.cq").write_text(query_text + "\n", encoding="utf-8")
    save_database(directory / "data", data)
    (directory / "updates.upd").write_text(format_update_stream(events), encoding="utf-8")


# -- timing -------------------------------------------------------------------

@dataclass(frozen=True)
class TimingPoint:
    n: int
    median_update_s: float | None
    median_delay_s: float | None
    preprocessing_s: float
    updates: int
    lookups_max: int


@dataclass
class TimingProfile:
    query: str
    points: list[TimingPoint] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["query", "N", "median_update_s", "median_delay_s", "preprocessing_s",
                    "updates", "lookups_max"])
        for p in self.points:
            w.writerow([self.query, p.n, _fmt(p.median_update_s), _fmt(p.median_delay_s),
                        _fmt(p.preprocessing_s), p.updates, p.lookups_max])
        return buf.getvalue()

    def slope(self, attr: str = "preprocessing_s") -> float:
        """Least-squares slope of log(attr) against log(N)."""
        import math
        pts = [(math.log(p.n), math.log(getattr(p, attr))) for p in self.points
               if getattr(p, attr)]
        if len(pts) < 2:
            raise ValueError("need at least two positive measurements")
        mx = sum(x for x, _ in pts) / len(pts)
        my = sum(y for _, y in pts) / len(pts)
        return (sum((x - mx) * (y - my) for x, y in pts)
                / sum((x - mx) ** 2 for x, _ in pts))


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.9f}"


DataGen = Callable[[ConjunctiveQuery, int, random.Random], dict[str, set[tuple]]]
StreamGen = Callable[[ConjunctiveQuery, int, int, random.Random], list[UpdateEvent]]


def uniform_data(q: ConjunctiveQuery, n: int, rng: random.Random) -> dict[str, set[tuple]]:
    """About ``n`` tuples in total, spread evenly, values drawn from ``[0, n)``."""
    rels = q.relations()
    per = max(1, n // len(rels))
    data = {}
    for rel, atom in rels.items():
        rows: set[tuple] = set()
        while len(rows) < per:
            rows.add(tuple(rng.randrange(n) for _ in atom.schema))
        data[rel] = rows
    return data


def uniform_stream(q: ConjunctiveQuery, n: int, count: int, rng: random.Random
                   ) -> list[UpdateEvent]:
    """Random single-tuple inserts and deletes on the dynamic relations."""
    dyn = [a for a in q.relations().values() if a.is_dynamic]
    out = []
    for _ in range(count):
        a = rng.choice(dyn)
        t = tuple(rng.randrange(n) for _ in a.schema)
        out.append(UpdateEvent(INSERT if rng.random() < 0.5 else DELETE, a.relation, t))
    return out


def product_data(q: ConjunctiveQuery, n: int, rng: random.Random, fanout: int = 400
                 ) -> dict[str, set[tuple]]:
    """Static data whose two-atom join has about ``n^2 / (4 * fanout)`` tuples.

    Meant for ``Q2``: S(A,B) and T(B,C) get ``n/2`` tuples each over ``fanout``
    shared B-values, and every A- and C-value meets ``fanout`` of them, so the
    join grows quadratically while the number of distinct (A,C) pairs stays
    small. The dynamic relations get a handful of tuples.
    """
    half = max(1, n // 2)
    groups = max(1, half // fanout)
    s = {(f"a{i // fanout}", f"b{(i // fanout + i) % fanout}") for i in range(half)}
    t = {(f"b{(j // fanout + j) % fanout}", f"c{j // fanout}") for j in range(half)}
    data: dict[str, set[tuple]] = {}
    for rel, atom in q.relations().items():
        if atom.schema == ("A", "B") and atom.is_static:
            data[rel] = s
        elif atom.schema == ("B", "C") and atom.is_static:
            data[rel] = t
        else:
            data[rel] = {tuple(f"{v.lower()}{rng.randrange(groups)}" for v in atom.schema)
                         for _ in range(8)}
    return data


def timing_sweep(q: ConjunctiveQuery, n_values: Sequence[int],
                 data_gen: DataGen = uniform_data, stream_gen: StreamGen = uniform_stream,
                 updates: int = 1000, enum_limit: int = 1000, seed: int = 0,
                 plan_kind: str = "engine", repeats: int = 3) -> TimingProfile:
    """Materialise, replay a random stream and time each update and delay.

    Materialisation is repeated up to ``repeats`` times while a single run
    stays under half a second, and the median is reported.
    """
    from .engine import materialize
    from .rewrite import rewrite
    from .vo import create_vo

    if plan_kind != "engine":
        raise ValueError("only the view-tree engine is timed")
    plan = rewrite(create_vo(q))
    profile = TimingProfile(q.name)
    for n in sorted(n_values):
        rng = random.Random(seed * 1_000_003 + n)
        data = data_gen(q, n, rng)
        stream = stream_gen(q, n, updates, rng) if updates else []
        runs = []
        while True:
            t0 = time.perf_counter()
            engine = materialize(plan, data)
            runs.append(time.perf_counter() - t0)
            if len(runs) >= repeats or runs[-1] > 0.5:
                break
        pre = statistics.median(runs)
        samples = []
        clock = time.perf_counter_ns
        for e in stream:
            t1 = clock()
            engine.apply_update(e)
            samples.append(clock() - t1)
        gaps = []
        last = clock()
        for k, _ in enumerate(engine.enumerate()):
            now = clock()
            gaps.append(now - last)
            last = now
            if k + 1 >= enum_limit:
                break
        profile.points.append(TimingPoint(
            n=n,
            median_update_s=statistics.median(samples) / 1e9 if samples else None,
            median_delay_s=statistics.median(gaps) / 1e9 if gaps else None,
            preprocessing_s=pre,
            updates=len(samples),
            lookups_max=engine.stats.lookups_max,
        ))
    return profile
