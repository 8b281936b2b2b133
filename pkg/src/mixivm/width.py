"""Fractional edge covers and preprocessing widths, computed exactly.

The edge-cover LP is solved through its dual, a packing LP
``max sum(y_v) s.t. sum_{v in e} y_v <= 1`` whose all-slack basis is already
feasible. Bland's rule guarantees termination and the cover weights are read
off the reduced costs of the slack columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .query import Atom, ConjunctiveQuery

if TYPE_CHECKING:  # pragma: no cover
    from .vo import VariableOrder

Rational = Fraction

DEFAULT_MAX_VARS = 12
DEFAULT_MAX_CANDIDATES = 10_000


class WidthError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeCoverSolution:
    weights: Mapping[Atom, Fraction]
    objective: Fraction

    def covers(self, cover_vars: Iterable[str]) -> bool:
        return all(sum((w for a, w in self.weights.items() if v in a.vars), Fraction(0)) >= 1
                   for v in cover_vars)


def _packing_simplex(rows: Sequence[Sequence[int]], n: int) -> tuple[Fraction, list[Fraction]]:
    """Solve ``max 1.y`` s.t. ``rows @ y <= 1``, ``y >= 0`` over 0/1 rows.

    Returns the optimum and the dual values of the row constraints.
    """
    m = len(rows)
    width = n + m
    # tableau rows: coefficients + rhs
    tab = [[Fraction(c) for c in row] + [Fraction(int(i == j)) for j in range(m)] + [Fraction(1)]
           for i, row in enumerate(rows)]
    obj = [Fraction(-1)] * n + [Fraction(0)] * m + [Fraction(0)]
    basis = [n + i for i in range(m)]
    while True:
        enter = next((j for j in range(width) if obj[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            a = tab[i][enter]
            if a > 0:
                ratio = tab[i][-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            raise WidthError("unbounded packing LP: some variable is not covered")
        r = best[1]
        piv = tab[r][enter]
        tab[r] = [x / piv for x in tab[r]]
        for i in range(m):
            if i != r and tab[i][enter] != 0:
                f = tab[i][enter]
                tab[i] = [x - f * y for x, y in zip(tab[i], tab[r])]
        if obj[enter] != 0:
            f = obj[enter]
            obj = [x - f * y for x, y in zip(obj, tab[r])]
        basis[r] = enter
    return obj[-1], obj[n:n + m]


def fractional_edge_cover(atoms: Iterable[Atom], cover_vars: Iterable[str]) -> EdgeCoverSolution:
    """Exact optimum of the fractional edge cover LP for ``cover_vars``."""
    atoms = list(atoms)
    targets = sorted(set(cover_vars))
    for v in targets:
        if not any(v in a.vars for a in atoms):
            raise WidthError(f"variable {v} is not covered by any atom")
    relevant = [i for i, a in enumerate(atoms) if a.vars & set(targets)]
    weights = {a: Fraction(0) for a in atoms}
    if not targets:
        return EdgeCoverSolution(weights, Fraction(0))
    rows = [[int(v in atoms[i].vars) for v in targets] for i in relevant]
    value, duals = _packing_simplex(rows, len(targets))
    for i, lam in zip(relevant, duals):
        # duplicates of one atom object share a key; keep the total
        weights[atoms[i]] = weights.get(atoms[i], Fraction(0)) + lam
    return EdgeCoverSolution(weights, value)


class _CoverCache:
    def __init__(self) -> None:
        self._memo: dict[tuple[frozenset[int], frozenset[str]], Fraction] = {}

    def rho(self, atoms: Sequence[Atom], cover: frozenset[str]) -> Fraction:
        key = (frozenset(a.index for a in atoms), cover)
        hit = self._memo.get(key)
        if hit is None:
            hit = fractional_edge_cover(atoms, cover).objective
            self._memo[key] = hit
        return hit


def width_profile(omega: "VariableOrder", cache: _CoverCache | None = None
                  ) -> dict[str, Fraction]:
    """Per-variable values ``rho*_{Q_X}({X} u dep(X))``."""
    cache = cache or _CoverCache()
    dep = omega.dep()
    return {x: cache.rho(omega.subtree_atoms(x), frozenset({x}) | dep[x])
            for x in omega.variables()}


def preprocessing_width_of_vo(omega: "VariableOrder", cache: _CoverCache | None = None
                              ) -> Fraction:
    prof = width_profile(omega, cache)
    return max(prof.values(), default=Fraction(0))


@dataclass(frozen=True)
class WidthResult:
    width: Fraction
    vo: "VariableOrder"
    candidates: int
    possibly_suboptimal: bool = False
    profile: Mapping[str, Fraction] = field(default_factory=dict)

    def __iter__(self):
        # allows ``w, omega = preprocessing_width(q)``
        yield self.width
        yield self.vo


def preprocessing_width(q: ConjunctiveQuery, max_vars: int = DEFAULT_MAX_VARS,
                        max_candidates: int = DEFAULT_MAX_CANDIDATES) -> WidthResult:
    """Minimum width over the enumerated well-structured VOs, with a witness."""
    from .classify import check_well_behaved
    from .vo import create_vo, enumerate_well_structured

    ok, _ = check_well_behaved(q)
    if not ok:
        raise WidthError(f"query {q.name} is not well-behaved")
    cache = _CoverCache()
    best_vo = create_vo(q)
    best = preprocessing_width_of_vo(best_vo, cache)
    seen = {best_vo.key()}
    count = 1
    capped = len(q.vars) > max_vars
    if not capped:
        gen = enumerate_well_structured(q)
        for omega in gen:
            if count >= max_candidates:
                capped = True
                break
            k = omega.key()
            if k in seen:
                continue
            seen.add(k)
            count += 1
            w = preprocessing_width_of_vo(omega, cache)
            if w < best:
                best, best_vo = w, omega
    return WidthResult(best, best_vo, count, capped, width_profile(best_vo, cache))


def rho_star(atoms: Iterable[Atom], cover_vars: Iterable[str]) -> Fraction:
    return fractional_edge_cover(atoms, cover_vars).objective

