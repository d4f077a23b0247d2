"""Exact rational linear programming over conjunctions of non-strict atoms.

A dense two-phase simplex with integer (fraction-free) pivoting: the
tableau is kept as integers with one shared divisor, so the hot loop is
pure machine-integer arithmetic while every result stays exact.  Entry
selection is Dantzig's rule with an automatic switch to Bland's rule
after a run of degenerate pivots, which keeps termination guaranteed.
Unbounded rays are detected and reported, never approximated.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import gcd
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .linarith import Atom, Formula, LinearTerm, Rel, Variable, conjunction_atoms

# consecutive degenerate pivots tolerated before switching to Bland's rule
_DEGENERATE_LIMIT = 12


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    status: LPStatus
    value: Optional[Fraction] = None
    witness: Optional[Dict[Variable, Fraction]] = None

    @property
    def is_feasible(self) -> bool:
        return self.status is LPStatus.OPTIMAL


AtomsLike = Union[Formula, Iterable[Atom]]


def _as_atoms(constraints: AtomsLike) -> List[Atom]:
    if isinstance(constraints, Formula):
        return conjunction_atoms(constraints)
    return list(constraints)


def feasible(constraints: AtomsLike) -> LPResult:
    """Feasibility of a closed polyhedron; returns a point when non-empty."""
    return optimize(constraints, LinearTerm.const(0), "max")


def optimize(constraints: AtomsLike, objective: LinearTerm, direction: str = "max") -> LPResult:
    """Exact optimum of a linear objective over a closed polyhedron."""
    if direction not in ("max", "min"):
        raise ValueError(f"direction must be 'max' or 'min', got {direction!r}")
    atoms = _as_atoms(constraints)
    for a in atoms:
        if a.rel is Rel.LT:
            raise ValueError("strict atoms are not part of the public LP interface")
    sense = 1 if direction == "max" else -1
    res = _simplex(atoms, objective.scale(sense))
    if res.status is LPStatus.OPTIMAL:
        res.value = sense * res.value
    return res


def feasible_strict(constraints: Iterable[Atom]) -> bool:
    """Feasibility of a system that may contain strict atoms.

    Strict rows get a shared positive slack: the system has a solution
    iff the relaxation admits one with the slack strictly positive.
    """
    atoms = list(constraints)
    strict = [a for a in atoms if a.rel is Rel.LT]
    if not strict:
        return feasible(atoms).is_feasible
    delta = Variable("_strict_gap")
    relaxed: List[Atom] = []
    for a in atoms:
        if a.rel is Rel.LT:
            relaxed.append(Atom.make(a.term + LinearTerm.var(delta), Rel.LE))
        else:
            relaxed.append(a)
    relaxed.append(Atom.make(LinearTerm.var(delta, -1), Rel.LE))            # delta >= 0
    relaxed.append(Atom.make(LinearTerm.var(delta) - LinearTerm.const(1)))  # delta <= 1
    res = optimize(relaxed, LinearTerm.var(delta), "max")
    return res.status is LPStatus.OPTIMAL and res.value > 0


# ---------------------------------------------------------------------------
# simplex core (integer tableau with a shared positive divisor)
# ---------------------------------------------------------------------------


def _int_row(term: LinearTerm, var_index: Dict[Variable, int], n: int) -> Tuple[List[int], int]:
    """Clear denominators: returns (coefficients, constant) as integers."""
    scale = term.constant.denominator
    for _, c in term.coeffs:
        scale = scale * c.denominator // gcd(scale, c.denominator)
    row = [0] * n
    for v, c in term.coeffs:
        row[var_index[v]] = int(c * scale)
    return row, int(term.constant * scale)


class _Tableau:
    """rows[i][j] / div is the true tableau entry; div > 0 always.

    The last column is the right-hand side; the objective row ``zrow``
    carries the reduced costs and (in its rhs cell) the objective value,
    all with the same shared divisor.
    """

    __slots__ = ("rows", "basis", "div", "zrow", "width")

    def __init__(self, rows: List[List[int]], basis: List[int]):
        self.rows = rows
        self.basis = basis
        self.div = 1
        self.zrow: List[int] = []
        self.width = len(rows[0]) if rows else 0

    @property
    def zval(self) -> int:  # sign only meaningful (divisor is positive)
        return self.zrow[self.width - 1]

    def set_objective(self, cost: List[int]):
        # reduced costs z_j - c_j as integers over the shared divisor:
        # Z[j] = sum_B c_B[i]*T[i][j] - c_j*div, value cell transforms along
        width = self.width
        z = [0] * width
        for i, b in enumerate(self.basis):
            cb = cost[b]
            if cb:
                row = self.rows[i]
                for j in range(width):
                    if row[j]:
                        z[j] += cb * row[j]
        for j in range(width - 1):
            if cost[j]:
                z[j] -= cost[j] * self.div
        self.zrow = z

    def pivot(self, r: int, c: int):
        rows, d = self.rows, self.div
        prow = rows[r]
        p = prow[c]
        sign = 1 if p > 0 else -1
        width = self.width
        rescale = sign < 0 or p != d
        for i in range(len(rows)):
            if i == r:
                continue
            row = rows[i]
            f = row[c]
            if f:
                rows[i] = [
                    sign * (row[j] * p - f * prow[j]) // d if (row[j] or prow[j]) else 0
                    for j in range(width)
                ]
            elif rescale:
                rows[i] = [sign * (row[j] * p) // d if row[j] else 0 for j in range(width)]
        z = self.zrow
        f = z[c]
        if f:
            self.zrow = [
                sign * (z[j] * p - f * prow[j]) // d if (z[j] or prow[j]) else 0
                for j in range(width)
            ]
        elif rescale:
            self.zrow = [sign * (z[j] * p) // d if z[j] else 0 for j in range(width)]
        if sign < 0:
            rows[r] = [-x for x in prow]
        self.div = sign * p
        self.basis[r] = c


def _simplex(atoms: Sequence[Atom], objective: LinearTerm) -> LPResult:
    """Maximise ``objective`` subject to the atoms (term<=0 / term=0)."""
    variables = sorted(
        {v for a in atoms for v in a.term.variables()} | objective.variables(),
        key=lambda v: v.name,
    )
    var_index = {v: i for i, v in enumerate(variables)}
    n = len(variables)

    raw: List[Tuple[List[int], int, str]] = []
    for a in atoms:
        coeffs, const = _int_row(a.term, var_index, n)
        b = -const
        if a.rel is Rel.EQ:
            if b < 0:
                coeffs = [-c for c in coeffs]
                b = -b
            raw.append((coeffs, b, "eq"))
        else:
            if not any(coeffs):
                if b < 0:
                    return LPResult(LPStatus.INFEASIBLE)
                continue
            raw.append((coeffs, b, "le"))

    m = len(raw)
    if m == 0:
        if not objective.coeffs:
            return LPResult(LPStatus.OPTIMAL, objective.constant, {})
        return LPResult(LPStatus.UNBOUNDED)

    # columns: [xp_0..xp_{n-1}, xm_0..xm_{n-1}, slacks, artificials | rhs]
    n_split = 2 * n
    num_slacks = sum(1 for _, _, kind in raw if kind == "le")
    total_structural = n_split + num_slacks

    rows: List[List[int]] = []
    basis: List[int] = []
    need_art: List[int] = []
    slack_seen = 0
    for i, (coeffs, b, kind) in enumerate(raw):
        flip = kind == "le" and b < 0
        sign = -1 if flip else 1
        row = [0] * total_structural
        for j, c in enumerate(coeffs):
            if c:
                row[j] = sign * c
                row[n + j] = -sign * c
        if kind == "le":
            row[n_split + slack_seen] = sign
            if sign > 0:
                basis.append(n_split + slack_seen)
            else:
                basis.append(-1)
                need_art.append(i)
            slack_seen += 1
        else:
            basis.append(-1)
            need_art.append(i)
        row.append(abs(b) if flip else b)
        rows.append(row)

    num_art = len(need_art)
    width = total_structural + num_art + 1
    for i, row in enumerate(rows):
        rhs = row.pop()
        row.extend([0] * num_art)
        row.append(rhs)
    for k, i in enumerate(need_art):
        rows[i][total_structural + k] = 1
        basis[i] = total_structural + k

    tab = _Tableau(rows, basis)

    if num_art:
        cost1 = [0] * (width - 1)
        for k in range(num_art):
            cost1[total_structural + k] = -1
        tab.set_objective(cost1)
        status = _pivot_loop(tab, enter_limit=width - 1)
        if status == "unbounded" or tab.zval < 0:
            return LPResult(LPStatus.INFEASIBLE)
        _drive_out_artificials(tab, total_structural)

    obj_scale = objective.constant.denominator
    for _, c in objective.coeffs:
        obj_scale = obj_scale * c.denominator // gcd(obj_scale, c.denominator)
    cost2 = [0] * (width - 1)
    for v, c in objective.coeffs:
        j = var_index[v]
        cost2[j] = int(c * obj_scale)
        cost2[n + j] = -int(c * obj_scale)
    tab.set_objective(cost2)
    status = _pivot_loop(tab, enter_limit=total_structural)
    if status == "unbounded":
        return LPResult(LPStatus.UNBOUNDED)

    div = Fraction(tab.div)
    witness = {v: Fraction(0) for v in variables}
    point: Dict[int, Fraction] = {}
    for i, b in enumerate(tab.basis):
        point[b] = tab.rows[i][width - 1] / div
    for v, j in var_index.items():
        witness[v] = point.get(j, Fraction(0)) - point.get(n + j, Fraction(0))
    value = objective.constant + sum((c * witness[v] for v, c in objective.coeffs), Fraction(0))
    return LPResult(LPStatus.OPTIMAL, value, witness)


def _pivot_loop(tab: _Tableau, enter_limit: int) -> str:
    rhs_col = tab.width - 1
    degenerate_run = 0
    while True:
        z = tab.zrow
        enter = -1
        if degenerate_run >= _DEGENERATE_LIMIT:
            for j in range(enter_limit):
                if z[j] < 0:
                    enter = j
                    break
        else:
            best = 0
            for j in range(enter_limit):
                if z[j] < best:
                    best = z[j]
                    enter = j
        if enter < 0:
            return "optimal"

        rows, basis = tab.rows, tab.basis
        leave = -1
        best_num = best_den = 0  # ratio rhs/coefficient tracked as a pair
        bland = degenerate_run >= _DEGENERATE_LIMIT
        for i in range(len(rows)):
            a = rows[i][enter]
            if a > 0:
                num, den = rows[i][rhs_col], a
                if leave < 0:
                    better = True
                else:
                    lhs = num * best_den
                    rhs = best_num * den
                    better = lhs < rhs or (lhs == rhs and bland and basis[i] < basis[leave])
                if better:
                    best_num, best_den = num, den
                    leave = i
        if leave < 0:
            return "unbounded"
        degenerate_run = degenerate_run + 1 if best_num == 0 else 0
        tab.pivot(leave, enter)


def _drive_out_artificials(tab: _Tableau, total_structural: int):
    rhs_col = tab.width - 1
    drop: List[int] = []
    for i in range(len(tab.rows)):
        if tab.basis[i] >= total_structural:
            row = tab.rows[i]
            enter = next((j for j in range(total_structural) if row[j]), None)
            if enter is None:
                drop.append(i)  # redundant row
            else:
                tab.pivot(i, enter)
    for i in reversed(drop):
        del tab.rows[i]
        del tab.basis[i]
