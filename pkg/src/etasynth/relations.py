"""Energy relations of timed paths, as exact linear constraint systems.

A binary relation links entry and exit energy levels of a path under an
energy bound; under rate/update uncertainty the ternary relation links
the entry level with a guaranteed arrival window [a;b] (every realised
outcome stays within bounds and lands in the window); the quaternary
relation additionally keeps the upper energy bound symbolic, which is
what bound synthesis optimises over.

All relations are closed convex sets, so each is a plain conjunction of
non-strict linear atoms obtained by eliminating the per-state delay
variables one at a time (last state first, simplifying between steps).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import lp, qe
from .automata import EnergyTimedPath, ModelError
from .intervals import Interval, rat
from .linarith import Atom, Formula, LinearTerm, Rel, Variable, conj_formula, interval_of

W0 = Variable("w0", "energy")
W1 = Variable("w1", "energy")
W = Variable("w", "energy")
VA = Variable("a", "bound")
VB = Variable("b", "bound")
VU = Variable("U", "bound")

UpperBound = Union[Fraction, Variable, None]


@dataclass(frozen=True)
class EnergyRelation:
    """A relation over designated energy variables, as a convex conjunction."""

    kind: str  # "binary" | "ternary" | "quaternary"
    atoms: Tuple[Atom, ...]
    variables: Tuple[Variable, ...]
    energy_bound: Optional[Interval] = None   # binary/ternary
    lower_bound: Optional[Fraction] = None    # quaternary

    @property
    def matrix(self) -> Formula:
        return conj_formula(self.atoms)

    def canonical(self) -> Tuple[str, ...]:
        return tuple(sorted(str(a) for a in self.atoms))

    def is_empty(self) -> bool:
        return not lp.feasible(list(self.atoms)).is_feasible

    def substituted(self, assignment: Dict[Variable, LinearTerm]) -> List[Atom]:
        out = []
        for a in self.atoms:
            term = a.term
            for v, repl in assignment.items():
                term = term.substitute(v, repl)
            na = Atom.make(term, a.rel)
            triv = na.is_trivial()
            if triv is False:
                return [qe.FALSE_ATOM]
            if triv is None:
                out.append(na)
        return out

    def dump(self) -> str:
        return str(self.matrix)


# ---------------------------------------------------------------------------
# constraint assembly
# ---------------------------------------------------------------------------


def _bound_atoms(term: LinearTerm, lo: Optional[Fraction], hi: UpperBound) -> List[Atom]:
    out = []
    if lo is not None:
        out.append(Atom.make(LinearTerm.const(lo) - term, Rel.LE))
    if isinstance(hi, Variable):
        out.append(Atom.make(term - LinearTerm.var(hi), Rel.LE))
    elif hi is not None:
        out.append(Atom.make(term - LinearTerm.const(hi), Rel.LE))
    return out


def path_system(
    path: EnergyTimedPath,
    w0: Variable,
    lo: Optional[Fraction],
    hi: UpperBound,
    envelope: bool,
) -> Tuple[List[Atom], List[Variable], LinearTerm, LinearTerm]:
    """Timing and energy constraints of one traversal, over (w0, delays).

    Returns (atoms, delays, final_low, final_high) where final_low/high
    are the endpoints of the reachable final-level interval (equal when
    ``envelope`` is off).  Level bounds are imposed at both endpoints of
    every linear segment, which suffices for piecewise-linear runs.
    """
    delays = path.delay_variables()
    atoms = list(path.timing_atoms(delays))
    level = LinearTerm.var(w0)
    spread = LinearTerm.const(0)

    def check(lvl: LinearTerm, spr: LinearTerm):
        if envelope:
            atoms.extend(_bound_atoms(lvl - spr, lo, None))
            atoms.extend(_bound_atoms(lvl + spr, None, hi))
        else:
            atoms.extend(_bound_atoms(lvl, lo, hi))

    check(level, spread)
    for i in range(path.steps):
        state = path.states[i]
        level = level + LinearTerm.var(delays[i], state.rate)
        if envelope and state.rate_imprecision:
            spread = spread + LinearTerm.var(delays[i], state.rate_imprecision)
        check(level, spread)
        tr = path.transitions[i]
        if tr.update:
            level = level + LinearTerm.const(tr.update)
        if envelope and tr.update_imprecision:
            spread = spread + LinearTerm.const(tr.update_imprecision)
        check(level, spread)
    return atoms, delays, level - spread, level + spread


def _eliminate_delays(atoms: List[Atom], delays: List[Variable]) -> Optional[List[Atom]]:
    # last delay first: later delays touch fewer downstream checkpoints,
    # which keeps the Fourier-Motzkin frontier small
    return qe.eliminate_block(atoms, list(reversed(delays)))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_binary(path: EnergyTimedPath, E: Interval) -> EnergyRelation:
    """Relation between entry and exit level under energy bound E."""
    if path.has_uncertainty():
        raise ModelError("build_binary requires a path without uncertainty")
    if E.is_empty():
        return EnergyRelation("binary", (qe.FALSE_ATOM,), (W0, W1), E)
    atoms, delays, final, _ = path_system(path, W0, E.lo, E.hi, envelope=False)
    atoms.append(Atom.make(final - LinearTerm.var(W1), Rel.EQ))
    eliminated = _eliminate_delays(atoms, delays)
    if eliminated is None:
        return EnergyRelation("binary", (qe.FALSE_ATOM,), (W0, W1), E)
    return EnergyRelation("binary", tuple(sorted(eliminated, key=str)), (W0, W1), E)


def build_binary_u(path: EnergyTimedPath, L, u_var: Variable = VU) -> EnergyRelation:
    """Binary relation with the upper energy bound left symbolic."""
    if path.has_uncertainty():
        raise ModelError("build_binary_u requires a path without uncertainty")
    atoms, delays, final, _ = path_system(path, W0, rat(L), u_var, envelope=False)
    atoms.append(Atom.make(final - LinearTerm.var(W1), Rel.EQ))
    eliminated = _eliminate_delays(atoms, delays)
    if eliminated is None:
        return EnergyRelation("binary", (qe.FALSE_ATOM,), (W0, W1, u_var), None, rat(L))
    return EnergyRelation(
        "binary", tuple(sorted(eliminated, key=str)), (W0, W1, u_var), None, rat(L)
    )


def build_binary_lower(path: EnergyTimedPath, L) -> EnergyRelation:
    """Binary relation under [L; +inf) (no upper bound at all)."""
    if path.has_uncertainty():
        raise ModelError("build_binary_lower requires a path without uncertainty")
    atoms, delays, final, _ = path_system(path, W0, rat(L), None, envelope=False)
    atoms.append(Atom.make(final - LinearTerm.var(W1), Rel.EQ))
    eliminated = _eliminate_delays(atoms, delays)
    if eliminated is None:
        return EnergyRelation("binary", (qe.FALSE_ATOM,), (W0, W1), Interval.at_least(L))
    return EnergyRelation(
        "binary", tuple(sorted(eliminated, key=str)), (W0, W1), Interval.at_least(L)
    )


def build_ternary(path: EnergyTimedPath, E: Interval) -> EnergyRelation:
    """Uncertainty relation: (w0, a, b) such that some delay choice keeps
    every realised outcome within E and lands the final level in [a;b].

    The reachable-set inclusion is expressed bound-wise, so the matrix
    is a pure conjunction with no quantifier alternation.
    """
    if E.is_empty():
        return EnergyRelation("ternary", (qe.FALSE_ATOM,), (W0, VA, VB), E)
    atoms, delays, final_lo, final_hi = path_system(path, W0, E.lo, E.hi, envelope=True)
    atoms.extend(_bound_atoms(LinearTerm.var(VA), E.lo, None))
    atoms.extend(_bound_atoms(LinearTerm.var(VB), None, E.hi))
    atoms.append(Atom.make(LinearTerm.var(VA) - LinearTerm.var(VB), Rel.LE))
    atoms.append(Atom.make(LinearTerm.var(VA) - final_lo, Rel.LE))
    atoms.append(Atom.make(final_hi - LinearTerm.var(VB), Rel.LE))
    eliminated = _eliminate_delays(atoms, delays)
    if eliminated is None:
        return EnergyRelation("ternary", (qe.FALSE_ATOM,), (W0, VA, VB), E)
    return EnergyRelation("ternary", tuple(sorted(eliminated, key=str)), (W0, VA, VB), E)


def build_quaternary(cycle: EnergyTimedPath, L) -> EnergyRelation:
    """Ternary construction with the upper bound U symbolic: a conjunction
    of linear atoms over (w, a, b, U) for bound synthesis."""
    lo = rat(L)
    atoms, delays, final_lo, final_hi = path_system(cycle, W, lo, VU, envelope=True)
    atoms.extend(_bound_atoms(LinearTerm.var(VA), lo, VU))
    atoms.extend(_bound_atoms(LinearTerm.var(VB), lo, VU))
    atoms.append(Atom.make(LinearTerm.var(VA) - LinearTerm.var(VB), Rel.LE))
    atoms.append(Atom.make(LinearTerm.var(VA) - final_lo, Rel.LE))
    atoms.append(Atom.make(final_hi - LinearTerm.var(VB), Rel.LE))
    eliminated = _eliminate_delays(atoms, delays)
    if eliminated is None:
        return EnergyRelation("quaternary", (qe.FALSE_ATOM,), (W, VA, VB, VU), None, lo)
    return EnergyRelation(
        "quaternary", tuple(sorted(eliminated, key=str)), (W, VA, VB, VU), None, lo
    )


def identity_relation(E: Interval) -> EnergyRelation:
    atoms = [Atom.make(LinearTerm.var(W0) - LinearTerm.var(W1), Rel.EQ)]
    atoms.extend(_bound_atoms(LinearTerm.var(W0), E.lo, E.hi))
    atoms.extend(_bound_atoms(LinearTerm.var(W1), E.lo, E.hi))
    return EnergyRelation("binary", tuple(sorted(atoms, key=str)), (W0, W1), E)


# ---------------------------------------------------------------------------
# binary relation operations
# ---------------------------------------------------------------------------


def compose(r1: EnergyRelation, r2: EnergyRelation) -> EnergyRelation:
    """Relational composition r2 after r1 (run r1, then r2)."""
    if r1.kind != "binary" or r2.kind != "binary":
        raise ModelError("compose is defined for binary relations")
    if r1.energy_bound != r2.energy_bound:
        raise ModelError("compose requires matching energy bounds")
    mid = Variable("_wmid", "energy")
    atoms = r1.substituted({W1: LinearTerm.var(mid)}) + r2.substituted({W0: LinearTerm.var(mid)})
    eliminated = qe.eliminate_block(atoms, [mid])
    if eliminated is None:
        return EnergyRelation("binary", (qe.FALSE_ATOM,), r1.variables, r1.energy_bound)
    return EnergyRelation(
        "binary", tuple(sorted(eliminated, key=str)), r1.variables, r1.energy_bound
    )


def compose_chain(relations: Sequence[EnergyRelation]) -> EnergyRelation:
    out = relations[0]
    for r in relations[1:]:
        out = compose(out, r)
    return out


def apply(r: EnergyRelation, I: Interval, direction: str = "forward") -> Interval:
    """Exact image interval of I under the relation (or its inverse)."""
    if r.kind != "binary":
        raise ModelError("apply is defined for binary relations")
    if direction not in ("forward", "backward"):
        raise ModelError(f"direction must be forward or backward, got {direction!r}")
    if I.is_empty():
        return Interval.empty_set()
    src, dst = (W0, W1) if direction == "forward" else (W1, W0)
    atoms = list(r.atoms)
    atoms.extend(_bound_atoms(LinearTerm.var(src), I.lo, I.hi))
    eliminated = qe.eliminate_block(atoms, [src])
    if eliminated is None:
        return Interval.empty_set()
    img = interval_of(conj_formula(eliminated), dst)
    if r.energy_bound is not None:
        img = img.intersect(r.energy_bound)
    return img


def iterate_forward(r: EnergyRelation, I: Interval, max_steps: int) -> List[Interval]:
    """I, R(I), R^2(I), ... until empty (inclusive) or the step cap."""
    out = [I]
    cur = I
    for _ in range(max_steps):
        if cur.is_empty():
            break
        cur = apply(r, cur, "forward")
        out.append(cur)
    return out


def _exists_in_window(
    rel_atoms: Sequence[Atom],
    target_vars: Tuple[Variable, Variable],
    window: Tuple[Variable, Variable],
) -> Optional[List[Atom]]:
    """Eliminate the pair ``target_vars`` from rel /\\ window-lo <= t0 /\\ t1 <= window-hi."""
    t0, t1 = target_vars
    lo, hi = window
    atoms = list(rel_atoms)
    atoms.append(Atom.make(LinearTerm.var(lo) - LinearTerm.var(t0), Rel.LE))
    atoms.append(Atom.make(LinearTerm.var(t1) - LinearTerm.var(hi), Rel.LE))
    return qe.eliminate_block(atoms, [t0, t1])


def greatest_fixpoint(r: EnergyRelation, E: Interval) -> Interval:
    """Largest interval S inside E with S included in the inverse image of S.

    The post-fixpoint condition "for all w0 in [a;b] there is w1 in
    [a;b] with R(w0,w1)" is resolved exactly: the inner existential is a
    Fourier-Motzkin projection, and since the projected predicate is
    convex in w0 the universal holds on [a;b] iff it holds at a and b.
    The widest feasible (a,b) is then a single LP.
    """
    if r.kind != "binary":
        raise ModelError("greatest_fixpoint is defined for binary relations")
    if E.is_empty():
        return Interval.empty_set()
    sa, sb = Variable("_sa", "bound"), Variable("_sb", "bound")
    atoms = list(r.atoms)
    atoms.append(Atom.make(LinearTerm.var(sa) - LinearTerm.var(W1), Rel.LE))
    atoms.append(Atom.make(LinearTerm.var(W1) - LinearTerm.var(sb), Rel.LE))
    chi = qe.eliminate_block(atoms, [W1])
    if chi is None:
        return Interval.empty_set()
    psi: List[Atom] = []
    for bound_var in (sa, sb):
        for a in chi:
            na = Atom.make(a.term.substitute(W0, LinearTerm.var(bound_var)), a.rel)
            triv = na.is_trivial()
            if triv is False:
                return Interval.empty_set()
            if triv is None:
                psi.append(na)
    psi.append(Atom.make(LinearTerm.var(sa) - LinearTerm.var(sb), Rel.LE))
    psi.extend(_bound_atoms(LinearTerm.var(sa), E.lo, E.hi))
    psi.extend(_bound_atoms(LinearTerm.var(sb), E.lo, E.hi))
    width = LinearTerm.var(sb) - LinearTerm.var(sa)
    res = lp.optimize(psi, width, "max")
    if res.status is lp.LPStatus.INFEASIBLE:
        return Interval.empty_set()
    if res.status is lp.LPStatus.UNBOUNDED:
        lo_res = lp.optimize(psi, LinearTerm.var(sa), "min")
        hi_res = lp.optimize(psi, LinearTerm.var(sb), "max")
        lo = lo_res.value if lo_res.status is lp.LPStatus.OPTIMAL else None
        hi = hi_res.value if hi_res.status is lp.LPStatus.OPTIMAL else None
        return Interval(lo, hi)
    return Interval(res.witness[sa], res.witness[sb])
