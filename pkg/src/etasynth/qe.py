"""Quantifier elimination for linear real arithmetic.

Existentials over conjunctions are removed by Fourier-Motzkin
projection (with equality substitution as the fast path) and the
results are simplified with LP-backed redundancy removal after every
step, one variable at a time.  Universals are compiled by exact duality
(not-exists-not): negation is computed exactly by letting strict atoms
exist inside the engine, and any strict atom that survives to the
output is closed off with a warning, which can only happen when the
input mixed negation with boundary-touching constructs.

The compositional style (eliminate one variable, simplify, repeat)
keeps intermediate conjunctions small; it is what makes the large
relation formulas of the case study tractable.
"""

from __future__ import annotations

import warnings
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from . import lp
from .linarith import (
    And,
    Atom,
    AtomF,
    DisjunctCapExceeded,
    FalseF,
    Formula,
    LinearTerm,
    Not,
    Or,
    Rel,
    TrueF,
    Variable,
    atoms_of,
    conj_formula,
    conjunction_atoms,
    dnf,
    dnf_formula,
    is_quantifier_free,
    nnf,
    Exists,
    Forall,
)

DEFAULT_DISJUNCT_CAP = 10_000

FALSE_ATOM = Atom.make(LinearTerm.const(1), Rel.LE)


class BoundaryClosureWarning(UserWarning):
    """Negation crossed a boundary-sensitive construct; output was closed."""


class ResourceCapExceeded(Exception):
    pass


# ---------------------------------------------------------------------------
# conjunction-level machinery
# ---------------------------------------------------------------------------


def project_conjunction(atoms: Sequence[Atom], v: Variable) -> Optional[List[Atom]]:
    """Fourier-Motzkin projection of one variable from a conjunction.

    Returns None when the conjunction is syntactically unsatisfiable.
    An equality mentioning v short-circuits the pairwise products: v is
    solved for and substituted away.
    """
    for a in atoms:
        if a.rel is Rel.EQ:
            c = a.term.coeff(v)
            if c != 0:
                rest = LinearTerm(
                    tuple((u, k) for u, k in a.term.coeffs if u != v), a.term.constant
                )
                replacement = rest.scale(Fraction(-1) / c)
                out: List[Atom] = []
                for b in atoms:
                    if b is a:
                        continue
                    nb = Atom.make(b.term.substitute(v, replacement), b.rel)
                    triv = nb.is_trivial()
                    if triv is False:
                        return None
                    if triv is None:
                        out.append(nb)
                return _dedupe(out)

    lowers: List[Tuple[LinearTerm, bool]] = []  # bound <= v (strict flag)
    uppers: List[Tuple[LinearTerm, bool]] = []  # v <= bound
    rest_atoms: List[Atom] = []
    for a in atoms:
        c = a.term.coeff(v)
        if c == 0:
            triv = a.is_trivial()
            if triv is False:
                return None
            if triv is None:
                rest_atoms.append(a)
            continue
        bound = LinearTerm(
            tuple((u, k) for u, k in a.term.coeffs if u != v), a.term.constant
        ).scale(Fraction(-1) / c)
        strict = a.rel is Rel.LT
        if c > 0:
            uppers.append((bound, strict))
        else:
            lowers.append((bound, strict))

    if lowers and uppers:
        for lo, slo in lowers:
            for hi, shi in uppers:
                na = Atom.make(lo - hi, Rel.LT if (slo or shi) else Rel.LE)
                triv = na.is_trivial()
                if triv is False:
                    return None
                if triv is None:
                    rest_atoms.append(na)
    return _dedupe(rest_atoms)


def _dedupe(atoms: Iterable[Atom]) -> List[Atom]:
    seen: Set[Atom] = set()
    out: List[Atom] = []
    for a in atoms:
        if a not in seen:
            seen.add(a)
            out.append(a)
    return out


def _dominance_filter(atoms: Sequence[Atom]) -> Optional[List[Atom]]:
    """Cheap syntactic simplification: constants, duplicates and pairs of
    inequalities on the same coefficient vector (keep the tighter one,
    or fuse opposite bounds into an equality / detect infeasibility)."""
    by_vec: Dict[Tuple, Dict[str, object]] = {}
    eqs: List[Atom] = []
    for a in atoms:
        triv = a.is_trivial()
        if triv is False:
            return None
        if triv is True:
            continue
        if a.rel is Rel.EQ:
            eqs.append(a)
            continue
        vec = a.term.coeffs
        pos = by_vec.setdefault(vec, {})
        # a.term = vec . x + const  (<= / < 0)  tightest = largest const
        cur = pos.get("bound")
        if cur is None or (a.term.constant, a.rel is Rel.LT) > cur:
            pos["bound"] = (a.term.constant, a.rel is Rel.LT)
    out: List[Atom] = list(dict.fromkeys(eqs))
    emitted: Set[Tuple] = set()
    for vec, pos in by_vec.items():
        if vec in emitted:
            continue
        const, strict = pos["bound"]
        opp_vec = tuple((v, -c) for v, c in vec)
        opp = by_vec.get(opp_vec)
        if opp is not None and opp_vec not in emitted:
            oconst, ostrict = opp["bound"]
            # vec.x <= -const and vec.x >= oconst  (after sign flip)
            if -const < oconst or (-const == oconst and (strict or ostrict)):
                return None
            if -const == oconst and not strict and not ostrict:
                out.append(Atom.make(LinearTerm(vec, const), Rel.EQ))
                emitted.add(vec)
                emitted.add(opp_vec)
                continue
        out.append(Atom.make(LinearTerm(vec, const), Rel.LT if strict else Rel.LE))
        emitted.add(vec)
    return _dedupe(out)


def _implied(target: Atom, others: Sequence[Atom], witnesses: List[Dict[Variable, Fraction]]) -> Optional[bool]:
    """Is ``target`` implied by the closure of ``others``?  (sound both ways;
    None means the context itself is infeasible)."""
    for w in witnesses:
        # a cached point only disproves the implication if it satisfies
        # the current context and violates the candidate
        try:
            if not target.evaluate(w) and all(a.evaluate(w) for a in others if a.rel is not Rel.LT):
                return False
        except Exception:
            pass
    closure = [a if a.rel is not Rel.LT else Atom.make(a.term, Rel.LE) for a in others]
    res = lp.optimize(closure, target.term, "max")
    if res.status is lp.LPStatus.INFEASIBLE:
        return None
    if res.status is lp.LPStatus.UNBOUNDED:
        return False
    if res.witness:
        witnesses.append(res.witness)
    hi = res.value
    if target.rel is Rel.LE:
        return hi <= 0
    if target.rel is Rel.LT:
        return hi < 0
    if hi > 0:
        return False
    res2 = lp.optimize(closure, target.term, "min")
    if res2.status is lp.LPStatus.INFEASIBLE:
        return None
    if res2.status is lp.LPStatus.UNBOUNDED:
        return False
    if res2.witness:
        witnesses.append(res2.witness)
    return res2.value >= 0


def simplify_conjunction(atoms: Sequence[Atom], lp_redundancy: bool = True) -> Optional[List[Atom]]:
    """Same solution set, fewer atoms.  None means infeasible.

    Runs the syntactic dominance filter, then (optionally) LP-backed
    removal of atoms implied by the rest.  Witness points from earlier
    LP calls screen out most non-redundant candidates cheaply.
    """
    filtered = _dominance_filter(atoms)
    if filtered is None:
        return None
    if not lp_redundancy or len(filtered) <= 1:
        return filtered
    if any(a.rel is Rel.LT for a in filtered):
        if not lp.feasible_strict(filtered):
            return None
    else:
        if not lp.feasible(filtered).is_feasible:
            return None
    witnesses: List[Dict[Variable, Fraction]] = []
    kept = list(filtered)
    changed = True
    while changed:
        changed = False
        for i in range(len(kept) - 1, -1, -1):
            others = kept[:i] + kept[i + 1:]
            if not others:
                break
            verdict = _implied(kept[i], others, witnesses)
            if verdict is None:
                return None
            if verdict:
                del kept[i]
                changed = True
    return kept


def eliminate_block(
    atoms: Sequence[Atom],
    variables: Sequence[Variable],
    simplify_between: bool = True,
) -> Optional[List[Atom]]:
    """Existentially eliminate several variables from a conjunction,
    one at a time with simplification between steps."""
    current: Optional[List[Atom]] = _dedupe(atoms)
    for v in variables:
        current = project_conjunction(current, v)
        if current is None:
            return None
        if simplify_between:
            current = simplify_conjunction(current)
            if current is None:
                return None
    return current


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def remove_redundant(constraints) -> List[Atom]:
    """Minimal subconjunction with the same solution set (LP checked).

    An infeasible input collapses to the canonical false atom.
    """
    atoms = lp._as_atoms(constraints)
    simplified = simplify_conjunction(sorted(atoms, key=str))
    if simplified is None:
        return [FALSE_ATOM]
    return sorted(simplified, key=str)


def eliminate_exists_conj(constraints, v: Variable) -> List[Atom]:
    """Fourier-Motzkin projection of ``v`` from a conjunction of atoms,
    with redundant atoms removed from the result."""
    atoms = lp._as_atoms(constraints)
    projected = project_conjunction(atoms, v)
    if projected is None:
        return [FALSE_ATOM]
    simplified = simplify_conjunction(projected)
    if simplified is None:
        return [FALSE_ATOM]
    return sorted(simplified, key=str)


def eliminate(
    f: Formula,
    max_disjuncts: int = DEFAULT_DISJUNCT_CAP,
    close: bool = True,
) -> Formula:
    """Quantifier-free equivalent of a linear real arithmetic formula.

    Innermost quantifiers go first; universals are handled by exact
    duality.  With ``close=True`` (the default and the public contract)
    any strict atom surviving in the result is weakened to its closure
    and a BoundaryClosureWarning is emitted; ``close=False`` returns the
    exact result, which may contain internal strict atoms.
    """
    g = _eliminate_rec(f, max_disjuncts)
    g = _final_form(g, max_disjuncts)
    if close:
        g = close_strict(g)
    return g


def _eliminate_rec(f: Formula, cap: int) -> Formula:
    if isinstance(f, (TrueF, FalseF, AtomF)):
        return f
    if isinstance(f, And):
        return And(tuple(_eliminate_rec(a, cap) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(_eliminate_rec(a, cap) for a in f.args))
    if isinstance(f, Not):
        return Not(_eliminate_rec(f.arg, cap))
    if isinstance(f, Exists):
        body = _eliminate_rec(f.body, cap)
        return _project_formula(body, f.var, cap)
    if isinstance(f, Forall):
        body = _eliminate_rec(f.body, cap)
        return Not(_project_formula(Not(body), f.var, cap))
    raise TypeError(f"unknown formula node {f!r}")


def _project_formula(body: Formula, v: Variable, cap: int) -> Formula:
    """Exists-eliminate v from a quantifier-free body (exact semantics)."""
    g = nnf(body, closed=False)
    try:
        disjuncts = dnf(g, prune=_strict_feasible_prune, max_disjuncts=cap)
    except DisjunctCapExceeded as exc:
        raise ResourceCapExceeded(str(exc)) from exc
    out: List[Formula] = []
    for d in disjuncts:
        projected = project_conjunction(d, v)
        if projected is None:
            continue
        simplified = simplify_conjunction(projected)
        if simplified is None:
            continue
        out.append(conj_formula(simplified))
    if not out:
        return FalseF()
    return Or(tuple(out)) if len(out) > 1 else out[0]


def _strict_feasible_prune(atoms: List[Atom]) -> bool:
    if len(atoms) <= 1:
        return True
    return lp.feasible_strict(atoms)


def _final_form(f: Formula, cap: int) -> Formula:
    """Canonical disjunction of irredundant conjunctions."""
    g = nnf(f, closed=False)
    try:
        disjuncts = dnf(g, prune=_strict_feasible_prune, max_disjuncts=cap)
    except DisjunctCapExceeded as exc:
        raise ResourceCapExceeded(str(exc)) from exc
    cleaned: List[List[Atom]] = []
    for d in disjuncts:
        simplified = simplify_conjunction(d)
        if simplified is not None:
            cleaned.append(sorted(simplified, key=str))
    # drop disjuncts syntactically subsumed by a weaker one
    kept: List[List[Atom]] = []
    sets = [set(c) for c in cleaned]
    for i, c in enumerate(cleaned):
        if any(j != i and sets[j] < sets[i] for j in range(len(cleaned))):
            continue
        if any(sets[j] == sets[i] and j < i for j in range(len(cleaned))):
            continue
        kept.append(c)
    kept.sort(key=lambda c: [str(a) for a in c])
    if not kept:
        return FalseF()
    return dnf_formula(kept)


def close_strict(f: Formula) -> Formula:
    """Replace internal strict atoms by their closures (with a warning)."""
    closed, changed = _close(f)
    if changed:
        warnings.warn(
            "negation crossed a boundary-sensitive construct; "
            "strict facets were closed in the output",
            BoundaryClosureWarning,
            stacklevel=2,
        )
    return closed


def _close(f: Formula) -> Tuple[Formula, bool]:
    if isinstance(f, (TrueF, FalseF)):
        return f, False
    if isinstance(f, AtomF):
        if f.atom.rel is Rel.LT:
            return AtomF(Atom.make(f.atom.term, Rel.LE)), True
        return f, False
    if isinstance(f, (And, Or)):
        parts = [_close(a) for a in f.args]
        changed = any(c for _, c in parts)
        node = type(f)(tuple(p for p, _ in parts))
        return node, changed
    if isinstance(f, Not):
        inner, changed = _close(f.arg)
        return Not(inner), changed
    raise TypeError("close_strict expects a quantifier-free formula")


def has_strict(f: Formula) -> bool:
    return any(a.rel is Rel.LT for a in atoms_of(f))
