"""Exact linear real arithmetic: terms, closed atoms and first-order formulas.

All coefficients and constants are arbitrary-precision rationals
(``fractions.Fraction``); floating point never enters.  The public
constraint language is topologically closed: atoms are ``t <= 0`` and
``t = 0`` and the parser rejects strict comparisons.  Strict atoms do
exist internally (``Rel.LT``) because the quantifier-elimination engine
uses them to make negation exact; they are never produced by the parser
and are closed off (with a warning) before results are handed back.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .intervals import Interval, fmt_rat, rat

RatLike = Union[Fraction, int, str]


class LinarithError(Exception):
    pass


class EvaluationError(LinarithError):
    pass


class ParseError(LinarithError):
    pass


# ---------------------------------------------------------------------------
# Variables and terms
# ---------------------------------------------------------------------------

SORTS = ("delay", "energy", "bound", "auxiliary")


@dataclass(frozen=True)
class Variable:
    """A named variable.  Identity is by name; the sort is metadata only."""

    name: str
    sort: str = "auxiliary"

    def __post_init__(self):
        if self.sort not in SORTS:
            raise LinarithError(f"unknown sort {self.sort!r} for variable {self.name!r}")

    def __eq__(self, other) -> bool:
        return isinstance(other, Variable) and self.name == other.name

    def __hash__(self) -> int:
        return hash(self.name)

    def __repr__(self) -> str:
        return f"Variable({self.name!r})"


_fresh_counter = [0]


def fresh_variable(prefix: str = "q", sort: str = "auxiliary") -> Variable:
    _fresh_counter[0] += 1
    return Variable(f"_{prefix}{_fresh_counter[0]}", sort)


@dataclass(frozen=True)
class LinearTerm:
    """Sum of rational-coefficient variables plus a rational constant.

    Zero coefficients are never stored; the coefficient tuple is sorted
    by variable name so equal terms compare and hash equal.
    """

    coeffs: Tuple[Tuple[Variable, Fraction], ...] = ()
    constant: Fraction = Fraction(0)

    @staticmethod
    def build(coeffs: Mapping[Variable, RatLike], constant: RatLike = 0) -> "LinearTerm":
        items = tuple(
            sorted(((v, rat(c)) for v, c in coeffs.items() if rat(c) != 0), key=lambda it: it[0].name)
        )
        return LinearTerm(items, rat(constant))

    @staticmethod
    def const(c: RatLike) -> "LinearTerm":
        return LinearTerm((), rat(c))

    @staticmethod
    def var(v: Variable, coeff: RatLike = 1) -> "LinearTerm":
        c = rat(coeff)
        return LinearTerm(((v, c),) if c != 0 else (), Fraction(0))

    def coeff(self, v: Variable) -> Fraction:
        for u, c in self.coeffs:
            if u == v:
                return c
        return Fraction(0)

    def variables(self) -> Set[Variable]:
        return {v for v, _ in self.coeffs}

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "LinearTerm") -> "LinearTerm":
        acc: Dict[Variable, Fraction] = {v: c for v, c in self.coeffs}
        for v, c in other.coeffs:
            acc[v] = acc.get(v, Fraction(0)) + c
        return LinearTerm.build(acc, self.constant + other.constant)

    def __sub__(self, other: "LinearTerm") -> "LinearTerm":
        return self + other.scale(-1)

    def scale(self, k: RatLike) -> "LinearTerm":
        kk = rat(k)
        if kk == 0:
            return LinearTerm.const(0)
        return LinearTerm(tuple((v, c * kk) for v, c in self.coeffs), self.constant * kk)

    def substitute(self, v: Variable, replacement: "LinearTerm") -> "LinearTerm":
        c = self.coeff(v)
        if c == 0:
            return self
        rest = LinearTerm(tuple((u, k) for u, k in self.coeffs if u != v), self.constant)
        return rest + replacement.scale(c)

    def evaluate(self, point: Mapping[Variable, Fraction]) -> Fraction:
        total = self.constant
        for v, c in self.coeffs:
            if v not in point:
                raise EvaluationError(f"variable {v.name!r} is not assigned")
            total += c * point[v]
        return total

    def __str__(self) -> str:
        if not self.coeffs:
            return fmt_rat(self.constant)
        parts: List[str] = []
        for v, c in self.coeffs:
            if c == 1:
                mono = v.name
            elif c == -1:
                mono = f"-{v.name}"
            else:
                mono = f"{fmt_rat(c)}*{v.name}"
            if parts and not mono.startswith("-"):
                parts.append("+ " + mono)
            elif parts:
                parts.append("- " + mono[1:])
            else:
                parts.append(mono)
        if self.constant != 0:
            sign = "+ " if self.constant > 0 else "- "
            parts.append(sign + fmt_rat(abs(self.constant)))
        return " ".join(parts)


# ---------------------------------------------------------------------------
# Atoms and formulas
# ---------------------------------------------------------------------------


class Rel(Enum):
    LE = "<="   # term <= 0
    EQ = "="    # term  = 0
    LT = "<"    # term  < 0   (internal to the QE engine)


@dataclass(frozen=True)
class Atom:
    """A linear constraint ``term rel 0`` in canonical form.

    Canonical form clears denominators, divides by the content gcd and,
    for equalities, fixes the sign of the leading coefficient, so equal
    constraints hash equal.
    """

    term: LinearTerm
    rel: Rel = Rel.LE

    @staticmethod
    def make(term: LinearTerm, rel: Rel = Rel.LE) -> "Atom":
        return Atom(_canonical_term(term, flip_sign_ok=(rel == Rel.EQ)), rel)

    def is_trivial(self) -> Optional[bool]:
        """True/False for constant atoms, None otherwise."""
        if not self.term.is_constant():
            return None
        c = self.term.constant
        if self.rel == Rel.LE:
            return c <= 0
        if self.rel == Rel.LT:
            return c < 0
        return c == 0

    def evaluate(self, point: Mapping[Variable, Fraction]) -> bool:
        val = self.term.evaluate(point)
        if self.rel == Rel.LE:
            return val <= 0
        if self.rel == Rel.LT:
            return val < 0
        return val == 0

    def __str__(self) -> str:
        lhs = LinearTerm(self.term.coeffs, Fraction(0))
        rhs = -self.term.constant
        op = {Rel.LE: "<=", Rel.EQ: "=", Rel.LT: "<"}[self.rel]
        if not self.term.coeffs:
            return f"{fmt_rat(self.term.constant)} {op} 0"
        return f"{lhs} {op} {fmt_rat(rhs)}"


def _canonical_term(term: LinearTerm, flip_sign_ok: bool) -> LinearTerm:
    if not term.coeffs:
        # constants only normalise their sign magnitude for equalities
        return term
    denom_lcm = 1
    for _, c in term.coeffs:
        denom_lcm = denom_lcm * c.denominator // _gcd(denom_lcm, c.denominator)
    denom_lcm = denom_lcm * term.constant.denominator // _gcd(denom_lcm, term.constant.denominator)
    scaled = term.scale(denom_lcm)
    g = 0
    for _, c in scaled.coeffs:
        g = _gcd(g, abs(c.numerator))
    g = _gcd(g, abs(scaled.constant.numerator))
    if g > 1:
        scaled = scaled.scale(Fraction(1, g))
    if flip_sign_ok and scaled.coeffs and scaled.coeffs[0][1] < 0:
        scaled = scaled.scale(-1)
    return scaled


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a if a else 1


class Formula:
    """Base class; concrete nodes are TrueF/FalseF/Atom wrappers and connectives."""

    def __and__(self, other: "Formula") -> "Formula":
        return conj([self, other])

    def __or__(self, other: "Formula") -> "Formula":
        return disj([self, other])

    def __invert__(self) -> "Formula":
        return Not(self)


@dataclass(frozen=True)
class TrueF(Formula):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseF(Formula):
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class AtomF(Formula):
    atom: Atom

    def __str__(self):
        return str(self.atom)


@dataclass(frozen=True)
class And(Formula):
    args: Tuple[Formula, ...]

    def __str__(self):
        return " & ".join(_paren(a, (Or,)) for a in self.args)


@dataclass(frozen=True)
class Or(Formula):
    args: Tuple[Formula, ...]

    def __str__(self):
        return " | ".join(_paren(a, ()) for a in self.args)


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def __str__(self):
        return "!" + _paren(self.arg, (And, Or, Exists, Forall))


@dataclass(frozen=True)
class Exists(Formula):
    var: Variable
    body: Formula

    def __str__(self):
        return f"E {self.var.name}. ({self.body})"


@dataclass(frozen=True)
class Forall(Formula):
    var: Variable
    body: Formula

    def __str__(self):
        return f"A {self.var.name}. ({self.body})"


def _paren(f: Formula, wrap_types: tuple) -> str:
    s = str(f)
    if isinstance(f, wrap_types) or isinstance(f, (Exists, Forall)):
        return f"({s})"
    return s


# -- construction helpers ----------------------------------------------------


def atom(term: LinearTerm, rel: Rel = Rel.LE) -> Formula:
    a = Atom.make(term, rel)
    triv = a.is_trivial()
    if triv is True:
        return TrueF()
    if triv is False:
        return FalseF()
    return AtomF(a)


def le(lhs: LinearTerm, rhs: LinearTerm) -> Formula:
    return atom(lhs - rhs, Rel.LE)


def ge(lhs: LinearTerm, rhs: LinearTerm) -> Formula:
    return atom(rhs - lhs, Rel.LE)


def eq(lhs: LinearTerm, rhs: LinearTerm) -> Formula:
    return atom(lhs - rhs, Rel.EQ)


def conj(args: Iterable[Formula]) -> Formula:
    flat: List[Formula] = []
    for a in args:
        if isinstance(a, FalseF):
            return FalseF()
        if isinstance(a, TrueF):
            continue
        if isinstance(a, And):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return TrueF()
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(args: Iterable[Formula]) -> Formula:
    flat: List[Formula] = []
    for a in args:
        if isinstance(a, TrueF):
            return TrueF()
        if isinstance(a, FalseF):
            continue
        if isinstance(a, Or):
            flat.extend(a.args)
        else:
            flat.append(a)
    if not flat:
        return FalseF()
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def bound_variables(f: Formula) -> Set[Variable]:
    if isinstance(f, (TrueF, FalseF, AtomF)):
        return set()
    if isinstance(f, (And, Or)):
        out: Set[Variable] = set()
        for a in f.args:
            out |= bound_variables(a)
        return out
    if isinstance(f, Not):
        return bound_variables(f.arg)
    if isinstance(f, (Exists, Forall)):
        return {f.var} | bound_variables(f.body)
    raise LinarithError(f"unknown node {f!r}")


def free_variables(f: Formula) -> Set[Variable]:
    if isinstance(f, (TrueF, FalseF)):
        return set()
    if isinstance(f, AtomF):
        return f.atom.term.variables()
    if isinstance(f, (And, Or)):
        out: Set[Variable] = set()
        for a in f.args:
            out |= free_variables(a)
        return out
    if isinstance(f, Not):
        return free_variables(f.arg)
    if isinstance(f, (Exists, Forall)):
        return free_variables(f.body) - {f.var}
    raise LinarithError(f"unknown node {f!r}")


def substitute(f: Formula, v: Variable, replacement: LinearTerm) -> Formula:
    """Replace free occurrences of v by a term (no capture: binders shadow)."""
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, AtomF):
        return atom(f.atom.term.substitute(v, replacement), f.atom.rel)
    if isinstance(f, And):
        return conj(substitute(a, v, replacement) for a in f.args)
    if isinstance(f, Or):
        return disj(substitute(a, v, replacement) for a in f.args)
    if isinstance(f, Not):
        return Not(substitute(f.arg, v, replacement))
    if isinstance(f, (Exists, Forall)):
        if f.var == v:
            return f
        body = substitute(f.body, v, replacement)
        return type(f)(f.var, body)
    raise LinarithError(f"unknown node {f!r}")


def exists(v: Variable, body: Formula) -> Formula:
    """Existential quantifier with alpha-renaming when v is already bound in body."""
    if v in bound_variables(body):
        fresh = fresh_variable(v.name, v.sort)
        body = substitute(body, v, LinearTerm.var(fresh))
        v = fresh
    if v not in free_variables(body):
        return body
    return Exists(v, body)


def forall(v: Variable, body: Formula) -> Formula:
    if v in bound_variables(body):
        fresh = fresh_variable(v.name, v.sort)
        body = substitute(body, v, LinearTerm.var(fresh))
        v = fresh
    if v not in free_variables(body):
        return body
    return Forall(v, body)


# ---------------------------------------------------------------------------
# Evaluation and normal forms
# ---------------------------------------------------------------------------


def evaluate(f: Formula, point: Mapping[Variable, RatLike]) -> bool:
    """Truth value of a quantifier-free formula under exact arithmetic."""
    env = {v: rat(x) for v, x in point.items()}
    return _eval(f, env)


def _eval(f: Formula, env: Mapping[Variable, Fraction]) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, AtomF):
        return f.atom.evaluate(env)
    if isinstance(f, And):
        return all(_eval(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(_eval(a, env) for a in f.args)
    if isinstance(f, Not):
        return not _eval(f.arg, env)
    raise EvaluationError("evaluate requires a quantifier-free formula")


def negate_atom_closed(a: Atom) -> Formula:
    """Closed-convention negation: !(t <= 0) becomes (-t <= 0).

    Constant atoms negate exactly.  For a non-constant equality the
    topological closure of the complement is everything, hence True.
    """
    triv = a.is_trivial()
    if triv is not None:
        return FalseF() if triv else TrueF()
    if a.rel == Rel.LE:
        return atom(a.term.scale(-1), Rel.LE)
    if a.rel == Rel.LT:
        return atom(a.term.scale(-1), Rel.LE)
    return TrueF()


def negate_atom_exact(a: Atom) -> Formula:
    """Exact negation, introducing strict atoms where needed."""
    triv = a.is_trivial()
    if triv is not None:
        return FalseF() if triv else TrueF()
    if a.rel == Rel.LE:
        return atom(a.term.scale(-1), Rel.LT)
    if a.rel == Rel.LT:
        return atom(a.term.scale(-1), Rel.LE)
    return disj([atom(a.term, Rel.LT), atom(a.term.scale(-1), Rel.LT)])


def nnf(f: Formula, closed: bool = True) -> Formula:
    """Negation normal form.  ``closed=True`` uses the closed-negation
    convention of the public fragment, ``closed=False`` is exact and may
    introduce internal strict atoms."""
    return _nnf(f, False, closed)


def _nnf(f: Formula, neg: bool, closed: bool) -> Formula:
    if isinstance(f, TrueF):
        return FalseF() if neg else f
    if isinstance(f, FalseF):
        return TrueF() if neg else f
    if isinstance(f, AtomF):
        if not neg:
            return f
        return negate_atom_closed(f.atom) if closed else negate_atom_exact(f.atom)
    if isinstance(f, Not):
        return _nnf(f.arg, not neg, closed)
    if isinstance(f, And):
        parts = [_nnf(a, neg, closed) for a in f.args]
        return disj(parts) if neg else conj(parts)
    if isinstance(f, Or):
        parts = [_nnf(a, neg, closed) for a in f.args]
        return conj(parts) if neg else disj(parts)
    if isinstance(f, Exists):
        body = _nnf(f.body, neg, closed)
        return forall(f.var, body) if neg else exists(f.var, body)
    if isinstance(f, Forall):
        body = _nnf(f.body, neg, closed)
        return exists(f.var, body) if neg else forall(f.var, body)
    raise LinarithError(f"unknown node {f!r}")


def dnf(f: Formula, prune=None, max_disjuncts: Optional[int] = None) -> List[List[Atom]]:
    """Disjunctive normal form of a quantifier-free NNF formula.

    Returns a list of conjunctions (atom lists).  Distribution is lazy:
    partial products are pruned by the optional ``prune`` callback (a
    predicate on atom lists returning False for unsatisfiable ones) and
    deduplicated, so infeasible branches never multiply out.
    """
    disjuncts = _dnf(f, prune, max_disjuncts)
    out: List[List[Atom]] = []
    seen = set()
    for d in disjuncts:
        key = frozenset(d)
        if key not in seen:
            seen.add(key)
            out.append(sorted(d, key=str))
    return out


class DisjunctCapExceeded(LinarithError):
    pass


def _dnf(f: Formula, prune, cap) -> List[List[Atom]]:
    if isinstance(f, TrueF):
        return [[]]
    if isinstance(f, FalseF):
        return []
    if isinstance(f, AtomF):
        return [[f.atom]]
    if isinstance(f, Or):
        out: List[List[Atom]] = []
        for a in f.args:
            out.extend(_dnf(a, prune, cap))
            if cap is not None and len(out) > cap:
                raise DisjunctCapExceeded(f"disjunct cap {cap} exceeded")
        return out
    if isinstance(f, And):
        products: List[List[Atom]] = [[]]
        for a in f.args:
            branch = _dnf(a, prune, cap)
            nxt: List[List[Atom]] = []
            seen = set()
            for p in products:
                for b in branch:
                    cand = _merge_conj(p, b)
                    if cand is None:
                        continue
                    key = frozenset(cand)
                    if key in seen:
                        continue
                    if prune is not None and not prune(cand):
                        continue
                    seen.add(key)
                    nxt.append(cand)
                    if cap is not None and len(nxt) > cap:
                        raise DisjunctCapExceeded(f"disjunct cap {cap} exceeded")
            products = nxt
            if not products:
                return []
        return products
    if isinstance(f, Not):
        raise LinarithError("dnf expects an NNF input")
    raise LinarithError(f"dnf expects a quantifier-free formula, got {f!r}")


def _merge_conj(p: List[Atom], q: List[Atom]) -> Optional[List[Atom]]:
    merged = list(p)
    have = set(p)
    for a in q:
        triv = a.is_trivial()
        if triv is False:
            return None
        if triv is True or a in have:
            continue
        have.add(a)
        merged.append(a)
    return merged


def conj_formula(atoms: Sequence[Atom]) -> Formula:
    return conj(AtomF(a) for a in atoms)


def dnf_formula(disjuncts: Sequence[Sequence[Atom]]) -> Formula:
    return disj(conj_formula(list(d)) for d in disjuncts)


def normalize(f: Formula) -> Formula:
    """Closed-convention normal form: NNF, then DNF of quantifier-free parts.

    Negation is resolved with the closed convention, so the result can
    differ from the input on the (measure-zero) boundaries of negated
    atoms.  Existentials distribute over the disjuncts of their body;
    universals stay in place over a normalised body.
    """
    g = nnf(f, closed=True)
    return _normalize_nnf(g)


def _normalize_nnf(f: Formula) -> Formula:
    if isinstance(f, (TrueF, FalseF, AtomF)):
        return f
    if isinstance(f, Exists):
        body = _normalize_nnf(f.body)
        if isinstance(body, Or):
            return disj(exists(f.var, a) for a in body.args)
        return exists(f.var, body)
    if isinstance(f, Forall):
        body = _normalize_nnf(f.body)
        if isinstance(body, And):
            return conj(forall(f.var, a) for a in body.args)
        return forall(f.var, body)
    if isinstance(f, (And, Or)):
        if bound_variables(f):
            parts = [_normalize_nnf(a) for a in f.args]
            return conj(parts) if isinstance(f, And) else disj(parts)
        return dnf_formula(dnf(f))
    raise LinarithError(f"unknown node {f!r}")


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, (TrueF, FalseF, AtomF)):
        return True
    if isinstance(f, (And, Or)):
        return all(is_quantifier_free(a) for a in f.args)
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    return False


def atoms_of(f: Formula) -> List[Atom]:
    if isinstance(f, (TrueF, FalseF)):
        return []
    if isinstance(f, AtomF):
        return [f.atom]
    if isinstance(f, (And, Or)):
        out: List[Atom] = []
        for a in f.args:
            out.extend(atoms_of(a))
        return out
    if isinstance(f, Not):
        return atoms_of(f.arg)
    if isinstance(f, (Exists, Forall)):
        return atoms_of(f.body)
    raise LinarithError(f"unknown node {f!r}")


def conjunction_atoms(f: Formula) -> List[Atom]:
    """The atom list of a pure conjunction; raises on anything else."""
    if isinstance(f, TrueF):
        return []
    if isinstance(f, AtomF):
        return [f.atom]
    if isinstance(f, And):
        out: List[Atom] = []
        for a in f.args:
            out.extend(conjunction_atoms(a))
        return out
    raise LinarithError(f"expected a conjunction of atoms, got {f}")


# ---------------------------------------------------------------------------
# interval extraction
# ---------------------------------------------------------------------------


def interval_of(f: Formula, v: Variable) -> Interval:
    """Exact solution set of a one-variable conjunction of atoms.

    Unbounded ends are reported as open (None) endpoints; an infeasible
    conjunction gives the distinguished empty interval.
    """
    if isinstance(f, FalseF):
        return Interval.empty_set()
    atoms = conjunction_atoms(f)
    extra = {u for a in atoms for u in a.term.variables()} - {v}
    if extra:
        names = ", ".join(sorted(u.name for u in extra))
        raise LinarithError(f"interval_of: unexpected free variables {names}")
    box = Interval.everything()
    for a in atoms:
        c = a.term.coeff(v)
        k = a.term.constant
        if c == 0:
            triv = a.is_trivial()
            if triv is False:
                return Interval.empty_set()
            continue
        bound = -k / c
        if a.rel == Rel.EQ:
            box = box.intersect(Interval.point(bound))
        elif (c > 0) == (a.rel in (Rel.LE, Rel.LT)):
            box = box.intersect(Interval.at_most(bound))
        else:
            box = box.intersect(Interval.at_least(bound))
        if box.is_empty():
            return Interval.empty_set()
    return box


# ---------------------------------------------------------------------------
# textual syntax
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|=|<|>|[-+*/()!&|.]))"
)


def parse(text: str, sorts: Optional[Mapping[str, str]] = None) -> Formula:
    """Parse the debugging syntax: infix atoms, `&`, `|`, `!`, `E v.`, `A v.`.

    Decimal literals parse exactly; strict comparisons are rejected.
    """
    tokens = _tokenize(text)
    parser = _Parser(tokens, dict(sorts or {}))
    f = parser.parse_formula()
    parser.expect_end()
    return f


def _tokenize(text: str) -> List[str]:
    pos = 0
    out: List[str] = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos]!r} at offset {pos}")
            break
        out.append(m.group(m.lastgroup))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens: List[str], sorts: Dict[str, str]):
        self.tokens = tokens
        self.i = 0
        self.sorts = sorts

    def peek(self) -> Optional[str]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, tok: str):
        got = self.next()
        if got != tok:
            raise ParseError(f"expected {tok!r}, got {got!r}")

    def expect_end(self):
        if self.peek() is not None:
            raise ParseError(f"trailing input starting at {self.peek()!r}")

    def parse_formula(self) -> Formula:
        tok = self.peek()
        if tok in ("E", "A"):
            save = self.i
            self.next()
            name = self.peek()
            if name is not None and re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name) and \
                    self.i + 1 < len(self.tokens) and self.tokens[self.i + 1] == ".":
                self.next()
                self.expect(".")
                body = self.parse_formula()
                v = Variable(name, self.sorts.get(name, "auxiliary"))
                return exists(v, body) if tok == "E" else forall(v, body)
            self.i = save
        return self.parse_or()

    def parse_or(self) -> Formula:
        parts = [self.parse_and()]
        while self.peek() == "|":
            self.next()
            parts.append(self.parse_and())
        return disj(parts)

    def parse_and(self) -> Formula:
        parts = [self.parse_unary()]
        while self.peek() == "&":
            self.next()
            parts.append(self.parse_unary())
        return conj(parts)

    def parse_unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.next()
            return Not(self.parse_unary())
        if tok == "(":
            self.next()
            f = self.parse_formula()
            self.expect(")")
            return f
        if tok == "true":
            self.next()
            return TrueF()
        if tok == "false":
            self.next()
            return FalseF()
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        lhs = self.parse_sum()
        op = self.next()
        if op in ("<", ">"):
            raise ParseError("strict inequalities are not representable; use <= or >=")
        if op not in ("<=", ">=", "=", "=="):
            raise ParseError(f"expected a comparison, got {op!r}")
        rhs = self.parse_sum()
        if op == "<=":
            return le(lhs, rhs)
        if op == ">=":
            return ge(lhs, rhs)
        return eq(lhs, rhs)

    def parse_sum(self) -> LinearTerm:
        term = self.parse_product()
        while self.peek() in ("+", "-"):
            op = self.next()
            nxt = self.parse_product()
            term = term + nxt if op == "+" else term - nxt
        return term

    def parse_product(self) -> LinearTerm:
        sign = Fraction(1)
        while self.peek() in ("+", "-"):
            if self.next() == "-":
                sign = -sign
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input in term")
        if re.fullmatch(r"\d+\.\d+|\d+", tok):
            self.next()
            value = Fraction(tok)
            if self.peek() == "/":
                self.next()
                den = self.next()
                if not re.fullmatch(r"\d+", den):
                    raise ParseError(f"expected integer denominator, got {den!r}")
                value = value / Fraction(den)
            if self.peek() == "*":
                self.next()
                name = self.next()
                if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
                    raise ParseError(f"expected variable after '*', got {name!r}")
                return LinearTerm.var(self._var(name), sign * value)
            return LinearTerm.const(sign * value)
        if re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok):
            self.next()
            return LinearTerm.var(self._var(tok), sign)
        raise ParseError(f"unexpected token {tok!r} in term")

    def _var(self, name: str) -> Variable:
        return Variable(name, self.sorts.get(name, "auxiliary"))
