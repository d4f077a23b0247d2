"""Energy timed paths and segmented energy timed automata.

The model is a graph of macro-states whose edges each carry a linear
energy timed path (ETP): a state sequence with per-state energy rates
and closed clock invariants, and transitions with clock guards, energy
updates and clock resets.  Rates may carry an imprecision ``eps`` and
updates an imprecision ``delta``; a model where any of these is nonzero
is treated as the uncertainty variant.

Every ETP must reset all clocks on its final transition so that paths
compose at clock valuation zero, making macro-level composition purely
a matter of energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx

from . import lp
from .intervals import Interval, fmt_rat, rat
from .linarith import Atom, LinearTerm, Rel, Variable

REL_SYMBOLS = ("<=", "=", ">=")


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class ClockConstraint:
    """Conjunction of diagonal-free comparisons ``clock rel bound``."""

    conjuncts: Tuple[Tuple[str, str, Fraction], ...] = ()

    def __post_init__(self):
        for clock, relation, bound in self.conjuncts:
            if relation not in REL_SYMBOLS:
                raise ModelError(f"clock relation must be one of {REL_SYMBOLS}, got {relation!r}")
            if bound < 0:
                raise ModelError(f"clock bound must be non-negative, got {bound}")

    @staticmethod
    def true() -> "ClockConstraint":
        return ClockConstraint(())

    @staticmethod
    def parse(text: str) -> "ClockConstraint":
        text = text.strip()
        if not text or text.lower() == "true":
            return ClockConstraint(())
        conjuncts = []
        for part in text.split("&"):
            part = part.strip()
            m = None
            for sym in ("<=", ">=", "==", "="):
                if sym in part:
                    left, _, right = part.partition(sym)
                    m = (left.strip(), "=" if sym == "==" else sym, right.strip())
                    break
            if m is None:
                raise ModelError(f"cannot parse clock constraint {part!r} (use <=, = or >=)")
            if "<" in m[0] or ">" in m[0]:
                raise ModelError(f"strict clock constraints are not supported: {part!r}")
            conjuncts.append((m[0], m[1], rat(m[2])))
        return ClockConstraint(tuple(conjuncts))

    def clocks(self) -> Set[str]:
        return {c for c, _, _ in self.conjuncts}

    def atoms(self, clock_terms: Mapping[str, LinearTerm]) -> List[Atom]:
        out = []
        for clock, relation, bound in self.conjuncts:
            term = clock_terms[clock]
            if relation == "<=":
                out.append(Atom.make(term - LinearTerm.const(bound), Rel.LE))
            elif relation == ">=":
                out.append(Atom.make(LinearTerm.const(bound) - term, Rel.LE))
            else:
                out.append(Atom.make(term - LinearTerm.const(bound), Rel.EQ))
        return out

    def __str__(self) -> str:
        if not self.conjuncts:
            return "true"
        return " & ".join(f"{c} {r} {fmt_rat(b)}" for c, r, b in self.conjuncts)


@dataclass(frozen=True)
class EtpState:
    id: str
    rate: Fraction
    rate_imprecision: Fraction = Fraction(0)
    invariant: ClockConstraint = ClockConstraint.true()

    def __post_init__(self):
        if self.rate_imprecision < 0:
            raise ModelError(f"state {self.id}: rate imprecision must be >= 0")


@dataclass(frozen=True)
class EtpTransition:
    guard: ClockConstraint = ClockConstraint.true()
    update: Fraction = Fraction(0)
    update_imprecision: Fraction = Fraction(0)
    resets: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if self.update_imprecision < 0:
            raise ModelError("transition update imprecision must be >= 0")


@dataclass(frozen=True)
class EnergyTimedPath:
    states: Tuple[EtpState, ...]
    transitions: Tuple[EtpTransition, ...]
    clocks: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if len(self.transitions) != len(self.states) - 1:
            raise ModelError(
                f"path needs |transitions| = |states|-1, got {len(self.transitions)} and {len(self.states)}"
            )

    @property
    def steps(self) -> int:
        return len(self.transitions)

    def has_uncertainty(self) -> bool:
        return any(s.rate_imprecision for s in self.states[:-1]) or any(
            t.update_imprecision for t in self.transitions
        )

    def mentioned_clocks(self) -> Set[str]:
        out: Set[str] = set()
        for s in self.states:
            out |= s.invariant.clocks()
        for t in self.transitions:
            out |= t.guard.clocks()
            out |= set(t.resets)
        return out

    def delay_variables(self) -> List[Variable]:
        return [Variable(f"d{i}", "delay") for i in range(self.steps)]

    def clock_term(self, clock: str, position: int, delays: Sequence[Variable]) -> LinearTerm:
        """Value of a clock on entry to state ``position`` (valuation starts at 0).

        The value is the sum of delays since the last reset of the clock.
        """
        start = 0
        for j in range(position - 1, -1, -1):
            if clock in self.transitions[j].resets:
                start = j + 1
                break
        term = LinearTerm.const(0)
        for j in range(start, position):
            term = term + LinearTerm.var(delays[j])
        return term

    def timing_atoms(self, delays: Sequence[Variable]) -> List[Atom]:
        """Clock constraints over the delay variables: invariants on state
        entry and after the delay, guards at the moment of firing, and
        non-negativity of every delay."""
        atoms: List[Atom] = []
        for d in delays:
            atoms.append(Atom.make(LinearTerm.var(d, -1), Rel.LE))
        for i, state in enumerate(self.states):
            entry = {c: self.clock_term(c, i, delays) for c in self.clocks}
            atoms.extend(state.invariant.atoms(entry))
            if i < self.steps:
                after = {c: entry[c] + LinearTerm.var(delays[i]) for c in self.clocks}
                atoms.extend(state.invariant.atoms(after))
                atoms.extend(self.transitions[i].guard.atoms(after))
        return atoms

    def min_duration(self) -> Optional[Fraction]:
        """LP-minimal total duration of a run, or None when timing is infeasible."""
        delays = self.delay_variables()
        total = LinearTerm.const(0)
        for d in delays:
            total = total + LinearTerm.var(d)
        res = lp.optimize(self.timing_atoms(delays), total, "min")
        if res.status is not lp.LPStatus.OPTIMAL:
            return None
        return res.value

    def max_duration(self) -> Optional[Fraction]:
        """LP-maximal total duration; None when unbounded or infeasible."""
        delays = self.delay_variables()
        total = LinearTerm.const(0)
        for d in delays:
            total = total + LinearTerm.var(d)
        res = lp.optimize(self.timing_atoms(delays), total, "max")
        if res.status is not lp.LPStatus.OPTIMAL:
            return None
        return res.value


MacroEdge = Tuple[str, str]


@dataclass(frozen=True)
class SETA:
    """Segmented energy timed automaton: macro-graph with an ETP per edge."""

    macro_states: FrozenSet[str]
    initial: str
    path_of: Mapping[MacroEdge, EnergyTimedPath]
    name: str = "seta"

    @property
    def macro_transitions(self) -> Set[MacroEdge]:
        return set(self.path_of.keys())

    def has_uncertainty(self) -> bool:
        return any(p.has_uncertainty() for p in self.path_of.values())

    def graph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.macro_states)
        for (a, b) in self.path_of:
            g.add_edge(a, b)
        return g


# ---------------------------------------------------------------------------
# validation and structural analysis
# ---------------------------------------------------------------------------


def validate(seta: SETA) -> List[str]:
    """Structural diagnostics; an empty list means the model is well formed."""
    diags: List[str] = []
    if seta.initial not in seta.macro_states:
        diags.append(f"initial macro-state {seta.initial!r} is not declared")
    for (a, b), path in seta.path_of.items():
        where = f"path {a}->{b}"
        if a not in seta.macro_states or b not in seta.macro_states:
            diags.append(f"{where}: endpoints must be declared macro-states")
        undeclared = path.mentioned_clocks() - set(path.clocks)
        if undeclared:
            diags.append(f"{where}: undeclared clock(s) {sorted(undeclared)}")
            continue
        if path.steps == 0:
            diags.append(f"{where}: a path needs at least one transition")
            continue
        missing_resets = set(path.clocks) - set(path.transitions[-1].resets)
        if missing_resets:
            diags.append(
                f"{where}: final transition must reset all clocks, missing {sorted(missing_resets)}"
            )
        dur = path.max_duration()
        if dur is None:
            mn = path.min_duration()
            if mn is None:
                diags.append(f"{where}: timing constraints are unsatisfiable")
            else:
                diags.append(f"{where}: total duration is unbounded")
    return diags


def simple_cycles(seta: SETA) -> List[List[str]]:
    """Simple cycles of the macro-graph, as node lists (first node repeated implicitly)."""
    return [list(c) for c in nx.simple_cycles(seta.graph())]


def is_flat(seta: SETA) -> Tuple[bool, bool]:
    """(flat, depth1): flat means every macro-state lies on at most one
    simple cycle; depth-1 means the graph is a tree rooted at the
    initial state with self-loops allowed only at leaves."""
    cycles = simple_cycles(seta)
    counts: Dict[str, int] = {}
    for cyc in cycles:
        for node in set(cyc):
            counts[node] = counts.get(node, 0) + 1
    flat = all(c <= 1 for c in counts.values())
    depth1 = _is_depth1(seta)
    return flat, depth1


def _is_depth1(seta: SETA) -> bool:
    tree_edges = [(a, b) for (a, b) in seta.path_of if a != b]
    loops = {a for (a, b) in seta.path_of if a == b}
    g = nx.DiGraph()
    g.add_nodes_from(seta.macro_states)
    g.add_edges_from(tree_edges)
    indeg = dict(g.in_degree())
    if indeg.get(seta.initial, 0) != 0:
        return False
    for node in seta.macro_states:
        if node != seta.initial and indeg.get(node, 0) != 1:
            return False
    if not nx.is_directed_acyclic_graph(g):
        return False
    reachable = {seta.initial} | nx.descendants(g, seta.initial)
    if reachable != set(seta.macro_states):
        return False
    for node in loops:
        if g.out_degree(node) != 0:
            return False
    return True


def cycle_through(seta: SETA, node: str) -> Optional[List[MacroEdge]]:
    """The unique simple cycle containing ``node`` in a flat SETA, as an
    edge list starting at ``node``; None when the node is on no cycle."""
    for cyc in simple_cycles(seta):
        if node in cyc:
            k = cyc.index(node)
            order = cyc[k:] + cyc[:k]
            edges = []
            for i in range(len(order)):
                a, b = order[i], order[(i + 1) % len(order)]
                edges.append((a, b))
            return edges
    return None


def edges_on_cycles(seta: SETA) -> Set[MacroEdge]:
    out: Set[MacroEdge] = set()
    for cyc in simple_cycles(seta):
        for i in range(len(cyc)):
            out.add((cyc[i], cyc[(i + 1) % len(cyc)]))
    return out


@dataclass
class RestrictionReport:
    """Outcome of the minimal-duration restriction check."""

    ok: bool
    min_duration: Optional[Fraction] = None
    offending_path: Optional[MacroEdge] = None
    per_path: Dict[MacroEdge, Fraction] = field(default_factory=dict)


def check_restriction_R(seta: SETA) -> RestrictionReport:
    """Minimal positive duration D over all ETPs (by LP), or the failure.

    Every feasible delay vector of every path then has total duration
    at least D, which is what makes the uncertainty analysis terminate.
    """
    per_path: Dict[MacroEdge, Fraction] = {}
    overall: Optional[Fraction] = None
    for edge, path in sorted(seta.path_of.items()):
        d = path.min_duration()
        if d is None:
            return RestrictionReport(False, offending_path=edge)
        per_path[edge] = d
        if d <= 0:
            return RestrictionReport(False, offending_path=edge, per_path=per_path)
        overall = d if overall is None else min(overall, d)
    return RestrictionReport(True, min_duration=overall, per_path=per_path)


def min_accumulated_imprecision(path: EnergyTimedPath) -> Fraction:
    """Smallest half-width of the reachable set after one traversal:
    LP-minimal sum of eps_i * d_i plus the sum of update imprecisions."""
    delays = path.delay_variables()
    objective = LinearTerm.const(0)
    for i, d in enumerate(delays):
        e = path.states[i].rate_imprecision
        if e:
            objective = objective + LinearTerm.var(d, e)
    res = lp.optimize(path.timing_atoms(delays), objective, "min")
    if res.status is not lp.LPStatus.OPTIMAL:
        raise ModelError("path timing is unsatisfiable")
    return res.value + sum((t.update_imprecision for t in path.transitions), Fraction(0))
