"""Decision and optimisation procedures over energy relations.

Covers the infinite-run decision for flat models (waiting-list graph
traversal with cycle fixpoints and finite unfolding), the robust
variant under rate/update uncertainty, existence and synthesis of
minimal safe upper bounds, and the stable-interval computations that
back them.

Universal quantification over a candidate interval [a;b] is resolved by
endpoint substitution throughout: the inner predicates are convex
conjunctions, so membership for every point of [a;b] is equivalent to
membership at a and at b.  That keeps every pipeline here a chain of
Fourier-Motzkin projections followed by a single exact LP.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from . import lp, qe
from .automata import (
    EnergyTimedPath,
    ModelError,
    SETA,
    check_restriction_R,
    cycle_through,
    edges_on_cycles,
    is_flat,
    min_accumulated_imprecision,
    simple_cycles,
    validate,
)
from .intervals import Interval, fmt_rat, rat
from .linarith import (
    And,
    Atom,
    AtomF,
    Formula,
    LinearTerm,
    Not,
    Or,
    Rel,
    Variable,
    conj_formula,
    disj,
    dnf,
    forall as mk_forall,
    interval_of,
    nnf,
    substitute,
)
from .relations import (
    VA,
    VB,
    VU,
    W,
    W0,
    W1,
    EnergyRelation,
    apply,
    build_binary,
    build_binary_lower,
    build_quaternary,
    build_ternary,
    compose_chain,
    greatest_fixpoint,
    _bound_atoms,
)

MacroEdge = Tuple[str, str]


class SynthesisError(ModelError):
    pass


class UnfoldCapExceeded(SynthesisError):
    pass


# ---------------------------------------------------------------------------
# path concatenation (macro-level cycles as single paths)
# ---------------------------------------------------------------------------


def concat_paths(paths: Sequence[EnergyTimedPath]) -> EnergyTimedPath:
    """Concatenate ETPs end to end (each resets all clocks when it ends).

    The junction keeps the entry state of the following path; the
    preceding path's final-state invariant must hold at clock valuation
    zero, which is checked here.
    """
    if not paths:
        raise SynthesisError("cannot concatenate an empty path sequence")
    states = list(paths[0].states)
    transitions = list(paths[0].transitions)
    clocks = set(paths[0].clocks)
    for p in paths[1:]:
        last = states.pop()
        for clock, relation, bound in last.invariant.conjuncts:
            value = Fraction(0)
            ok = value <= bound if relation == "<=" else (value >= bound if relation == ">=" else value == bound)
            if not ok:
                raise SynthesisError(
                    f"state {last.id!r}: invariant {last.invariant} fails at clock valuation 0, "
                    "paths cannot be concatenated"
                )
        states.extend(p.states)
        transitions.extend(p.transitions)
        clocks |= set(p.clocks)
    return EnergyTimedPath(tuple(states), tuple(transitions), frozenset(clocks))


def cycle_path(seta: SETA, cycle_edges: Sequence[MacroEdge]) -> EnergyTimedPath:
    return concat_paths([seta.path_of[e] for e in cycle_edges])


# ---------------------------------------------------------------------------
# Algorithm: infinite-run decision for flat models without uncertainty
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Task:
    """Waiting-list entry: macro-state, propagated interval, and whether the
    state is to be explored by following its cycle (True) or skipping it."""

    macro_state: str
    interval: Interval
    follow_cycle: bool


@dataclass
class RunWitness:
    cycle: List[MacroEdge]
    entry_state: str
    entry_interval: Interval
    stable: Interval


@dataclass
class RunDecision:
    satisfiable: bool
    witness: Optional[RunWitness] = None
    tasks_processed: int = 0

    def __bool__(self) -> bool:
        return self.satisfiable


def decide_infinite_run(
    seta: SETA,
    m0: Optional[str],
    I0: Interval,
    E: Interval,
    max_unfold: int = 10_000,
) -> RunDecision:
    """Does an E-constrained infinite run exist from (m0, w0) for some
    w0 in I0?  Flat models only; FIFO task order for reproducibility.

    A cycle whose greatest fixpoint meets the propagated interval is an
    immediate yes (with a witness).  Otherwise the cycle is unfolded:
    forward images must empty out after finitely many laps, and every
    intermediate state reached during a lap is explored cycle-free.
    """
    flat, _ = is_flat(seta)
    if not flat:
        raise SynthesisError("decide_infinite_run requires a flat model")
    diags = validate(seta)
    if diags:
        raise SynthesisError("invalid model: " + "; ".join(diags))
    start = seta.initial if m0 is None else m0
    if I0.is_empty():
        return RunDecision(False)

    relation: Dict[MacroEdge, EnergyRelation] = {
        e: build_binary(p, E) for e, p in seta.path_of.items()
    }
    on_cycles = edges_on_cycles(seta)
    cycle_cache: Dict[str, Tuple[List[MacroEdge], EnergyRelation, Interval, List[EnergyRelation]]] = {}

    def cycle_data(node: str):
        if node not in cycle_cache:
            edges = cycle_through(seta, node)
            if edges is None:
                cycle_cache[node] = None
            else:
                rels = [relation[e] for e in edges]
                r_c = compose_chain(rels)
                nu = greatest_fixpoint(r_c, E)
                prefixes = []
                for j in range(1, len(edges)):
                    prefixes.append(compose_chain(rels[:j]))
                cycle_cache[node] = (edges, r_c, nu, prefixes)
        return cycle_cache[node]

    waiting = deque([Task(start, I0, True)])
    processed = 0
    while waiting:
        task = waiting.popleft()
        processed += 1
        m, interval = task.macro_state, task.interval
        if not task.follow_cycle:
            for (a, b) in sorted(seta.path_of):
                if a != m or (a, b) in on_cycles:
                    continue
                image = apply(relation[(a, b)], interval, "forward")
                if not image.is_empty():
                    waiting.append(Task(b, image, True))
            continue
        data = cycle_data(m)
        if data is None:
            waiting.append(Task(m, interval, False))
            continue
        edges, r_c, nu, prefixes = data
        meet = interval.intersect(nu)
        if not meet.is_empty():
            return RunDecision(
                True,
                RunWitness(cycle=edges, entry_state=m, entry_interval=meet, stable=nu),
                processed,
            )
        waiting.append(Task(m, interval, False))
        lap = interval
        iterations = 0
        while not lap.is_empty():
            # i laps followed by a j-step tail, explored cycle-free; the
            # j = 0 tail (continue from the cycle head after full laps)
            # is what the worked examples rely on, even though the
            # pseudocode's tail range starts at one
            for j, prefix in enumerate(prefixes, start=1):
                image = apply(prefix, lap, "forward")
                if not image.is_empty():
                    waiting.append(Task(edges[j - 1][1], image, False))
            lap = apply(r_c, lap, "forward")
            iterations += 1
            if not lap.is_empty():
                waiting.append(Task(m, lap, False))
            if iterations > max_unfold:
                raise UnfoldCapExceeded(
                    f"cycle at {m} did not empty within {max_unfold} unfoldings"
                )
    return RunDecision(False, None, processed)


# ---------------------------------------------------------------------------
# stable intervals (certain and uncertain, concrete and symbolic bound)
# ---------------------------------------------------------------------------

SA = Variable("_sa", "bound")
SB = Variable("_sb", "bound")


def _substituted_pair(chi: Sequence[Atom], w_var: Variable) -> Optional[List[Atom]]:
    """chi holds for every w in [SA; SB] iff it holds at both endpoints."""
    out: List[Atom] = []
    for bound_var in (SA, SB):
        for a in chi:
            na = Atom.make(a.term.substitute(w_var, LinearTerm.var(bound_var)), a.rel)
            triv = na.is_trivial()
            if triv is False:
                return None
            if triv is None:
                out.append(na)
    return out


def _stable_psi(rel: EnergyRelation, w_var: Variable) -> Optional[List[Atom]]:
    """Constraints on (SA, SB[, U]) making [SA; SB] a stable window: from
    every w inside, one traversal can be steered to land inside again."""
    atoms = list(rel.atoms)
    atoms.append(Atom.make(LinearTerm.var(SA) - LinearTerm.var(VA), Rel.LE))
    atoms.append(Atom.make(LinearTerm.var(VB) - LinearTerm.var(SB), Rel.LE))
    chi = qe.eliminate_block(atoms, [VA, VB])
    if chi is None:
        return None
    psi = _substituted_pair(chi, w_var)
    if psi is None:
        return None
    psi.append(Atom.make(LinearTerm.var(SA) - LinearTerm.var(SB), Rel.LE))
    return psi


def stable_interval_uncertain(rel: EnergyRelation) -> Interval:
    """Greatest stable interval of a ternary relation (concrete bound)."""
    if rel.kind != "ternary":
        raise SynthesisError("stable_interval_uncertain expects a ternary relation")
    psi = _stable_psi(rel, W0)
    if psi is None:
        return Interval.empty_set()
    E = rel.energy_bound
    psi = psi + _bound_atoms(LinearTerm.var(SA), E.lo, E.hi) + _bound_atoms(
        LinearTerm.var(SB), E.lo, E.hi
    )
    res = lp.optimize(psi, LinearTerm.var(SB) - LinearTerm.var(SA), "max")
    if res.status is not lp.LPStatus.OPTIMAL:
        return Interval.empty_set()
    return Interval(res.witness[SA], res.witness[SB])


def entry_window_feasible(rel: EnergyRelation, w0, target: Interval) -> bool:
    """Can one traversal from the concrete level w0 be steered to land in
    some window [a;b] inside ``target``?  (ternary relation)"""
    if target.is_empty():
        return False
    atoms = rel.substituted({W0: LinearTerm.const(rat(w0))})
    atoms += _bound_atoms(LinearTerm.var(VA), target.lo, None)
    atoms += _bound_atoms(LinearTerm.var(VB), None, target.hi)
    return lp.feasible(atoms).is_feasible


# ---------------------------------------------------------------------------
# infinite-run decision under uncertainty
# ---------------------------------------------------------------------------


def _depth1_components(seta: SETA) -> List[Tuple[List[MacroEdge], str]]:
    """(tree path from initial, leaf) pairs for a depth-1 flat model."""
    out: List[Tuple[List[MacroEdge], str]] = []
    tree = {a: [] for a in seta.macro_states}
    for (a, b) in seta.path_of:
        if a != b:
            tree[a].append(b)

    def walk(node: str, acc: List[MacroEdge]):
        if (node, node) in seta.path_of:
            out.append((list(acc), node))
        for child in sorted(tree[node]):
            walk(child, acc + [(node, child)])

    walk(seta.initial, [])
    return out


def imprecision_quantum(seta: SETA) -> Fraction:
    """Minimal guaranteed width of the reachable set after one traversal,
    over all paths: the decidability lever under uncertainty."""
    widths = [2 * min_accumulated_imprecision(p) for p in seta.path_of.values()]
    return min(widths) if widths else Fraction(0)


def interval_family_size(seta: SETA, E: Interval) -> int:
    """N = ceil(|E| / quantum): enough windows to cover any stable set."""
    q = imprecision_quantum(seta)
    if q <= 0:
        raise SynthesisError("restriction violated: a path accumulates no imprecision")
    width = E.width()
    if width is None:
        raise SynthesisError("the energy constraint must be a bounded interval")
    n = -(-width // q)  # ceiling division on Fractions
    return max(1, int(n))


def decide_infinite_run_uncertain(
    seta: SETA,
    s0: str,
    w0,
    E: Interval,
    max_intervals: Optional[int] = None,
    max_disjuncts: int = qe.DEFAULT_DISJUNCT_CAP,
) -> bool:
    """Is there a strategy from (s0, w0) keeping every realised outcome in
    E forever?  Requires the minimal-duration restriction.

    Depth-1 flat models are decided exactly through per-cycle stable
    windows and a backward chain of entry conditions.  Other models go
    through the general interval-family formula, whose size is the
    theorem bound unless ``max_intervals`` lowers it (lowering can only
    produce false negatives).
    """
    w0 = rat(w0)
    report = check_restriction_R(seta)
    if not report.ok:
        raise SynthesisError(
            f"restriction violated: path {report.offending_path} has minimal duration 0"
        )
    if not E.contains(w0):
        return False
    flat, depth1 = is_flat(seta)
    if flat and depth1:
        return _decide_uncertain_depth1(seta, s0, w0, E)
    return _decide_uncertain_general(seta, s0, w0, E, max_intervals, max_disjuncts)


def _decide_uncertain_depth1(seta: SETA, s0: str, w0: Fraction, E: Interval) -> bool:
    for tree_path, leaf in _depth1_components(seta):
        # keep only the part of the path from s0 onwards
        nodes = [seta.initial] + [b for (_, b) in tree_path]
        if s0 not in nodes:
            continue
        edges = tree_path[nodes.index(s0):]
        loop = build_ternary(seta.path_of[(leaf, leaf)], E)
        stable = stable_interval_uncertain(loop)
        if stable.is_empty():
            continue
        target = stable
        ok = True
        for edge in reversed(edges):
            rel = build_ternary(seta.path_of[edge], E)
            window = _controllable_entry_set(rel, target)
            if window.is_empty():
                ok = False
                break
            target = window
        if not ok:
            continue
        if s0 == leaf:
            if entry_window_feasible(loop, w0, stable):
                return True
            continue
        if target.contains(w0):
            return True
    return False


def _controllable_entry_set(rel: EnergyRelation, target: Interval) -> Interval:
    """{w : one traversal from w can be forced to land inside target}."""
    atoms = list(rel.atoms)
    atoms += _bound_atoms(LinearTerm.var(VA), target.lo, None)
    atoms += _bound_atoms(LinearTerm.var(VB), None, target.hi)
    chi = qe.eliminate_block(atoms, [VA, VB])
    if chi is None:
        return Interval.empty_set()
    return interval_of(conj_formula(chi), W0)


def _decide_uncertain_general(
    seta: SETA,
    s0: str,
    w0: Fraction,
    E: Interval,
    max_intervals: Optional[int],
    max_disjuncts: int,
) -> bool:
    n_full = interval_family_size(seta, E)
    n = n_full if max_intervals is None else min(n_full, max_intervals)
    rels = {e: build_ternary(p, E) for e, p in seta.path_of.items()}
    # try growing family sizes: satisfiable with fewer windows is still a yes
    for count in range(1, n + 1):
        if _interval_family_satisfiable(seta, s0, w0, E, count, rels, max_disjuncts):
            return True
    return False


def _interval_family_satisfiable(
    seta: SETA,
    s0: str,
    w0: Fraction,
    E: Interval,
    count: int,
    rels: Mapping[MacroEdge, EnergyRelation],
    max_disjuncts: int,
) -> bool:
    states = sorted(seta.macro_states)
    lo_var = {(s, j): Variable(f"_a_{s}_{j}", "bound") for s in states for j in range(count)}
    hi_var = {(s, j): Variable(f"_b_{s}_{j}", "bound") for s in states for j in range(count)}
    parts: List[Formula] = []
    for s in states:
        for j in range(count):
            a_sj, b_sj = lo_var[(s, j)], hi_var[(s, j)]
            parts.extend(AtomF(x) for x in _bound_atoms(LinearTerm.var(a_sj), E.lo, E.hi))
            parts.extend(AtomF(x) for x in _bound_atoms(LinearTerm.var(b_sj), E.lo, E.hi))
            succ_options: List[Formula] = []
            for (a, b) in sorted(rels):
                if a != s:
                    continue
                for k in range(count):
                    atoms = list(rels[(a, b)].atoms)
                    atoms.append(Atom.make(LinearTerm.var(lo_var[(b, k)]) - LinearTerm.var(VA), Rel.LE))
                    atoms.append(Atom.make(LinearTerm.var(VB) - LinearTerm.var(hi_var[(b, k)]), Rel.LE))
                    chi = qe.eliminate_block(atoms, [VA, VB])
                    if chi is not None:
                        succ_options.append(conj_formula(chi))
            if not succ_options:
                # dead macro-state: force this window empty
                parts.append(
                    AtomF(Atom.make(LinearTerm.var(a_sj) - LinearTerm.var(b_sj) + LinearTerm.const(1), Rel.LE))
                )
                continue
            w_var = Variable("_wq", "energy")
            body = disj(
                substitute(option, W0, LinearTerm.var(w_var)) for option in succ_options
            )
            window = conj_formula(
                [
                    Atom.make(LinearTerm.var(a_sj) - LinearTerm.var(w_var), Rel.LE),
                    Atom.make(LinearTerm.var(w_var) - LinearTerm.var(b_sj), Rel.LE),
                ]
            )
            parts.append(mk_forall(w_var, Or((Not(window), body))))
    parts.append(
        disj(
            conj_formula(
                [
                    Atom.make(LinearTerm.var(lo_var[(s0, j)]) - LinearTerm.const(w0), Rel.LE),
                    Atom.make(LinearTerm.const(w0) - LinearTerm.var(hi_var[(s0, j)]), Rel.LE),
                ]
            )
            for j in range(count)
        )
    )
    formula = And(tuple(parts))
    eliminated = qe.eliminate(formula, max_disjuncts=max_disjuncts, close=False)
    g = nnf(eliminated, closed=False)
    disjuncts = dnf(g, prune=lambda ats: lp.feasible_strict(ats), max_disjuncts=max_disjuncts)
    return any(lp.feasible_strict(d) for d in disjuncts)


# ---------------------------------------------------------------------------
# upper-bound existence (only a lower energy bound given)
# ---------------------------------------------------------------------------


class Top:
    """Label for 'arbitrarily high energy reachable here'."""

    def __repr__(self):
        return "Top"

    def __eq__(self, other):
        return isinstance(other, Top)

    def __hash__(self):
        return hash("Top")


TOP = Top()
LabelValue = Union[Top, Fraction]


def _edge_max_exit(rel: EnergyRelation, entry: LabelValue) -> Optional[LabelValue]:
    """Largest exit level over runs with only the lower bound, entering at
    ``entry`` (None when the edge cannot be traversed)."""
    if isinstance(entry, Top):
        probe = lp.optimize(list(rel.atoms), LinearTerm.var(W0), "max")
        if probe.status is lp.LPStatus.INFEASIBLE:
            return None
        # with no upper energy bound, entry levels are never bounded above,
        # and raising the entry raises the exit alongside
        return TOP
    atoms = rel.substituted({W0: LinearTerm.const(entry)})
    res = lp.optimize(atoms, LinearTerm.var(W1), "max")
    if res.status is lp.LPStatus.INFEASIBLE:
        return None
    if res.status is lp.LPStatus.UNBOUNDED:
        return TOP
    return res.value


def _label_join(x: Optional[LabelValue], y: Optional[LabelValue]) -> Optional[LabelValue]:
    if x is None:
        return y
    if y is None:
        return x
    if isinstance(x, Top) or isinstance(y, Top):
        return TOP
    return max(x, y)


def upper_bound_exists(seta: SETA, w0, L) -> bool:
    """Is there any finite upper bound U making the [L;U]-constrained
    infinite-run problem solvable from (initial, w0)?

    Forward labelling with the maximal reachable level under [L;+inf):
    cycles can pump the label to Top when they can strictly gain; the
    answer compares labels against the least iterable entry level of
    each cycle (with the bound symbolic).
    """
    flat, _ = is_flat(seta)
    if not flat:
        raise SynthesisError("upper_bound_exists requires a flat model")
    if seta.has_uncertainty():
        raise SynthesisError("upper_bound_exists handles models without uncertainty")
    w0 = rat(w0)
    L = rat(L)
    if w0 < L:
        return False

    lower_rel = {e: build_binary_lower(p, L) for e, p in seta.path_of.items()}
    cycles = simple_cycles(seta)
    cycle_of: Dict[str, List[MacroEdge]] = {}
    for cyc in cycles:
        for node in cyc:
            cycle_of[node] = cycle_through(seta, node)

    label: Dict[str, Optional[LabelValue]] = {s: None for s in seta.macro_states}
    label[seta.initial] = w0

    def raised(node: str, value: LabelValue) -> LabelValue:
        edges = cycle_of.get(node)
        if edges is None or isinstance(value, Top):
            return value
        rel = compose_chain([lower_rel[e] for e in edges])
        atoms = rel.substituted({W0: LinearTerm.const(value)})
        res = lp.optimize(atoms, LinearTerm.var(W1), "max")
        if res.status is lp.LPStatus.UNBOUNDED:
            return TOP
        if res.status is lp.LPStatus.OPTIMAL and res.value > value:
            return TOP
        return value

    label[seta.initial] = raised(seta.initial, w0)

    # worklist propagation; labels only grow and Top absorbs, and any
    # label-raising lap is caught by raised(), so this converges fast
    changed = True
    guard = 0
    while changed:
        changed = False
        guard += 1
        if guard > 4 * (len(seta.macro_states) + 1) * (len(seta.path_of) + 1):
            break
        for (a, b) in sorted(seta.path_of):
            if label[a] is None or a == b:
                continue
            exit_value = _edge_max_exit(lower_rel[(a, b)], label[a])
            if exit_value is None:
                continue
            exit_value = raised(b, exit_value)
            joined = _label_join(label[b], exit_value)
            if joined != label[b]:
                label[b] = joined
                changed = True

    for cyc in cycles:
        for node in cyc:
            lab = label[node]
            if lab is None:
                continue
            a_min = cycle_min_iterable_level(seta, cycle_of[node], L)
            if a_min is None:
                continue
            if isinstance(lab, Top) or lab >= a_min:
                return True
    return False


def cycle_min_iterable_level(seta: SETA, cycle_edges: Sequence[MacroEdge], L) -> Optional[Fraction]:
    """Least entry level from which the cycle is iterable forever under
    [L;U] for some finite U (the symbolic-bound stable window LP)."""
    path = cycle_path(seta, cycle_edges)
    rel = build_quaternary(path, rat(L))
    psi = _stable_psi(rel, W)
    if psi is None:
        return None
    res = lp.optimize(psi, LinearTerm.var(SA), "min")
    if res.status is not lp.LPStatus.OPTIMAL:
        return None
    return res.value


# ---------------------------------------------------------------------------
# minimal upper-bound synthesis (depth-1 flat, certain or uncertain)
# ---------------------------------------------------------------------------


@dataclass
class BoundSynthesis:
    upper_bound: Optional[Fraction]
    stable: Interval = field(default_factory=Interval.empty_set)
    leaf: Optional[str] = None

    def found(self) -> bool:
        return self.upper_bound is not None


def minimal_upper_bound(seta: SETA, L, w0=None) -> BoundSynthesis:
    """Least U such that the [L;U]-constrained infinite-run problem is
    solvable (from the given initial level, when one is supplied), plus
    the greatest stable interval of the witness cycle at that bound.

    Works leaf by leaf on a depth-1 flat model: the stable-window
    constraints with U symbolic, joined with the backward chain of entry
    conditions, stay one convex conjunction, so the least U is one LP.
    """
    flat, depth1 = is_flat(seta)
    if not (flat and depth1):
        raise SynthesisError("minimal_upper_bound requires a depth-1 flat model")
    L = rat(L)
    w0r = None if w0 is None else rat(w0)
    if w0r is not None and w0r < L:
        return BoundSynthesis(None)

    best: Optional[Tuple[Fraction, str, List[Atom]]] = None
    for tree_path, leaf in _depth1_components(seta):
        loop_rel = build_quaternary(seta.path_of[(leaf, leaf)], L)
        psi = _stable_psi(loop_rel, W)
        if psi is None:
            continue
        system = list(psi)
        if w0r is not None:
            chain = _entry_chain_symbolic(seta, tree_path, leaf, loop_rel, L, w0r)
            if chain is None:
                continue
            system += chain
        res = lp.optimize(system, LinearTerm.var(VU), "min")
        if res.status is not lp.LPStatus.OPTIMAL:
            continue
        if best is None or res.value < best[0]:
            best = (res.value, leaf, psi)
    if best is None:
        return BoundSynthesis(None)
    u_star, leaf, psi = best
    pinned = [Atom.make(a.term.substitute(VU, LinearTerm.const(u_star)), a.rel) for a in psi]
    pinned = [a for a in pinned if a.is_trivial() is None]
    res = lp.optimize(pinned, LinearTerm.var(SB) - LinearTerm.var(SA), "max")
    if res.status is not lp.LPStatus.OPTIMAL:
        return BoundSynthesis(u_star, Interval.empty_set(), leaf)
    return BoundSynthesis(u_star, Interval(res.witness[SA], res.witness[SB]), leaf)


def _entry_chain_symbolic(
    seta: SETA,
    tree_path: Sequence[MacroEdge],
    leaf: str,
    loop_rel: EnergyRelation,
    L: Fraction,
    w0: Fraction,
) -> Optional[List[Atom]]:
    """Atoms over (SA, SB, U) expressing that one traversal from the
    concrete w0, chained down the tree path, can be forced into the
    stable window [SA; SB] of the leaf cycle."""
    # predicate chi(w): from level w the remaining chain reaches the window
    chi: List[Atom] = [
        Atom.make(LinearTerm.var(SA) - LinearTerm.var(W), Rel.LE),
        Atom.make(LinearTerm.var(W) - LinearTerm.var(SB), Rel.LE),
    ]
    relations = [build_quaternary(seta.path_of[e], L) for e in tree_path]
    for rel in [loop_rel, *reversed(relations)]:
        # loop_rel first: the first lap of the cycle itself enters the window
        atoms = list(rel.atoms)
        sub_a = [Atom.make(a.term.substitute(W, LinearTerm.var(VA)), a.rel) for a in chi]
        sub_b = [Atom.make(a.term.substitute(W, LinearTerm.var(VB)), a.rel) for a in chi]
        combined = atoms + [x for x in sub_a + sub_b if x.is_trivial() is None]
        if any(x.is_trivial() is False for x in sub_a + sub_b):
            return None
        chi = qe.eliminate_block(combined, [VA, VB])
        if chi is None:
            return None
    out = [Atom.make(a.term.substitute(W, LinearTerm.const(w0)), a.rel) for a in chi]
    if any(a.is_trivial() is False for a in out):
        return None
    return [a for a in out if a.is_trivial() is None]
