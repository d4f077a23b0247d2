"""Controller synthesis for energy timed automata.

Exact linear real arithmetic, quantifier elimination and rational LP
underneath; on top, energy relations of timed paths, interval fixpoints,
infinite-run decisions (with and without rate/update uncertainty),
minimal safe upper-bound synthesis, and pump-scheduling strategies for
the hydraulic accumulator case study.
"""

from .intervals import Interval, fmt_rat, rat
from .linarith import (
    Atom,
    Formula,
    LinearTerm,
    Rel,
    Variable,
    evaluate,
    interval_of,
    normalize,
    parse,
)
from .lp import LPResult, LPStatus, feasible, optimize
from .qe import eliminate, eliminate_exists_conj, remove_redundant
from .automata import (
    ClockConstraint,
    EnergyTimedPath,
    EtpState,
    EtpTransition,
    SETA,
    check_restriction_R,
    is_flat,
    validate,
)
from .relations import (
    EnergyRelation,
    apply,
    build_binary,
    build_quaternary,
    build_ternary,
    compose,
    greatest_fixpoint,
)
from .synthesis import (
    BoundSynthesis,
    RunDecision,
    Task,
    decide_infinite_run,
    decide_infinite_run_uncertain,
    minimal_upper_bound,
    upper_bound_exists,
)
from .casestudy import HydacConfig, Trajectory, build_hydac, report, simulate, synthesize_bounds
from .strategies import (
    ConcreteStrategy,
    PermissiveStrategy,
    optimal_strategy,
    permissive_strategy,
    strategy_family,
)

__version__ = "0.1.0"
