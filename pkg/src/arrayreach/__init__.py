"""Symbolic safety checking for array-based transition systems.

The package couples a backward-reachability engine (preimages, subsumption,
monotonic abstraction of universal guards, exact acceleration of counter
loops) with a self-contained satisfiability core and an explicit-state
finite oracle used for cross-validation and trace concretization.
"""

from .abstraction import (
    AbstractedTransition,
    InstantiationSet,
    abstract_formula,
    abstract_transition,
    default_instantiation_set,
    transform_problem,
)
from .acceleration import (
    ComposeResult,
    LoopPattern,
    accelerate,
    add_accelerations,
    compose_check,
    match_loop_pattern,
)
from .engine import (
    BackwardResult,
    Concretization,
    EngineConfig,
    Node,
    Trace,
    TraceStep,
    backward_reach,
    concretize_trace,
    extract_trace,
    fixpoint_check,
    preimage,
)
from .logic import (
    ArrayReachError,
    ArraySort,
    Atom,
    EnumConst,
    EnumSort,
    Exists,
    Forall,
    Formula,
    INDEX,
    INT,
    IndexConst,
    IntConst,
    Offset,
    Read,
    Rel,
    SortMismatch,
    Term,
    Var,
    Write,
    free_index_vars,
    instantiate_universals,
    reduce_read_over_write,
    substitute,
    to_nnf,
)
from .oracle import FiniteInstance, OracleResult, TooLarge, eval_formula, models_of
from .solver import Entailment, Model, SatResult, SolverSession, Verdict
from .system import (
    ParseError,
    SafetyProblem,
    Theory,
    Transition,
    TransitionKind,
    ValidationError,
    benchmark_text,
    classify_transition,
    load_benchmark,
    parse_system,
    print_system,
)

__version__ = "0.1.0"
