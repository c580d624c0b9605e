"""Brute-force ground truth on finite instances.

A safety problem is instantiated at a fixed index-domain size N with bounded
integers; states are enumerated exhaustively, formulas are evaluated by
Tarskian recursion, reachability is a plain BFS, and traces are replayed
step by step. Everything here is deliberately naive: it exists to
cross-check the symbolic engine, not to scale.

Semantics of out-of-domain indexes: a state is a model of a formula only if
every index-sorted term occurring in it denotes a value in [0, N). This is
polarity-independent, so negation normal form and read-over-write reduction
preserve model sets. Integer updates falling outside the configured bounds
exclude the successor state rather than clamping.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator

from .logic import (
    And,
    ArrayReachError,
    ArraySort,
    Atom,
    CrashFill,
    EnumConst,
    EnumSort,
    Exists,
    FalseF,
    Forall,
    Formula,
    IndexConst,
    IntConst,
    IntervalWrite,
    INDEX,
    INT,
    Not,
    Offset,
    Or,
    Read,
    Rel,
    Term,
    TrueF,
    Var,
    Write,
    free_vars,
    sort_of,
)
from .system import SafetyProblem, Transition

State = dict[str, object]


class TooLarge(ArrayReachError):
    """The finite instance outgrew its state budget."""


class _Undefined(Exception):
    """An index-sorted term fell outside the instance domain."""


@dataclass(frozen=True)
class OracleResult:
    safe: bool
    n: int
    run: tuple[tuple[str | None, State], ...] | None
    explored: int


def _domain(sort, n: int, lo: int, hi: int) -> list:
    if sort == INDEX:
        return list(range(n))
    if sort == INT:
        return list(range(lo, hi + 1))
    if isinstance(sort, EnumSort):
        return list(sort.constants)
    raise ArrayReachError(f"no finite domain for {sort}")


def enumerate_states(
    variables: Iterable[Var], n: int, lo: int, hi: int, budget: int = 10_000_000
) -> Iterator[State]:
    """All assignments to the given variables (arrays become length-n tuples)."""
    vs = list(variables)
    domains: list[list] = []
    size = 1
    for v in vs:
        if isinstance(v.sort, ArraySort):
            cells = _domain(v.sort.elem, n, lo, hi)
            size *= len(cells) ** n
            domains.append([tuple(t) for t in itertools.product(cells, repeat=n)])
        else:
            d = _domain(v.sort, n, lo, hi)
            size *= len(d)
            domains.append(d)
        if size > budget:
            raise TooLarge(f"state space estimate {size} exceeds budget {budget}")
    names = [v.name for v in vs]
    for combo in itertools.product(*domains):
        yield dict(zip(names, combo))


def eval_term(state: State, t: Term, n: int):
    match t:
        case Var(name, _):
            return state[name]
        case EnumConst(_, value):
            return value
        case IntConst(v):
            return v
        case IndexConst(v):
            if v >= n:
                raise _Undefined
            return v
        case Offset(base, k):
            v = eval_term(state, base, n) + k
            if base.sort == INDEX and not 0 <= v < n:
                raise _Undefined
            return v
        case Read(array, index):
            table = eval_term(state, array, n)
            i = eval_term(state, index, n)
            return table[i]
        case Write(array, index, value):
            table = list(eval_term(state, array, n))
            i = eval_term(state, index, n)
            table[i] = eval_term(state, value, n)
            return tuple(table)
        case IntervalWrite(array, lo_t, hi_t, value):
            table = list(eval_term(state, array, n))
            lo_v = eval_term(state, lo_t, n)
            hi_v = eval_term(state, hi_t, n)
            v = eval_term(state, value, n)
            for i in range(lo_v, hi_v + 1):
                table[i] = v
            return tuple(table)
        case CrashFill(array, var, cond, value):
            table = list(eval_term(state, array, n))
            v = eval_term(state, value, n)
            for i in range(n):
                ext = dict(state)
                ext[var.name] = i
                if _eval(ext, cond, n):
                    table[i] = v
            return tuple(table)
    raise ArrayReachError(f"cannot evaluate {t!r}")


def _eval(state: State, f: Formula, n: int) -> bool:
    match f:
        case TrueF():
            return True
        case FalseF():
            return False
        case Atom(rel, lhs, rhs):
            a = eval_term(state, lhs, n)
            b = eval_term(state, rhs, n)
            match rel:
                case Rel.EQ:
                    return a == b
                case Rel.NE:
                    return a != b
                case Rel.LT:
                    return a < b
                case Rel.LE:
                    return a <= b
        case And(items):
            results = [_eval(state, g, n) for g in items]
            return all(results)
        case Or(items):
            results = [_eval(state, g, n) for g in items]
            return any(results)
        case Not(body):
            return not _eval(state, body, n)
        case Exists(vs, body):
            return _eval_quant(state, vs, body, n, any_of=True)
        case Forall(vs, body):
            return _eval_quant(state, vs, body, n, any_of=False)
    raise ArrayReachError(f"cannot evaluate {f!r}")


def _eval_quant(state: State, vs, body: Formula, n: int, any_of: bool) -> bool:
    # Instances whose terms fall outside the domain are excluded from the
    # range of the quantifier (symmetrically for both quantifiers, so
    # negation normal form preserves model sets).
    results = []
    for combo in itertools.product(range(n), repeat=len(vs)):
        ext = dict(state)
        for v, val in zip(vs, combo):
            ext[v.name] = val
        try:
            results.append(_eval(ext, body, n))
        except _Undefined:
            continue
    return any(results) if any_of else all(results)


def eval_formula(state: State, f: Formula, n: int) -> bool:
    """True iff state models f; undefined index terms make it a non-model."""
    try:
        return _eval(state, f, n)
    except _Undefined:
        return False


def _eval_guard(state: State, f: Formula, n: int) -> bool:
    """Guard check: conjunctions short-circuit on a false conjunct.

    Outcome-equivalent to eval_formula wherever only "fires or not"
    matters: a false conjunct and an undefined one both block the guard.
    """
    try:
        if isinstance(f, And):
            return all(_eval_guard(state, g, n) for g in f.items)
        return _eval(state, f, n)
    except _Undefined:
        return False


def state_key(state: State, order: Iterable[str]) -> tuple:
    return tuple(state[name] for name in order)


def models_of(
    f: Formula,
    n: int,
    lo: int = -3,
    hi: int = 3,
    variables: Iterable[Var] | None = None,
    budget: int = 10_000_000,
) -> list[State]:
    """Exact model set of f by enumeration over the given variables."""
    if variables is None:
        variables = sorted(free_vars(f), key=lambda v: v.name)
    vs = list(variables)
    return [s for s in enumerate_states(vs, n, lo, hi, budget) if eval_formula(s, f, n)]


class FiniteInstance:
    """A safety problem at index-domain size n with integers in [int_lo, int_hi]."""

    def __init__(
        self,
        problem: SafetyProblem,
        n: int,
        int_lo: int,
        int_hi: int,
        state_budget: int = 10_000_000,
    ) -> None:
        if n < 1:
            raise ArrayReachError("index domain size must be at least 1")
        if int_lo > int_hi:
            raise ArrayReachError("degenerate integer bounds")
        self.problem = problem
        self.n = n
        self.int_lo = int_lo
        self.int_hi = int_hi
        self.state_budget = state_budget
        self.var_order = tuple(v.name for v in problem.state_vars)
        self._estimate()

    def _estimate(self) -> None:
        size = 1
        for v in self.problem.state_vars:
            if isinstance(v.sort, ArraySort):
                size *= len(_domain(v.sort.elem, self.n, self.int_lo, self.int_hi)) ** self.n
            else:
                size *= len(_domain(v.sort, self.n, self.int_lo, self.int_hi))
            if size > self.state_budget:
                raise TooLarge(f"state space estimate exceeds budget {self.state_budget}")

    def key(self, state: State) -> tuple:
        return state_key(state, self.var_order)

    def eval(self, state: State, f: Formula) -> bool:
        return eval_formula(state, f, self.n)

    # -- state enumeration --

    def states(self) -> Iterator[State]:
        yield from enumerate_states(
            self.problem.state_vars, self.n, self.int_lo, self.int_hi, self.state_budget
        )

    def _init_domains(self) -> list[tuple[Var, list]]:
        """Per-variable domains narrowed by obvious conjunctive init constraints."""
        init = self.problem.init
        zs: tuple[Var, ...] = ()
        body = init
        if isinstance(init, Forall):
            zs, body = init.vars, init.body
        fixed_scalar: dict[str, object] = {}
        fixed_array: dict[str, object] = {}
        items = body.items if isinstance(body, And) else (body,)
        for g in items:
            if not isinstance(g, Atom) or g.rel != Rel.EQ:
                continue
            lhs, rhs = g.lhs, g.rhs
            if isinstance(rhs, (Var, Read)):
                lhs, rhs = rhs, lhs
            if not isinstance(rhs, (EnumConst, IntConst, IndexConst)):
                continue
            try:
                val = eval_term({}, rhs, self.n)
            except (_Undefined, KeyError):
                continue
            if isinstance(lhs, Var) and not isinstance(lhs.sort, ArraySort):
                fixed_scalar[lhs.name] = val
            elif (
                isinstance(lhs, Read)
                and isinstance(lhs.array, Var)
                and isinstance(lhs.index, Var)
                and lhs.index in zs
            ):
                fixed_array[lhs.array.name] = val
        out: list[tuple[Var, list]] = []
        for v in self.problem.state_vars:
            if isinstance(v.sort, ArraySort):
                if v.name in fixed_array:
                    out.append((v, [tuple([fixed_array[v.name]] * self.n)]))
                else:
                    cells = _domain(v.sort.elem, self.n, self.int_lo, self.int_hi)
                    out.append(
                        (v, [tuple(t) for t in itertools.product(cells, repeat=self.n)])
                    )
            elif v.name in fixed_scalar:
                out.append((v, [fixed_scalar[v.name]]))
            else:
                out.append((v, _domain(v.sort, self.n, self.int_lo, self.int_hi)))
        return out

    def init_states(self) -> list[State]:
        domains = self._init_domains()
        size = 1
        for _, d in domains:
            size *= len(d)
            if size > self.state_budget:
                raise TooLarge("init-state enumeration exceeds budget")
        names = [v.name for v, _ in domains]
        out = []
        for combo in itertools.product(*(d for _, d in domains)):
            s = dict(zip(names, combo))
            if self.eval(s, self.problem.init):
                out.append(s)
        return out

    # -- transition semantics --

    def step(self, state: State, t: Transition) -> list[State]:
        """Deterministically ordered successor states of state under t."""
        out: list[State] = []
        seen: set[tuple] = set()
        for combo in itertools.product(range(self.n), repeat=len(t.ex_vars)):
            ext = dict(state)
            for v, val in zip(t.ex_vars, combo):
                ext[v.name] = val
            try:
                if not _eval(ext, t.guard, self.n):
                    continue
                if t.univ_var is not None:
                    ok = True
                    for k in range(self.n):
                        ext2 = dict(ext)
                        ext2[t.univ_var.name] = k
                        if not _eval(ext2, t.univ_body, self.n):
                            ok = False
                            break
                    if not ok:
                        continue
                succ: State = {}
                for name, term in t.updates:
                    val = eval_term(ext, term, self.n)
                    vsort = self.problem.var(name).sort
                    if vsort == INT and not self.int_lo <= val <= self.int_hi:
                        raise _Undefined
                    if vsort == INDEX and not 0 <= val < self.n:
                        raise _Undefined
                    if isinstance(vsort, ArraySort) and vsort.elem == INT:
                        if any(not self.int_lo <= c <= self.int_hi for c in val):
                            raise _Undefined
                    succ[name] = val
            except _Undefined:
                continue
            k = self.key(succ)
            if k not in seen:
                seen.add(k)
                out.append(succ)
        return out

    def successors(self, state: State) -> list[tuple[str, State]]:
        out: list[tuple[str, State]] = []
        for t in self.problem.transitions:
            for succ in self.step(state, t):
                out.append((t.name, succ))
        return out

    # -- reachability --

    def forward_reach(self) -> OracleResult:
        inits = self.init_states()
        visited: dict[tuple, tuple[tuple | None, str | None, State]] = {}
        frontier: list[tuple] = []
        unsafe_key: tuple | None = None
        for s in inits:
            k = self.key(s)
            if k not in visited:
                visited[k] = (None, None, s)
                frontier.append(k)
                if self.eval(s, self.problem.unsafe):
                    unsafe_key = k
                    break
        while frontier and unsafe_key is None:
            nxt: list[tuple] = []
            for k in frontier:
                state = visited[k][2]
                for tname, succ in self.successors(state):
                    sk = self.key(succ)
                    if sk in visited:
                        continue
                    visited[sk] = (k, tname, succ)
                    if len(visited) > self.state_budget:
                        raise TooLarge("forward reachability exceeded the state budget")
                    if self.eval(succ, self.problem.unsafe):
                        unsafe_key = sk
                        break
                    nxt.append(sk)
                if unsafe_key is not None:
                    break
            frontier = nxt
        if unsafe_key is None:
            return OracleResult(True, self.n, None, len(visited))
        run: list[tuple[str | None, State]] = []
        k: tuple | None = unsafe_key
        while k is not None:
            parent, tname, state = visited[k]
            run.append((tname, state))
            k = parent
        run.reverse()
        return OracleResult(False, self.n, tuple(run), len(visited))

    # -- trace replay --

    def _apply_named(self, states: dict[tuple, State], name: str) -> dict[tuple, State]:
        t = self.problem.transition(name)
        out: dict[tuple, State] = {}
        for s in states.values():
            for succ in self.step(s, t):
                out.setdefault(self.key(succ), succ)
        return out

    def replay_trace(self, steps, *, from_states: list[State] | None = None) -> bool:
        """True iff some concrete run follows the step sequence into an unsafe state.

        Each step is (base transition name, accelerated?). Accelerated steps
        expand to one or more applications of the base transition.
        """
        inits = from_states if from_states is not None else self.init_states()
        current: dict[tuple, State] = {self.key(s): s for s in inits}
        for name, accelerated in steps:
            if not current:
                return False
            if accelerated:
                reached = self._apply_named(current, name)
                frontier = dict(reached)
                while frontier:
                    step_out = self._apply_named(frontier, name)
                    frontier = {k: v for k, v in step_out.items() if k not in reached}
                    reached.update(frontier)
                current = reached
            else:
                current = self._apply_named(current, name)
        return any(self.eval(s, self.problem.unsafe) for s in current.values())


def instantiate(
    problem: SafetyProblem,
    n: int,
    int_lo: int = -3,
    int_hi: int = 3,
    state_budget: int = 10_000_000,
) -> FiniteInstance:
    return FiniteInstance(problem, n, int_lo, int_hi, state_budget)
