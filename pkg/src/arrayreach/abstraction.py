"""Monotonic abstraction of universally guarded formulas and transitions.

Two interchangeable faces of the same over-approximation:

  * at run time, a universally guarded preimage (an existential block whose
    matrix carries a universal guard) is weakened by instantiating the
    universal over a finite term set X;

  * as a preprocessing step, a universally guarded transition is rewritten
    into a purely functional one: the guard is dropped, and the update
    marks every index violating it as crashed. Crashed indexes are then
    excluded from every other quantifier of the system (relativization), so
    the transformed system simulates the original one with more runs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .logic import (
    And,
    ArraySort,
    Atom,
    CrashFill,
    EnumConst,
    EnumSort,
    Exists,
    Forall,
    Formula,
    INDEX,
    ArrayReachError,
    IntervalWrite,
    Not,
    Offset,
    Or,
    Read,
    Rel,
    Sort,
    Term,
    Var,
    Write,
    conj,
    disj,
    exists,
    free_index_vars,
    fresh_var,
    instantiate_universals,
    ne,
    neg,
    simplify,
    sort_of,
    strip_exists,
    terms_of,
    to_nnf,
)
from .system import SafetyProblem, Theory, Transition, TransitionKind, shape_of

CRASHED = "crashed"


class NotUniversallyGuarded(ArrayReachError):
    """The crash transform applies only to universally guarded transitions."""


@dataclass(frozen=True)
class InstantiationSet:
    terms: tuple[Term, ...]
    origin: str

    def __post_init__(self) -> None:
        if not self.terms:
            raise ArrayReachError("instantiation sets are non-empty")


def default_instantiation_set(f: Formula, diffarith: bool = False) -> InstantiationSet:
    """Existentially quantified index variables; with difference arithmetic
    also the free index variables of the matrix (loop window bounds live
    there) and the offset terms over any of them."""
    prefix, matrix = strip_exists(f)
    xs: list[Term] = [v for v in prefix if v.sort == INDEX]
    if diffarith:
        for v in sorted(free_index_vars(matrix), key=lambda v: v.name):
            if v not in xs:
                xs.append(v)
        base_names = {v.name for v in xs if isinstance(v, Var)}
        seen = {str(t) for t in xs}
        for t in terms_of(matrix):
            if isinstance(t, Offset) and sort_of(t) == INDEX and t.base.name in base_names:
                k = str(t)
                if k not in seen:
                    seen.add(k)
                    xs.append(t)
    if not xs:
        xs = [fresh_var("x", INDEX)]
    return InstantiationSet(tuple(xs), "default")


def all_vars_instantiation_set(f: Formula) -> InstantiationSet:
    """Prefix variables, all free index variables, and all offset terms of f."""
    prefix, matrix = strip_exists(f)
    xs: list[Term] = [v for v in prefix if v.sort == INDEX]
    seen = {str(t) for t in xs}
    for v in sorted(free_index_vars(matrix), key=lambda v: v.name):
        if str(v) not in seen:
            seen.add(str(v))
            xs.append(v)
    bound = {v.name for v in prefix} | {v.name for v in free_index_vars(matrix)}
    for t in terms_of(matrix):
        if isinstance(t, Offset) and sort_of(t) == INDEX and t.base.name in bound:
            if str(t) not in seen:
                seen.add(str(t))
                xs.append(t)
    if not xs:
        xs = [fresh_var("x", INDEX)]
    return InstantiationSet(tuple(xs), "heuristic:all-vars")


def abstract_formula(f: Formula, x: InstantiationSet) -> Formula:
    """Over-approximate an existential formula with universal guards by
    instantiating each universal over x; the result is purely existential."""
    prefix, matrix = strip_exists(f)
    inst = instantiate_universals(to_nnf(matrix), x.terms)
    return simplify(exists(prefix, inst))


# ---------------------------------------------------------------------------
# Sort extension and relativization
# ---------------------------------------------------------------------------


def _retag_sort(s: Sort, old: EnumSort, new: EnumSort) -> Sort:
    if s == old:
        return new
    if isinstance(s, ArraySort):
        return ArraySort(_retag_sort(s.elem, old, new))
    return s


def _retag_term(t: Term, old: EnumSort, new: EnumSort) -> Term:
    match t:
        case Var(name, sort):
            return Var(name, _retag_sort(sort, old, new))
        case EnumConst(enum, value):
            return EnumConst(new, value) if enum == old else t
        case Offset(base, k):
            return Offset(_retag_term(base, old, new), k)  # type: ignore[arg-type]
        case Read(array, index):
            return Read(_retag_term(array, old, new), _retag_term(index, old, new))
        case Write(array, index, value):
            return Write(
                _retag_term(array, old, new),
                _retag_term(index, old, new),
                _retag_term(value, old, new),
            )
        case IntervalWrite(array, lo, hi, value):
            return IntervalWrite(
                _retag_term(array, old, new),
                _retag_term(lo, old, new),
                _retag_term(hi, old, new),
                _retag_term(value, old, new),
            )
        case CrashFill(array, var, cond, value):
            return CrashFill(
                _retag_term(array, old, new),
                var,
                _retag_formula(cond, old, new),
                _retag_term(value, old, new),
            )
        case _:
            return t


def _retag_formula(f: Formula, old: EnumSort, new: EnumSort) -> Formula:
    match f:
        case Atom(rel, lhs, rhs):
            return Atom(rel, _retag_term(lhs, old, new), _retag_term(rhs, old, new))
        case And(items):
            return And(tuple(_retag_formula(g, old, new) for g in items))
        case Or(items):
            return Or(tuple(_retag_formula(g, old, new) for g in items))
        case Not(body):
            return Not(_retag_formula(body, old, new))
        case Exists(vs, body):
            return Exists(vs, _retag_formula(body, old, new))
        case Forall(vs, body):
            return Forall(vs, _retag_formula(body, old, new))
        case _:
            return f


def _retag_transition(t: Transition, old: EnumSort, new: EnumSort) -> Transition:
    return replace(
        t,
        guard=_retag_formula(t.guard, old, new),
        univ_body=_retag_formula(t.univ_body, old, new) if t.univ_body is not None else None,
        updates=tuple((n, _retag_term(term, old, new)) for n, term in t.updates),
    )


@dataclass(frozen=True)
class AbstractedTransition:
    base: str
    result: Transition
    added_crash_sort: bool


def _location_array(t: Transition, problem: SafetyProblem) -> Var:
    """The unique array read at the universal variable of t's guard."""
    assert t.univ_body is not None and t.univ_var is not None
    arrays = []
    for term in terms_of(t.univ_body):
        if isinstance(term, Read) and term.index == t.univ_var:
            if isinstance(term.array, Var) and term.array not in arrays:
                arrays.append(term.array)
    if len(arrays) != 1:
        raise NotUniversallyGuarded(
            f"transition {t.name}: cannot pick a crash location array among {arrays}"
        )
    return arrays[0]


def _noncrashed(a_loc: Var, idx: Term, crashed: EnumConst) -> Formula:
    return ne(Read(a_loc, idx), crashed)


def _relativize(f: Formula, a_loc: Var, crashed: EnumConst) -> Formula:
    """Make every quantifier in f range over non-crashed indexes only."""
    match f:
        case Forall(vs, body):
            body = _relativize(body, a_loc, crashed)
            excluded = [Atom(Rel.EQ, Read(a_loc, v), crashed) for v in vs]
            return Forall(vs, disj(excluded + [body]))
        case Exists(vs, body):
            body = _relativize(body, a_loc, crashed)
            alive = [_noncrashed(a_loc, v, crashed) for v in vs]
            return Exists(vs, conj(alive + [body]))
        case And(items):
            return And(tuple(_relativize(g, a_loc, crashed) for g in items))
        case Or(items):
            return Or(tuple(_relativize(g, a_loc, crashed) for g in items))
        case Not(body):
            return Not(_relativize(body, a_loc, crashed))
        case _:
            return f


def abstract_transition(
    t: Transition, problem: SafetyProblem
) -> tuple[AbstractedTransition, SafetyProblem]:
    """Replace t's universal guard by a crash case in its update, and
    relativize the rest of the problem to non-crashed indexes."""
    if shape_of(t) != TransitionKind.UNIVERSALLY_GUARDED or t.accelerated:
        raise NotUniversallyGuarded(f"transition {t.name} is not universally guarded")
    if problem.theory != Theory.SIMPLE:
        raise ArrayReachError("the crash transform is defined for the simple theory")

    a_loc = _location_array(t, problem)
    elem = a_loc.sort.elem  # type: ignore[union-attr]
    if not isinstance(elem, EnumSort):
        raise NotUniversallyGuarded(
            f"transition {t.name}: the location array must hold enum values"
        )

    added = CRASHED not in elem.constants
    if added:
        new_elem = EnumSort(elem.name, elem.constants + (CRASHED,))
        enum_sorts = tuple(new_elem if s == elem else s for s in problem.enum_sorts)
        state_vars = tuple(
            Var(v.name, _retag_sort(v.sort, elem, new_elem)) for v in problem.state_vars
        )
        init = _retag_formula(problem.init, elem, new_elem)
        unsafe = _retag_formula(problem.unsafe, elem, new_elem)
        transitions = tuple(_retag_transition(tr, elem, new_elem) for tr in problem.transitions)
    else:
        new_elem = elem
        enum_sorts = problem.enum_sorts
        state_vars = problem.state_vars
        init = problem.init
        unsafe = problem.unsafe
        transitions = problem.transitions

    a_loc2 = Var(a_loc.name, ArraySort(new_elem))
    crashed = EnumConst(new_elem, CRASHED)
    target = next(tr for tr in transitions if tr.name == t.name)

    def alive_guard(tr: Transition) -> Formula:
        extra = [_noncrashed(a_loc2, v, crashed) for v in tr.ex_vars]
        return conj([tr.guard] + extra) if extra else tr.guard

    assert target.univ_var is not None and target.univ_body is not None
    crash_cond = to_nnf(neg(target.univ_body))
    updates = []
    for name, term in target.updates:
        if name == a_loc2.name:
            term = CrashFill(term, target.univ_var, crash_cond, crashed)
        updates.append((name, term))
    result = Transition(
        name=target.name,
        ex_vars=target.ex_vars,
        guard=alive_guard(target),
        univ_var=None,
        univ_body=None,
        updates=tuple(updates),
        abstracted=True,
        base_name=target.name,
    )

    new_transitions = []
    for tr in transitions:
        if tr.name == target.name:
            new_transitions.append(result)
            continue
        univ_body = tr.univ_body
        if univ_body is not None and tr.univ_var is not None:
            univ_body = disj(
                [Atom(Rel.EQ, Read(a_loc2, tr.univ_var), crashed), univ_body]
            )
        new_transitions.append(
            replace(tr, guard=alive_guard(tr), univ_body=univ_body)
        )

    new_problem = SafetyProblem(
        name=problem.name,
        theory=problem.theory,
        enum_sorts=enum_sorts,
        state_vars=state_vars,
        init=_relativize(init, a_loc2, crashed),
        transitions=tuple(new_transitions),
        unsafe=_relativize(unsafe, a_loc2, crashed),
    )
    return AbstractedTransition(t.name, result, added), new_problem


def transform_problem(problem: SafetyProblem) -> SafetyProblem:
    """Crash-transform every universally guarded transition of the problem."""
    current = problem
    while True:
        target = None
        for tr in current.transitions:
            if tr.univ_var is not None and not tr.accelerated:
                target = tr
                break
        if target is None:
            return current
        _, current = abstract_transition(target, current)
