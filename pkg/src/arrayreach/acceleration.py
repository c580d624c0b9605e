"""Exact acceleration of ground counter loops.

A ground transition that advances a single counter by one inside a fixed
control location, optionally writing a constant to the array cell under the
counter, is summarized by a single transition covering any positive number
of iterations. The summary quantifies the post-loop counter value u
existentially (u plays the role of counter + n for some n > 0) and guards
the swept window [counter, u-1] universally, so it lands exactly in the
universally guarded format the abstraction machinery already handles.
Acceleration is exact: it adds runs of the summary, never new behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass

from .logic import (
    And,
    Atom,
    EnumConst,
    Formula,
    INDEX,
    IntConst,
    IntervalWrite,
    Offset,
    Read,
    Rel,
    Term,
    TrueF,
    Var,
    Write,
    conj,
    disj,
    eq,
    fresh_var,
    le,
    lt,
    mk_offset,
    ne,
    substitute,
)
from .system import SafetyProblem, Transition, TransitionKind, shape_of


@dataclass(frozen=True)
class LoopPattern:
    pc_atom: Atom
    counter: Var
    bound: Term
    cell_conditions: tuple[Atom, ...]
    cell_array: Var | None
    write: tuple[Var, Term] | None
    base: Transition


def _guard_atoms(guard: Formula) -> list[Atom] | None:
    if isinstance(guard, TrueF):
        return []
    if isinstance(guard, Atom):
        return [guard]
    if isinstance(guard, And) and all(isinstance(g, Atom) for g in guard.items):
        return list(guard.items)
    return None


def _is_const(t: Term) -> bool:
    return isinstance(t, (EnumConst, IntConst))


def match_loop_pattern(t: Transition) -> LoopPattern | None:
    """Recognize a one-counter self-loop; None when t is not acceleratable.

    The recognized class: guard  pc = L  and  counter != bound  and atoms over
    the cell under the counter; update advances the counter by one, keeps the
    control location, optionally writes one constant at the counter cell, and
    leaves everything else untouched.
    """
    if shape_of(t) != TransitionKind.GROUND:
        return None
    atoms = _guard_atoms(t.guard)
    if atoms is None:
        return None
    updates = t.update_map()

    counters = [
        term.base
        for term in updates.values()
        if isinstance(term, Offset)
        and term.offset == 1
        and term.base.sort == INDEX
        and updates.get(term.base.name) == term
    ]
    if len(counters) != 1:
        return None
    counter = counters[0]

    pc_atom: Atom | None = None
    exit_atom: Atom | None = None
    bound: Term | None = None
    cells: list[Atom] = []
    cell_array: Var | None = None
    for a in atoms:
        sides = (a.lhs, a.rhs)
        if a.rel == Rel.NE and counter in sides:
            other = a.rhs if a.lhs == counter else a.lhs
            if exit_atom is not None:
                return None
            exit_atom, bound = a, other
            continue
        var_sides = [s for s in sides if isinstance(s, Var) and s.name != counter.name]
        if a.rel == Rel.EQ and var_sides and any(_is_const(s) for s in sides):
            var = var_sides[0]
            const = a.rhs if a.lhs is var else a.lhs
            upd = updates.get(var.name)
            if upd == var or upd == const:
                if pc_atom is not None:
                    return None
                pc_atom = a
                continue
            return None
        read_sides = [s for s in sides if isinstance(s, Read)]
        if (
            len(read_sides) == 1
            and isinstance(read_sides[0].array, Var)
            and read_sides[0].index == counter
            and _is_const(a.lhs if a.lhs is not read_sides[0] else a.rhs)
        ):
            arr = read_sides[0].array
            if cell_array is not None and arr != cell_array:
                return None
            cell_array = arr  # type: ignore[assignment]
            cells.append(a)
            continue
        return None
    if pc_atom is None or exit_atom is None or bound is None:
        return None
    if isinstance(bound, Var) and updates.get(bound.name) != bound:
        return None

    write: tuple[Var, Term] | None = None
    pc_name = (pc_atom.lhs if isinstance(pc_atom.lhs, Var) else pc_atom.rhs).name
    for name, term in updates.items():
        if name in (counter.name, pc_name):
            continue
        if isinstance(term, Var) and term.name == name:
            continue
        if (
            isinstance(term, Write)
            and isinstance(term.array, Var)
            and term.array.name == name
            and term.index == counter
            and _is_const(term.value)
        ):
            if write is not None:
                return None
            write = (term.array, term.value)
            continue
        return None
    return LoopPattern(
        pc_atom=pc_atom,
        counter=counter,
        bound=bound,
        cell_conditions=tuple(cells),
        cell_array=cell_array,
        write=write,
        base=t,
    )


def accelerate(pat: LoopPattern) -> Transition:
    """The summary transition for any positive number of loop iterations."""
    t = pat.base
    c = pat.counter
    u = fresh_var(c.name + "_to", INDEX)
    k = fresh_var("k", INDEX)
    window_conds: list[Formula] = [ne(k, pat.bound)]
    for cell in pat.cell_conditions:
        window_conds.append(substitute(cell, {c.name: k}))
    univ_body = disj(
        [
            lt(k, c),
            lt(mk_offset(u, -1), k),
            conj(window_conds),
        ]
    )
    updates = []
    for name, term in t.updates:
        if name == c.name:
            updates.append((name, u))
        elif pat.write is not None and name == pat.write[0].name:
            updates.append(
                (name, IntervalWrite(pat.write[0], c, mk_offset(u, -1), pat.write[1]))
            )
        else:
            updates.append((name, term))
    return Transition(
        name=t.name + "+",
        ex_vars=(u,),
        guard=conj([pat.pc_atom, lt(c, u)]),
        univ_var=k,
        univ_body=univ_body,
        updates=tuple(updates),
        accelerated=True,
        base_name=t.name,
    )


def add_accelerations(problem: SafetyProblem) -> tuple[SafetyProblem, tuple[str, ...]]:
    """Add a summary alongside every acceleratable transition.

    Summaries come first so the engine explores accelerated preimages before
    the base transitions at equal depth.
    """
    summaries = []
    for t in problem.transitions:
        pat = match_loop_pattern(t)
        if pat is not None:
            summaries.append(accelerate(pat))
    return (
        problem.with_transitions(tuple(summaries) + problem.transitions),
        tuple(s.name for s in summaries),
    )


def fix_parameter(t_acc: Transition, n: int) -> Transition:
    """Pin the summary to exactly n iterations by fixing u = counter + n."""
    if not t_acc.accelerated or len(t_acc.ex_vars) != 1:
        raise ValueError("fix_parameter expects an accelerated transition")
    if n < 1:
        raise ValueError("iteration counts are positive")
    u = t_acc.ex_vars[0]
    counter = next(
        Var(name, INDEX) for name, term in t_acc.updates if term == u
    )
    extra = eq(u, mk_offset(counter, n))
    return Transition(
        name=f"{t_acc.name}[{n}]",
        ex_vars=t_acc.ex_vars,
        guard=conj([t_acc.guard, extra]),
        univ_var=t_acc.univ_var,
        univ_body=t_acc.univ_body,
        updates=t_acc.updates,
        accelerated=True,
        base_name=t_acc.base_name,
    )


@dataclass(frozen=True)
class ComposeResult:
    equal: bool
    witness: tuple | None = None
    detail: str | None = None


_relation_cache: dict[tuple, tuple] = {}


def _loop_relations(
    t: Transition,
    t_acc: Transition,
    problem: SafetyProblem,
    domain_size: int,
    int_lo: int,
    int_hi: int,
):
    """One pass over the instance: the base successor map and, for every
    positive iteration count, the summary relation (keyed by n = u - c)."""
    from .oracle import FiniteInstance, eval_formula, eval_term

    cache_key = (t, t_acc, problem, domain_size, int_lo, int_hi)
    hit = _relation_cache.get(cache_key)
    if hit is not None:
        return hit

    inst = FiniteInstance(problem, domain_size, int_lo, int_hi)
    u = t_acc.ex_vars[0]
    counter_name = next(name for name, term in t_acc.updates if term == u)
    succ: dict[tuple, list[tuple]] = {}
    summary: dict[int, set[tuple[tuple, tuple]]] = {}
    states: dict[tuple, dict] = {}
    for state in inst.states():
        k = inst.key(state)
        states[k] = state
        nexts = inst.step(state, t)
        if nexts:
            succ[k] = [inst.key(s) for s in nexts]
        for uval in range(domain_size):
            ext = dict(state)
            ext[u.name] = uval
            if not eval_formula(ext, t_acc.guard, domain_size):
                continue
            assert t_acc.univ_var is not None and t_acc.univ_body is not None
            ok = True
            for kk in range(domain_size):
                ext2 = dict(ext)
                ext2[t_acc.univ_var.name] = kk
                if not eval_formula(ext2, t_acc.univ_body, domain_size):
                    ok = False
                    break
            if not ok:
                continue
            target = _apply_updates(inst, ext, t_acc, problem)
            if target is None:
                continue
            n_iters = uval - state[counter_name]
            if n_iters >= 1:
                summary.setdefault(n_iters, set()).add((k, inst.key(target)))
    result = (succ, summary, states)
    _relation_cache[cache_key] = result
    return result


def _apply_updates(inst, ext: dict, t: Transition, problem: SafetyProblem) -> dict | None:
    """The successor state under t's updates, or None when a value leaves
    the instance domain (same exclusion rule as the oracle's step)."""
    from . import oracle
    from .logic import ArraySort, INT as _INT

    try:
        target: dict = {}
        for name, term in t.updates:
            val = oracle.eval_term(ext, term, inst.n)
            vsort = problem.var(name).sort
            if vsort == _INT and not inst.int_lo <= val <= inst.int_hi:
                return None
            if vsort == INDEX and not 0 <= val < inst.n:
                return None
            if isinstance(vsort, ArraySort) and vsort.elem == _INT:
                if any(not inst.int_lo <= c <= inst.int_hi for c in val):
                    return None
            target[name] = val
        return target
    except oracle._Undefined:
        return None


def compose_check(
    t: Transition,
    n: int,
    t_acc: Transition,
    problem: SafetyProblem,
    domain_size: int,
    int_lo: int = 0,
    int_hi: int = 4,
) -> ComposeResult:
    """Compare the n-fold composition of t against t_acc pinned to n
    iterations on a finite instance; Differ carries the first mismatching
    state pair."""
    succ, summary, states = _loop_relations(t, t_acc, problem, domain_size, int_lo, int_hi)
    composed: set[tuple[tuple, tuple]] = set()
    for k in states:
        frontier = {k}
        for _ in range(n):
            nxt: set[tuple] = set()
            for x in frontier:
                nxt.update(succ.get(x, ()))
            frontier = nxt
            if not frontier:
                break
        for x in frontier:
            composed.add((k, x))
    summarized = summary.get(n, set())
    if composed == summarized:
        return ComposeResult(True)
    diff = sorted(composed.symmetric_difference(summarized))[0]
    side = "composition only" if diff in composed else "summary only"
    witness = (states[diff[0]], states.get(diff[1]))
    return ComposeResult(False, witness=witness, detail=side)
