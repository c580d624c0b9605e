"""Sorted terms and formulae over index, enumerated, and integer sorts.

Everything downstream (solver, engine, oracle) works on the immutable
syntax defined here: flat arrays indexed by a linearly ordered index sort,
difference-arithmetic offsets, and prenex-friendly first-order formulae.
All operations are pure; construction validates sorting, so ill-sorted
syntax cannot be built.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Iterator, Mapping


class ArrayReachError(Exception):
    """Base class for all errors raised by this package."""


class SortMismatch(ArrayReachError):
    """A term or formula violates the sorting discipline."""


class EmptyInstantiationSet(ArrayReachError):
    """Universal instantiation was given an empty term set."""


class DnfBudgetExceeded(ArrayReachError):
    """Disjunctive normal form expansion outgrew its literal budget."""


class IndexUnderflow(SortMismatch):
    """An index constant dropped below zero (the term denotes no index)."""


# ---------------------------------------------------------------------------
# Sorts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sort:
    pass


@dataclass(frozen=True)
class IndexSort(Sort):
    def __str__(self) -> str:
        return "index"


@dataclass(frozen=True)
class IntSort(Sort):
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class EnumSort(Sort):
    name: str
    constants: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.constants:
            raise SortMismatch(f"enum sort {self.name} has no constants")
        if len(set(self.constants)) != len(self.constants):
            raise SortMismatch(f"enum sort {self.name} has duplicate constants")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ArraySort(Sort):
    elem: Sort

    def __post_init__(self) -> None:
        if not isinstance(self.elem, (EnumSort, IntSort)):
            raise SortMismatch("array elements must be enum- or int-sorted")

    def __str__(self) -> str:
        return f"(array index {self.elem})"


INDEX = IndexSort()
INT = IntSort()


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    def __str__(self) -> str:
        return format_term(self)


@dataclass(frozen=True)
class Var(Term):
    name: str
    sort: Sort


@dataclass(frozen=True)
class EnumConst(Term):
    enum: EnumSort
    value: str

    def __post_init__(self) -> None:
        if self.value not in self.enum.constants:
            raise SortMismatch(f"{self.value} is not a constant of {self.enum.name}")


@dataclass(frozen=True)
class IntConst(Term):
    value: int


@dataclass(frozen=True)
class IndexConst(Term):
    value: int

    def __post_init__(self) -> None:
        if self.value < 0:
            raise SortMismatch("index constants are non-negative")


@dataclass(frozen=True)
class Offset(Term):
    """base + offset, over the index or integer sort (difference arithmetic)."""

    base: Var
    offset: int

    def __post_init__(self) -> None:
        if not isinstance(self.base, Var) or self.base.sort not in (INDEX, INT):
            raise SortMismatch("offset base must be an index- or int-sorted variable")


@dataclass(frozen=True)
class Read(Term):
    array: Term
    index: Term

    def __post_init__(self) -> None:
        if not isinstance(sort_of(self.array), ArraySort):
            raise SortMismatch("read expects an array")
        if sort_of(self.index) != INDEX:
            raise SortMismatch("read index must be index-sorted")


@dataclass(frozen=True)
class Write(Term):
    array: Term
    index: Term
    value: Term

    def __post_init__(self) -> None:
        asort = sort_of(self.array)
        if not isinstance(asort, ArraySort):
            raise SortMismatch("write expects an array")
        if sort_of(self.index) != INDEX:
            raise SortMismatch("write index must be index-sorted")
        if sort_of(self.value) != asort.elem:
            raise SortMismatch("write value does not match the element sort")


@dataclass(frozen=True)
class IntervalWrite(Term):
    """Copy of the array with every cell in [lo, hi] set to value."""

    array: Term
    lo: Term
    hi: Term
    value: Term

    def __post_init__(self) -> None:
        asort = sort_of(self.array)
        if not isinstance(asort, ArraySort):
            raise SortMismatch("interval write expects an array")
        if sort_of(self.lo) != INDEX or sort_of(self.hi) != INDEX:
            raise SortMismatch("interval bounds must be index-sorted")
        if sort_of(self.value) != asort.elem:
            raise SortMismatch("interval write value does not match the element sort")


@dataclass(frozen=True)
class CrashFill(Term):
    """Copy of the array with every cell whose index satisfies cond set to value.

    cond is quantifier-free and may mention var, which ranges over indexes.
    """

    array: Term
    var: Var
    cond: "Formula"
    value: Term

    def __post_init__(self) -> None:
        asort = sort_of(self.array)
        if not isinstance(asort, ArraySort):
            raise SortMismatch("crash fill expects an array")
        if self.var.sort != INDEX:
            raise SortMismatch("crash fill variable must be index-sorted")
        if sort_of(self.value) != asort.elem:
            raise SortMismatch("crash fill value does not match the element sort")


def sort_of(t: Term) -> Sort:
    match t:
        case Var(_, sort):
            return sort
        case EnumConst(enum, _):
            return enum
        case IntConst(_):
            return INT
        case IndexConst(_):
            return INDEX
        case Offset(base, _):
            return base.sort
        case Read(array, _):
            return sort_of(array).elem  # type: ignore[union-attr]
        case Write(array, _, _) | IntervalWrite(array, _, _, _) | CrashFill(array, _, _, _):
            return sort_of(array)
    raise SortMismatch(f"unknown term {t!r}")


def mk_offset(base: Term, k: int) -> Term:
    """base + k, folding constants and nested offsets."""
    if k == 0:
        return base
    match base:
        case IndexConst(v):
            if v + k < 0:
                raise IndexUnderflow("index constant underflow")
            return IndexConst(v + k)
        case IntConst(v):
            return IntConst(v + k)
        case Offset(b, c):
            return mk_offset(b, c + k)
        case Var(_, sort) if sort in (INDEX, INT):
            return Offset(base, k)
    raise SortMismatch("offset base must be an index- or int-sorted variable or constant")


# ---------------------------------------------------------------------------
# Formulae
# ---------------------------------------------------------------------------


class Rel(Enum):
    EQ = "="
    NE = "distinct"
    LT = "<"
    LE = "<="


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class Atom(Formula):
    rel: Rel
    lhs: Term
    rhs: Term

    def __post_init__(self) -> None:
        ls, rs = sort_of(self.lhs), sort_of(self.rhs)
        if ls != rs:
            raise SortMismatch(f"comparison between {ls} and {rs}")
        if isinstance(ls, ArraySort):
            raise SortMismatch("arrays cannot be compared directly")
        if self.rel in (Rel.LT, Rel.LE) and ls not in (INDEX, INT):
            raise SortMismatch("ordering applies to index- or int-sorted terms only")


@dataclass(frozen=True)
class And(Formula):
    items: tuple[Formula, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise SortMismatch("empty conjunction; use TRUE")


@dataclass(frozen=True)
class Or(Formula):
    items: tuple[Formula, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise SortMismatch("empty disjunction; use FALSE")


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    vars: tuple[Var, ...]
    body: Formula

    def __post_init__(self) -> None:
        if not self.vars:
            raise SortMismatch("empty quantifier prefix")
        if any(v.sort != INDEX for v in self.vars):
            raise SortMismatch("only index variables may be quantified")


@dataclass(frozen=True)
class Forall(Formula):
    vars: tuple[Var, ...]
    body: Formula

    def __post_init__(self) -> None:
        if not self.vars:
            raise SortMismatch("empty quantifier prefix")
        if any(v.sort != INDEX for v in self.vars):
            raise SortMismatch("only index variables may be quantified")


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


TRUE = TrueF()
FALSE = FalseF()


def eq(a: Term, b: Term) -> Atom:
    return Atom(Rel.EQ, a, b)


def ne(a: Term, b: Term) -> Atom:
    return Atom(Rel.NE, a, b)


def lt(a: Term, b: Term) -> Atom:
    return Atom(Rel.LT, a, b)


def le(a: Term, b: Term) -> Atom:
    return Atom(Rel.LE, a, b)


def conj(items: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for f in items:
        if isinstance(f, FalseF):
            return FALSE
        if isinstance(f, TrueF):
            continue
        if isinstance(f, And):
            for g in f.items:
                if g not in out:
                    out.append(g)
        elif f not in out:
            out.append(f)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(items: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for f in items:
        if isinstance(f, TrueF):
            return TRUE
        if isinstance(f, FalseF):
            continue
        if isinstance(f, Or):
            for g in f.items:
                if g not in out:
                    out.append(g)
        elif f not in out:
            out.append(f)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def neg(f: Formula) -> Formula:
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    if isinstance(f, Not):
        return f.body
    return Not(f)


def exists(vars_: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(vars_)
    if not vs:
        return body
    return Exists(vs, body)


def forall(vars_: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(vars_)
    if not vs:
        return body
    return Forall(vs, body)


# ---------------------------------------------------------------------------
# Fresh names
# ---------------------------------------------------------------------------

_fresh_counter = [0]


def fresh_name(stem: str) -> str:
    """Globally fresh name; never reused until reset_fresh_names()."""
    base = stem.split("$", 1)[0]
    n = _fresh_counter[0]
    _fresh_counter[0] += 1
    return f"{base}${n}"


def fresh_var(stem: str, sort: Sort = INDEX) -> Var:
    return Var(fresh_name(stem), sort)


def reset_fresh_names() -> None:
    _fresh_counter[0] = 0


# ---------------------------------------------------------------------------
# Traversal helpers
# ---------------------------------------------------------------------------


def subterms(t: Term) -> Iterator[Term]:
    """Preorder iteration over a term and its subterms (crash conditions included)."""
    yield t
    match t:
        case Offset(base, _):
            yield from subterms(base)
        case Read(array, index):
            yield from subterms(array)
            yield from subterms(index)
        case Write(array, index, value):
            yield from subterms(array)
            yield from subterms(index)
            yield from subterms(value)
        case IntervalWrite(array, lo, hi, value):
            yield from subterms(array)
            yield from subterms(lo)
            yield from subterms(hi)
            yield from subterms(value)
        case CrashFill(array, _, cond, value):
            yield from subterms(array)
            yield from terms_of(cond)
            yield from subterms(value)
        case _:
            pass


def terms_of(f: Formula) -> Iterator[Term]:
    """Preorder iteration over every term occurring in f."""
    match f:
        case Atom(_, lhs, rhs):
            yield from subterms(lhs)
            yield from subterms(rhs)
        case And(items) | Or(items):
            for g in items:
                yield from terms_of(g)
        case Not(body):
            yield from terms_of(body)
        case Exists(_, body) | Forall(_, body):
            yield from terms_of(body)
        case _:
            pass


def free_vars_term(t: Term) -> set[Var]:
    out: set[Var] = set()
    match t:
        case Var():
            out.add(t)
        case Offset(base, _):
            out.add(base)
        case Read(array, index):
            out |= free_vars_term(array) | free_vars_term(index)
        case Write(array, index, value):
            out |= free_vars_term(array) | free_vars_term(index) | free_vars_term(value)
        case IntervalWrite(array, lo, hi, value):
            out |= (
                free_vars_term(array)
                | free_vars_term(lo)
                | free_vars_term(hi)
                | free_vars_term(value)
            )
        case CrashFill(array, var, cond, value):
            out |= free_vars_term(array) | free_vars_term(value)
            out |= free_vars(cond) - {var}
        case _:
            pass
    return out


def free_vars(f: Formula) -> set[Var]:
    match f:
        case Atom(_, lhs, rhs):
            return free_vars_term(lhs) | free_vars_term(rhs)
        case And(items) | Or(items):
            out: set[Var] = set()
            for g in items:
                out |= free_vars(g)
            return out
        case Not(body):
            return free_vars(body)
        case Exists(vs, body) | Forall(vs, body):
            return free_vars(body) - set(vs)
        case _:
            return set()


def free_index_vars(f: Formula) -> set[Var]:
    """Exactly the free index-sorted variables of f."""
    return {v for v in free_vars(f) if v.sort == INDEX}


def is_quantifier_free(f: Formula) -> bool:
    match f:
        case Exists(_, _) | Forall(_, _):
            return False
        case And(items) | Or(items):
            return all(is_quantifier_free(g) for g in items)
        case Not(body):
            return is_quantifier_free(body)
        case _:
            return True


def has_universal(f: Formula) -> bool:
    match f:
        case Forall(_, _):
            return True
        case And(items) | Or(items):
            return any(has_universal(g) for g in items)
        case Not(body) | Exists(_, body):
            return has_universal(body)
        case _:
            return False


def strip_exists(f: Formula) -> tuple[tuple[Var, ...], Formula]:
    """Split an existentially prefixed formula into (prefix, matrix)."""
    vs: list[Var] = []
    while isinstance(f, Exists):
        vs.extend(f.vars)
        f = f.body
    return tuple(vs), f


def strip_forall(f: Formula) -> tuple[tuple[Var, ...], Formula]:
    vs: list[Var] = []
    while isinstance(f, Forall):
        vs.extend(f.vars)
        f = f.body
    return tuple(vs), f


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


def _check_binding(v: Var, t: Term) -> None:
    if sort_of(t) != v.sort:
        raise SortMismatch(f"substituting {sort_of(t)} term for {v.sort} variable {v.name}")


def substitute_term(t: Term, sub: Mapping[str, Term]) -> Term:
    match t:
        case Var(name, _):
            if name in sub:
                _check_binding(t, sub[name])
                return sub[name]
            return t
        case Offset(base, k):
            return mk_offset(substitute_term(base, sub), k)
        case Read(array, index):
            return Read(substitute_term(array, sub), substitute_term(index, sub))
        case Write(array, index, value):
            return Write(
                substitute_term(array, sub),
                substitute_term(index, sub),
                substitute_term(value, sub),
            )
        case IntervalWrite(array, lo, hi, value):
            return IntervalWrite(
                substitute_term(array, sub),
                substitute_term(lo, sub),
                substitute_term(hi, sub),
                substitute_term(value, sub),
            )
        case CrashFill(array, var, cond, value):
            inner, var2, cond2 = _enter_binder((var,), cond, sub)
            return CrashFill(
                substitute_term(array, sub),
                var2[0],
                substitute(cond2, inner) if inner else cond2,
                substitute_term(value, sub),
            )
        case _:
            return t


def _enter_binder(
    bound: tuple[Var, ...], body: Formula, sub: Mapping[str, Term]
) -> tuple[dict[str, Term], tuple[Var, ...], Formula]:
    """Restrict sub under a binder, alpha-renaming bound variables on capture."""
    inner = {k: v for k, v in sub.items() if k not in {b.name for b in bound}}
    if not inner:
        return {}, bound, body
    range_frees = set()
    for t in inner.values():
        range_frees |= {v.name for v in free_vars_term(t)}
    renames: dict[str, Term] = {}
    new_bound = []
    for b in bound:
        if b.name in range_frees:
            nb = fresh_var(b.name, b.sort)
            renames[b.name] = nb
            new_bound.append(nb)
        else:
            new_bound.append(b)
    if renames:
        return {**inner, **renames}, tuple(new_bound), body
    return inner, tuple(new_bound), body


def substitute(f: Formula, sub: Mapping[str, Term]) -> Formula:
    """Capture-avoiding substitution of terms for free variables, by name."""
    if not sub:
        return f
    match f:
        case Atom(rel, lhs, rhs):
            return Atom(rel, substitute_term(lhs, sub), substitute_term(rhs, sub))
        case And(items):
            return And(tuple(substitute(g, sub) for g in items))
        case Or(items):
            return Or(tuple(substitute(g, sub) for g in items))
        case Not(body):
            return Not(substitute(body, sub))
        case Exists(vs, body):
            inner, vs2, body2 = _enter_binder(vs, body, sub)
            return Exists(vs2, substitute(body2, inner) if inner else body2)
        case Forall(vs, body):
            inner, vs2, body2 = _enter_binder(vs, body, sub)
            return Forall(vs2, substitute(body2, inner) if inner else body2)
        case _:
            return f


def rename_apart(f: Formula) -> Formula:
    """Freshly rename every bound variable of f (used to keep node formulas disjoint)."""
    match f:
        case Exists(vs, body) | Forall(vs, body):
            fresh = {v.name: fresh_var(v.name, v.sort) for v in vs}
            body2 = rename_apart(substitute(body, fresh))
            ctor = Exists if isinstance(f, Exists) else Forall
            return ctor(tuple(fresh[v.name] for v in vs), body2)  # type: ignore[arg-type]
        case And(items):
            return And(tuple(rename_apart(g) for g in items))
        case Or(items):
            return Or(tuple(rename_apart(g) for g in items))
        case Not(body):
            return Not(rename_apart(body))
        case _:
            return f


# ---------------------------------------------------------------------------
# Negation normal form
# ---------------------------------------------------------------------------

_NEG_REL = {Rel.EQ: Rel.NE, Rel.NE: Rel.EQ}


def negate_atom(a: Atom) -> Atom:
    if a.rel in _NEG_REL:
        return Atom(_NEG_REL[a.rel], a.lhs, a.rhs)
    if a.rel == Rel.LT:
        return Atom(Rel.LE, a.rhs, a.lhs)
    return Atom(Rel.LT, a.rhs, a.lhs)


def to_nnf(f: Formula) -> Formula:
    """Push negations onto atoms; the result contains no Not nodes."""
    return _nnf(f, True)


def _nnf(f: Formula, pos: bool) -> Formula:
    match f:
        case Atom():
            return f if pos else negate_atom(f)
        case TrueF():
            return TRUE if pos else FALSE
        case FalseF():
            return FALSE if pos else TRUE
        case Not(body):
            return _nnf(body, not pos)
        case And(items):
            parts = tuple(_nnf(g, pos) for g in items)
            return And(parts) if pos else Or(parts)
        case Or(items):
            parts = tuple(_nnf(g, pos) for g in items)
            return Or(parts) if pos else And(parts)
        case Exists(vs, body):
            return Exists(vs, _nnf(body, pos)) if pos else Forall(vs, _nnf(body, pos))
        case Forall(vs, body):
            return Forall(vs, _nnf(body, pos)) if pos else Exists(vs, _nnf(body, pos))
    raise SortMismatch(f"unknown formula {f!r}")


# ---------------------------------------------------------------------------
# Read-over-write reduction
# ---------------------------------------------------------------------------


def _find_composite_read(t: Term) -> Read | None:
    for s in subterms(t):
        if isinstance(s, Read) and isinstance(s.array, (Write, IntervalWrite, CrashFill)):
            return s
    return None


def _replace_term(t: Term, old: Term, new: Term) -> Term:
    if t == old:
        return new
    match t:
        case Offset(base, k):
            return mk_offset(_replace_term(base, old, new), k)
        case Read(array, index):
            return Read(_replace_term(array, old, new), _replace_term(index, old, new))
        case Write(array, index, value):
            return Write(
                _replace_term(array, old, new),
                _replace_term(index, old, new),
                _replace_term(value, old, new),
            )
        case IntervalWrite(array, lo, hi, value):
            return IntervalWrite(
                _replace_term(array, old, new),
                _replace_term(lo, old, new),
                _replace_term(hi, old, new),
                _replace_term(value, old, new),
            )
        case CrashFill(array, var, cond, value):
            return CrashFill(
                _replace_term(array, old, new),
                var,
                cond,
                _replace_term(value, old, new),
            )
        case _:
            return t


def _expand_atom(a: Atom) -> Formula:
    target: Read | None = _find_composite_read(a.lhs) or _find_composite_read(a.rhs)
    if target is None:
        return a

    def rebuilt(value: Term) -> Formula:
        na = Atom(a.rel, _replace_term(a.lhs, target, value), _replace_term(a.rhs, target, value))
        return _expand_atom(na)

    arr = target.array
    j = target.index
    match arr:
        case Write(base, i, e):
            hit = eq(i, j)
            return disj(
                [
                    conj([hit, rebuilt(e)]),
                    conj([ne(i, j), rebuilt(Read(base, j))]),
                ]
            )
        case IntervalWrite(base, lo, hi, e):
            inside = conj([le(lo, j), le(j, hi)])
            outside = to_nnf(neg(inside))
            return disj(
                [
                    conj([inside, rebuilt(e)]),
                    conj([outside, rebuilt(Read(base, j))]),
                ]
            )
        case CrashFill(base, var, cond, e):
            cond_j = substitute(cond, {var.name: j})
            return disj(
                [
                    conj([cond_j, rebuilt(e)]),
                    conj([to_nnf(neg(cond_j)), rebuilt(Read(base, j))]),
                ]
            )
    raise SortMismatch("unreachable")


def reduce_read_over_write(f: Formula) -> Formula:
    """Eliminate reads over writes by case splitting into guarded branches."""
    match f:
        case Atom():
            return _expand_atom(f)
        case And(items):
            return conj(reduce_read_over_write(g) for g in items)
        case Or(items):
            return disj(reduce_read_over_write(g) for g in items)
        case Not(body):
            return neg(reduce_read_over_write(body))
        case Exists(vs, body):
            return Exists(vs, reduce_read_over_write(body))
        case Forall(vs, body):
            return Forall(vs, reduce_read_over_write(body))
        case _:
            return f


# ---------------------------------------------------------------------------
# Universal instantiation
# ---------------------------------------------------------------------------


def instantiate_universals(f: Formula, terms: Iterable[Term]) -> Formula:
    """Replace each universal block by the conjunction of its instances over terms.

    f must be in negation normal form; the result is entailed by f (it keeps
    only finitely many of the universal's consequences).
    """
    xs = tuple(terms)
    if not xs:
        raise EmptyInstantiationSet("cannot instantiate over an empty term set")
    if any(sort_of(t) != INDEX for t in xs):
        raise SortMismatch("instantiation terms must be index-sorted")
    return _inst(f, xs)


def _inst(f: Formula, xs: tuple[Term, ...]) -> Formula:
    match f:
        case Forall(vs, body):
            body = _inst(body, xs)
            parts = []
            for combo in itertools.product(xs, repeat=len(vs)):
                sub = {v.name: t for v, t in zip(vs, combo)}
                try:
                    parts.append(substitute(body, sub))
                except IndexUnderflow:
                    # the instance mentions a term below index zero: vacuous
                    continue
            return conj(parts)
        case Exists(vs, body):
            return Exists(vs, _inst(body, xs))
        case And(items):
            return conj(_inst(g, xs) for g in items)
        case Or(items):
            return disj(_inst(g, xs) for g in items)
        case Not(body):
            return neg(_inst(body, xs))
        case _:
            return f


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------


def _linear(t: Term) -> tuple[object, int] | None:
    """View t as base+offset where base is a variable or the zero point."""
    match t:
        case Var(name, _):
            return (("v", name), 0)
        case IndexConst(v):
            return (("zi",), v)
        case IntConst(v):
            return (("zn",), v)
        case Offset(Var(name, _), k):
            return (("v", name), k)
        case _:
            return None


def _eval_const_atom(a: Atom) -> Formula | None:
    if a.lhs == a.rhs:
        return TRUE if a.rel in (Rel.EQ, Rel.LE) else FALSE
    if isinstance(a.lhs, EnumConst) and isinstance(a.rhs, EnumConst):
        same = a.lhs.value == a.rhs.value
        return TRUE if same == (a.rel == Rel.EQ) else FALSE
    la, lb = _linear(a.lhs), _linear(a.rhs)
    if la is not None and lb is not None and la[0] == lb[0]:
        ka, kb = la[1], lb[1]
        match a.rel:
            case Rel.EQ:
                return TRUE if ka == kb else FALSE
            case Rel.NE:
                return TRUE if ka != kb else FALSE
            case Rel.LT:
                return TRUE if ka < kb else FALSE
            case Rel.LE:
                return TRUE if ka <= kb else FALSE
    return None


def _atom_key(a: Atom) -> tuple:
    l, r = format_term(a.lhs), format_term(a.rhs)
    if a.rel in (Rel.EQ, Rel.NE) and r < l:
        l, r = r, l
    return (a.rel.value, l, r)


def _complement_key(a: Atom) -> tuple:
    return _atom_key(negate_atom(a))


def _drop_subsumed_conjuncts(items: tuple[Formula, ...]) -> tuple[Formula, ...]:
    """Within a conjunction, drop literals strictly implied by another one."""
    keys = {_atom_key(g) for g in items if isinstance(g, Atom)}
    out = []
    for g in items:
        if isinstance(g, Atom):
            fl, fr = format_term(g.lhs), format_term(g.rhs)
            if g.rel == Rel.LE:
                if ("<", fl, fr) in keys:
                    continue
                cl, cr = (fl, fr) if fl <= fr else (fr, fl)
                if ("=", cl, cr) in keys:
                    continue
            elif g.rel == Rel.NE:
                if ("<", fl, fr) in keys or ("<", fr, fl) in keys:
                    continue
        out.append(g)
    return tuple(out)


def simplify(f: Formula) -> Formula:
    """Constant folding, flattening, and syntactic contradiction detection."""
    match f:
        case Atom():
            folded = _eval_const_atom(f)
            return folded if folded is not None else f
        case Not(body):
            b = simplify(body)
            if isinstance(b, TrueF):
                return FALSE
            if isinstance(b, FalseF):
                return TRUE
            return neg(b)
        case And(items):
            parts = [simplify(g) for g in items]
            flat = conj(parts)
            if isinstance(flat, And):
                keys = {_atom_key(g) for g in flat.items if isinstance(g, Atom)}
                for g in flat.items:
                    if isinstance(g, Atom) and _complement_key(g) in keys:
                        return FALSE
                flat = conj(_drop_subsumed_conjuncts(flat.items))
            return flat
        case Or(items):
            parts = [simplify(g) for g in items]
            flat = disj(parts)
            if isinstance(flat, Or):
                keys = {_atom_key(g) for g in flat.items if isinstance(g, Atom)}
                for g in flat.items:
                    if isinstance(g, Atom) and _complement_key(g) in keys:
                        return TRUE
            return flat
        case Exists(vs, body):
            b = simplify(body)
            if isinstance(b, (TrueF, FalseF)):
                return b
            live = free_vars(b)
            return exists([v for v in vs if v in live], b)
        case Forall(vs, body):
            b = simplify(body)
            if isinstance(b, (TrueF, FalseF)):
                return b
            live = free_vars(b)
            return forall([v for v in vs if v in live], b)
        case _:
            return f


# ---------------------------------------------------------------------------
# Disjunctive normal form
# ---------------------------------------------------------------------------


def dnf_disjuncts(f: Formula, budget: int = 200_000) -> list[tuple[Atom, ...]]:
    """DNF of a quantifier-free NNF formula, as lists of atoms.

    Branches with syntactically complementary literals are dropped. Raises
    DnfBudgetExceeded when the expansion outgrows budget literals.
    """
    count = [0]

    def go(g: Formula) -> list[tuple[Atom, ...]]:
        match g:
            case TrueF():
                return [()]
            case FalseF():
                return []
            case Atom():
                folded = _eval_const_atom(g)
                if folded is TRUE:
                    return [()]
                if folded is FALSE:
                    return []
                return [(g,)]
            case Or(items):
                out: list[tuple[Atom, ...]] = []
                for item in items:
                    out.extend(go(item))
                return out
            case And(items):
                acc: list[tuple[Atom, ...]] = [()]
                for item in items:
                    branches = go(item)
                    nxt: list[tuple[Atom, ...]] = []
                    for left in acc:
                        keys = {_atom_key(a) for a in left}
                        for right in branches:
                            if any(_complement_key(a) in keys for a in right):
                                continue
                            merged = left + tuple(a for a in right if _atom_key(a) not in keys)
                            count[0] += len(merged)
                            if count[0] > budget:
                                raise DnfBudgetExceeded(
                                    f"DNF expansion exceeded {budget} literals"
                                )
                            nxt.append(merged)
                    acc = nxt
                    if not acc:
                        return []
                return acc
        raise SortMismatch(f"dnf expects quantifier-free NNF input, got {g!r}")

    return go(f)


# ---------------------------------------------------------------------------
# Formatting (s-expression syntax, shared with the parser)
# ---------------------------------------------------------------------------


def format_term(t: Term) -> str:
    match t:
        case Var(name, _):
            return name
        case EnumConst(_, value):
            return value
        case IntConst(v) | IndexConst(v):
            return str(v)
        case Offset(base, k):
            return f"(+ {format_term(base)} {k})"
        case Read(array, index):
            return f"(select {format_term(array)} {format_term(index)})"
        case Write(array, index, value):
            return f"(store {format_term(array)} {format_term(index)} {format_term(value)})"
        case IntervalWrite(array, lo, hi, value):
            return (
                f"(store-interval {format_term(array)} {format_term(lo)} "
                f"{format_term(hi)} {format_term(value)})"
            )
        case CrashFill(array, var, cond, value):
            return (
                f"(crash-fill {format_term(array)} ({var.name}) "
                f"{format_formula(cond)} {format_term(value)})"
            )
    raise SortMismatch(f"unknown term {t!r}")


def format_formula(f: Formula) -> str:
    match f:
        case TrueF():
            return "true"
        case FalseF():
            return "false"
        case Atom(rel, lhs, rhs):
            return f"({rel.value} {format_term(lhs)} {format_term(rhs)})"
        case And(items):
            return "(and " + " ".join(format_formula(g) for g in items) + ")"
        case Or(items):
            return "(or " + " ".join(format_formula(g) for g in items) + ")"
        case Not(body):
            return f"(not {format_formula(body)})"
        case Exists(vs, body):
            names = " ".join(v.name for v in vs)
            return f"(exists ({names}) {format_formula(body)})"
        case Forall(vs, body):
            names = " ".join(v.name for v in vs)
            return f"(forall ({names}) {format_formula(body)})"
    raise SortMismatch(f"unknown formula {f!r}")
