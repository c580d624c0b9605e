"""Safety problems, transition formats, and the textual input format.

A system file is an s-expression:

    (system NAME (theory simple|diffarith)
      (enum-sort NAME (CONST ...)) ...
      (var NAME SORT) ...
      (array NAME index ELEMSORT) ...
      (init FORMULA)
      (transition NAME (exists (VARS) (and GUARD ... (forall (K) BODY)? (assign (VAR TERM) ...)))) ...
      (unsafe FORMULA))

Formulas and terms use prefix notation: (= t u), (distinct t u), (< t u),
(<= t u), (and ...), (or ...), (not f), (exists (vars) f), (forall (vars) f),
(select a i), (store a i e), (+ t K). Ground transitions omit the exists
wrapper. Unassigned variables keep their value (the parser materializes the
identity updates).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources

from .logic import (
    And,
    ArrayReachError,
    ArraySort,
    Atom,
    EnumConst,
    EnumSort,
    Exists,
    FalseF,
    Forall,
    Formula,
    IndexConst,
    IntConst,
    INDEX,
    INT,
    Not,
    Offset,
    Or,
    Read,
    Rel,
    Sort,
    SortMismatch,
    Term,
    TrueF,
    Var,
    Write,
    format_formula,
    format_term,
    is_quantifier_free,
    sort_of,
    terms_of,
)


class Theory(Enum):
    SIMPLE = "simple"
    DIFFARITH = "diffarith"


class ParseError(ArrayReachError):
    def __init__(self, line: int, col: int, message: str) -> None:
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class ValidationError(ArrayReachError):
    pass


class ShapeError(ArrayReachError):
    pass


# ---------------------------------------------------------------------------
# Transition and problem types
# ---------------------------------------------------------------------------


class TransitionKind(Enum):
    FUNCTIONAL = "functional"
    UNIVERSALLY_GUARDED = "universally-guarded"
    GROUND = "ground"
    ACCELERATED = "accelerated"


@dataclass(frozen=True)
class Transition:
    name: str
    ex_vars: tuple[Var, ...]
    guard: Formula
    univ_var: Var | None
    univ_body: Formula | None
    updates: tuple[tuple[str, Term], ...]
    accelerated: bool = False
    abstracted: bool = False
    base_name: str | None = None

    def update_map(self) -> dict[str, Term]:
        return dict(self.updates)


def shape_of(t: Transition) -> TransitionKind:
    """Purely syntactic shape, ignoring the accelerated tag."""
    if not is_quantifier_free(t.guard):
        raise ShapeError(f"transition {t.name}: guard must be quantifier-free")
    if t.univ_body is not None and not is_quantifier_free(t.univ_body):
        raise ShapeError(f"transition {t.name}: universal body must be quantifier-free")
    if t.univ_var is not None:
        return TransitionKind.UNIVERSALLY_GUARDED
    if t.ex_vars:
        return TransitionKind.FUNCTIONAL
    return TransitionKind.GROUND


def classify_transition(t: Transition) -> TransitionKind:
    shape = shape_of(t)
    if t.accelerated:
        if shape != TransitionKind.UNIVERSALLY_GUARDED:
            raise ShapeError(f"accelerated transition {t.name} has lost its shape")
        return TransitionKind.ACCELERATED
    return shape


@dataclass(frozen=True)
class SafetyProblem:
    name: str
    theory: Theory
    enum_sorts: tuple[EnumSort, ...]
    state_vars: tuple[Var, ...]
    init: Formula
    transitions: tuple[Transition, ...]
    unsafe: Formula

    def var(self, name: str) -> Var:
        for v in self.state_vars:
            if v.name == name:
                return v
        raise KeyError(name)

    def transition(self, name: str) -> Transition:
        for t in self.transitions:
            if t.name == name:
                return t
        raise KeyError(name)

    def arrays(self) -> tuple[Var, ...]:
        return tuple(v for v in self.state_vars if isinstance(v.sort, ArraySort))

    def with_transitions(self, transitions) -> "SafetyProblem":
        return replace(self, transitions=tuple(transitions))


# ---------------------------------------------------------------------------
# S-expression reader
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SAtom:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class SList:
    items: tuple
    line: int
    col: int


def _tokenize(text: str):
    line, col = 1, 1
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            col += 1
            i += 1
        elif c == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif c in "()":
            yield (c, line, col)
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < len(text) and text[i] not in " \t\r\n();":
                i += 1
                col += 1
            yield (text[start:i], line, start_col)
    yield (None, line, col)


def read_sexprs(text: str) -> list:
    """All top-level s-expressions of text, with positions."""
    tokens = list(_tokenize(text))
    pos = [0]

    def read_one():
        tok, line, col = tokens[pos[0]]
        pos[0] += 1
        if tok is None:
            raise ParseError(line, col, "unexpected end of input")
        if tok == "(":
            items = []
            while True:
                nxt, nline, ncol = tokens[pos[0]]
                if nxt is None:
                    raise ParseError(nline, ncol, "unclosed parenthesis")
                if nxt == ")":
                    pos[0] += 1
                    return SList(tuple(items), line, col)
                items.append(read_one())
        if tok == ")":
            raise ParseError(line, col, "unexpected )")
        return SAtom(tok, line, col)

    out = []
    while tokens[pos[0]][0] is not None:
        out.append(read_one())
    return out


def _expect_list(sx, what: str) -> SList:
    if not isinstance(sx, SList):
        raise ParseError(sx.line, sx.col, f"expected {what}")
    return sx


def _expect_atom(sx, what: str) -> SAtom:
    if not isinstance(sx, SAtom):
        raise ParseError(sx.line, sx.col, f"expected {what}")
    return sx


def _head(sx: SList) -> str:
    if not sx.items or not isinstance(sx.items[0], SAtom):
        raise ParseError(sx.line, sx.col, "expected a keyword")
    return sx.items[0].text


def _is_int(text: str) -> bool:
    body = text[1:] if text[:1] in "+-" else text
    return body.isdigit() and body != ""


# ---------------------------------------------------------------------------
# Parsing proper
# ---------------------------------------------------------------------------


class _Ambiguous(Exception):
    pass


class _Env:
    def __init__(self, problem_vars: dict[str, Var], enum_consts: dict[str, list[EnumSort]]):
        self.vars = dict(problem_vars)
        self.enum_consts = enum_consts

    def child(self, extra: dict[str, Var]) -> "_Env":
        env = _Env(self.vars, self.enum_consts)
        env.vars.update(extra)
        return env


def _parse_term(sx, env: _Env, expected: Sort | None) -> Term:
    if isinstance(sx, SAtom):
        text = sx.text
        if _is_int(text):
            value = int(text)
            if expected == INDEX:
                if value < 0:
                    raise ParseError(sx.line, sx.col, "negative index constant")
                return IndexConst(value)
            if expected == INT:
                return IntConst(value)
            if expected is None:
                raise _Ambiguous
            raise ParseError(sx.line, sx.col, f"numeral where {expected} was expected")
        if text in env.vars:
            return env.vars[text]
        sorts = env.enum_consts.get(text, [])
        if isinstance(expected, EnumSort) and expected in sorts:
            return EnumConst(expected, text)
        if len(sorts) == 1 and expected is None:
            return EnumConst(sorts[0], text)
        if len(sorts) > 1:
            raise _Ambiguous
        raise ParseError(sx.line, sx.col, f"unknown symbol {text}")
    sx = _expect_list(sx, "a term")
    head = _head(sx)
    args = sx.items[1:]
    if head == "select":
        if len(args) != 2:
            raise ParseError(sx.line, sx.col, "select takes an array and an index")
        arr = _parse_term(args[0], env, None)
        idx = _parse_term(args[1], env, INDEX)
        try:
            return Read(arr, idx)
        except SortMismatch as e:
            raise ParseError(sx.line, sx.col, str(e))
    if head == "store":
        if len(args) != 3:
            raise ParseError(sx.line, sx.col, "store takes an array, an index, and a value")
        arr = _parse_term(args[0], env, None)
        asort = sort_of(arr)
        if not isinstance(asort, ArraySort):
            raise ParseError(sx.line, sx.col, "store expects an array")
        idx = _parse_term(args[1], env, INDEX)
        val = _parse_term(args[2], env, asort.elem)
        return Write(arr, idx, val)
    if head == "+":
        if len(args) != 2:
            raise ParseError(sx.line, sx.col, "+ takes a term and an integer offset")
        k_atom = _expect_atom(args[1], "an integer offset")
        if not _is_int(k_atom.text):
            raise ParseError(k_atom.line, k_atom.col, "offset must be an integer literal")
        base = _parse_term(args[0], env, expected)
        try:
            from .logic import mk_offset

            return mk_offset(base, int(k_atom.text))
        except SortMismatch as e:
            raise ParseError(sx.line, sx.col, str(e))
    raise ParseError(sx.line, sx.col, f"unknown term constructor {head}")


def _parse_relation(sx: SList, rel: Rel, env: _Env) -> Atom:
    if len(sx.items) != 3:
        raise ParseError(sx.line, sx.col, f"{rel.value} takes two terms")
    a_sx, b_sx = sx.items[1], sx.items[2]
    try:
        lhs = _parse_term(a_sx, env, None)
        rhs = _parse_term(b_sx, env, sort_of(lhs))
    except _Ambiguous:
        try:
            rhs = _parse_term(b_sx, env, None)
        except _Ambiguous:
            raise ParseError(sx.line, sx.col, "cannot infer the sort of the comparison")
        lhs = _parse_term(a_sx, env, sort_of(rhs))
    try:
        return Atom(rel, lhs, rhs)
    except SortMismatch as e:
        raise ParseError(sx.line, sx.col, str(e))


def _parse_binders(sx, env: _Env) -> tuple[tuple[Var, ...], _Env]:
    lst = _expect_list(sx, "a variable list")
    vs = []
    extra: dict[str, Var] = {}
    for item in lst.items:
        a = _expect_atom(item, "a variable name")
        if a.text in env.vars or a.text in extra:
            raise ParseError(a.line, a.col, f"bound variable {a.text} shadows another symbol")
        v = Var(a.text, INDEX)
        vs.append(v)
        extra[a.text] = v
    if not vs:
        raise ParseError(lst.line, lst.col, "empty variable list")
    return tuple(vs), env.child(extra)


def _parse_formula(sx, env: _Env) -> Formula:
    if isinstance(sx, SAtom):
        if sx.text == "true":
            return TrueF()
        if sx.text == "false":
            return FalseF()
        raise ParseError(sx.line, sx.col, f"expected a formula, got {sx.text}")
    sx = _expect_list(sx, "a formula")
    head = _head(sx)
    args = sx.items[1:]
    if head == "and":
        if not args:
            raise ParseError(sx.line, sx.col, "empty conjunction")
        return And(tuple(_parse_formula(a, env) for a in args))
    if head == "or":
        if not args:
            raise ParseError(sx.line, sx.col, "empty disjunction")
        return Or(tuple(_parse_formula(a, env) for a in args))
    if head == "not":
        if len(args) != 1:
            raise ParseError(sx.line, sx.col, "not takes one formula")
        return Not(_parse_formula(args[0], env))
    if head in ("exists", "forall"):
        if len(args) != 2:
            raise ParseError(sx.line, sx.col, f"{head} takes a variable list and a body")
        vs, env2 = _parse_binders(args[0], env)
        body = _parse_formula(args[1], env2)
        return Exists(vs, body) if head == "exists" else Forall(vs, body)
    rels = {"=": Rel.EQ, "distinct": Rel.NE, "<": Rel.LT, "<=": Rel.LE}
    if head in rels:
        return _parse_relation(sx, rels[head], env)
    raise ParseError(sx.line, sx.col, f"unknown formula constructor {head}")


def _parse_transition(sx: SList, env: _Env, state_vars: tuple[Var, ...]) -> Transition:
    if len(sx.items) != 3:
        raise ParseError(sx.line, sx.col, "transition takes a name and a body")
    name = _expect_atom(sx.items[1], "a transition name").text
    body = _expect_list(sx.items[2], "a transition body")

    ex_vars: tuple[Var, ...] = ()
    tenv = env
    if isinstance(body, SList) and body.items and _head(body) == "exists":
        if len(body.items) != 3:
            raise ParseError(body.line, body.col, "exists takes a variable list and a body")
        ex_vars, tenv = _parse_binders(body.items[1], env)
        body = _expect_list(body.items[2], "a transition body")

    if _head(body) != "and":
        raise ParseError(body.line, body.col, "transition body must be a conjunction")

    guards: list[Formula] = []
    univ: tuple[Var, Formula] | None = None
    assign: SList | None = None
    for item in body.items[1:]:
        if isinstance(item, SList) and item.items and isinstance(item.items[0], SAtom):
            h = item.items[0].text
            if h == "assign":
                if assign is not None:
                    raise ParseError(item.line, item.col, "duplicate assign block")
                assign = item
                continue
            if h == "forall":
                if univ is not None:
                    raise ValidationError(
                        f"transition {name}: at most one universal guard block"
                    )
                if len(item.items) != 3:
                    raise ParseError(item.line, item.col, "forall takes a variable list and a body")
                vs, uenv = _parse_binders(item.items[1], tenv)
                if len(vs) != 1:
                    raise ValidationError(
                        f"transition {name}: the universal guard binds one variable"
                    )
                ubody = _parse_formula(item.items[2], uenv)
                if not is_quantifier_free(ubody):
                    raise ShapeError(f"transition {name}: nested quantifier in universal guard")
                univ = (vs[0], ubody)
                continue
        guards.append(_parse_formula(item, tenv))
    if assign is None:
        raise ParseError(body.line, body.col, "transition body needs an assign block")
    for g in guards:
        if not is_quantifier_free(g):
            raise ShapeError(f"transition {name}: quantifier inside a guard")

    updates: dict[str, Term] = {}
    for pair in assign.items[1:]:
        p = _expect_list(pair, "an (variable term) update pair")
        if len(p.items) != 2:
            raise ParseError(p.line, p.col, "update pairs have the form (variable term)")
        target = _expect_atom(p.items[0], "a state variable")
        if target.text not in env.vars:
            raise ParseError(target.line, target.col, f"unknown state variable {target.text}")
        if target.text in updates:
            raise ValidationError(f"transition {name}: {target.text} assigned twice")
        tv = env.vars[target.text]
        term = _parse_term(p.items[1], tenv, tv.sort)
        if sort_of(term) != tv.sort:
            raise ValidationError(
                f"transition {name}: update of {target.text} has sort {sort_of(term)}"
            )
        updates[target.text] = term

    full_updates = tuple(
        (v.name, updates.get(v.name, v)) for v in state_vars
    )
    guard = guards[0] if len(guards) == 1 else And(tuple(guards)) if guards else TrueF()
    return Transition(
        name=name,
        ex_vars=ex_vars,
        guard=guard,
        univ_var=univ[0] if univ else None,
        univ_body=univ[1] if univ else None,
        updates=full_updates,
    )


def parse_system(text: str) -> SafetyProblem:
    """Parse and validate a system description."""
    exprs = read_sexprs(text)
    if not exprs:
        raise ParseError(1, 1, "expected (system ...)")
    if len(exprs) > 1:
        extra = exprs[1]
        raise ParseError(extra.line, extra.col, "trailing input after the system form")
    top = _expect_list(exprs[0], "(system ...)")
    if _head(top) != "system" or len(top.items) < 3:
        raise ParseError(top.line, top.col, "expected (system NAME (theory ...) ...)")
    name = _expect_atom(top.items[1], "a system name").text

    theory_sx = _expect_list(top.items[2], "(theory simple|diffarith)")
    if _head(theory_sx) != "theory" or len(theory_sx.items) != 2:
        raise ParseError(theory_sx.line, theory_sx.col, "expected (theory simple|diffarith)")
    theory_name = _expect_atom(theory_sx.items[1], "a theory name").text
    try:
        theory = Theory(theory_name)
    except ValueError:
        raise ParseError(theory_sx.line, theory_sx.col, f"unknown theory {theory_name}")

    enum_sorts: list[EnumSort] = []
    enum_consts: dict[str, list[EnumSort]] = {}
    state_vars: list[Var] = []
    init: Formula | None = None
    unsafe: Formula | None = None
    transitions_sx: list[SList] = []

    def lookup_sort(a: SAtom) -> Sort:
        if a.text == "index":
            return INDEX
        if a.text == "int":
            return INT
        for s in enum_sorts:
            if s.name == a.text:
                return s
        raise ParseError(a.line, a.col, f"unknown sort {a.text}")

    for sx in top.items[3:]:
        lst = _expect_list(sx, "a declaration")
        head = _head(lst)
        if head == "enum-sort":
            if len(lst.items) != 3:
                raise ParseError(lst.line, lst.col, "expected (enum-sort NAME (CONST ...))")
            sname = _expect_atom(lst.items[1], "a sort name").text
            consts_sx = _expect_list(lst.items[2], "a constant list")
            consts = tuple(_expect_atom(c, "a constant").text for c in consts_sx.items)
            try:
                sort = EnumSort(sname, consts)
            except SortMismatch as e:
                raise ValidationError(str(e))
            enum_sorts.append(sort)
            for c in consts:
                enum_consts.setdefault(c, []).append(sort)
        elif head == "var":
            if len(lst.items) != 3:
                raise ParseError(lst.line, lst.col, "expected (var NAME SORT)")
            vname = _expect_atom(lst.items[1], "a variable name").text
            sort = lookup_sort(_expect_atom(lst.items[2], "a sort"))
            state_vars.append(Var(vname, sort))
        elif head == "array":
            if len(lst.items) != 4:
                raise ParseError(lst.line, lst.col, "expected (array NAME index ELEMSORT)")
            vname = _expect_atom(lst.items[1], "an array name").text
            idx = _expect_atom(lst.items[2], "index")
            if idx.text != "index":
                raise ParseError(idx.line, idx.col, "arrays are indexed by the index sort")
            elem = lookup_sort(_expect_atom(lst.items[3], "an element sort"))
            try:
                state_vars.append(Var(vname, ArraySort(elem)))
            except SortMismatch as e:
                raise ValidationError(str(e))
        elif head in ("init", "unsafe", "transition"):
            transitions_sx.append(lst)
        else:
            raise ParseError(lst.line, lst.col, f"unknown declaration {head}")

    names = [v.name for v in state_vars]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate state variable names")
    env = _Env({v.name: v for v in state_vars}, enum_consts)

    transitions: list[Transition] = []
    for lst in transitions_sx:
        head = _head(lst)
        if head == "init":
            if init is not None:
                raise ValidationError("duplicate init block")
            if len(lst.items) != 2:
                raise ParseError(lst.line, lst.col, "init takes one formula")
            init = _parse_formula(lst.items[1], env)
        elif head == "unsafe":
            if unsafe is not None:
                raise ValidationError("duplicate unsafe block")
            if len(lst.items) != 2:
                raise ParseError(lst.line, lst.col, "unsafe takes one formula")
            unsafe = _parse_formula(lst.items[1], env)
        else:
            transitions.append(_parse_transition(lst, env, tuple(state_vars)))

    if init is None:
        raise ValidationError("missing init block")
    if unsafe is None:
        raise ValidationError("missing unsafe block")
    tnames = [t.name for t in transitions]
    if len(set(tnames)) != len(tnames):
        raise ValidationError("duplicate transition names")

    problem = SafetyProblem(
        name=name,
        theory=theory,
        enum_sorts=tuple(enum_sorts),
        state_vars=tuple(state_vars),
        init=init,
        transitions=tuple(transitions),
        unsafe=unsafe,
    )
    validate_problem(problem)
    return problem


def validate_problem(p: SafetyProblem) -> None:
    body = p.init.body if isinstance(p.init, Forall) else p.init
    if not is_quantifier_free(body) or isinstance(p.init, Exists):
        raise ValidationError("init must be universally prefixed or ground")
    ubody = p.unsafe.body if isinstance(p.unsafe, Exists) else p.unsafe
    if not is_quantifier_free(ubody) or isinstance(p.unsafe, Forall):
        raise ValidationError("unsafe must be existentially prefixed or ground")
    for t in p.transitions:
        shape_of(t)
        assigned = [name for name, _ in t.updates]
        if assigned != [v.name for v in p.state_vars]:
            raise ValidationError(f"transition {t.name} does not update every state variable")
    if p.theory == Theory.SIMPLE:
        from .logic import subterms

        def all_terms():
            for f in (p.init, p.unsafe):
                yield from terms_of(f)
            for t in p.transitions:
                yield from terms_of(t.guard)
                if t.univ_body is not None:
                    yield from terms_of(t.univ_body)
                for _, term in t.updates:
                    yield from subterms(term)

        for term in all_terms():
            if isinstance(term, (Offset, IndexConst)):
                raise ValidationError(
                    "the simple theory forbids index arithmetic and index constants"
                )


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def print_system(p: SafetyProblem) -> str:
    lines = [f"(system {p.name} (theory {p.theory.value})"]
    for s in p.enum_sorts:
        lines.append(f"  (enum-sort {s.name} ({' '.join(s.constants)}))")
    for v in p.state_vars:
        if isinstance(v.sort, ArraySort):
            lines.append(f"  (array {v.name} index {v.sort.elem})")
        else:
            lines.append(f"  (var {v.name} {v.sort})")
    lines.append(f"  (init {format_formula(p.init)})")
    for t in p.transitions:
        parts = []
        guard = t.guard
        gs = guard.items if isinstance(guard, And) else (guard,)
        parts.extend(format_formula(g) for g in gs)
        if t.univ_var is not None:
            parts.append(f"(forall ({t.univ_var.name}) {format_formula(t.univ_body)})")
        updates = " ".join(f"({name} {format_term(term)})" for name, term in t.updates)
        parts.append(f"(assign {updates})")
        body = "(and " + " ".join(parts) + ")"
        if t.ex_vars:
            names = " ".join(v.name for v in t.ex_vars)
            body = f"(exists ({names}) {body})"
        lines.append(f"  (transition {t.name} {body})")
    lines.append(f"  (unsafe {format_formula(p.unsafe)}))")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Bundled benchmarks
# ---------------------------------------------------------------------------


def benchmark_text(name: str) -> str:
    """Source text of a bundled benchmark, e.g. 'mutex.abs'."""
    return resources.files("arrayreach.benchmarks").joinpath(name).read_text()


def load_benchmark(name: str) -> SafetyProblem:
    return parse_system(benchmark_text(name))
