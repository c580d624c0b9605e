"""Satisfiability for ground formulae and for existential/universal pairs.

Ground queries are decided by a small clause-based search: the formula is
normalized (read-over-write reduction, NNF), disjunctions become branch
points, and literals are pushed onto a trail that maintains

  * an incremental difference-bound graph over index and integer terms
    (negative cycles are detected the moment an edge closes one, so dead
    branches are pruned at the push, not at the leaf), with every
    index-sorted term constrained to denote a natural number, and
  * congruence closure over enumerated terms, checked at the leaves
    (union-find, distinct constants conflict, plus a backtracking
    assignment of constants respecting disequalities).

Array reads are connected to arithmetic through functional-consistency
clauses: for two reads a[s], a[t] the valid clause  s<t or t<s or a[s]=a[t]
is added up front, so a branch either separates the indexes or merges the
read values. Disequalities between index/int terms split into the two
strict orders, keeping the arithmetic core conjunctive.

Queries mixing one existential block with universal facts are grounded by
instantiating the universals over the index terms of the problem. That is
complete for the simple theory (models can be compacted onto the mentioned
indexes); with difference arithmetic a positive answer is only trusted
after the candidate model evaluates the original query to true, otherwise
the result is Unknown. Unsat answers are always trusted.
"""

from __future__ import annotations

import itertools
import os
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from . import oracle
from .logic import (
    And,
    ArrayReachError,
    ArraySort,
    Atom,
    EnumConst,
    EnumSort,
    FalseF,
    Forall,
    Formula,
    IndexConst,
    IndexUnderflow,
    IntConst,
    INDEX,
    INT,
    Offset,
    Or,
    Read,
    Rel,
    Term,
    TrueF,
    Var,
    conj,
    eq,
    format_formula,
    format_term,
    free_vars,
    fresh_var,
    is_quantifier_free,
    lt,
    neg,
    negate_atom,
    reduce_read_over_write,
    simplify,
    sort_of,
    strip_exists,
    strip_forall,
    substitute,
    subterms,
    terms_of,
    to_nnf,
)


class _BranchFalse(Exception):
    """Internal: a search branch normalized to false."""


class UnsupportedTerm(ArrayReachError):
    """The query contains syntax outside the decidable fragment."""


class SolverBudgetExceeded(ArrayReachError):
    """The ground search outgrew its step budget."""


class InternalSolverError(ArrayReachError):
    """A model failed its evaluation cross-check; indicates a solver bug."""


class Verdict(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


class Entailment(Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass
class Model:
    domain_size: int
    index_vals: dict[str, int] = field(default_factory=dict)
    int_vals: dict[str, int] = field(default_factory=dict)
    enum_vals: dict[str, str] = field(default_factory=dict)
    array_vals: dict[str, tuple] = field(default_factory=dict)

    def as_state(self) -> dict[str, object]:
        out: dict[str, object] = {}
        out.update(self.index_vals)
        out.update(self.int_vals)
        out.update(self.enum_vals)
        out.update(self.array_vals)
        return out


@dataclass
class SatResult:
    verdict: Verdict
    model: Model | None = None
    reason: str | None = None


_ZIDX = ("0idx",)
_ZINT = ("0int",)


def _term_key(t: Term) -> tuple:
    return ("t", format_term(t))


def _arith_node(t: Term) -> tuple[tuple, int]:
    """Map an index/int term to (graph node, constant offset)."""
    match t:
        case Var(name, _):
            return (("v", name), 0)
        case IndexConst(v):
            return (_ZIDX, v)
        case IntConst(v):
            return (_ZINT, v)
        case Offset(base, k):
            return (("v", base.name), k)
        case Read():
            return (_term_key(t), 0)
    raise UnsupportedTerm(f"term {format_term(t)} is outside difference arithmetic")


def _canon_key(a: Atom) -> tuple:
    l, r = format_term(a.lhs), format_term(a.rhs)
    if a.rel in (Rel.EQ, Rel.NE) and r < l:
        l, r = r, l
    return (a.rel.value, l, r)


class _DiffGraph:
    """Difference-bound constraints  v - u <= w  with trail-based undo.

    Node potentials are maintained incrementally; adding an edge that closes
    a negative cycle is reported immediately (any new cycle must pass
    through the new edge, so it shows up as a relaxation of its source).
    """

    __slots__ = ("dist", "adj", "trail")

    def __init__(self) -> None:
        self.dist: dict[tuple, int] = {}
        self.adj: dict[tuple, list[tuple[tuple, int]]] = {}
        self.trail: list[tuple] = []

    def mark(self) -> int:
        return len(self.trail)

    def rollback(self, mark: int) -> None:
        while len(self.trail) > mark:
            op = self.trail.pop()
            if op[0] == "n":
                del self.dist[op[1]]
                del self.adj[op[1]]
            elif op[0] == "e":
                self.adj[op[1]].pop()
            else:
                self.dist[op[1]] = op[2]

    def _ensure(self, n: tuple) -> None:
        if n not in self.dist:
            self.dist[n] = 0
            self.adj[n] = []
            self.trail.append(("n", n))

    def add_edge(self, u: tuple, v: tuple, w: int) -> bool:
        """False when the edge closes a negative cycle."""
        self._ensure(u)
        self._ensure(v)
        self.adj[u].append((v, w))
        self.trail.append(("e", u))
        dist = self.dist
        nd = dist[u] + w
        if nd >= dist[v]:
            return True
        self.trail.append(("d", v, dist[v]))
        dist[v] = nd
        queue = deque([v])
        while queue:
            x = queue.popleft()
            dx = dist[x]
            for y, wy in self.adj[x]:
                ny = dx + wy
                if ny < dist[y]:
                    if y == u:
                        return False
                    self.trail.append(("d", y, dist[y]))
                    dist[y] = ny
                    queue.append(y)
        return True


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _lit_edges(a: Atom) -> tuple[tuple[tuple, tuple, int], ...]:
    """Difference edges contributed by pushing the literal a.

    Includes non-negativity of every index-sorted term occurring in it, and
    the relational edge(s) when the atom itself is arithmetic.
    """
    edges: list[tuple[tuple, tuple, int]] = []
    for side in (a.lhs, a.rhs):
        for t in subterms(side):
            if sort_of(t) == INDEX and not isinstance(t, Read):
                node, c = _arith_node(t)
                if node != _ZIDX:
                    edges.append((node, _ZIDX, c))  # 0 - node <= c
    s = sort_of(a.lhs)
    if s in (INDEX, INT):
        n1, c1 = _arith_node(a.lhs)
        n2, c2 = _arith_node(a.rhs)
        if a.rel == Rel.LE:
            edges.append((n2, n1, c2 - c1))  # n1 - n2 <= c2 - c1
        elif a.rel == Rel.LT:
            edges.append((n2, n1, c2 - c1 - 1))
        elif a.rel == Rel.EQ:
            edges.append((n2, n1, c2 - c1))
            edges.append((n1, n2, c1 - c2))
        else:
            raise UnsupportedTerm("disequality reached the arithmetic core")
    return tuple(edges)


class SolverSession:
    """A reusable checking context with deterministic behaviour.

    One session per engine run: it owns the query counter used for optional
    query dumps and the statistics counter of ground checks.
    """

    def __init__(
        self,
        diffarith: bool = False,
        step_budget: int = 200_000,
        dump_dir: str | None = None,
    ) -> None:
        self.diffarith = diffarith
        self.step_budget = step_budget
        self.dump_dir = dump_dir
        self.calls = 0
        self._dump_counter = 0
        self._lit_cache: dict[Atom, tuple] = {}

    # ------------------------------------------------------------------
    # ground satisfiability
    # ------------------------------------------------------------------

    def check_sat_ground(self, f: Formula) -> SatResult:
        """Decide a quantifier-free formula; never returns Unknown."""
        self.calls += 1
        self._dump(f, "ground")
        g = simplify(to_nnf(reduce_read_over_write(f)))
        if not is_quantifier_free(g):
            raise UnsupportedTerm("ground check on a quantified formula")
        if isinstance(g, TrueF):
            return SatResult(Verdict.SAT, self._default_model(f))
        if isinstance(g, FalseF):
            return SatResult(Verdict.UNSAT)

        units: list[tuple] = []
        unit_keys: set[tuple] = set()
        clauses: list[list] = []
        graph = _DiffGraph()
        try:
            self._push_formula(g, units, unit_keys, clauses)
        except _BranchFalse:
            return SatResult(Verdict.UNSAT)
        clauses.extend(self._ackermann_clauses(g))
        for lit in units:
            if lit[2] in unit_keys:
                return SatResult(Verdict.UNSAT)
            for u, v, w in lit[3]:
                if not graph.add_edge(u, v, w):
                    return SatResult(Verdict.UNSAT)

        steps = [0]
        model_units = self._search(units, unit_keys, clauses, graph, steps)
        if model_units is None:
            return SatResult(Verdict.UNSAT)
        model = self._build_model([l[0] for l in model_units], graph, g, f)
        if not oracle.eval_formula(_complete_state(model, f), f, model.domain_size):
            raise InternalSolverError(f"model fails its own query: {format_formula(f)}")
        return SatResult(Verdict.SAT, model)

    def _lit(self, a: Atom) -> tuple:
        cached = self._lit_cache.get(a)
        if cached is None:
            cached = (a, _canon_key(a), _canon_key(negate_atom(a)), _lit_edges(a))
            self._lit_cache[a] = cached
        return cached

    def _push_formula(self, g, units, unit_keys, clauses) -> None:
        match g:
            case And(items):
                for item in items:
                    self._push_formula(item, units, unit_keys, clauses)
            case Or(items):
                clauses.append(self._make_clause(items))
            case Atom():
                if g.rel == Rel.NE and sort_of(g.lhs) in (INDEX, INT):
                    clauses.append(self._make_clause((lt(g.lhs, g.rhs), lt(g.rhs, g.lhs))))
                else:
                    lit = self._lit(g)
                    if lit[1] not in unit_keys:
                        unit_keys.add(lit[1])
                        units.append(lit)
            case TrueF():
                pass
            case FalseF():
                raise _BranchFalse
            case _:
                raise UnsupportedTerm(f"unexpected {g!r} in ground search")

    def _make_clause(self, items) -> list:
        """A clause is a list of alternatives: ('lit', lit) or ('sub', f)."""
        alts = []
        for item in items:
            s = simplify(item)
            if isinstance(s, FalseF):
                continue
            if isinstance(s, TrueF):
                return [("true", None)]
            if isinstance(s, Atom):
                if s.rel == Rel.NE and sort_of(s.lhs) in (INDEX, INT):
                    alts.append(("lit", self._lit(lt(s.lhs, s.rhs))))
                    alts.append(("lit", self._lit(lt(s.rhs, s.lhs))))
                else:
                    alts.append(("lit", self._lit(s)))
            else:
                alts.append(("sub", s))
        return alts

    def _ackermann_clauses(self, g: Formula) -> list[list]:
        reads: dict[str, list[Read]] = {}
        seen: set[str] = set()
        for t in terms_of(g):
            if isinstance(t, Read):
                if not isinstance(t.array, Var):
                    raise UnsupportedTerm("read over an unreduced array term")
                key = format_term(t)
                if key not in seen:
                    seen.add(key)
                    reads.setdefault(t.array.name, []).append(t)
        out: list[list] = []
        for name in sorted(reads):
            rs = reads[name]
            for i in range(len(rs)):
                for j in range(i + 1, len(rs)):
                    r1, r2 = rs[i], rs[j]
                    cl = self._make_clause(
                        (lt(r1.index, r2.index), lt(r2.index, r1.index), eq(r1, r2))
                    )
                    if cl != [("true", None)]:
                        out.append(cl)
        return out

    def _search(self, units, unit_keys, clauses, graph, steps):
        """Backtracking over clause alternatives with a shared trail."""
        steps[0] += 1
        if steps[0] > self.step_budget:
            raise SolverBudgetExceeded(f"ground search exceeded {self.step_budget} steps")

        # Scan clauses: drop satisfied ones, collect viable alternatives,
        # pick the most constrained clause to branch on.
        live: list[list] = []
        best_alts = None
        best_pos = -1
        for cl in clauses:
            alts = []
            satisfied = False
            for alt in cl:
                kind, payload = alt
                if kind == "true":
                    satisfied = True
                    break
                if kind == "lit":
                    if payload[1] in unit_keys:
                        satisfied = True
                        break
                    if payload[2] in unit_keys:
                        continue
                alts.append(alt)
            if satisfied:
                continue
            if not alts:
                return None
            live.append(alts)
            if best_alts is None or len(alts) < len(best_alts):
                best_alts = alts
                best_pos = len(live) - 1
        if best_alts is None:
            atoms = [l[0] for l in units]
            return list(units) if self._enum_check(atoms) is not None else None

        rest = live[:best_pos] + live[best_pos + 1 :]
        for kind, payload in best_alts:
            unit_mark = len(units)
            graph_mark = graph.mark()
            added_keys: list[tuple] = []
            new_clauses: list[list] = []
            pending: list[tuple] = []
            pending_keys: set[tuple] = set()
            try:
                if kind == "lit":
                    pending.append(payload)
                    pending_keys.add(payload[1])
                else:
                    self._push_formula(payload, pending, pending_keys, new_clauses)
            except _BranchFalse:
                continue
            conflict = False
            for lit in pending:
                if lit[2] in unit_keys or lit[2] in pending_keys:
                    conflict = True
                    break
            if not conflict:
                for lit in pending:
                    if lit[1] in unit_keys:
                        continue
                    ok = True
                    for u, v, w in lit[3]:
                        if not graph.add_edge(u, v, w):
                            ok = False
                            break
                    if not ok:
                        conflict = True
                        break
                    unit_keys.add(lit[1])
                    added_keys.append(lit[1])
                    units.append(lit)
            if not conflict:
                result = self._search(units, unit_keys, rest + new_clauses, graph, steps)
                if result is not None:
                    return result
            del units[unit_mark:]
            for key in added_keys:
                unit_keys.discard(key)
            graph.rollback(graph_mark)
        return None

    # ------------------------------------------------------------------
    # congruence over enumerated terms (leaf check)
    # ------------------------------------------------------------------

    def _enum_check(self, units: list[Atom]):
        enum_eq: list[tuple[Term, Term]] = []
        enum_ne: list[tuple[Term, Term]] = []
        for a in units:
            s = sort_of(a.lhs)
            if isinstance(s, EnumSort):
                if a.rel == Rel.EQ:
                    enum_eq.append((a.lhs, a.rhs))
                elif a.rel == Rel.NE:
                    enum_ne.append((a.lhs, a.rhs))
                else:
                    raise UnsupportedTerm("ordering over enum terms")
            elif s not in (INDEX, INT):
                raise UnsupportedTerm(f"literal over unsupported sort {s}")

        uf = _UnionFind()
        sorts: dict[tuple, EnumSort] = {}
        consts: dict[tuple, str] = {}
        terms: dict[tuple, Term] = {}

        def register(t: Term) -> tuple:
            k = _term_key(t)
            terms[k] = t
            sorts[k] = sort_of(t)  # type: ignore[assignment]
            uf.find(k)
            if isinstance(t, EnumConst):
                consts[k] = t.value
            return k

        for a in units:
            if isinstance(sort_of(a.lhs), EnumSort):
                register(a.lhs)
                register(a.rhs)
        for l, r in enum_eq:
            uf.union(_term_key(l), _term_key(r))

        class_const: dict[tuple, str] = {}
        for k, c in consts.items():
            root = uf.find(k)
            if root in class_const and class_const[root] != c:
                return None
            class_const[root] = c
        ne_pairs: list[tuple[tuple, tuple]] = []
        for l, r in enum_ne:
            rl, rr = uf.find(_term_key(l)), uf.find(_term_key(r))
            if rl == rr:
                return None
            ne_pairs.append((rl, rr))
        for rl, rr in ne_pairs:
            if rl in class_const and rr in class_const and class_const[rl] == class_const[rr]:
                return None

        roots = sorted({uf.find(k) for k in terms})
        unassigned = [r for r in roots if r not in class_const]
        neighbors: dict[tuple, list[tuple]] = {r: [] for r in roots}
        for rl, rr in ne_pairs:
            neighbors[rl].append(rr)
            neighbors[rr].append(rl)
        root_sort: dict[tuple, EnumSort] = {}
        for k in terms:
            root_sort.setdefault(uf.find(k), sorts[k])

        assignment = dict(class_const)

        def assign(i: int) -> bool:
            if i == len(unassigned):
                return True
            r = unassigned[i]
            for c in root_sort[r].constants:
                if any(assignment.get(nb) == c for nb in neighbors[r]):
                    continue
                assignment[r] = c
                if assign(i + 1):
                    return True
                del assignment[r]
            return False

        if not assign(0):
            return None
        self._last_enum = (uf, assignment)
        return assignment

    # ------------------------------------------------------------------
    # model construction
    # ------------------------------------------------------------------

    def _default_model(self, f: Formula) -> Model:
        model = Model(domain_size=1)
        for v in sorted(free_vars(f), key=lambda v: v.name):
            _set_default(model, v, 1)
        return model

    def _build_model(self, units: list[Atom], graph: _DiffGraph, normalized: Formula,
                     original: Formula) -> Model:
        dist = graph.dist
        uf, enum_assignment = getattr(self, "_last_enum", (_UnionFind(), {}))

        def arith_val(t: Term) -> int:
            node, c = _arith_node(t)
            zero = _ZIDX if sort_of(t) == INDEX else _ZINT
            return dist.get(node, 0) - dist.get(zero, 0) + c

        # Domain size must cover every index term of the whole formula, not
        # just the satisfied branch, so evaluation never falls off the array.
        index_terms: list[Term] = []
        seen: set[str] = set()
        has_index_arith = False
        for t in terms_of(normalized):
            if sort_of(t) == INDEX and not isinstance(t, Read):
                if isinstance(t, (Offset, IndexConst)):
                    has_index_arith = True
                k = format_term(t)
                if k not in seen:
                    seen.add(k)
                    index_terms.append(t)

        raw_vals = {format_term(t): arith_val(t) for t in index_terms}
        if not has_index_arith and raw_vals:
            ranked = {v: i for i, v in enumerate(sorted(set(raw_vals.values())))}
            raw_vals = {k: ranked[v] for k, v in raw_vals.items()}
        n = max(raw_vals.values(), default=0) + 1

        def index_val(t: Term) -> int:
            return raw_vals[format_term(t)]

        model = Model(domain_size=n)
        for v in sorted(free_vars(original), key=lambda v: v.name):
            _set_default(model, v, n)
        for t in index_terms:
            if isinstance(t, Var):
                model.index_vals[t.name] = index_val(t)
        for a in units:
            for side in (a.lhs, a.rhs):
                for t in subterms(side):
                    if isinstance(t, Var) and t.sort == INT:
                        model.int_vals[t.name] = arith_val(t)
        for a in units:
            if isinstance(sort_of(a.lhs), EnumSort):
                for side in (a.lhs, a.rhs):
                    if isinstance(side, Var):
                        root = uf.find(_term_key(side))
                        model.enum_vals[side.name] = enum_assignment.get(
                            root, side.sort.constants[0]  # type: ignore[union-attr]
                        )
        # array cells pinned by the reads of the chosen branch
        for a in units:
            for side in (a.lhs, a.rhs):
                for t in subterms(side):
                    if isinstance(t, Read) and isinstance(t.array, Var):
                        name = t.array.name
                        table = list(model.array_vals.get(name, ()))
                        if not table:
                            elem = t.array.sort.elem  # type: ignore[union-attr]
                            table = [_default_value(elem)] * n
                        cell = index_val(t.index)
                        if isinstance(sort_of(t), EnumSort):
                            root = uf.find(_term_key(t))
                            val = enum_assignment.get(root, table[cell])
                        else:
                            val = arith_val(t)
                        table[cell] = val
                        model.array_vals[name] = tuple(table)
        return model

    # ------------------------------------------------------------------
    # existential / universal combination
    # ------------------------------------------------------------------

    def check_sat_exists_forall(self, ex: Formula, univ: Formula) -> SatResult:
        """Satisfiability of ex ∧ univ (ex existential, univ universal facts)."""
        self._dump(conj([ex, univ]), "exists-forall")
        evars, ematrix = strip_exists(ex)
        if not is_quantifier_free(ematrix):
            raise UnsupportedTerm("existential part must have a quantifier-free matrix")
        skolem = {v.name: fresh_var(v.name, v.sort) for v in evars}
        ematrix_sk = substitute(ematrix, skolem) if skolem else ematrix

        universals, grounds = _split_universal(univ)

        def instantiation_terms(extra: Iterable[Term] = ()) -> list[Term]:
            terms: list[Term] = []
            seen: set[str] = set()

            def add(t: Term) -> None:
                k = format_term(t)
                if k not in seen:
                    seen.add(k)
                    terms.append(t)

            pool: list[Formula] = [ematrix_sk] + grounds + [m for _, m in universals]
            bound = {v.name for vs, _ in universals for v in vs}
            for g in [ematrix_sk] + grounds:
                for v in sorted(free_vars(g), key=lambda v: v.name):
                    if v.sort == INDEX:
                        add(v)
            for g in pool:
                for t in terms_of(g):
                    if isinstance(t, IndexConst):
                        add(t)
                    elif isinstance(t, Offset) and sort_of(t) == INDEX:
                        if t.base.name not in bound:
                            add(t)
            for t in extra:
                add(t)
            if not terms:
                add(fresh_var("k", INDEX))
            return terms

        def ground_query(terms: list[Term]) -> Formula:
            parts: list[Formula] = [ematrix_sk] + grounds
            for vs, matrix in universals:
                for combo in itertools.product(terms, repeat=len(vs)):
                    try:
                        inst = simplify(
                            substitute(matrix, {v.name: t for v, t in zip(vs, combo)})
                        )
                    except IndexUnderflow:
                        continue
                    if isinstance(inst, TrueF):
                        continue
                    parts.append(inst)
            return conj(parts)

        try:
            res = self.check_sat_ground(ground_query(instantiation_terms()))
        except SolverBudgetExceeded:
            if self.diffarith:
                return SatResult(Verdict.UNKNOWN, reason="resource budget exceeded")
            raise
        if res.verdict == Verdict.UNSAT:
            return res
        assert res.model is not None
        original = conj([ex, univ])
        if self._model_satisfies(res.model, original):
            return res
        if not self.diffarith:
            raise InternalSolverError(
                "instantiation produced an invalid model in the simple theory"
            )
        # one more round over the concrete indexes of the candidate model
        extra = [IndexConst(i) for i in range(res.model.domain_size)]
        try:
            res2 = self.check_sat_ground(ground_query(instantiation_terms(extra)))
        except SolverBudgetExceeded:
            return SatResult(Verdict.UNKNOWN, reason="resource budget exceeded")
        if res2.verdict == Verdict.UNSAT:
            return res2
        assert res2.model is not None
        if self._model_satisfies(res2.model, original):
            return res2
        return SatResult(Verdict.UNKNOWN, reason="candidate model failed validation")

    def _model_satisfies(self, model: Model, f: Formula) -> bool:
        state = _complete_state(model, f)
        return oracle.eval_formula(state, f, model.domain_size)

    def entails(self, f: Formula, g: Formula) -> Entailment:
        """Yes iff f ∧ ¬g is unsatisfiable; Unknown must be read as 'not entailed'."""
        res = self.check_sat_exists_forall(f, to_nnf(neg(g)))
        if res.verdict == Verdict.UNSAT:
            return Entailment.YES
        if res.verdict == Verdict.SAT:
            return Entailment.NO
        return Entailment.UNKNOWN

    # ------------------------------------------------------------------
    # query export
    # ------------------------------------------------------------------

    def _dump(self, f: Formula, kind: str) -> None:
        if self.dump_dir is None:
            return
        os.makedirs(self.dump_dir, exist_ok=True)
        self._dump_counter += 1
        path = os.path.join(self.dump_dir, f"q{self._dump_counter:04d}.smt2")
        decls = []
        for v in sorted(free_vars(f), key=lambda v: v.name):
            decls.append(f"(declare-fun {v.name} () {v.sort})")
        with open(path, "w") as fh:
            fh.write(f"; kind: {kind}\n")
            fh.write("\n".join(decls))
            fh.write(f"\n(assert {format_formula(f)})\n(check-sat)\n")


def _split_universal(univ: Formula) -> tuple[list[tuple[tuple[Var, ...], Formula]], list[Formula]]:
    universals: list[tuple[tuple[Var, ...], Formula]] = []
    grounds: list[Formula] = []

    def walk(g: Formula) -> None:
        if isinstance(g, And):
            for item in g.items:
                walk(item)
        elif isinstance(g, Forall):
            vs, matrix = strip_forall(g)
            if not is_quantifier_free(matrix):
                raise UnsupportedTerm("nested quantifier under a universal")
            universals.append((vs, matrix))
        elif isinstance(g, TrueF):
            pass
        elif is_quantifier_free(g):
            grounds.append(g)
        else:
            raise UnsupportedTerm("universal part must be a conjunction of universal facts")

    walk(univ)
    return universals, grounds


def _default_value(sort):
    if isinstance(sort, EnumSort):
        return sort.constants[0]
    if sort == INT or sort == INDEX:
        return 0
    raise UnsupportedTerm(f"no default value for {sort}")


def _set_default(model: Model, v: Var, n: int) -> None:
    if isinstance(v.sort, ArraySort):
        model.array_vals.setdefault(v.name, tuple([_default_value(v.sort.elem)] * n))
    elif v.sort == INDEX:
        model.index_vals.setdefault(v.name, 0)
    elif v.sort == INT:
        model.int_vals.setdefault(v.name, 0)
    elif isinstance(v.sort, EnumSort):
        model.enum_vals.setdefault(v.name, v.sort.constants[0])


def _complete_state(model: Model, f: Formula) -> dict[str, object]:
    state = model.as_state()
    for v in free_vars(f):
        if v.name not in state:
            if isinstance(v.sort, ArraySort):
                state[v.name] = tuple([_default_value(v.sort.elem)] * model.domain_size)
            else:
                state[v.name] = _default_value(v.sort)
    return state
