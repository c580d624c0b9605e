"""Backward reachability with per-transition preimages and subsumption.

The frontier starts from the disjuncts of the unsafe condition. Each node's
preimage under each transition is split into disjuncts; inconsistent
disjuncts are pruned, nodes intersecting the initial condition report
unsafe, and nodes entailed by everything reached so far are marked deleted
(subsumed). The search is safe when the queue empties. Universally guarded
preimages are weakened by run-time monotonic abstraction (or the system is
crash-transformed up front); without either the run aborts as unknown.

The exploration order is a fixed FIFO over (depth, transition index,
disjunct index), so two runs with the same configuration produce identical
node sequences and reports.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace

from .abstraction import (
    InstantiationSet,
    abstract_formula,
    all_vars_instantiation_set,
    default_instantiation_set,
    transform_problem,
)
from .acceleration import add_accelerations
from .logic import (
    DnfBudgetExceeded,
    FalseF,
    Forall,
    Formula,
    TrueF,
    conj,
    disj,
    dnf_disjuncts,
    exists,
    format_formula,
    free_vars,
    fresh_var,
    has_universal,
    reduce_read_over_write,
    rename_apart,
    reset_fresh_names,
    simplify,
    strip_exists,
    substitute,
    substitute_term,
    to_nnf,
)
from .logic import INDEX
from .oracle import FiniteInstance, TooLarge
from .solver import (
    Entailment,
    SolverBudgetExceeded,
    SolverSession,
    Verdict,
)
from .system import SafetyProblem, Theory, Transition


@dataclass
class EngineConfig:
    max_iters: int = 200
    max_nodes: int = 20_000
    abstraction: str = "runtime"  # runtime | transform | off
    accelerate: bool = False
    inst_set: str = "default"  # default | all-vars
    concretize: bool = True
    max_oracle_n: int = 6
    solver_budget: int = 200_000
    dump_frontier: str | None = None
    dump_queries: str | None = None


@dataclass
class Node:
    id: int
    depth: int
    formula: Formula
    parent: int | None
    via: str | None
    base_via: str | None
    abstracted: bool
    accelerated: bool
    deleted: bool = False


@dataclass(frozen=True)
class TraceStep:
    transition: str
    base: str
    abstracted: bool
    accelerated: bool


@dataclass(frozen=True)
class Trace:
    steps: tuple[TraceStep, ...]
    initial_formula: Formula
    unsafe_formula: Formula


@dataclass(frozen=True)
class Concretization:
    status: str  # confirmed | spurious | unknown
    n: int | None = None


@dataclass
class BackwardResult:
    verdict: str  # safe | unsafe | unknown | resource-limit
    reason: str | None = None
    trace: Trace | None = None
    concretization: Concretization | None = None
    iterations: int = 0
    stats: dict[str, int] = field(default_factory=dict)
    nodes: list[Node] = field(default_factory=list)
    abstraction_events: list[tuple[str, Formula, Formula]] = field(default_factory=list)
    accelerated_names: tuple[str, ...] = ()


def preimage(t: Transition, k: Formula) -> Formula:
    """States with a one-step t-successor satisfying k.

    Functional and ground transitions yield an existential formula; a
    universal guard (plain or accelerated) is kept intact in the matrix and
    must be abstracted or rejected by the caller.
    """
    k = rename_apart(k)
    k_vars, k_matrix = strip_exists(k)

    ren = {v.name: fresh_var(v.name, v.sort) for v in t.ex_vars}
    kvar = fresh_var(t.univ_var.name, INDEX) if t.univ_var is not None else None
    guard = substitute(t.guard, ren) if ren else t.guard
    updates = {
        name: (substitute_term(term, ren) if ren else term) for name, term in t.updates
    }
    parts = [guard]
    if t.univ_var is not None:
        assert t.univ_body is not None and kvar is not None
        body = substitute(t.univ_body, {**ren, t.univ_var.name: kvar})
        parts.append(Forall((kvar,), body))
    parts.append(substitute(k_matrix, updates))
    prefix = tuple(ren[v.name] for v in t.ex_vars) + k_vars
    return exists(prefix, conj(parts))


def eliminate_prefix_equalities(
    prefix: tuple, lits: list
) -> tuple[list, list]:
    """Use equations v = t to drop prefix variables:  ∃v (v=t ∧ φ)  ≡  φ[t/v]."""
    pvars = list(prefix)
    cur = list(lits)
    changed = True
    while changed:
        changed = False
        for i, a in enumerate(cur):
            if getattr(a, "rel", None) is not None and a.rel.value == "=":
                for v, t in ((a.lhs, a.rhs), (a.rhs, a.lhs)):
                    if v in pvars and not _occurs(v, t):
                        sub = {v.name: t}
                        cur = [
                            simplify(substitute(g, sub))
                            for j, g in enumerate(cur)
                            if j != i
                        ]
                        pvars.remove(v)
                        changed = True
                        break
                if changed:
                    break
    return pvars, cur


def _occurs(v, t) -> bool:
    from .logic import free_vars_term

    return v in free_vars_term(t)


def fixpoint_check(
    session: SolverSession,
    k_new: Formula,
    reached: list[Formula],
    probe: tuple[dict, int] | None = None,
) -> bool:
    """True iff k_new is entailed by the disjunction of reached formulas.

    probe is a model of k_new (from its consistency check): any reached
    formula false on it cannot cover k_new alone, and if none holds on it
    the disjunction cannot either, so most solver calls are skipped.
    Single reached formulas are tried before the joint disjunction check.
    An Unknown from the solver counts as not covered: sound, possibly more
    work for the search.
    """
    if not reached:
        return False
    candidates = reached
    if probe is not None:
        state, n = probe
        candidates = [b for b in reached if _probe_eval(state, b, n)]
        if not candidates:
            return False
    for b in candidates:
        if session.entails(k_new, b) == Entailment.YES:
            return True
    if len(reached) > 1:
        return session.entails(k_new, disj(reached)) == Entailment.YES
    return False


def _probe_eval(state: dict, b: Formula, n: int) -> bool:
    from .oracle import eval_formula
    from .solver import _default_value
    from .logic import ArraySort

    full = dict(state)
    for v in free_vars(b):
        if v.name not in full:
            if isinstance(v.sort, ArraySort):
                full[v.name] = tuple([_default_value(v.sort.elem)] * n)
            else:
                full[v.name] = _default_value(v.sort)
    return eval_formula(full, b, n)


def extract_trace(nodes: dict[int, Node], n: Node) -> Trace:
    steps: list[TraceStep] = []
    cur: Node | None = n
    last = n
    while cur is not None and cur.via is not None:
        steps.append(
            TraceStep(
                transition=cur.via,
                base=cur.base_via or cur.via,
                abstracted=cur.abstracted,
                accelerated=cur.accelerated,
            )
        )
        last = cur
        cur = nodes.get(cur.parent) if cur.parent is not None else None
    root = cur if cur is not None else last
    return Trace(
        steps=tuple(steps),
        initial_formula=n.formula,
        unsafe_formula=root.formula,
    )


def concretize_trace(
    trace: Trace, problem: SafetyProblem, cfg: EngineConfig
) -> Concretization:
    """Replay the trace on finite instances; fall back to an exact re-run."""
    steps = [(s.base, s.accelerated) for s in trace.steps]
    hi = len(steps) + 2
    for n in range(1, cfg.max_oracle_n + 1):
        try:
            inst = FiniteInstance(problem, n, -hi, hi)
            if inst.replay_trace(steps):
                return Concretization("confirmed", n)
        except TooLarge:
            continue
    exact_cfg = replace(
        cfg,
        abstraction="off",
        accelerate=False,
        concretize=False,
        max_iters=max(len(steps), 1),
        dump_frontier=None,
        dump_queries=None,
    )
    res = backward_reach(problem, exact_cfg)
    if res.verdict in ("safe", "resource-limit"):
        return Concretization("spurious")
    return Concretization("unknown")


def backward_reach(problem: SafetyProblem, cfg: EngineConfig | None = None) -> BackwardResult:
    cfg = cfg or EngineConfig()
    reset_fresh_names()

    p = problem
    accelerated_names: tuple[str, ...] = ()
    if cfg.abstraction == "transform":
        p = transform_problem(p)
    if cfg.accelerate:
        p, accelerated_names = add_accelerations(p)

    diffarith = p.theory == Theory.DIFFARITH
    session = SolverSession(
        diffarith=diffarith, step_budget=cfg.solver_budget, dump_dir=cfg.dump_queries
    )
    result = BackwardResult(verdict="unknown", accelerated_names=accelerated_names)
    nodes_by_id: dict[int, Node] = {}
    reached: list[Formula] = []
    queue: deque[Node] = deque()
    stats = {"nodes": 0, "deleted": 0, "pruned": 0}
    dump_records: list[dict] = []

    def finish(verdict: str, reason: str | None = None, **kw) -> BackwardResult:
        result.verdict = verdict
        result.reason = reason
        result.stats = dict(stats, solver_calls=session.calls)
        result.nodes = [nodes_by_id[i] for i in sorted(nodes_by_id)]
        for key, val in kw.items():
            setattr(result, key, val)
        if cfg.dump_frontier:
            with open(cfg.dump_frontier, "w") as fh:
                for rec in dump_records:
                    fh.write(json.dumps(rec) + "\n")
        return result

    def record(node: Node, status: str) -> None:
        dump_records.append(
            {
                "id": node.id,
                "depth": node.depth,
                "via": node.via,
                "abstracted": node.abstracted,
                "accelerated": node.accelerated,
                "status": status,
                "formula": format_formula(node.formula),
            }
        )

    next_id = [0]

    def new_node(formula: Formula, depth: int, parent: int | None, t: Transition | None,
                 abstracted: bool) -> Node:
        node = Node(
            id=next_id[0],
            depth=depth,
            formula=formula,
            parent=parent,
            via=t.name if t else None,
            base_via=(t.base_name or t.name) if t else None,
            abstracted=abstracted or (t.abstracted if t else False),
            accelerated=t.accelerated if t else False,
        )
        next_id[0] += 1
        nodes_by_id[node.id] = node
        stats["nodes"] += 1
        return node

    def split_disjuncts(f: Formula) -> list[Formula]:
        prefix, matrix = strip_exists(f)
        matrix = simplify(to_nnf(reduce_read_over_write(matrix)))
        if isinstance(matrix, FalseF):
            return []
        if isinstance(matrix, TrueF):
            return [TrueF()]
        out = []
        for lits in dnf_disjuncts(matrix, budget=cfg.solver_budget):
            pvars, reduced = eliminate_prefix_equalities(prefix, list(lits))
            body = simplify(conj(reduced))
            if isinstance(body, FalseF):
                continue
            live = free_vars(body)
            out.append(exists([v for v in pvars if v in live], body))
        return out

    def node_matrix(f: Formula) -> Formula:
        _, matrix = strip_exists(f)
        return matrix

    # roots: the disjuncts of the unsafe condition
    unsafe = rename_apart(p.unsafe)
    try:
        root_formulas = split_disjuncts(unsafe)
    except DnfBudgetExceeded as e:
        return finish("resource-limit", str(e))
    for kf in root_formulas:
        node = new_node(kf, 0, None, None, False)
        try:
            res = session.check_sat_exists_forall(kf, p.init)
        except SolverBudgetExceeded as e:
            return finish("resource-limit", str(e))
        if res.verdict == Verdict.SAT:
            trace = extract_trace(nodes_by_id, node)
            record(node, "unsafe")
            conc = concretize_trace(trace, problem, cfg) if cfg.concretize else None
            return finish("unsafe", None, trace=trace, concretization=conc)
        if res.verdict == Verdict.UNKNOWN:
            return finish("unknown", f"safety test inconclusive: {res.reason}")
        reached.append(kf)
        queue.append(node)
        record(node, "frontier")

    transitions = list(p.transitions)

    while queue:
        n = queue.popleft()
        if n.depth + 1 > cfg.max_iters:
            return finish("resource-limit", "iteration budget exhausted")
        for t in transitions:
            try:
                pre = preimage(t, n.formula)
                abstracted = False
                if has_universal(pre):
                    if cfg.abstraction == "off":
                        return finish("unknown", "universal guard without abstraction")
                    if cfg.inst_set == "all-vars":
                        x: InstantiationSet = all_vars_instantiation_set(pre)
                    else:
                        x = default_instantiation_set(pre, diffarith)
                    weakened = abstract_formula(pre, x)
                    result.abstraction_events.append((t.name, pre, weakened))
                    pre = weakened
                    abstracted = True
                disjuncts = split_disjuncts(pre)
            except (DnfBudgetExceeded, SolverBudgetExceeded) as e:
                return finish("resource-limit", str(e))
            for kf in disjuncts:
                try:
                    consistent = session.check_sat_ground(node_matrix(kf))
                    if consistent.verdict == Verdict.UNSAT:
                        stats["pruned"] += 1
                        continue
                    assert consistent.model is not None
                    probe = (consistent.model.as_state(), consistent.model.domain_size)
                    node = new_node(kf, n.depth + 1, n.id, t, abstracted)
                    result.iterations = max(result.iterations, node.depth)
                    if stats["nodes"] > cfg.max_nodes:
                        return finish("resource-limit", "node budget exhausted")
                    res = session.check_sat_exists_forall(kf, p.init)
                    if res.verdict == Verdict.SAT:
                        record(node, "unsafe")
                        trace = extract_trace(nodes_by_id, node)
                        conc = (
                            concretize_trace(trace, problem, cfg) if cfg.concretize else None
                        )
                        return finish("unsafe", None, trace=trace, concretization=conc)
                    if res.verdict == Verdict.UNKNOWN:
                        return finish(
                            "unknown", f"safety test inconclusive: {res.reason}"
                        )
                    if fixpoint_check(session, kf, reached, probe):
                        node.deleted = True
                        stats["deleted"] += 1
                        record(node, "subsumed")
                        continue
                    reached.append(kf)
                    queue.append(node)
                    record(node, "frontier")
                except SolverBudgetExceeded as e:
                    return finish("resource-limit", str(e))
    return finish("safe")
