"""Oracle-guided SAT attack, cycle preconditioning, CP&SAT, key matching."""

import itertools
import json
import logging
import math
import os
import random
import time
from dataclasses import dataclass, field

from .cnf import CNF, build_miter, rename_copy, stats, tseitin
from .errors import (
    CycleBudgetExceeded,
    CyclicNetlist,
    KeylockError,
    MatchFailed,
    TwistedLogic,
)
from .locking import detach_inverters, verify_locked
from .preprocess import one_layer_linear_encode, simple_bva
from .solver import SAT, TIMEOUT, UNSAT, ExternalSession, Session

log = logging.getLogger(__name__)


class Oracle:
    """Query-only stand-in for an unlocked chip."""

    def __init__(self, original):
        self._n = original
        self.queries = 0

    def query(self, pi):
        self.queries += 1
        return self._n.simulate(pi)


@dataclass
class AttackReport:
    method: str                      # "sat" | "cpsat"
    status: str                      # "Solved" | "Timeout"
    iterations: int = 0
    dips: list = field(default_factory=list)   # (pi bits, oracle output bits)
    key: list = None
    wall_time_s: float = 0.0
    queries: int = 0
    decisions: int = 0
    conflicts: int = 0
    propagations: int = 0
    per_iteration: list = field(default_factory=list)  # (decisions, conflicts) deltas
    cnf_before: dict = None
    cnf_after: dict = None
    bva_reduction: dict = field(default_factory=dict)  # rb name -> before/after/factor
    cycle_clauses: int = 0
    notes: list = field(default_factory=list)

    def to_json(self):
        d = dict(self.__dict__)
        d["dips"] = [{"pi": list(pi), "out": list(out)} for pi, out in self.dips]
        return json.dumps(d, indent=2)


def make_session(cnf, solver=None, seed=0):
    solver = solver or os.environ.get("KEYLOCK_SOLVER")
    if solver:
        return ExternalSession(cnf, solver, seed=seed)
    return Session(cnf, seed=seed)


# -- cycle preconditioning -------------------------------------------------

def cycle_precondition(d, budget=20000):
    """Clauses over key nets forbidding every key-enabled structural cycle.

    Edges whose presence depends on a key bit (MUX2 data inputs selected by
    a key) carry that condition; a cycle is forbidden by a clause negating
    one enabling literal per hop. Clauses are returned as tuples of
    (key net name, required value) pairs, one tuple per forbidden
    conjunction; callers translate names to solver literals.
    """
    import networkx as nx
    n = d.netlist
    key_ids = set(n.key_inputs)
    g = nx.DiGraph()
    # conditions[(u, v)]: list of (key name, value) or None (unconditional)
    conditions = {}

    def add_edge(u, v, cond):
        if n.nets[u].kind in ("input", "key", "const"):
            return  # roots cannot lie on a cycle
        lst = conditions.setdefault((u, v), [])
        if lst != [None]:
            if cond is None or (cond[0], not cond[1]) in lst:
                # unconditional, or both polarities present: always closable
                conditions[(u, v)] = [None]
            elif cond not in lst:
                lst.append(cond)
        g.add_edge(u, v)

    for gate in n.gates:
        out = gate.output
        if gate.gtype == "MUX2" and gate.inputs[0] in key_ids:
            sel = n.name_of(gate.inputs[0])
            add_edge(gate.inputs[1], out, (sel, False))
            add_edge(gate.inputs[2], out, (sel, True))
        else:
            for i in gate.inputs:
                add_edge(i, out, None)

    clauses = set()
    count = 0
    for cycle in nx.simple_cycles(g):
        count += 1
        if count > budget:
            raise CycleBudgetExceeded(count)
        hops = []
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            hops.append(conditions[(a, b)])
        if all(h == [None] for h in hops):
            raise CyclicNetlist(
                "structural cycle independent of any key: "
                + " -> ".join(n.name_of(x) for x in cycle))
        conditional = [h for h in hops if h != [None]]
        combos = 1
        for h in conditional:
            combos *= len(h)
        if combos > 256:
            raise CycleBudgetExceeded(count)
        for pick in itertools.product(*conditional):
            clauses.add(frozenset(pick))
    # a conjunction of enabling (name, value) pairs becomes one forbidding clause
    return [tuple(sorted(c)) for c in sorted(clauses, key=sorted)]


def _cycle_clauses_to_lits(clauses, var_of):
    """(name, enabled-value) conjunctions -> CNF clauses of negated literals."""
    out = []
    for conj in clauses:
        out.append(tuple(-var_of(name) if val else var_of(name)
                         for name, val in conj))
    return out


def _selector_cycle_clauses(nl, encoded, budget=20000):
    """Cycle preconditions restated over one-layer selector variables.

    Once a routing block's clauses are replaced by the linear selection
    encoding its original key bits float free, so clauses over those bits
    no longer forbid anything. Here the block collapses to direct
    input -> output edges, each enabled by the selectors that route it,
    and every closable cycle yields a clause negating one selector per hop.
    """
    import networkx as nx
    skip_outputs = set()
    rb_edges = {}    # (u net id, v net id) -> [selector vars]
    for rb, groups, sel_map in encoded:
        skip_outputs.update(rb.host_output_names)
        in_ids = [nl.id_of(nm) for nm in rb.host_input_names]
        out_ids = [nl.id_of(nm) for nm in rb.host_output_names]
        # sel_map: selector -> (output index, source input literal); the
        # source order inside a group repeats each input (twice when both
        # polarities are offered), so recover the input index positionally
        for g in groups:
            src_vars = []
            for x in g.sources:
                if abs(x) not in src_vars:
                    src_vars.append(abs(x))
            for s, x in zip(g.selectors, g.sources):
                j = sel_map[s][0]
                u = in_ids[src_vars.index(abs(x))]
                rb_edges.setdefault((u, out_ids[j]), []).append(s)

    graph = nx.DiGraph()
    conditions = {}
    for (u, v), sels in rb_edges.items():
        if nl.nets[u].kind not in ("input", "key", "const"):
            conditions[(u, v)] = sels
            graph.add_edge(u, v)
    rb_prefixes = tuple(rb.name + "_" for rb, _g, _s in encoded)
    for gate in nl.gates:
        name = nl.name_of(gate.output)
        if name in skip_outputs or name.startswith(rb_prefixes):
            continue
        for i in gate.inputs:
            if nl.nets[i].kind in ("input", "key", "const"):
                continue
            conditions[(i, gate.output)] = None
            graph.add_edge(i, gate.output)

    clauses = set()
    count = 0
    for cycle in nx.simple_cycles(graph):
        count += 1
        if count > budget:
            raise CycleBudgetExceeded(count)
        hops = [conditions[(a, b)]
                for a, b in zip(cycle, cycle[1:] + cycle[:1])]
        conditional = [h for h in hops if h is not None]
        if not conditional:
            raise CyclicNetlist(
                "structural cycle independent of any selection: "
                + " -> ".join(nl.name_of(x) for x in cycle))
        combos = 1
        for h in conditional:
            combos *= len(h)
        if combos > 256:
            raise CycleBudgetExceeded(count)
        for pick in itertools.product(*conditional):
            clauses.add(frozenset(-s for s in pick))
    return [tuple(sorted(c)) for c in sorted(clauses, key=sorted)]


# -- the DIP loop ----------------------------------------------------------

class _Budget:
    def __init__(self, seconds):
        self.deadline = None if seconds is None else time.monotonic() + seconds

    def remaining(self):
        if self.deadline is None:
            return None
        return max(0.0, self.deadline - time.monotonic())

    def exhausted(self):
        return self.deadline is not None and time.monotonic() >= self.deadline


def _attack_loop(cnf, pi_vars, po_vars, key_vars, oracle, budget, report,
                 solver=None, extra_key_clauses=()):
    """Shared miter/DIP loop; fills `report` and returns the session, the
    final model (or None on timeout) and the copy-2 variable map."""
    miter, map2, act, _diffs = build_miter(cnf, pi_vars, po_vars)
    session = make_session(miter, solver=solver)
    for cl in extra_key_clauses:
        session.add_clause(cl)
        # the same restriction must hold for the second key copy
        session.add_clause([map2[abs(l)] if l > 0 else -map2[abs(l)]
                            for l in cl])
    top = [miter.num_vars]

    def add_io_copy(kv_bind, dip, out):
        clauses, mapping, top[0] = rename_copy(cnf, set(), top[0])
        for cl in clauses:
            session.add_clause(cl)
        for k, kb in zip(key_vars, kv_bind):
            session.add_clause((-mapping[k], kb))
            session.add_clause((mapping[k], -kb))
        for p, bit in zip(pi_vars, dip):
            session.add_clause((mapping[p] if bit else -mapping[p],))
        for o, bit in zip(po_vars, out):
            session.add_clause((mapping[o] if bit else -mapping[o],))

    k2 = [map2[k] for k in key_vars]
    last = (session.decisions, session.conflicts)
    while True:
        res = session.solve([act], timeout_s=budget.remaining())
        report.per_iteration.append((session.decisions - last[0],
                                     session.conflicts - last[1]))
        last = (session.decisions, session.conflicts)
        if res.status == TIMEOUT or (res.status == SAT and budget.exhausted()):
            report.status = "Timeout"
            return session, None, map2, act
        if res.status == UNSAT:
            break
        dip = [1 if res.model.get(p) else 0 for p in pi_vars]
        out = oracle.query(dip)
        report.dips.append((dip, out))
        report.iterations += 1
        add_io_copy(key_vars, dip, out)
        add_io_copy(k2, dip, out)
    res = session.solve([-act], timeout_s=budget.remaining())
    if res.status == TIMEOUT:
        report.status = "Timeout"
        return session, None, map2, act
    if res.status == UNSAT:
        raise KeylockError("no key satisfies the accumulated I/O constraints")
    report.status = "Solved"
    return session, res, map2, act


def _finish(report, session, oracle, t0):
    report.wall_time_s = time.monotonic() - t0
    report.queries = oracle.queries
    report.decisions = session.decisions
    report.conflicts = session.conflicts
    report.propagations = session.propagations


def sat_attack(d, oracle, timeout_s=None, solver=None):
    """Classic oracle-guided attack on the locked netlist."""
    t0 = time.monotonic()
    budget = _Budget(timeout_s)
    nl = d.netlist
    cnf, emap = tseitin(nl)
    pi_vars = [emap.var(i) for i in nl.primary_inputs]
    po_vars = [emap.var(o) for o in nl.primary_outputs]
    key_vars = [emap.var(k) for k in nl.key_inputs]
    report = AttackReport(method="sat", status="Timeout",
                          cnf_before=stats(cnf), cnf_after=stats(cnf))
    if not key_vars:
        report.status = "Solved"
        report.key = []
        _finish(report, Session(), oracle, t0)
        return report
    cyc = cycle_precondition(d)
    report.cycle_clauses = len(cyc)
    extra = _cycle_clauses_to_lits(cyc, lambda name: emap.var(nl.id_of(name)))
    session, res, _map2, _act = _attack_loop(cnf, pi_vars, po_vars, key_vars,
                                             oracle, budget, report,
                                             solver=solver,
                                             extra_key_clauses=extra)
    if res is not None:
        report.key = [1 if res.model.get(k) else 0 for k in key_vars]
    _finish(report, session, oracle, t0)
    return report


# -- key matching ----------------------------------------------------------

def _codes(m):
    """Distinct per-input codes over ceil(log2 m)+1 patterns; the extra
    leading zero bit keeps any code from being another's complement."""
    width = max(1, math.ceil(math.log2(m))) + 1
    return [[(i >> t) & 1 for t in range(width)] for i in range(m)], width


def key_match(rb, selection, solver=None, validate_samples=1000, seed=0,
              blocked=()):
    """Key bits realizing `selection`: per output j a pair (input index,
    invert flag). Raises MatchFailed when the network cannot route it."""
    nl = rb.netlist
    base, emap = tseitin(nl)
    key_vars = [emap.var(nl.id_of(k)) for k in rb.key_layout]
    in_vars = [emap.var(nl.id_of(nm)) for nm in rb.input_names]
    out_vars = [emap.var(nl.id_of(nm)) for nm in rb.output_names]
    codes, width = _codes(rb.n_inputs)
    combined = CNF(base.num_vars)
    shared = set(key_vars)
    top = 0
    for t in range(width):
        clauses, mapping, top = rename_copy(base, shared, max(top, base.num_vars))
        combined.num_vars = top
        for cl in clauses:
            combined.add_clause(cl)
        for i, v in enumerate(in_vars):
            combined.add_clause((mapping[v],) if codes[i][t] else (-mapping[v],))
        for j, (i, inv) in enumerate(selection):
            bit = codes[i][t] ^ (1 if inv else 0)
            v = mapping[out_vars[j]]
            combined.add_clause((v,) if bit else (-v,))
    session = make_session(combined, solver=solver)
    for cl in blocked:
        session.add_clause(cl)
    rng = random.Random(seed)
    for _attempt in range(100):
        res = session.solve()
        if res.status != SAT:
            raise MatchFailed(f"selection {selection} is not routable on {rb.name}")
        key = [1 if res.model.get(k) else 0 for k in key_vars]
        if _validate_selection(rb, key, selection, rng, validate_samples):
            return key
        session.add_clause([-k if res.model.get(k) else k for k in key_vars])
    raise MatchFailed("no candidate key survived simulation validation")


def _validate_selection(rb, key, selection, rng, samples):
    nl = rb.netlist
    m = rb.n_inputs
    for _ in range(samples):
        pi = [rng.randint(0, 1) for _ in range(m)]
        po = nl.simulate(pi, key)
        for j, (i, inv) in enumerate(selection):
            if po[j] != pi[i] ^ (1 if inv else 0):
                return False
    return True


# -- CP&SAT ----------------------------------------------------------------

def cp_sat_attack(d, oracle, timeout_s=None, solver=None, injective=None):
    """Detach inverters, re-encode routing blocks as one-layer selections,
    compress with BVA, run the DIP loop, then match selectors back to keys."""
    t0 = time.monotonic()
    budget = _Budget(timeout_s)
    report = AttackReport(method="cpsat", status="Timeout")
    if not d.netlist.key_inputs:
        report.status = "Solved"
        report.key = []
        _finish(report, Session(), oracle, t0)
        return report
    if any(rb.topology == "logarithmic" and rb.with_inverters == "all"
           for rb in d.keyrbs):
        d2 = detach_inverters(d)
    else:
        d2 = d
    nl = d2.netlist
    cnf, emap = tseitin(nl)
    report.cnf_before = stats(cnf)
    var_of = lambda name: emap.var(nl.id_of(name))

    encoded = []      # (rb, AtMostOneGroup list, selector map)
    fallback = []
    for rb in d2.keyrbs:
        pre = len(cnf.groups.get(rb.name, ()))
        try:
            cnf, groups, sel_map = one_layer_linear_encode(
                cnf, rb,
                [var_of(nm) for nm in rb.host_input_names],
                [var_of(nm) for nm in rb.host_output_names],
                injective=injective)
        except TwistedLogic:
            # hosted logic defeats the selection model; keep the plain
            # encoding and record how little BVA buys on it
            before = len(cnf.groups.get(rb.name, ()))
            cnf, _recs = simple_bva(cnf, scope=rb.name)
            after = len(cnf.groups.get(rb.name, ()))
            report.bva_reduction[rb.name] = {
                "before": before, "after": after,
                "factor": before / after if after else 1.0,
                "encoded": False}
            report.notes.append(f"{rb.name}: TwistedLogic, plain encoding kept")
            fallback.append(rb)
            continue
        gnames = [g for g in cnf.groups if g.startswith(f"{rb.name}/")]
        before = sum(len(cnf.groups[g]) for g in gnames)
        for g in gnames:
            cnf, _recs = simple_bva(cnf, scope=g)
        after = sum(len(cnf.groups[g]) for g in gnames)
        report.bva_reduction[rb.name] = {
            "before": before, "after": after,
            "factor": before / after if after else 1.0,
            "encoded": True, "plain": pre}
        encoded.append((rb, groups, sel_map))
    report.cnf_after = stats(cnf)

    pi_vars = [var_of(nl.name_of(i)) for i in nl.primary_inputs]
    po_vars = [var_of(nl.name_of(o)) for o in nl.primary_outputs]
    attack_keys = []
    for rb, groups, _sm in encoded:
        for g in groups:
            attack_keys.extend(g.selectors)
    for rb in fallback:
        attack_keys.extend(var_of(nm) for nm in rb.host_key_names)
    cyc = cycle_precondition(d2)
    extra = _cycle_clauses_to_lits(cyc, var_of)
    sel_cyc = _selector_cycle_clauses(nl, encoded)
    extra = list(extra) + sel_cyc
    report.cycle_clauses = len(cyc) + len(sel_cyc)
    session, res, _map2, act = _attack_loop(cnf, pi_vars, po_vars, attack_keys,
                                            oracle, budget, report,
                                            solver=solver,
                                            extra_key_clauses=extra)
    if res is None:
        _finish(report, session, oracle, t0)
        return report

    # translate the model back to key bits, retrying with a blocking clause
    # when the relaxed selection is not routable
    for _retry in range(20):
        try:
            key2 = _extract_key(d2, res, encoded, fallback, var_of, solver)
            break
        except MatchFailed:
            block = []
            for _rb, groups, _sm in encoded:
                for g in groups:
                    block.extend(-s if res.model.get(s) else s
                                 for s in g.selectors)
            session.add_clause(block)
            res = session.solve([-act], timeout_s=budget.remaining())
            if res.status != SAT:
                raise
    else:
        raise MatchFailed("selector blocking exhausted without a routable key")
    report.key = _inflate_key(d, d2, key2)
    report.status = "Solved"
    _finish(report, session, oracle, t0)
    return report


def _extract_key(d2, res, encoded, fallback, var_of, solver):
    per_rb = {}
    for rb, groups, sel_map in encoded:
        selection = []
        for g in groups:
            chosen = [s for s in g.selectors if res.model.get(s)]
            if len(chosen) != 1:
                raise MatchFailed("selector one-hot violated in model")
            lit = g.sources[g.selectors.index(chosen[0])]
            # map the chosen literal back to (input index, inverted)
            src_vars = []
            for x in g.sources:
                if abs(x) not in src_vars:
                    src_vars.append(abs(x))
            selection.append((src_vars.index(abs(lit)), lit < 0))
        per_rb[rb.name] = key_match(rb, selection, solver=solver)
    key = []
    for rb in d2.keyrbs:
        if rb.name in per_rb:
            key.extend(per_rb[rb.name])
        else:
            key.extend(1 if res.model.get(var_of(nm)) else 0
                       for nm in rb.host_key_names)
    return key


def _inflate_key(d, d2, key2):
    """Extend a post-detachment key back to the original key layout; the
    removed inverter bits are zero by construction."""
    flat2 = {}
    pos = 0
    for rb in d2.keyrbs:
        for nm in rb.host_key_names:
            flat2[nm] = key2[pos]
            pos += 1
    key = []
    for rb in d.keyrbs:
        for nm in rb.host_key_names:
            key.append(flat2.get(nm, 0))
    return key


def verify_attack_key(d, key, oracle=None):
    """Equal (None) or a counterexample input vector."""
    return verify_locked(d, key=key)
