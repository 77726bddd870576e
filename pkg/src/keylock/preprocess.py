"""CNF re-encoding: bounded variable addition / elimination and the
one-layer linear (one-hot selection) encoding of routing-block outputs."""

from dataclasses import dataclass, field

from .cnf import CNF
from .errors import BoundViolated, TwistedLogic


@dataclass
class MatchingPair:
    set_l: list  # literals
    set_c: list  # clauses (tuples of literals)


@dataclass
class BvaRecord:
    var: int
    set_l: list
    set_c: list
    clause_delta: int

    def to_json(self):
        return {"var": self.var, "set_l": list(self.set_l),
                "set_c": [list(c) for c in self.set_c],
                "clause_delta": self.clause_delta}


@dataclass
class AtMostOneGroup:
    output: int            # output identifier (net id or var)
    selectors: list        # selector vars s_1..s_n
    sources: list          # candidate literals x_1..x_n (sign = polarity)


def reduction_gain(p):
    """Clauses saved by applying the matching pair (may be negative)."""
    nl, nc = len(p.set_l), len(p.set_c)
    return nl * nc - nl - nc


# -- bounded variable addition --------------------------------------------

def _bva_core(clauses, num_vars):
    """Greedy simpleBVA to fixpoint on a clause list.

    Returns (new clause list, records, new num_vars). Candidate literals are
    processed by occurrence count (highest first, ties by lowest variable
    index, positive polarity first); set extension accepts the literal with
    the most matched clauses while the reduction strictly improves.
    """
    live = {}   # clause id -> frozenset
    occ = {}    # literal -> set of clause ids
    by_set = {}  # frozenset -> clause id (presence lookup)
    next_id = 0

    def insert(cl):
        nonlocal next_id
        fs = frozenset(cl)
        if fs in by_set:
            return  # duplicate clause adds nothing to matching
        cid = next_id
        next_id += 1
        live[cid] = fs
        by_set[fs] = cid
        for l in fs:
            occ.setdefault(l, set()).add(cid)

    def remove(cid):
        fs = live.pop(cid)
        del by_set[fs]
        for l in fs:
            occ[l].discard(cid)

    for cl in clauses:
        insert(cl)

    records = []

    def lit_key(l):
        return (-len(occ.get(l, ())), abs(l), 0 if l > 0 else 1)

    changed = True
    while changed:
        changed = False
        for l in sorted(occ.keys(), key=lit_key):
            if len(occ.get(l, ())) < 2:
                continue
            m_lit = [l]
            m_cls = list(occ[l])
            best_red = reduction_gain(MatchingPair(m_lit, m_cls))
            while True:
                counts = {}
                witness = {}
                for cid in m_cls:
                    rest = live[cid] - {l}
                    if rest:
                        probe = min(rest, key=lambda x: len(occ.get(x, ())))
                        cands = occ.get(probe, ())
                    else:
                        cands = [c for c, fs in live.items() if len(fs) == 1]
                    want = len(live[cid])
                    for did in cands:
                        dfs = live[did]
                        if len(dfs) != want or not rest <= dfs:
                            continue
                        extra = dfs - rest
                        if len(extra) != 1:
                            continue
                        (lp,) = extra
                        if lp == l or lp in m_lit or -lp in m_lit:
                            continue
                        counts[lp] = counts.get(lp, 0) + 1
                        witness.setdefault(lp, []).append(cid)
                if not counts:
                    break
                lmax = min(counts, key=lambda x: (-counts[x], abs(x), 0 if x > 0 else 1))
                new_cls = witness[lmax]
                new_red = (len(m_lit) + 1) * len(new_cls) - (len(m_lit) + 1) - len(new_cls)
                if new_red <= best_red:
                    break
                m_lit.append(lmax)
                m_cls = new_cls
                best_red = new_red
            if best_red <= 0:
                continue
            # apply the matching: fresh variable, swap |L|*|C| clauses for |L|+|C|
            num_vars += 1
            x = num_vars
            set_c = [tuple(sorted(live[cid])) for cid in m_cls]
            for cid in m_cls:
                rest = live[cid] - {l}
                for lp in m_lit:
                    fs = rest | {lp}
                    did = by_set.get(fs)
                    if did is not None:
                        remove(did)
            for lp in m_lit:
                insert([lp, x])
            for cl in set_c:
                insert([q for q in cl if q != l] + [-x])
            records.append(BvaRecord(x, list(m_lit), set_c, -best_red))
            changed = True
    ordered = [list(live[cid]) for cid in sorted(live)]
    return ordered, records, num_vars


def simple_bva(c, scope=None):
    """Greedy bounded variable addition on a CNF (or one clause group).

    Returns (reduced CNF, list of BvaRecord). Equivalence over the original
    variables is preserved; clause count never increases.
    """
    if scope is None:
        in_scope = list(range(len(c.clauses)))
    else:
        in_scope = list(c.groups.get(scope, []))
    scope_set = set(in_scope)
    target = [c.clauses[i] for i in in_scope]
    new_clauses, records, num_vars = _bva_core(target, c.num_vars)
    out = CNF(num_vars)
    remap = {}
    for i, cl in enumerate(c.clauses):
        if i in scope_set:
            continue
        remap[i] = out.add_clause(cl)
    start = len(out.clauses)
    for cl in new_clauses:
        out.add_clause(cl)
    for name, idxs in c.groups.items():
        if name == scope:
            out.groups[name] = list(range(start, len(out.clauses)))
        else:
            out.groups[name] = [remap[i] for i in idxs if i in remap]
    if scope is None:
        out.groups = {k: list(range(len(out.clauses))) for k in c.groups}
    return out, records


# -- bounded variable elimination -----------------------------------------

def bve(c, var, bounded=False):
    """Resolve `var` out of the CNF; the inverse of one BVA step.

    With bounded=True, raises BoundViolated when the non-tautological
    resolvent set is larger than the clauses it replaces. The default is
    unbounded, which is what undoing a BVA step requires (reversing a step
    that saved k clauses necessarily grows the formula by k).
    """
    s_pos = [cl for cl in c.clauses if var in cl]
    s_neg = [cl for cl in c.clauses if -var in cl]
    if not s_pos and not s_neg:
        return c.copy()
    resolvents = []
    seen = set()
    for cp in s_pos:
        for cn in s_neg:
            merged = [l for l in cp if l != var] + [l for l in cn if l != -var]
            fs = frozenset(merged)
            if any(-l in fs for l in fs):
                continue  # tautology
            if fs not in seen:
                seen.add(fs)
                resolvents.append(tuple(sorted(fs)))
    if bounded and len(resolvents) > len(s_pos) + len(s_neg):
        raise BoundViolated(
            f"eliminating {var} grows the formula: {len(resolvents)} resolvents "
            f"replace {len(s_pos) + len(s_neg)} clauses")
    out = CNF(c.num_vars)
    drop = {frozenset(cl) for cl in s_pos + s_neg}
    for cl in c.clauses:
        if frozenset(cl) not in drop:
            out.add_clause(cl)
    for cl in resolvents:
        out.add_clause(cl)
    return out


# -- cardinality helpers --------------------------------------------------

def pairwise_at_most_one(lits):
    return [(-a, -b) for i, a in enumerate(lits) for b in lits[i + 1:]]


def exactly_one(lits):
    return [tuple(lits)] + pairwise_at_most_one(list(lits))


# -- one-layer linear encoding ---------------------------------------------

def one_layer_linear_encode(c, rb, input_vars, output_vars,
                            double_polarity=None, injective=None):
    """Replace a routing block's sub-CNF with per-output n:1 selections.

    Each output o gets one-hot selectors s_i over candidate literals x_i
    (doubled to {x_i, -x_i} when the block retains output inverters), with
    clauses (-s_i, -x_i, o) and (-s_i, x_i, -o) plus exactly-one over the
    selectors. For permutation networks an injectivity side constraint
    (at most one selector per input across outputs) is added by default.

    Returns (new CNF, AtMostOneGroup list, selector map). The rb's original
    clause group is dropped; replacement clauses are grouped per output as
    "<rb>/out<j>" (and "<rb>/inj<i>"), which is the granularity simple_bva
    is meant to run at afterwards.
    """
    if rb.topology == "interlock":
        raise TwistedLogic(
            "interlock outputs apply hosted gates; not a pure selection")
    if double_polarity is None:
        double_polarity = rb.with_inverters != "none"
    if injective is None:
        injective = rb.topology == "logarithmic"
    drop = set(c.groups.get(rb.name, ()))
    out = CNF(c.num_vars)
    remap = {}
    for i, cl in enumerate(c.clauses):
        if i in drop:
            continue
        remap[i] = out.add_clause(cl)
    for name, idxs in c.groups.items():
        if name == rb.name:
            continue
        out.groups[name] = [remap[i] for i in idxs
                            if i in remap and remap[i] is not None]
    cands = []
    for x in input_vars:
        cands.append(x)
        if double_polarity:
            cands.append(-x)
    selector_map = {}
    groups = []
    for j, o in enumerate(output_vars):
        sels = [out.new_var() for _ in cands]
        gname = f"{rb.name}/out{j}"
        for s, x in zip(sels, cands):
            selector_map[s] = (j, x)
            out.add_clause((-s, -x, o), group=gname)
            out.add_clause((-s, x, -o), group=gname)
        for cl in exactly_one(sels):
            out.add_clause(cl, group=gname)
        groups.append(AtMostOneGroup(output=o, selectors=sels, sources=list(cands)))
    if injective:
        for i, x in enumerate(input_vars):
            users = [s for s, (_j, lit) in selector_map.items() if abs(lit) == abs(x)]
            for cl in pairwise_at_most_one(users):
                out.add_clause(cl, group=f"{rb.name}/inj{i}")
    return out, groups, selector_map
