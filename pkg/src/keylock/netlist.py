"""Combinational gate-level netlists: BENCH I/O, simulation, timing, paths.

Net kinds: "input" (primary input), "key" (key input, name prefix
"keyinput"), "internal" (gate-driven), "const" (tied to 0/1).
"""

from dataclasses import dataclass

from .errors import (
    ArityMismatch,
    BenchParseError,
    CyclicNetlist,
    CycleUnderKey,
    DuplicateDriver,
    InsufficientPaths,
    InterfaceMismatch,
    TooManyInputs,
    UndeclaredNet,
    UnknownGate,
)

# gtype -> fan-in arity; MUX2 input order is (select, data0, data1)
GATE_ARITY = {
    "AND": 2, "NAND": 2, "OR": 2, "NOR": 2, "XOR": 2, "XNOR": 2,
    "NOT": 1, "BUF": 1, "MUX2": 3,
}

# gates whose BENCH form may carry more than two operands
_CHAINABLE = {"AND", "NAND", "OR", "NOR", "XOR", "XNOR"}
_CHAIN_BASE = {"NAND": "AND", "NOR": "OR", "XNOR": "XOR"}

KEY_PREFIX = "keyinput"


def eval_gate(gtype, ins):
    if gtype == "AND":
        return ins[0] & ins[1]
    if gtype == "NAND":
        return 1 - (ins[0] & ins[1])
    if gtype == "OR":
        return ins[0] | ins[1]
    if gtype == "NOR":
        return 1 - (ins[0] | ins[1])
    if gtype == "XOR":
        return ins[0] ^ ins[1]
    if gtype == "XNOR":
        return 1 - (ins[0] ^ ins[1])
    if gtype == "NOT":
        return 1 - ins[0]
    if gtype == "BUF":
        return ins[0]
    if gtype == "MUX2":
        return ins[2] if ins[0] else ins[1]
    raise ValueError(f"unknown gate type {gtype}")


@dataclass(frozen=True)
class Net:
    id: int
    name: str
    kind: str
    value: int = 0  # meaningful for kind == "const" only


@dataclass(frozen=True)
class Gate:
    gtype: str
    inputs: tuple
    output: int


@dataclass
class TimingInfo:
    level: dict          # net id -> unit-delay arrival
    slack: dict          # net id -> slack on the longest path through the net
    max_level: int


class Netlist:
    """Single-driver gate-level DAG (cycles tolerated when cyclic_allowed)."""

    def __init__(self, cyclic_allowed=False):
        self.nets = []
        self.gates = []
        self.primary_inputs = []
        self.primary_outputs = []
        self.key_inputs = []
        self.cyclic_allowed = cyclic_allowed
        self.gate_groups = {}  # group name -> list of gate indices (keyRB tagging)
        self._by_name = {}
        self._driver = {}      # net id -> gate index

    # -- construction -----------------------------------------------------

    def add_net(self, name, kind="internal", value=0):
        if name in self._by_name:
            raise ValueError(f"duplicate net name {name!r}")
        net = Net(len(self.nets), name, kind, value)
        self.nets.append(net)
        self._by_name[name] = net.id
        if kind == "input":
            self.primary_inputs.append(net.id)
        elif kind == "key":
            self.key_inputs.append(net.id)
        return net.id

    def add_gate(self, gtype, inputs, output):
        gtype = gtype.upper()
        if gtype not in GATE_ARITY:
            raise UnknownGate(f"unknown gate type {gtype}")
        if len(inputs) != GATE_ARITY[gtype]:
            raise ArityMismatch(f"{gtype} takes {GATE_ARITY[gtype]} inputs, got {len(inputs)}")
        if output in self._driver:
            raise DuplicateDriver(f"net {self.nets[output].name!r} already driven")
        if self.nets[output].kind != "internal":
            raise DuplicateDriver(f"net {self.nets[output].name!r} is not drivable")
        idx = len(self.gates)
        self.gates.append(Gate(gtype, tuple(inputs), output))
        self._driver[output] = idx
        return idx

    def id_of(self, name):
        return self._by_name[name]

    def name_of(self, net_id):
        return self.nets[net_id].name

    def driver_of(self, net_id):
        """Gate index driving the net, or None for inputs/keys/consts."""
        return self._driver.get(net_id)

    def fanout_map(self):
        """net id -> list of gate indices reading it."""
        fan = {n.id: [] for n in self.nets}
        for gi, g in enumerate(self.gates):
            for i in g.inputs:
                fan[i].append(gi)
        return fan

    def fresh_name(self, base):
        name = base
        k = 0
        while name in self._by_name:
            k += 1
            name = f"{base}_{k}"
        return name

    def copy(self):
        c = Netlist(cyclic_allowed=self.cyclic_allowed)
        c.nets = list(self.nets)
        c.gates = list(self.gates)
        c.primary_inputs = list(self.primary_inputs)
        c.primary_outputs = list(self.primary_outputs)
        c.key_inputs = list(self.key_inputs)
        c.gate_groups = {k: list(v) for k, v in self.gate_groups.items()}
        c._by_name = dict(self._by_name)
        c._driver = dict(self._driver)
        return c

    def validate(self):
        for g in self.gates:
            for i in (*g.inputs, g.output):
                if not 0 <= i < len(self.nets):
                    raise UndeclaredNet(f"gate references unknown net id {i}")
        for po in self.primary_outputs:
            net = self.nets[po]
            if net.kind == "internal" and po not in self._driver:
                raise UndeclaredNet(f"primary output {net.name!r} is undriven")
        if not self.cyclic_allowed:
            self.topo_order()

    # -- structure --------------------------------------------------------

    def topo_order(self):
        """Gate indices in topological order; raises CyclicNetlist."""
        indeg = [0] * len(self.gates)
        dependents = [[] for _ in self.gates]
        for gi, g in enumerate(self.gates):
            for i in g.inputs:
                d = self._driver.get(i)
                if d is not None:
                    indeg[gi] += 1
                    dependents[d].append(gi)
        ready = [gi for gi, d in enumerate(indeg) if d == 0]
        order = []
        while ready:
            gi = ready.pop()
            order.append(gi)
            for nx in dependents[gi]:
                indeg[nx] -= 1
                if indeg[nx] == 0:
                    ready.append(nx)
        if len(order) != len(self.gates):
            raise CyclicNetlist("netlist gate graph contains a combinational cycle")
        return order

    # -- evaluation -------------------------------------------------------

    def simulate(self, pi, key=()):
        """Evaluate primary outputs for one input/key vector.

        Evaluation is lazy through MUX2 data inputs, so a cyclic structure
        that is broken by the key still evaluates; a cycle that survives the
        key raises CycleUnderKey.
        """
        if len(pi) != len(self.primary_inputs):
            raise ValueError(f"expected {len(self.primary_inputs)} PI bits, got {len(pi)}")
        if len(key) != len(self.key_inputs):
            raise ValueError(f"expected {len(self.key_inputs)} key bits, got {len(key)}")
        values = {}
        for nid, v in zip(self.primary_inputs, pi):
            values[nid] = int(v)
        for nid, v in zip(self.key_inputs, key):
            values[nid] = int(v)
        for net in self.nets:
            if net.kind == "const":
                values[net.id] = net.value
        for po in self.primary_outputs:
            self._eval_net(po, values)
        return [values[po] for po in self.primary_outputs]

    def _eval_net(self, root, values):
        # explicit stack: (net id, expanded?) with an on-path set for cycle checks
        stack = [(root, False)]
        on_path = set()
        while stack:
            nid, expanded = stack.pop()
            if nid in values:
                if expanded:
                    on_path.discard(nid)
                continue
            gi = self._driver.get(nid)
            if gi is None:
                raise UndeclaredNet(f"net {self.nets[nid].name!r} has no driver and no value")
            g = self.gates[gi]
            if not expanded:
                if nid in on_path:
                    raise CycleUnderKey(f"combinational cycle through net {self.nets[nid].name!r}")
                on_path.add(nid)
                stack.append((nid, True))
                if g.gtype == "MUX2":
                    sel = g.inputs[0]
                    if sel in values:
                        stack.append((g.inputs[2] if values[sel] else g.inputs[1], False))
                    else:
                        stack.append((sel, False))
                else:
                    for i in g.inputs:
                        if i not in values:
                            stack.append((i, False))
            else:
                if g.gtype == "MUX2":
                    sel = g.inputs[0]
                    if sel not in values:
                        # select was just resolved on this pass; revisit
                        on_path.discard(nid)
                        stack.append((nid, False))
                        continue
                    data = g.inputs[2] if values[sel] else g.inputs[1]
                    if data not in values:
                        on_path.discard(nid)
                        stack.append((nid, False))
                        continue
                    values[nid] = values[data]
                else:
                    values[nid] = eval_gate(g.gtype, [values[i] for i in g.inputs])
                on_path.discard(nid)
        return values[root]

    def resolved_acyclic(self, key):
        """True iff the key-resolved structure (MUX2 with key selects fixed)
        has no combinational cycle."""
        key_val = dict(zip(self.key_inputs, key))
        edges = []
        for gi, g in enumerate(self.gates):
            if g.gtype == "MUX2" and g.inputs[0] in key_val:
                chosen = g.inputs[2] if key_val[g.inputs[0]] else g.inputs[1]
                edges.append((chosen, g.output))
            else:
                for i in g.inputs:
                    edges.append((i, g.output))
        out = {}
        for a, b in edges:
            out.setdefault(a, []).append(b)
        deg = {n.id: 0 for n in self.nets}
        for a, b in edges:
            deg[b] += 1
        ready = [n for n, d in deg.items() if d == 0]
        seen = 0
        while ready:
            n = ready.pop()
            seen += 1
            for b in out.get(n, ()):
                deg[b] -= 1
                if deg[b] == 0:
                    ready.append(b)
        return seen == len(self.nets)


# -- BENCH I/O -------------------------------------------------------------

def parse_bench(text):
    """Parse ISCAS-style BENCH text into a validated Netlist."""
    inputs = []
    outputs = []
    defs = []  # (line_no, line, out name, gate name, arg names)
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        up = line.upper()
        if up.startswith("INPUT(") or up.startswith("OUTPUT("):
            if not line.endswith(")"):
                raise BenchParseError("unterminated declaration", ln, raw)
            name = line[line.index("(") + 1:-1].strip()
            if not name:
                raise BenchParseError("empty net name", ln, raw)
            (inputs if up.startswith("INPUT(") else outputs).append((ln, raw, name))
        elif "=" in line:
            out, rhs = (s.strip() for s in line.split("=", 1))
            rhs_up = rhs.upper()
            if rhs_up in ("CONST0", "CONST1"):
                defs.append((ln, raw, out, rhs_up, []))
                continue
            if "(" not in rhs or not rhs.endswith(")"):
                raise BenchParseError("expected GATE(args)", ln, raw)
            gname = rhs[:rhs.index("(")].strip().upper()
            args = [a.strip() for a in rhs[rhs.index("(") + 1:-1].split(",") if a.strip()]
            defs.append((ln, raw, out, gname, args))
        else:
            raise BenchParseError("unrecognized line", ln, raw)

    n = Netlist()
    declared = set()
    for ln, raw, name in inputs:
        if name in declared:
            raise DuplicateDriver(f"input {name!r} declared twice", ln, raw)
        declared.add(name)
        n.add_net(name, "key" if name.startswith(KEY_PREFIX) else "input")
    driven = set()
    for ln, raw, out, gname, args in defs:
        if out in driven or (out in declared):
            raise DuplicateDriver(f"net {out!r} already driven", ln, raw)
        driven.add(out)
    for ln, raw, out, gname, args in defs:
        if out not in n._by_name:
            n.add_net(out, "internal")
    for ln, raw, out, gname, args in defs:
        if gname in ("CONST0", "CONST1"):
            # retag the placeholder internal net as a constant
            nid = n.id_of(out)
            n.nets[nid] = Net(nid, out, "const", int(gname[-1]))
            continue
        if gname == "MUX" :
            gname = "MUX2"
        if gname not in GATE_ARITY and gname not in _CHAINABLE:
            raise UnknownGate(f"unknown gate {gname!r}", ln, raw)
        for a in args:
            if a not in n._by_name:
                raise UndeclaredNet(f"net {a!r} is never declared or driven", ln, raw)
        arg_ids = [n.id_of(a) for a in args]
        arity = GATE_ARITY[gname]
        if gname in _CHAINABLE and len(args) > 2:
            base = _CHAIN_BASE.get(gname, gname)
            acc = arg_ids[0]
            for k, nxt in enumerate(arg_ids[1:], start=1):
                last = k == len(arg_ids) - 1
                gt = gname if last else base
                out_id = n.id_of(out) if last else n.add_net(n.fresh_name(f"{out}_c{k}"))
                n.add_gate(gt, [acc, nxt], out_id)
                acc = out_id
            continue
        if len(args) != arity:
            raise ArityMismatch(
                f"{gname} takes {arity} inputs, got {len(args)}", ln, raw)
        n.add_gate(gname, arg_ids, n.id_of(out))
    for ln, raw, name in outputs:
        if name not in n._by_name:
            raise UndeclaredNet(f"output {name!r} is never driven", ln, raw)
        n.primary_outputs.append(n.id_of(name))
    n.validate()
    return n


def write_bench(n):
    """Emit BENCH text; parse_bench(write_bench(n)) is function-isomorphic."""
    lines = []
    for nid in n.primary_inputs:
        lines.append(f"INPUT({n.name_of(nid)})")
    for nid in n.key_inputs:
        lines.append(f"INPUT({n.name_of(nid)})")
    for nid in n.primary_outputs:
        lines.append(f"OUTPUT({n.name_of(nid)})")
    for net in n.nets:
        if net.kind == "const":
            lines.append(f"{net.name} = CONST{net.value}")
    for g in n.gates:
        args = ", ".join(n.name_of(i) for i in g.inputs)
        lines.append(f"{n.name_of(g.output)} = {g.gtype}({args})")
    return "\n".join(lines) + "\n"


# -- timing ---------------------------------------------------------------

def timing_analyze(n):
    """Unit-delay levels and slacks; raises CyclicNetlist on cycles."""
    order = n.topo_order()
    level = {net.id: 0 for net in n.nets}
    for gi in order:
        g = n.gates[gi]
        level[g.output] = 1 + max(level[i] for i in g.inputs) if g.inputs else 0
    # longest downstream gate count from each net
    dist = {net.id: 0 for net in n.nets}
    for gi in reversed(order):
        g = n.gates[gi]
        for i in g.inputs:
            dist[i] = max(dist[i], 1 + dist[g.output])
    max_level = max((level[i] + dist[i] for i in level), default=0)
    slack = {i: max_level - (level[i] + dist[i]) for i in level}
    return TimingInfo(level=level, slack=slack, max_level=max_level)


# -- path enumeration -----------------------------------------------------

def path_candidates(n, length, prefer=None, interior_single_fanout=False,
                    candidate_budget=50000):
    """All candidate gate paths of exactly `length` chained gates, ranked.

    Gates on a path have at most two inputs (MUX2 is excluded). Ranking is by
    minimum slack along the path (descending), then by the summed `prefer`
    weight of the gate types (descending).

    With interior_single_fanout, every non-final gate output must feed only
    the next gate on the path and must not be a primary output (needed when
    the path is physically moved elsewhere).
    """
    prefer = prefer or {}
    timing = timing_analyze(n)
    fan = n.fanout_map()
    po_set = set(n.primary_outputs)
    eligible = [gi for gi, g in enumerate(n.gates) if len(g.inputs) <= 2]
    eligible_set = set(eligible)

    candidates = []

    def extend(path):
        if len(candidates) >= candidate_budget:
            return
        if len(path) == length:
            candidates.append(tuple(path))
            return
        g = n.gates[path[-1]]
        out = g.output
        succs = [s for s in fan[out] if s in eligible_set and s not in path]
        if interior_single_fanout and (len(fan[out]) != 1 or out in po_set):
            return
        for s in succs:
            path.append(s)
            extend(path)
            path.pop()

    for gi in eligible:
        extend([gi])
        if len(candidates) >= candidate_budget:
            break

    def score(path):
        min_slack = min(timing.slack[n.gates[gi].output] for gi in path)
        pref = sum(prefer.get(n.gates[gi].gtype, 0) for gi in path)
        return (min_slack, pref)

    candidates.sort(key=score, reverse=True)
    return candidates


def enumerate_paths(n, length, count, prefer=None, interior_single_fanout=False,
                    candidate_budget=50000):
    """Up to `count` gate-disjoint paths of exactly `length` chained gates.

    Greedy disjoint selection over path_candidates; raises InsufficientPaths
    when fewer than `count` disjoint paths exist.
    """
    candidates = path_candidates(n, length, prefer, interior_single_fanout,
                                 candidate_budget)
    chosen = []
    used = set()
    for path in candidates:
        if used.isdisjoint(path):
            chosen.append(list(path))
            used.update(path)
            if len(chosen) == count:
                return chosen
    raise InsufficientPaths(len(chosen), count)


# -- equivalence ----------------------------------------------------------

def equivalence_exhaustive(a, b):
    """Compare two keyless netlists over all input vectors.

    Returns None when equal, otherwise the first counterexample PI vector.
    """
    if ([a.name_of(i) for i in a.primary_inputs] != [b.name_of(i) for i in b.primary_inputs]
            or len(a.primary_outputs) != len(b.primary_outputs)):
        raise InterfaceMismatch(
            f"PI/PO interfaces differ: {[a.name_of(i) for i in a.primary_inputs]} vs "
            f"{[b.name_of(i) for i in b.primary_inputs]}")
    np = len(a.primary_inputs)
    if np > 20:
        raise TooManyInputs(f"{np} primary inputs exceed the exhaustive limit of 20")
    for v in range(1 << np):
        pi = [(v >> i) & 1 for i in range(np)]
        if a.simulate(pi) != b.simulate(pi):
            return pi
    return None


# -- synthetic circuits ---------------------------------------------------

def random_netlist(n_pi=12, n_gates=80, seed=0, xor_rich=False, chainy=False):
    """Seeded random combinational circuit for experiments and tests.

    chainy biases generation toward single-fanout gate chains, which give
    path-based locking something to work with; xor_rich doubles the weight
    of XOR/XNOR so the function space is less collapsible.
    """
    import random
    rng = random.Random(seed)
    nl = Netlist()
    pool = [nl.add_net(f"G{i}", "input") for i in range(n_pi)]
    types2 = ["AND", "OR", "NAND", "NOR", "XOR", "XNOR"]
    if xor_rich:
        types2 += ["XOR", "XNOR", "XOR", "XNOR"]
    k = 0

    def new_out():
        nonlocal k
        out = nl.add_net(f"n{k}")
        k += 1
        return out

    while k < n_gates:
        if chainy and rng.random() < 0.5:
            cur = rng.choice(pool)
            for _ in range(rng.randint(4, 6)):
                if k >= n_gates:
                    break
                out = new_out()
                nl.add_gate(rng.choice(types2), [cur, rng.choice(pool)], out)
                cur = out
            pool.append(cur)
            continue
        t = rng.choice(types2 + ["NOT"])
        out = new_out()
        if t == "NOT":
            nl.add_gate(t, [rng.choice(pool[-30:])], out)
        else:
            nl.add_gate(t, [rng.choice(pool[-40:]), rng.choice(pool)], out)
        pool.append(out)
    fan = nl.fanout_map()
    pos = [n.id for n in nl.nets if not fan[n.id] and n.kind == "internal"]
    nl.primary_outputs = pos[-10:] if len(pos) > 10 else pos
    nl.validate()
    return nl
