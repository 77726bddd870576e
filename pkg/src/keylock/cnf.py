"""Clause databases, Tseitin encoding, miters, DIMACS I/O."""

from .errors import InterfaceMismatch, LiteralOutOfRange, MalformedHeader


class CNF:
    """Clause list with a variable counter and named clause groups.

    Clauses are tuples of non-zero ints (negative literal = complement).
    Tautologies are dropped at insert; duplicate literals are merged.
    """

    def __init__(self, num_vars=0):
        self.num_vars = num_vars
        self.clauses = []
        self.groups = {}  # name -> list of clause indices

    def new_var(self):
        self.num_vars += 1
        return self.num_vars

    def add_clause(self, lits, group=None):
        """Insert a clause; returns its index, or None if tautological."""
        seen = set()
        out = []
        for l in lits:
            if l == 0 or abs(l) > self.num_vars:
                raise LiteralOutOfRange(f"literal {l} out of range (num_vars={self.num_vars})")
            if -l in seen:
                return None
            if l not in seen:
                seen.add(l)
                out.append(l)
        idx = len(self.clauses)
        self.clauses.append(tuple(out))
        if group is not None:
            self.groups.setdefault(group, []).append(idx)
        return idx

    def extend(self, clauses, group=None):
        for c in clauses:
            self.add_clause(c, group=group)

    def copy(self):
        c = CNF(self.num_vars)
        c.clauses = list(self.clauses)
        c.groups = {k: list(v) for k, v in self.groups.items()}
        return c

    def __len__(self):
        return len(self.clauses)


class EncodingMap:
    """Bijection between net ids and CNF variables for one netlist."""

    def __init__(self):
        self.net_to_var = {}
        self.var_to_net = {}

    def assign(self, net_id, var):
        self.net_to_var[net_id] = var
        self.var_to_net[var] = net_id

    def var(self, net_id):
        return self.net_to_var[net_id]


_GATE_CLAUSES = {
    # y = op(a, b); lists of (coef_y, coef_a, coef_b) literal sign patterns
    "AND": lambda y, a, b: [(y, -a, -b), (-y, a), (-y, b)],
    "OR": lambda y, a, b: [(-y, a, b), (y, -a), (y, -b)],
    "NAND": lambda y, a, b: [(-y, -a, -b), (y, a), (y, b)],
    "NOR": lambda y, a, b: [(y, a, b), (-y, -a), (-y, -b)],
    "XOR": lambda y, a, b: [(-y, a, b), (-y, -a, -b), (y, -a, b), (y, a, -b)],
    "XNOR": lambda y, a, b: [(y, a, b), (y, -a, -b), (-y, -a, b), (-y, a, -b)],
}


def tseitin(n):
    """Standard per-gate CNF for a netlist; one variable per net.

    Gate groups tagged on the netlist (keyRB membership) are carried over as
    clause groups of the same name.
    """
    cnf = CNF()
    emap = EncodingMap()
    for net in n.nets:
        emap.assign(net.id, cnf.new_var())
    gate_group = {}
    for name, gids in n.gate_groups.items():
        for gi in gids:
            gate_group[gi] = name
    for gi, g in enumerate(n.gates):
        group = gate_group.get(gi)
        y = emap.var(g.output)
        if g.gtype in _GATE_CLAUSES:
            a, b = (emap.var(i) for i in g.inputs)
            cnf.extend(_GATE_CLAUSES[g.gtype](y, a, b), group=group)
        elif g.gtype == "NOT":
            a = emap.var(g.inputs[0])
            cnf.extend([(y, a), (-y, -a)], group=group)
        elif g.gtype == "BUF":
            a = emap.var(g.inputs[0])
            cnf.extend([(y, -a), (-y, a)], group=group)
        elif g.gtype == "MUX2":
            s, d0, d1 = (emap.var(i) for i in g.inputs)
            cnf.extend([(-s, -d1, y), (-s, d1, -y), (s, -d0, y), (s, d0, -y)],
                       group=group)
        else:
            raise ValueError(f"unencodable gate {g.gtype}")
    for net in n.nets:
        if net.kind == "const":
            v = emap.var(net.id)
            cnf.add_clause([v if net.value else -v])
    return cnf, emap


def rename_copy(cnf, shared_vars, base):
    """Copy `cnf` into fresh variables above `base`, keeping `shared_vars`.

    Returns (clauses, mapping old var -> new var). `base` must be at least
    cnf.num_vars; fresh variables are allocated from base+1 upward.
    """
    mapping = {}
    nxt = base
    for v in range(1, cnf.num_vars + 1):
        if v in shared_vars:
            mapping[v] = v
        else:
            nxt += 1
            mapping[v] = nxt
    clauses = [tuple((1 if l > 0 else -1) * mapping[abs(l)] for l in c)
               for c in cnf.clauses]
    return clauses, mapping, nxt


def build_miter(cnf, pi_vars, po_vars):
    """Two-copy miter over a locked-circuit CNF.

    Copy 1 keeps its variables; copy 2 shares only `pi_vars`. Per-PO XOR
    difference variables feed a final at-least-one-difference clause, which
    is guarded by an activation literal so the same session can later be
    solved with the difference disabled.

    Returns (miter_cnf, copy2_map, act_lit, diff_vars).
    """
    if not set(pi_vars) <= set(range(1, cnf.num_vars + 1)):
        raise InterfaceMismatch("pi vars outside CNF variable range")
    m = cnf.copy()
    clauses2, mapping, top = rename_copy(cnf, set(pi_vars), cnf.num_vars)
    m.num_vars = top
    for c in clauses2:
        m.add_clause(c)
    diffs = []
    for po in po_vars:
        po2 = mapping[po]
        d = m.new_var()
        m.extend([(-d, po, po2), (-d, -po, -po2), (d, -po, po2), (d, po, -po2)])
        diffs.append(d)
    act = m.new_var()
    m.add_clause([-act] + diffs)
    return m, mapping, act, diffs


def to_dimacs(c):
    lines = [f"p cnf {c.num_vars} {len(c.clauses)}"]
    for name, idxs in sorted(c.groups.items()):
        lines.append("c group " + name + " " + " ".join(str(i) for i in idxs))
    for cl in c.clauses:
        lines.append(" ".join(str(l) for l in cl) + " 0")
    return "\n".join(lines) + "\n"


def from_dimacs(text):
    cnf = None
    groups = {}
    clauses = []
    declared = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            parts = line.split()
            if len(parts) >= 3 and parts[1] == "group":
                groups[parts[2]] = [int(x) for x in parts[3:]]
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise MalformedHeader(f"bad header: {line!r}")
            try:
                nv, nc = int(parts[2]), int(parts[3])
            except ValueError:
                raise MalformedHeader(f"bad header: {line!r}")
            cnf = CNF(nv)
            declared = nc
            continue
        if cnf is None:
            raise MalformedHeader("clause before 'p cnf' header")
        lits = [int(x) for x in line.split()]
        if lits[-1] != 0:
            raise MalformedHeader(f"clause not 0-terminated: {line!r}")
        clauses.append(lits[:-1])
    if cnf is None:
        raise MalformedHeader("missing 'p cnf' header")
    for cl in clauses:
        cnf.add_clause(cl)
    cnf.groups = groups
    return cnf


def stats(c):
    nv, nc = c.num_vars, len(c.clauses)
    return {"vars": nv, "clauses": nc, "ratio": nc / nv if nv else 0.0}
