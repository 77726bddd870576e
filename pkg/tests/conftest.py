import itertools
import random

import pytest

from keylock.netlist import Netlist, parse_bench, random_netlist

C17 = """\
# c17-style example
INPUT(G1)
INPUT(G2)
INPUT(G3)
INPUT(G6)
INPUT(G7)
OUTPUT(G22)
OUTPUT(G23)
G10 = NAND(G1, G3)
G11 = NAND(G3, G6)
G16 = NAND(G2, G11)
G19 = NAND(G11, G7)
G22 = NAND(G10, G16)
G23 = NAND(G16, G19)
"""


@pytest.fixture
def c17():
    return parse_bench(C17)


@pytest.fixture
def small_host():
    """Chain-heavy 8-PI circuit used by most locking/attack tests."""
    return random_netlist(n_pi=8, n_gates=50, seed=7, xor_rich=True,
                          chainy=True)


def brute_force(cnf, assumptions=()):
    """Reference SAT check by full enumeration; returns a model dict or None."""
    nv = cnf.num_vars
    fixed = {abs(l): l > 0 for l in assumptions}
    for bits in itertools.product([False, True], repeat=nv):
        model = {i + 1: bits[i] for i in range(nv)}
        if any(model[v] != val for v, val in fixed.items()):
            continue
        if all(any(model[abs(l)] == (l > 0) for l in cl)
               for cl in cnf.clauses):
            return model
    return None


def eval_reference(n, pi, key=()):
    """Recursive netlist evaluator, independent of Netlist.simulate."""
    import sys
    pi_map = dict(zip(n.primary_inputs, pi))
    key_map = dict(zip(n.key_inputs, key))

    def value(net_id, depth=0):
        if depth > len(n.gates) + 10:
            raise RecursionError("not a DAG")
        net = n.nets[net_id]
        if net.kind == "input":
            return pi_map[net_id]
        if net.kind == "key":
            return key_map[net_id]
        if net.kind == "const":
            return net.value
        g = n.gates[n.driver_of(net_id)]
        vals = [value(i, depth + 1) for i in g.inputs]
        return {
            "AND": lambda v: v[0] & v[1],
            "NAND": lambda v: 1 - (v[0] & v[1]),
            "OR": lambda v: v[0] | v[1],
            "NOR": lambda v: 1 - (v[0] | v[1]),
            "XOR": lambda v: v[0] ^ v[1],
            "XNOR": lambda v: 1 - (v[0] ^ v[1]),
            "NOT": lambda v: 1 - v[0],
            "BUF": lambda v: v[0],
            "MUX2": lambda v: v[2] if v[0] else v[1],
        }[g.gtype](vals)

    return [value(o) for o in n.primary_outputs]


def random_cnf(rng, max_vars=12, max_clauses=24):
    from keylock.cnf import CNF
    nv = rng.randint(1, max_vars)
    c = CNF(nv)
    for _ in range(rng.randint(1, max_clauses)):
        width = rng.randint(1, min(3, nv))
        vs = rng.sample(range(1, nv + 1), width)
        c.add_clause([v if rng.random() < 0.5 else -v for v in vs])
    return c


def _true_mask(var, total_vars):
    """Bitset over all 2^total_vars assignments where `var` is true.

    Assignment index i assigns variable j true iff bit (j-1) of i is set.
    """
    period = 1 << var            # 2^var
    half = period >> 1
    unit = ((1 << half) - 1) << half
    space = 1 << total_vars
    reps = space // period
    ones = (1 << space) - 1
    return unit * (ones // ((1 << period) - 1)) if reps else unit


def sat_mask(cnf, total_vars=None):
    """Big-int bitset of satisfying assignments (exhaustive, vectorized)."""
    nv = total_vars or cnf.num_vars
    space = 1 << nv
    acc = (1 << space) - 1
    for cl in cnf.clauses:
        m = 0
        for l in cl:
            t = _true_mask(abs(l), nv)
            m |= t if l > 0 else ((1 << space) - 1) ^ t
        acc &= m
        if not acc:
            break
    return acc


def projected_models(cnf, keep_vars):
    """Set of assignments over vars 1..keep_vars extendable to a model.

    Auxiliary variables must be numbered above keep_vars.
    """
    mask = sat_mask(cnf)
    block = 1 << keep_vars
    chunk = (1 << block) - 1
    merged = 0
    while mask:
        merged |= mask & chunk
        mask >>= block
    return {p for p in range(block) if (merged >> p) & 1}


# populated by the acceptance tests; echoed after the run so each criterion
# gets one visible pass/fail line even under output capture
acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance_lines:
        terminalreporter.write_line(line)
    failed = {r.nodeid for r in terminalreporter.stats.get("failed", ())}
    for nodeid in sorted(failed):
        if "test_acceptance" in nodeid:
            terminalreporter.write_line(
                f"FAIL  {nodeid.rsplit('::', 1)[-1]}")
