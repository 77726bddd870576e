"""Key-programmable routing blocks and their insertion into netlists.

Topologies:
  crossbar     n:1 MUX2 selection tree per output, binary select key bits.
  logarithmic  removed-center Benes of 2x2 switch boxes (2*log2(m)-2 layers,
               m/2 SwBs per layer), optional key-programmable output
               inverters on every SwB.
  interlock    same network, but every SwB output can also apply a hosted
               2-input logic gate taken from a timing path of the design.

SwB key encoding, per output, 2 bits (b1 b0): 00 -> I_i, 01 -> I_j,
10 -> f(I_i, exI), 11 -> f(I_j, exI). Pure-routing slots (f is None) ignore
b1, i.e. 10/11 alias 00/01.
"""

import logging
import math
from dataclasses import dataclass, field

from .errors import (
    BadSize,
    EmbeddingMismatch,
    InsufficientNets,
    InsufficientPaths,
    WrongTopology,
)
from .netlist import Net, Netlist, equivalence_exhaustive, path_candidates

log = logging.getLogger(__name__)

# host gate type -> (f slot gate, constant ex input value) for 1-input gates
_UNARY_F = {"NOT": ("NAND", 1), "BUF": ("AND", 1)}


@dataclass
class SwB:
    layer: int
    index: int
    f1: str = None
    f2: str = None
    in_i: str = ""
    in_j: str = ""
    out_i: str = ""
    out_j: str = ""
    key: tuple = ()          # (b0_i, b1_i, b0_j, b1_j) key net names
    exi_i: str = None
    exi_j: str = None
    inv_keys: tuple = None   # (inv_i, inv_j) inverter key net names


@dataclass
class KeyRB:
    name: str
    topology: str            # "crossbar" | "logarithmic" | "interlock"
    m: int
    n_inputs: int
    netlist: Netlist         # standalone block: in*/exi* PIs, key inputs, out* POs
    key_layout: list         # ordered key net names (standalone naming)
    input_names: list
    output_names: list
    layers: list = field(default_factory=list)   # list of SwB lists
    with_inverters: str = "none"                 # "none" | "all" | "last"
    inverter_keys_by_layer: list = field(default_factory=list)
    correct_key: list = None
    host_key_names: list = None                  # set at insertion
    host_input_names: list = None
    host_output_names: list = None
    embedding: object = None                     # interlock only


@dataclass
class PathEmbedding:
    paths: list              # m gate-id paths (host indices); may be [] for pad outputs
    slot_gates: dict         # (path_idx, pos) -> (f gate type, ex kind)
                             #   ex kind: ("net", host net id) | ("const", 0/1)
    entry_input: dict        # path_idx -> network input index
    swaps: dict              # (layer, swb_index) -> bool (True: O_i draws I_j)
    slot_assignment: dict    # (layer, swb_index, "f1"|"f2") -> (path_idx, pos)
    num_layers: int = 0


@dataclass
class LockedDesign:
    netlist: Netlist
    original: Netlist
    keyrbs: list
    correct_key: list
    origin_map: dict         # keyRB output net name -> original net name


def _check_size(m):
    if m < 4 or m & (m - 1):
        raise BadSize(f"keyRB size must be a power of two >= 4, got {m}")


def num_layers(m):
    return 2 * int(math.log2(m)) - 2


# -- crossbar --------------------------------------------------------------

def build_crossbar(n_inputs, m):
    """n x m crossbar: each output is an n:1 MUX2 tree with ceil(log2 n)
    binary key bits. correct_key stays unset until insertion."""
    if m < 2 or n_inputs < m:
        raise BadSize(f"need n >= m >= 2, got n={n_inputs}, m={m}")
    nl = Netlist()
    ins = [nl.add_net(f"in{i}", "input") for i in range(n_inputs)]
    kbits = max(1, math.ceil(math.log2(n_inputs)))
    key_layout = []
    outs = []
    for o in range(m):
        sel = [nl.add_net(f"keyinput_o{o}_b{b}", "key") for b in range(kbits)]
        key_layout.extend(nl.name_of(s) for s in sel)
        leaves = [ins[i if i < n_inputs else i % n_inputs] for i in range(1 << kbits)]
        level = leaves
        for b in range(kbits):
            nxt = []
            for p in range(0, len(level), 2):
                out = nl.add_net(nl.fresh_name(f"xb_o{o}_l{b}_{p // 2}"))
                nl.add_gate("MUX2", [sel[b], level[p], level[p + 1]], out)
                nxt.append(out)
            level = nxt
        po = nl.add_net(f"out{o}")
        nl.add_gate("BUF", [level[0]], po)
        nl.primary_outputs.append(po)
        outs.append(po)
    nl.validate()
    return KeyRB(
        name="crossbar", topology="crossbar", m=m, n_inputs=n_inputs,
        netlist=nl, key_layout=key_layout,
        input_names=[nl.name_of(i) for i in ins],
        output_names=[nl.name_of(o) for o in outs])


# -- logarithmic network ---------------------------------------------------

def _network(nl, wires, depth, total_layers, make_swb):
    """Removed-center Benes recursion; wires are per-implementation tokens."""
    m = len(wires)
    if m == 2:
        return wires
    layer_in = depth
    layer_out = total_layers - 1 - depth
    tops, bots = [], []
    for b in range(m // 2):
        oi, oj = make_swb(layer_in, wires[2 * b], wires[2 * b + 1])
        tops.append(oi)
        bots.append(oj)
    tops = _network(nl, tops, depth + 1, total_layers, make_swb)
    bots = _network(nl, bots, depth + 1, total_layers, make_swb)
    out = []
    for b in range(m // 2):
        oi, oj = make_swb(layer_out, tops[b], bots[b])
        out.extend((oi, oj))
    return out


def _build_logarithmic(m, inverters, slot_plan=None, name="fulllock"):
    """Shared builder for logarithmic and interlock keyRBs.

    slot_plan: (layer, swb_index, slot) -> (ftype, ex const value or None)
    where an entry of None (missing) means a pure-routing slot.
    """
    _check_size(m)
    total = num_layers(m)
    nl = Netlist()
    ins = [nl.add_net(f"in{i}", "input") for i in range(m)]
    layers = [[] for _ in range(total)]
    key_layout = []
    inv_by_layer = [[] for _ in range(total)]
    key_counter = [0]
    const_nets = {}

    def const_net(v):
        if v not in const_nets:
            const_nets[v] = nl.add_net(nl.fresh_name(f"const{v}"), "const", v)
        return const_nets[v]

    def new_key():
        kid = nl.add_net(f"keyinput_{key_counter[0]}", "key")
        key_counter[0] += 1
        key_layout.append(nl.name_of(kid))
        return kid

    def make_output(layer, idx, slot, a, b):
        """One SwB output: routing MUX, optional f slot, returns net id."""
        b0 = new_key()
        b1 = new_key()
        route = nl.add_net(nl.fresh_name(f"r_{layer}_{idx}_{slot}"))
        nl.add_gate("MUX2", [b0, a, b], route)
        plan = slot_plan.get((layer, idx, slot)) if slot_plan else None
        if plan is None:
            # pure routing: b1 is allocated in the layout but drives nothing
            return route, None, None, (nl.name_of(b0), nl.name_of(b1))
        ftype, ex = plan
        if ex[0] == "const":
            ex_net = const_net(ex[1])
        else:
            ex_net = nl.add_net(f"exi_{layer}_{idx}_{slot}", "input")
        fa = nl.add_net(nl.fresh_name(f"f_{layer}_{idx}_{slot}_a"))
        fb = nl.add_net(nl.fresh_name(f"f_{layer}_{idx}_{slot}_b"))
        nl.add_gate(ftype, [a, ex_net], fa)
        nl.add_gate(ftype, [b, ex_net], fb)
        fm = nl.add_net(nl.fresh_name(f"f_{layer}_{idx}_{slot}_m"))
        nl.add_gate("MUX2", [b0, fa, fb], fm)
        out = nl.add_net(nl.fresh_name(f"o_{layer}_{idx}_{slot}"))
        nl.add_gate("MUX2", [b1, route, fm], out)
        exi_name = nl.name_of(ex_net) if ex[0] != "const" else None
        return out, ftype, exi_name, (nl.name_of(b0), nl.name_of(b1))

    def make_swb(layer, a, b):
        idx = len(layers[layer])
        oi, f1, exi_i, ki = make_output(layer, idx, "f1", a, b)
        oj, f2, exi_j, kj = make_output(layer, idx, "f2", a, b)
        inv_keys = None
        if inverters == "all" or (inverters == "last" and layer == total - 1):
            inv_i = new_key()
            inv_j = new_key()
            inv_by_layer[layer].extend([nl.name_of(inv_i), nl.name_of(inv_j)])
            xi = nl.add_net(nl.fresh_name(f"x_{layer}_{idx}_i"))
            xj = nl.add_net(nl.fresh_name(f"x_{layer}_{idx}_j"))
            nl.add_gate("XOR", [oi, inv_i], xi)
            nl.add_gate("XOR", [oj, inv_j], xj)
            inv_keys = (nl.name_of(inv_i), nl.name_of(inv_j))
            oi, oj = xi, xj
        layers[layer].append(SwB(
            layer=layer, index=idx, f1=f1, f2=f2,
            in_i=nl.name_of(a), in_j=nl.name_of(b),
            out_i=nl.name_of(oi), out_j=nl.name_of(oj),
            key=(ki[0], ki[1], kj[0], kj[1]),
            exi_i=exi_i, exi_j=exi_j, inv_keys=inv_keys))
        return oi, oj

    finals = _network(nl, ins, 0, total, make_swb)
    outs = []
    for j, w in enumerate(finals):
        po = nl.add_net(f"out{j}")
        nl.add_gate("BUF", [w], po)
        nl.primary_outputs.append(po)
        outs.append(po)
    nl.validate()
    return KeyRB(
        name=name, topology="logarithmic", m=m, n_inputs=m, netlist=nl,
        key_layout=key_layout, layers=layers, with_inverters=inverters,
        inverter_keys_by_layer=inv_by_layer,
        input_names=[nl.name_of(i) for i in ins],
        output_names=[nl.name_of(o) for o in outs])


def build_logarithmic_keyrb(m, with_inverters=True):
    return _build_logarithmic(m, "all" if with_inverters else "none")


# -- abstract routing over switch settings --------------------------------

def trace_chains(m, swaps):
    """Walk the network abstractly under per-SwB swap settings.

    Returns (chains, output_tokens): chains[token] is the ordered list of
    (layer, swb_index, slot) traversed by the line entering at input
    `token`; output_tokens[j] is the token emerging at output j.
    """
    total = num_layers(m)
    layers_count = [0] * total
    chains = [[] for _ in range(m)]

    def make_swb(layer, a, b):
        idx = layers_count[layer]
        layers_count[layer] += 1
        swap = swaps.get((layer, idx), False)
        src_i, src_j = (b, a) if swap else (a, b)
        chains[src_i].append((layer, idx, "f1"))
        chains[src_j].append((layer, idx, "f2"))
        return src_i, src_j

    finals = _network(None, list(range(m)), 0, total, make_swb)
    return chains, finals


def routing_map(rb, key):
    """Which input index (and inversion parity) each output carries under
    `key`, for pure-routing structures (no f slots in use)."""
    nl = rb.netlist
    kv = dict(zip((nl.id_of(k) for k in rb.key_layout), key))
    tokens = {}
    for i, name in enumerate(rb.input_names):
        tokens[nl.id_of(name)] = (i, 0)
    for net in nl.nets:
        if net.kind == "const":
            tokens[net.id] = ("const", net.value)
    order = nl.topo_order()
    for gi in order:
        g = nl.gates[gi]
        if g.gtype == "MUX2":
            sel = kv[g.inputs[0]]
            tokens[g.output] = tokens[g.inputs[2] if sel else g.inputs[1]]
        elif g.gtype == "BUF":
            tokens[g.output] = tokens[g.inputs[0]]
        elif g.gtype == "XOR" and g.inputs[1] in kv:
            i, p = tokens[g.inputs[0]]
            tokens[g.output] = (i, p ^ kv[g.inputs[1]])
        else:
            raise WrongTopology(f"gate {g.gtype} is not pure routing")
    return [tokens[nl.id_of(o)] for o in rb.output_names]


def sample_routing_key(rb, rng):
    """Random permutation key: straight/cross per SwB, inverters off.

    Returns (key bits, permutation) with permutation[j] = input index that
    output j carries.
    """
    if rb.topology not in ("logarithmic",):
        raise WrongTopology(rb.topology)
    swaps = {(s.layer, s.index): rng.random() < 0.5
             for layer in rb.layers for s in layer}
    key = {}
    for layer in rb.layers:
        for s in layer:
            swap = swaps[(s.layer, s.index)]
            key[s.key[0]] = int(swap)       # b0_i: O_i draws I_j when swapped
            key[s.key[1]] = 0
            key[s.key[2]] = int(not swap)   # b0_j takes the other side
            key[s.key[3]] = 0
            if s.inv_keys:
                key[s.inv_keys[0]] = 0
                key[s.inv_keys[1]] = 0
    bits = [key[k] for k in rb.key_layout]
    perm = [i for i, _p in routing_map(rb, bits)]
    return bits, perm


# -- interlock -------------------------------------------------------------

def plan_embedding(host, m, paths, rng, pad_outputs=0):
    """Choose switch settings and assign path gates to f slots so that a
    correct key exists by construction.

    paths: list of host gate-id paths, each of length num_layers(m) (may be
    fewer than m; the rest of the outputs become pure-routing pads).
    """
    total = num_layers(m)
    for p in paths:
        if len(p) != total:
            raise EmbeddingMismatch(f"path length {len(p)} != {total} layers")
    if len(paths) + pad_outputs != m:
        raise EmbeddingMismatch(f"{len(paths)} paths + {pad_outputs} pads != m={m}")
    # random permutation switches; tokens = chains through the network
    layer_sizes = m // 2
    swaps = {}
    for layer in range(total):
        for idx in range(layer_sizes):
            swaps[(layer, idx)] = rng.random() < 0.5
    chains, out_tokens = trace_chains(m, swaps)
    # output j hosts path j (paths are ordered; pads take the last outputs)
    slot_gates = {}
    slot_assignment = {}
    entry_input = {}
    for j, path in enumerate(paths):
        token = out_tokens[j]
        entry_input[j] = token
        for pos, (slot, gid) in enumerate(zip(chains[token], path)):
            g = host.gates[gid]
            if g.gtype in _UNARY_F:
                ftype, cval = _UNARY_F[g.gtype]
                ex = ("const", cval)
            else:
                ftype = g.gtype
                if pos == 0:
                    # first gate: input 0 enters the network, input 1 is exI
                    ex = ("net", g.inputs[1])
                else:
                    prev_out = host.gates[path[pos - 1]].output
                    side = [i for i in g.inputs if i != prev_out]
                    # both inputs tied to the chain degenerates to f(a, a)
                    ex = ("net", side[0] if side else prev_out)
            slot_gates[(j, pos)] = (ftype, ex)
            slot_assignment[(slot[0], slot[1], slot[2])] = (j, pos)
    return PathEmbedding(paths=paths, slot_gates=slot_gates,
                         entry_input=entry_input, swaps=swaps,
                         slot_assignment=slot_assignment, num_layers=total)


def build_interlock_keyrb(m, embedding):
    """Instantiate an InterLock keyRB from a planned embedding and derive
    its correct key by construction."""
    _check_size(m)
    total = num_layers(m)
    if embedding.num_layers != total:
        raise EmbeddingMismatch(
            f"embedding planned for {embedding.num_layers} layers, network has {total}")
    chains, out_tokens = trace_chains(m, embedding.swaps)
    # validate slot assignment against the chain structure
    for j, path in enumerate(embedding.paths):
        token = out_tokens[j]
        if embedding.entry_input.get(j) != token:
            raise EmbeddingMismatch(f"path {j} entry input disagrees with switch plan")
        for pos, slot in enumerate(chains[token]):
            if embedding.slot_assignment.get(slot) != (j, pos):
                raise EmbeddingMismatch(f"slot {slot} not assigned to path {j} pos {pos}")
    slot_plan = {}
    for slot, (j, pos) in embedding.slot_assignment.items():
        slot_plan[slot] = embedding.slot_gates[(j, pos)]
    rb = _build_logarithmic(m, "none", slot_plan=slot_plan, name="interlock")
    rb.topology = "interlock"
    rb.embedding = embedding
    # correct key: f-selection on assigned slots, plain routing on pads
    key = {}
    for layer in rb.layers:
        for s in layer:
            swap = embedding.swaps[(s.layer, s.index)]
            hosted_i = (s.layer, s.index, "f1") in embedding.slot_assignment
            hosted_j = (s.layer, s.index, "f2") in embedding.slot_assignment
            key[s.key[0]] = int(swap)
            key[s.key[1]] = int(hosted_i)
            key[s.key[2]] = int(not swap)
            key[s.key[3]] = int(hosted_j)
    rb.correct_key = [key[k] for k in rb.key_layout]
    return rb


# -- inverter detachment ---------------------------------------------------

def detach_inverters(d):
    """Fix the inversion keys of every non-final layer of logarithmic keyRBs
    to "no inversion" and drop them from the key. Idempotent."""
    if not any(rb.topology == "logarithmic" and rb.with_inverters == "all"
               for rb in d.keyrbs):
        if any(rb.topology == "logarithmic" and rb.with_inverters == "last"
               for rb in d.keyrbs):
            return d  # already detached
        raise WrongTopology("no logarithmic keyRB with full inverter layers present")
    nl = d.netlist.copy()
    new_rbs = []
    removed_host_keys = set()
    for rb in d.keyrbs:
        if not (rb.topology == "logarithmic" and rb.with_inverters == "all"):
            new_rbs.append(rb)
            continue
        host_of = dict(zip(rb.key_layout, rb.host_key_names))
        total = num_layers(rb.m)
        drop = [k for layer in range(total - 1)
                for k in rb.inverter_keys_by_layer[layer]]
        drop_set = set(drop)
        # rebuild the standalone block with last-layer-only inverters
        fresh = _build_logarithmic(rb.m, "last", name=rb.name)
        kept = [k for k in rb.key_layout if k not in drop_set]
        assert len(kept) == len(fresh.key_layout)
        old_correct = dict(zip(rb.key_layout, rb.correct_key or []))
        fresh.correct_key = [old_correct[k] for k in kept] if rb.correct_key else None
        fresh.host_key_names = [host_of[k] for k in kept]
        fresh.host_input_names = rb.host_input_names
        fresh.host_output_names = rb.host_output_names
        fresh.n_inputs = rb.m
        new_rbs.append(fresh)
        removed_host_keys.update(host_of[k] for k in drop)
    # host netlist: XOR(x, dropped_key) -> BUF(x); dropped keys become consts
    for gi, g in enumerate(nl.gates):
        if g.gtype == "XOR" and nl.nets[g.inputs[1]].name in removed_host_keys:
            nl.gates[gi] = type(g)("BUF", (g.inputs[0],), g.output)
    for name in removed_host_keys:
        nid = nl.id_of(name)
        nl.nets[nid] = Net(nid, name, "const", 0)
        nl.key_inputs.remove(nid)
    key = []
    for rb in new_rbs:
        key.extend(rb.correct_key or [])
    return LockedDesign(netlist=nl, original=d.original, keyrbs=new_rbs,
                        correct_key=key, origin_map=dict(d.origin_map))


# -- insertion -------------------------------------------------------------

@dataclass
class LockConfig:
    topology: str = "fulllock"   # "crossbar" | "fulllock" | "interlock"
    m: int = 4
    count: int = 1
    seed: int = 0
    net_selection: str = "random"   # "random" | "correlated"


def _fanin_cone(n, net_id):
    seen = set()
    stack = [net_id]
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        gi = n.driver_of(x)
        if gi is not None:
            stack.extend(n.gates[gi].inputs)
    return seen


def _select_nets(n, m, rng, mode, used):
    """m distinct gate-driven internal nets to route through a keyRB.

    Only nets inside some primary-output cone are eligible; keys on dead
    logic would be unconstrained.
    """
    live = set()
    for po in n.primary_outputs:
        live |= _fanin_cone(n, po)
    eligible = [net.id for net in n.nets
                if net.kind == "internal" and n.driver_of(net.id) is not None
                and net.id in live and net.id not in used]
    if len(eligible) < m:
        raise InsufficientNets(f"{len(eligible)} lockable nets, {m} needed")
    if mode == "random":
        # prefer cone-incomparable nets: when no selected net sits in the
        # fan-in cone of another, no key assignment can close a loop through
        # the routing block, so attacks need no cycle preconditions at all
        order = rng.sample(eligible, len(eligible))
        cones = {x: _fanin_cone(n, x) for x in order}
        picks = []
        for cand in order:
            if any(cand in cones[p] or p in cones[cand] for p in picks):
                continue
            picks.append(cand)
            if len(picks) == m:
                return picks
        chosen = set(picks)
        picks += [x for x in order if x not in chosen][:m - len(picks)]
        return picks
    if mode != "correlated":
        raise ValueError(f"unknown net selection {mode!r}")
    # pick the deepest cone and take related nets from inside it
    best, cone = None, ()
    for cand in eligible:
        c = [x for x in _fanin_cone(n, cand) if x in set(eligible)]
        if len(c) > len(cone):
            best, cone = cand, c
    if len(cone) < m:
        raise InsufficientNets(
            f"largest fan-in cone has {len(cone)} lockable nets, {m} needed")
    picks = [best] + rng.sample([x for x in cone if x != best], m - 1)
    return picks


def _instantiate(host, rb, rb_index, input_map, output_names, remove_gates=()):
    """Splice the keyRB's standalone netlist into the host.

    input_map: rb PI name -> host net id (covers in* and exi* nets).
    output_names: rb output name -> host net name the output takes over.
    remove_gates: host gate indices deleted (their gates move into the rb).
    Returns (new netlist, host key names in rb.key_layout order).
    """
    removed = set(remove_gates)
    interior = set()
    for gi in removed:
        out = host.gates[gi].output
        if host.name_of(out) not in output_names.values():
            interior.add(out)
    new = Netlist(cyclic_allowed=True)
    old2new = {}
    for net in host.nets:
        if net.id in interior:
            continue
        old2new[net.id] = new.add_net(net.name, net.kind, net.value)
    # keyRB nets
    rbnl = rb.netlist
    rbmap = {}
    host_keys = {}
    out_rename = {}
    for name, hname in output_names.items():
        out_rename[rbnl.id_of(name)] = hname
    for net in rbnl.nets:
        if net.name in input_map:
            rbmap[net.id] = old2new[input_map[net.name]]
        elif net.id in out_rename:
            rbmap[net.id] = old2new[host.id_of(out_rename[net.id])]
        elif net.kind == "key":
            hname = new.fresh_name(f"keyinput{rb_index}_{len(host_keys)}")
            rbmap[net.id] = new.add_net(hname, "key")
            host_keys[net.name] = hname
        elif net.kind == "const":
            rbmap[net.id] = new.add_net(new.fresh_name(f"rb{rb_index}_{net.name}"),
                                        "const", net.value)
        else:
            rbmap[net.id] = new.add_net(new.fresh_name(f"rb{rb_index}_{net.name}"))
    for gname, gids in host.gate_groups.items():
        new.gate_groups[gname] = []
    group = f"rb{rb_index}"
    new.gate_groups[group] = []
    for gi, g in enumerate(host.gates):
        if gi in removed:
            continue
        ngi = new.add_gate(g.gtype, [old2new[i] for i in g.inputs], old2new[g.output])
        for gname, gids in host.gate_groups.items():
            if gi in gids:
                new.gate_groups[gname].append(ngi)
    for g in rbnl.gates:
        ngi = new.add_gate(g.gtype, [rbmap[i] for i in g.inputs], rbmap[g.output])
        new.gate_groups[group].append(ngi)
    new.primary_outputs = [old2new[p] for p in host.primary_outputs]
    rb.name = group
    rb.host_key_names = [host_keys[k] for k in rb.key_layout]
    rb.host_input_names = [host.name_of(input_map[f"in{i}"])
                           for i in range(rb.n_inputs)]
    rb.host_output_names = [output_names[f"out{j}"] for j in range(rb.m)]
    return new


def lock(n, cfg):
    """Insert cfg.count keyRBs of the chosen topology; returns LockedDesign."""
    import random
    rng = random.Random(cfg.seed)
    if cfg.count == 0:
        host = n.copy()
        host.cyclic_allowed = True
        return LockedDesign(netlist=host, original=n, keyrbs=[],
                            correct_key=[], origin_map={})
    host = n
    rbs = []
    origin = {}
    used = set()  # host net names already routed through a keyRB
    for idx in range(cfg.count):
        if cfg.topology == "interlock":
            host, rb, sel_names = _lock_interlock(host, cfg, idx, rng, used)
        else:
            host, rb, sel_names = _lock_routing(host, cfg, idx, rng, used)
        rbs.append(rb)
        used.update(sel_names)
        for name in sel_names:
            origin[name] = name
    key = []
    for rb in rbs:
        key.extend(rb.correct_key)
    d = LockedDesign(netlist=host, original=n, keyrbs=rbs,
                     correct_key=key, origin_map=origin)
    return d


def _lock_routing(host, cfg, idx, rng, used):
    m = cfg.m
    used_ids = {host.id_of(nm) for nm in used if nm in host._by_name}
    targets = _select_nets(host, m, rng, cfg.net_selection, used_ids)
    names = [host.name_of(t) for t in targets]
    if cfg.topology == "crossbar":
        rb = build_crossbar(m, m)
        perm = list(range(m))  # identity selection
        rb.correct_key = []
        kbits = len(rb.key_layout) // m
        for j in range(m):
            rb.correct_key.extend((j >> b) & 1 for b in range(kbits))
    elif cfg.topology == "fulllock":
        rb = build_logarithmic_keyrb(m, with_inverters=True)
        bits, perm = sample_routing_key(rb, rng)
        rb.correct_key = bits
    else:
        raise ValueError(f"unknown topology {cfg.topology!r}")
    # cut each target net: driver output renamed to <name>__pre feeding the rb
    work = host.copy()
    pre_names = {}
    for t, name in zip(targets, names):
        pre = work.fresh_name(f"{name}__pre")
        pre_id = work.add_net(pre)
        gi = work.driver_of(t)
        g = work.gates[gi]
        work.gates[gi] = type(g)(g.gtype, g.inputs, pre_id)
        del work._driver[t]
        work._driver[pre_id] = gi
        pre_names[name] = pre_id
    # input i carries the pre-cut of the target routed to it (out j <- in perm[j])
    input_map = {}
    for j, name in enumerate(names):
        input_map[f"in{perm[j]}"] = pre_names[name]
    output_names = {f"out{j}": names[j] for j in range(m)}
    new = _instantiate(work, rb, idx, input_map, output_names)
    return new, rb, names


def _lock_interlock(host, cfg, idx, rng, used):
    m = cfg.m
    length = num_layers(m)
    prefer = {"XNOR": 2, "XOR": 2}
    cands = path_candidates(host, length, prefer, interior_single_fanout=True)
    used_ids = {host.id_of(nm) for nm in used if nm in host._by_name}
    live = set()
    for po in host.primary_outputs:
        live |= _fanin_cone(host, po)
    chosen = []
    gates_used = set()
    interiors = set()
    sides = set()
    for path in cands:
        if not gates_used.isdisjoint(path):
            continue
        outs = [host.gates[gi].output for gi in path]
        if any(o in used_ids for o in outs) or outs[-1] not in live:
            continue
        p_interiors = set(outs[:-1])
        p_sides = set()
        ok = True
        for pos, gi in enumerate(path):
            g = host.gates[gi]
            prev_out = host.gates[path[pos - 1]].output if pos else None
            for i in g.inputs:
                if pos and i == prev_out:
                    continue
                if pos == 0 and i == g.inputs[0]:
                    continue  # entry input of the first gate
                p_sides.add(i)
        if p_interiors & sides or p_sides & interiors or p_interiors & p_sides:
            ok = False
        if not ok:
            continue
        chosen.append(list(path))
        gates_used.update(path)
        interiors.update(p_interiors)
        sides.update(p_sides)
        if len(chosen) == m:
            break
    pads = m - len(chosen)
    if pads:
        log.warning("only %d embeddable paths of length %d found; "
                    "%d keyRB outputs fall back to pure routing", len(chosen), length, pads)
    emb = plan_embedding(host, m, chosen, rng, pad_outputs=pads)
    rb = build_interlock_keyrb(m, emb)

    work = host.copy()
    targets = [host.gates[p[-1]].output for p in chosen]
    names = [host.name_of(t) for t in targets]
    input_map = {}
    output_names = {}
    remove = [gi for p in chosen for gi in p]
    for j, path in enumerate(chosen):
        g0 = host.gates[path[0]]
        main = g0.inputs[0]
        input_map[f"in{emb.entry_input[j]}"] = main
        output_names[f"out{j}"] = names[j]
    # pad outputs route spare nets straight through
    if pads:
        spare_used = used_ids | set(targets) | interiors | {i for i in sides}
        spares = _select_nets(work, pads, rng, "random", spare_used)
        chains, out_tokens = trace_chains(m, emb.swaps)
        for k, s in enumerate(spares):
            j = len(chosen) + k
            name = work.name_of(s)
            pre = work.fresh_name(f"{name}__pre")
            pre_id = work.add_net(pre)
            gi = work.driver_of(s)
            g = work.gates[gi]
            work.gates[gi] = type(g)(g.gtype, g.inputs, pre_id)
            del work._driver[s]
            work._driver[pre_id] = gi
            input_map[f"in{out_tokens[j]}"] = pre_id
            output_names[f"out{j}"] = name
            names.append(name)
    # exI wiring
    for slot, (pj, pos) in emb.slot_assignment.items():
        ftype, ex = emb.slot_gates[(pj, pos)]
        if ex[0] == "net":
            input_map[f"exi_{slot[0]}_{slot[1]}_{slot[2]}"] = ex[1]
    new = _instantiate(work, rb, idx, input_map, output_names, remove_gates=remove)
    return new, rb, names


# -- verification ----------------------------------------------------------

def apply_key(netlist, key):
    """Fold key bits in as constants; the result is keyless."""
    nl = netlist.copy()
    for nid, bit in zip(list(nl.key_inputs), key):
        net = nl.nets[nid]
        nl.nets[nid] = Net(nid, net.name, "const", int(bit))
    nl.key_inputs = []
    return nl


def verify_locked(d, key=None, samples=10000, rng=None):
    """Equal (None) or a counterexample PI vector.

    Exhaustive when #PIs <= 16; otherwise random sampling plus a SAT miter
    check with both key copies fixed to the candidate key.
    """
    import random as _random
    from .errors import CycleUnderKey
    key = d.correct_key if key is None else key
    keyed = apply_key(d.netlist, key)
    npi = len(d.original.primary_inputs)

    def differs(pi):
        # a key that leaves a combinational cycle alive is a difference too
        try:
            return d.original.simulate(pi) != keyed.simulate(pi)
        except CycleUnderKey:
            return True

    if npi <= 16:
        for v in range(1 << npi):
            pi = [(v >> i) & 1 for i in range(npi)]
            if differs(pi):
                return pi
        return None
    rng = rng or _random.Random(0)
    for _ in range(samples):
        pi = [rng.randint(0, 1) for _ in range(npi)]
        if differs(pi):
            return pi
    return _miter_check(d.original, keyed)


def _miter_check(a, b):
    """SAT miter between two keyless netlists; None or a counterexample."""
    from .cnf import rename_copy, tseitin
    from .solver import SAT, Session
    cnf_a, map_a = tseitin(a)
    cnf_b, map_b = tseitin(b)
    m = cnf_a.copy()
    clauses, remap, top = rename_copy(cnf_b, set(), m.num_vars)
    m.num_vars = top
    for cl in clauses:
        m.add_clause(cl)
    for ia, ib in zip(a.primary_inputs, b.primary_inputs):
        va, vb = map_a.var(ia), remap[map_b.var(ib)]
        m.add_clause((-va, vb))
        m.add_clause((va, -vb))
    diffs = []
    for oa, ob in zip(a.primary_outputs, b.primary_outputs):
        va, vb = map_a.var(oa), remap[map_b.var(ob)]
        dv = m.new_var()
        m.extend([(-dv, va, vb), (-dv, -va, -vb), (dv, -va, vb), (dv, va, -vb)])
        diffs.append(dv)
    m.add_clause(diffs)
    res = Session(m).solve()
    if res.status == SAT:
        return [1 if res.model[map_a.var(i)] else 0 for i in a.primary_inputs]
    return None
