"""Command-line front end: lock, attack, verify, stats, bench."""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed

from .errors import KeylockError
from .netlist import parse_bench, write_bench, random_netlist
from .cnf import tseitin, from_dimacs, stats
from .locking import lock, LockConfig, LockedDesign, verify_locked
from .attack import Oracle, sat_attack, cp_sat_attack, verify_attack_key

MANIFEST_SCHEMA = 1


def _read(path):
    with open(path) as f:
        return f.read()


def _load_manifest(path):
    m = json.loads(_read(path))
    if m.get("schema") != MANIFEST_SCHEMA:
        raise KeylockError(f"unsupported manifest schema {m.get('schema')!r}")
    return m


def _config_from_manifest(m):
    return LockConfig(topology=m["topology"], m=m["m"], count=m["count"],
                      seed=m["seed"], net_selection=m["net_selection"])


def _rebuild_design(manifest, locked_text):
    """Re-run locking from the manifest and check it matches the input.

    The locker is deterministic under a fixed seed, so this recovers the
    routing-block structure the attack preprocessors need without storing
    it all in the manifest.
    """
    original = parse_bench(manifest["original_bench"])
    d = lock(original, _config_from_manifest(manifest))
    if write_bench(d.netlist) != locked_text:
        raise KeylockError(
            "locked netlist does not match the manifest (wrong file pair, "
            "or the bench was edited after locking)")
    return d


def _parse_key(text, width):
    bits = [c for c in text.strip() if not c.isspace() and c != ","]
    if any(c not in "01" for c in bits) or len(bits) != width:
        raise KeylockError(f"key must be {width} bits of 0/1, got {text.strip()!r}")
    return [int(c) for c in bits]


def cmd_lock(args):
    original = parse_bench(_read(args.bench))
    cfg = LockConfig(topology=args.topology, m=args.keyrb_size,
                     count=args.count, seed=args.seed,
                     net_selection=args.select)
    d = lock(original, cfg)
    out_text = write_bench(d.netlist)
    with open(args.out, "w") as f:
        f.write(out_text)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "topology": cfg.topology,
        "m": cfg.m,
        "count": cfg.count,
        "seed": cfg.seed,
        "net_selection": cfg.net_selection,
        "key": d.correct_key,
        "key_inputs": [d.netlist.name_of(k) for k in d.netlist.key_inputs],
        "original_bench": write_bench(original),
    }
    mpath = args.manifest or args.out + ".key.json"
    with open(mpath, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"locked: {len(d.correct_key)} key bits, {len(d.keyrbs)} keyRB(s) "
          f"-> {args.out}, manifest {mpath}")
    return 0


def cmd_attack(args):
    locked_text = _read(args.bench)
    manifest = _load_manifest(args.manifest)
    if args.method == "cpsat":
        d = _rebuild_design(manifest, locked_text)
    else:
        nl = parse_bench(locked_text)
        nl.cyclic_allowed = True
        d = LockedDesign(netlist=nl,
                         original=parse_bench(manifest["original_bench"]),
                         keyrbs=[], correct_key=manifest["key"], origin_map={})
    if args.oracle:
        oracle = Oracle(parse_bench(_read(args.oracle)))
    else:
        oracle = Oracle(d.original)
    attack = cp_sat_attack if args.method == "cpsat" else sat_attack
    rep = attack(d, oracle, timeout_s=args.timeout, solver=args.solver)
    if rep.status == "Solved":
        dcheck = d if d.keyrbs or args.method == "sat" else \
            _rebuild_design(manifest, locked_text)
        cex = verify_attack_key(dcheck, rep.key)
        if cex is not None:
            rep.notes.append(f"recovered key fails verification at PI={cex}")
            rep.status = "Unsound"
    if args.report:
        with open(args.report, "w") as f:
            json.dump(json.loads(rep.to_json()), f, indent=2, sort_keys=True)
            f.write("\n")
    print(f"{args.method}: {rep.status}, N={rep.iterations}, "
          f"t={rep.wall_time_s:.2f}s, queries={rep.queries}")
    return 0 if rep.status == "Solved" else 1


def cmd_verify(args):
    locked_text = _read(args.bench)
    manifest = _load_manifest(args.manifest)
    nl = parse_bench(locked_text)
    nl.cyclic_allowed = True
    d = LockedDesign(netlist=nl,
                     original=parse_bench(manifest["original_bench"]),
                     keyrbs=[], correct_key=manifest["key"], origin_map={})
    key = manifest["key"] if args.key is None else \
        _parse_key(args.key, len(nl.key_inputs))
    cex = verify_locked(d, key=key)
    if cex is None:
        print("Equal")
        return 0
    print("Counterexample: " + "".join(str(b) for b in cex))
    return 2


def cmd_stats(args):
    text = _read(args.file)
    if args.file.endswith((".cnf", ".dimacs")) or text.lstrip().startswith(("p ", "c")):
        c = from_dimacs(text)
    else:
        c, _ = tseitin(parse_bench(text))
    s = stats(c)
    print(f"{'file':<12} {args.file}")
    print(f"{'vars':<12} {s['vars']}")
    print(f"{'clauses':<12} {s['clauses']}")
    print(f"{'ratio':<12} {s['ratio']:.3f}")
    return 0


def _bench_worker(job):
    bench_text, topology, m, count, seed, method, timeout, select = job
    row = {"topology": topology, "m": m, "count": count, "seed": seed,
           "method": method, "N": "", "time_s": "", "clause_reduction": "",
           "status": ""}
    try:
        n = parse_bench(bench_text)
        d = lock(n, LockConfig(topology=topology, m=m, count=count,
                               seed=seed, net_selection=select))
        attack = cp_sat_attack if method == "cpsat" else sat_attack
        rep = attack(d, Oracle(n), timeout_s=timeout)
        row["status"] = rep.status
        row["N"] = rep.iterations
        row["time_s"] = f"{rep.wall_time_s:.3f}"
        if rep.bva_reduction:
            f = max(v["factor"] for v in rep.bva_reduction.values())
            row["clause_reduction"] = f"{f:.3f}"
        if rep.status == "Solved" and verify_attack_key(d, rep.key) is not None:
            row["status"] = "Unsound"
    except KeylockError as e:
        row["status"] = f"Error({type(e).__name__})"
    return row


BENCH_COLUMNS = ["topology", "m", "count", "seed", "method", "N", "time_s",
                 "clause_reduction", "status"]


def cmd_bench(args):
    if args.circuit:
        bench_text = _read(args.circuit)
    else:
        bench_text = write_bench(random_netlist(
            n_pi=10, n_gates=100, seed=args.seed, xor_rich=True, chainy=True))
    jobs = []
    for topo in args.topologies.split(","):
        for m in (int(x) for x in args.sizes.split(",")):
            for count in (int(x) for x in args.counts.split(",")):
                for method in args.methods.split(","):
                    for s in range(args.seeds):
                        jobs.append((bench_text, topo, m, count,
                                     args.seed + s, method, args.timeout,
                                     args.select))
    t0 = time.time()
    with open(args.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        f.flush()
        rows = [None] * len(jobs)
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {pool.submit(_bench_worker, j): i
                       for i, j in enumerate(jobs)}
            done = 0
            for fut in as_completed(futures):
                row = fut.result()
                rows[futures[fut]] = row
                w.writerow(row)
                f.flush()
                done += 1
                print(f"[{done}/{len(jobs)}] {row['topology']} m={row['m']} "
                      f"{row['method']} seed={row['seed']}: {row['status']}",
                      file=sys.stderr)
    # rewrite in sweep order so identical sweeps give identical files
    with open(args.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row)
    print(f"{len(jobs)} runs in {time.time() - t0:.1f}s -> {args.out}")
    return 0


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=int, default=3600,
                   help="per-attack budget in seconds")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="keylock",
        description="Lock, attack, and verify combinational netlists with "
                    "key-programmable routing blocks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lock", help="insert keyRBs into a BENCH netlist")
    p.add_argument("bench")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--manifest", help="key manifest path (default: OUT.key.json)")
    p.add_argument("--topology", choices=["crossbar", "fulllock", "interlock"],
                   default="fulllock")
    p.add_argument("--keyrb-size", type=int, default=4, metavar="M")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--select", choices=["random", "correlated"], default="random")
    _add_common(p)
    p.set_defaults(func=cmd_lock)

    p = sub.add_parser("attack", help="oracle-guided key recovery")
    p.add_argument("bench", help="locked BENCH netlist")
    p.add_argument("--manifest", required=True)
    p.add_argument("--oracle", help="original BENCH to query instead of the "
                                    "manifest copy")
    p.add_argument("--method", choices=["sat", "cpsat"], default="sat")
    p.add_argument("--solver", help="path to an external DIMACS solver "
                                    "(KEYLOCK_SOLVER overrides)")
    p.add_argument("--report", help="write the attack report as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("verify", help="check a key against the original")
    p.add_argument("bench", help="locked BENCH netlist")
    p.add_argument("--manifest", required=True)
    p.add_argument("--key", help="key bits to check (default: manifest key)")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="vars/clauses/ratio of a CNF or netlist")
    p.add_argument("file", help="DIMACS .cnf or BENCH file")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="sweep topologies x sizes x seeds to CSV")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--circuit", help="host BENCH (default: generated)")
    p.add_argument("--topologies", default="crossbar,fulllock")
    p.add_argument("--sizes", default="4,8")
    p.add_argument("--counts", default="1")
    p.add_argument("--methods", default="sat,cpsat")
    p.add_argument("--seeds", type=int, default=3, metavar="N",
                   help="number of consecutive seeds starting at --seed")
    p.add_argument("--select", choices=["random", "correlated"], default="random")
    p.add_argument("--jobs", type=int, default=min(4, os.cpu_count() or 1))
    _add_common(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeylockError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
