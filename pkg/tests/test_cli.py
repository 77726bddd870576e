import csv
import json
import os

import pytest

from keylock.cli import main
from keylock.netlist import parse_bench, random_netlist, write_bench


@pytest.fixture
def host_file(tmp_path):
    n = random_netlist(n_pi=8, n_gates=50, seed=7, xor_rich=True, chainy=True)
    p = tmp_path / "host.bench"
    p.write_text(write_bench(n))
    return p


def run(*argv):
    return main([str(a) for a in argv])


class TestLock:
    def test_lock_writes_bench_and_manifest(self, host_file, tmp_path):
        out = tmp_path / "locked.bench"
        assert run("lock", host_file, "-o", out, "--topology", "fulllock",
                   "--keyrb-size", "4", "--seed", "11") == 0
        manifest = json.loads((tmp_path / "locked.bench.key.json").read_text())
        assert manifest["schema"] == 1
        assert manifest["topology"] == "fulllock" and manifest["m"] == 4
        locked = parse_bench(out.read_text())
        assert len(locked.key_inputs) == len(manifest["key"]) == 24

    def test_count_zero_is_normalized_copy(self, host_file, tmp_path):
        out = tmp_path / "copy.bench"
        assert run("lock", host_file, "-o", out, "--count", "0") == 0
        norm = write_bench(parse_bench(host_file.read_text()))
        assert out.read_text() == norm

    def test_deterministic_outputs(self, host_file, tmp_path):
        a, b = tmp_path / "a.bench", tmp_path / "b.bench"
        for out in (a, b):
            run("lock", host_file, "-o", out, "--topology", "crossbar",
                "--keyrb-size", "4", "--seed", "3")
        assert a.read_text() == b.read_text()
        assert (tmp_path / "a.bench.key.json").read_text() == \
            (tmp_path / "b.bench.key.json").read_text()


class TestVerify:
    def setup_design(self, host_file, tmp_path):
        out = tmp_path / "locked.bench"
        run("lock", host_file, "-o", out, "--topology", "crossbar",
            "--keyrb-size", "4", "--seed", "11")
        return out, tmp_path / "locked.bench.key.json"

    def test_correct_key_exit_zero(self, host_file, tmp_path):
        out, manifest = self.setup_design(host_file, tmp_path)
        assert run("verify", out, "--manifest", manifest) == 0

    def test_wrong_key_exit_two(self, host_file, tmp_path):
        out, manifest = self.setup_design(host_file, tmp_path)
        key = json.loads(manifest.read_text())["key"]
        bad = "".join(str(b ^ 1) for b in key)
        assert run("verify", out, "--manifest", manifest, "--key", bad) == 2


class TestAttack:
    def test_sat_end_to_end(self, host_file, tmp_path):
        out = tmp_path / "locked.bench"
        run("lock", host_file, "-o", out, "--topology", "fulllock",
            "--keyrb-size", "4", "--seed", "11")
        report = tmp_path / "rep.json"
        assert run("attack", out, "--manifest",
                   tmp_path / "locked.bench.key.json", "--method", "sat",
                   "--timeout", "240", "--report", report) == 0
        blob = json.loads(report.read_text())
        assert blob["status"] == "Solved"
        assert blob["method"] == "sat"
        assert blob["iterations"] >= 1

    def test_cpsat_end_to_end(self, host_file, tmp_path):
        out = tmp_path / "locked.bench"
        run("lock", host_file, "-o", out, "--topology", "fulllock",
            "--keyrb-size", "4", "--seed", "11")
        assert run("attack", out, "--manifest",
                   tmp_path / "locked.bench.key.json", "--method", "cpsat",
                   "--timeout", "240") == 0

    def test_mismatched_pair_rejected(self, host_file, tmp_path):
        out1, out2 = tmp_path / "l1.bench", tmp_path / "l2.bench"
        run("lock", host_file, "-o", out1, "--seed", "1")
        run("lock", host_file, "-o", out2, "--seed", "2")
        assert run("attack", out2, "--manifest",
                   tmp_path / "l1.bench.key.json", "--method", "cpsat") == 1


class TestStats:
    def test_bench_stats(self, host_file, capsys):
        assert run("stats", host_file) == 0
        text = capsys.readouterr().out
        assert "vars" in text and "clauses" in text and "ratio" in text

    def test_dimacs_stats(self, tmp_path, capsys):
        p = tmp_path / "f.cnf"
        p.write_text("p cnf 3 2\n1 -2 0\n2 3 0\n")
        assert run("stats", p) == 0
        lines = capsys.readouterr().out
        assert "3" in lines and "2" in lines


class TestBench:
    def test_sweep_rows(self, host_file, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run("bench", "--out", out, "--circuit", host_file,
                   "--topologies", "crossbar", "--sizes", "4", "--methods",
                   "sat,cpsat", "--seeds", "2", "--timeout", "240",
                   "--jobs", "2") == 0
        rows = list(csv.DictReader(out.read_text().splitlines()))
        assert len(rows) == 4
        assert {r["method"] for r in rows} == {"sat", "cpsat"}
        assert all(r["status"] == "Solved" for r in rows)

    def test_sweep_deterministic_order(self, host_file, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            run("bench", "--out", out, "--circuit", host_file,
                "--topologies", "crossbar", "--sizes", "4", "--methods",
                "sat", "--seeds", "2", "--timeout", "240", "--jobs", "2")
        ra = [r[:6] for r in csv.reader(a.read_text().splitlines())]
        rb = [r[:6] for r in csv.reader(b.read_text().splitlines())]
        assert ra == rb


def test_missing_file_is_error(tmp_path):
    assert run("stats", tmp_path / "nope.bench") == 1
