"""Complete SAT solving: built-in CDCL engine plus an external-solver bridge.

A Session wraps one clause database and keeps learned clauses across solve
calls. Literals use the DIMACS convention (non-zero ints).
"""

import heapq
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

from .cnf import CNF
from .errors import LiteralOutOfRange

SAT = "SAT"
UNSAT = "UNSAT"
TIMEOUT = "TIMEOUT"


@dataclass
class SolveResult:
    status: str
    model: dict = None  # var -> bool, only when SAT
    stats: dict = field(default_factory=dict)


def _luby(i):
    # Luby restart sequence, 1-indexed
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while (1 << k) - 1 != i:
        k -= 1
        if i > (1 << k) - 1:
            i -= (1 << k) - 1
    return 1 << (k - 1) if k else 1


class Session:
    """Incremental CDCL session with two-literal watching and VSIDS."""

    def __init__(self, cnf=None, seed=0):
        self.nvars = 0
        self.clauses = []       # list of lists of ints
        self.watches = {}       # lit -> list of clause indices
        self.values = []        # var -> 1/0/-1 (index 0 unused)
        self.level = []
        self.reason = []
        self.trail = []
        self.trail_lim = []
        self.activity = []
        self.var_inc = 1.0
        self.var_decay = 0.95
        self.heap = []          # (-activity, var) with lazy priorities
        self.in_heap = []
        self.phase = []
        self.qhead = 0
        self.seed = seed
        self.unsat = False      # formula is globally UNSAT (empty clause / level-0 conflict)
        self.decisions = 0
        self.conflicts = 0
        self.propagations = 0
        if cnf is not None:
            self._grow(cnf.num_vars)
            for c in cnf.clauses:
                self.add_clause(c)

    # -- setup ------------------------------------------------------------

    def _grow(self, nvars):
        while self.nvars < nvars:
            self.nvars += 1
            self.values.append(-1)
            self.level.append(0)
            self.reason.append(None)
            self.activity.append(0.0)
            self.phase.append(0)
            self.in_heap.append(True)
            heapq.heappush(self.heap, (0.0, self.nvars))

    def add_var(self):
        self._grow(self.nvars + 1)
        return self.nvars

    def add_clause(self, lits):
        """Add a problem clause; may be called between solve calls."""
        for l in lits:
            if l == 0:
                raise LiteralOutOfRange("literal 0")
            if abs(l) > self.nvars:
                self._grow(abs(l))
        # drop duplicates / tautologies
        seen = set()
        cl = []
        for l in lits:
            if -l in seen:
                return
            if l not in seen:
                seen.add(l)
                cl.append(l)
        self._backtrack(0)
        if not cl:
            self.unsat = True
            return
        # remove literals already false at level 0, stop if satisfied
        fixed = []
        for l in cl:
            v = self.values[abs(l) - 1]
            if v != -1 and self.level[abs(l) - 1] == 0:
                if (v == 1) == (l > 0):
                    return  # satisfied at root
                continue      # false at root, drop literal
            fixed.append(l)
        if not fixed:
            self.unsat = True
            return
        if len(fixed) == 1:
            if not self._enqueue(fixed[0], None):
                self.unsat = True
            elif self._propagate() is not None:
                self.unsat = True
            return
        ci = len(self.clauses)
        self.clauses.append(fixed)
        self.watches.setdefault(fixed[0], []).append(ci)
        self.watches.setdefault(fixed[1], []).append(ci)

    # -- assignment mechanics ---------------------------------------------

    def _value_lit(self, l):
        v = self.values[abs(l) - 1]
        if v == -1:
            return -1
        return 1 if (v == 1) == (l > 0) else 0

    def _enqueue(self, l, reason_ci):
        var = abs(l)
        v = self.values[var - 1]
        if v != -1:
            return (v == 1) == (l > 0)
        self.values[var - 1] = 1 if l > 0 else 0
        self.level[var - 1] = len(self.trail_lim)
        self.reason[var - 1] = reason_ci
        self.trail.append(l)
        return True

    def _propagate(self):
        """Unit propagation; returns a conflicting clause index or None.

        The literal tests are inlined: this loop dominates solver runtime.
        """
        values = self.values
        watches = self.watches
        clauses = self.clauses
        trail = self.trail
        level = self.level
        reason = self.reason
        nprop = 0
        while self.qhead < len(trail):
            l = trail[self.qhead]
            self.qhead += 1
            nprop += 1
            neg = -l
            wl = watches.get(neg)
            if not wl:
                continue
            keep = []
            i = 0
            n = len(wl)
            conflict = None
            lvl = len(self.trail_lim)
            while i < n:
                ci = wl[i]
                i += 1
                cl = clauses[ci]
                # ensure the false literal is in slot 1
                if cl[0] == neg:
                    cl[0], cl[1] = cl[1], cl[0]
                first = cl[0]
                fv = values[first - 1] if first > 0 else values[-first - 1]
                if fv != -1 and (fv == 1) == (first > 0):
                    keep.append(ci)
                    continue
                moved = False
                for k in range(2, len(cl)):
                    x = cl[k]
                    xv = values[x - 1] if x > 0 else values[-x - 1]
                    if xv == -1 or (xv == 1) == (x > 0):
                        cl[1], cl[k] = cl[k], cl[1]
                        watches.setdefault(x, []).append(ci)
                        moved = True
                        break
                if moved:
                    continue
                keep.append(ci)
                if fv != -1:
                    keep.extend(wl[i:])
                    conflict = ci
                    break
                var = first if first > 0 else -first
                values[var - 1] = 1 if first > 0 else 0
                level[var - 1] = lvl
                reason[var - 1] = ci
                trail.append(first)
            watches[neg] = keep
            if conflict is not None:
                self.propagations += nprop
                return conflict
        self.propagations += nprop
        return None

    def _backtrack(self, lvl):
        if len(self.trail_lim) <= lvl:
            return
        bound = self.trail_lim[lvl]
        for l in reversed(self.trail[bound:]):
            var = l if l > 0 else -l
            self.phase[var - 1] = self.values[var - 1]
            self.values[var - 1] = -1
            self.reason[var - 1] = None
            if not self.in_heap[var - 1]:
                self.in_heap[var - 1] = True
                heapq.heappush(self.heap, (-self.activity[var - 1], var))
        del self.trail[bound:]
        del self.trail_lim[lvl:]
        self.qhead = min(self.qhead, len(self.trail))

    def _bump(self, var):
        self.activity[var - 1] += self.var_inc
        if self.activity[var - 1] > 1e100:
            inv = 1e-100
            self.activity = [a * inv for a in self.activity]
            self.var_inc *= inv
            self._rebuild_heap()

    def _rebuild_heap(self):
        """Refresh lazy heap priorities against current activities."""
        self.heap = [(-self.activity[v - 1], v)
                     for v in range(1, self.nvars + 1)
                     if self.values[v - 1] == -1]
        heapq.heapify(self.heap)
        self.in_heap = [self.values[v - 1] == -1 for v in range(1, self.nvars + 1)]

    def _analyze(self, conflict_ci):
        """First-UIP learning; returns (learned clause, backjump level)."""
        learned = []
        seen = [False] * (self.nvars + 1)
        counter = 0
        p = None  # literal whose reason clause is being resolved
        ci = conflict_ci
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        while True:
            for q in self.clauses[ci]:
                if q == p:
                    continue
                var = abs(q)
                if not seen[var] and self.level[var - 1] > 0:
                    seen[var] = True
                    self._bump(var)
                    if self.level[var - 1] == cur_level:
                        counter += 1
                    else:
                        learned.append(q)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            p = self.trail[idx]
            var = abs(p)
            seen[var] = False
            idx -= 1
            counter -= 1
            if counter == 0:
                learned.insert(0, -p)
                break
            ci = self.reason[var - 1]
        if len(learned) == 1:
            return learned, 0
        bj = max(self.level[abs(q) - 1] for q in learned[1:])
        # put a literal of the backjump level in slot 1
        for k in range(1, len(learned)):
            if self.level[abs(learned[k]) - 1] == bj:
                learned[1], learned[k] = learned[k], learned[1]
                break
        return learned, bj

    def _decide_var(self):
        best = 0
        best_act = -1.0
        for var in range(1, self.nvars + 1):
            if self.values[var - 1] == -1 and self.activity[var - 1] > best_act:
                best = var
                best_act = self.activity[var - 1]
        return best

    # -- main loop --------------------------------------------------------

    def solve(self, assumptions=(), timeout_s=None):
        """Complete search under assumptions; retains learned clauses."""
        for l in assumptions:
            if l == 0 or abs(l) > self.nvars:
                raise LiteralOutOfRange(f"assumption {l} out of range")
        if self.unsat:
            return SolveResult(UNSAT, stats={"decisions": 0, "conflicts": 0,
                                             "propagations": 0})
        t0 = time.monotonic()
        d0, c0, p0 = self.decisions, self.conflicts, self.propagations
        self._backtrack(0)
        if self._propagate() is not None:
            self.unsat = True
            return self._result(UNSAT, d0, c0, p0)
        restart_num = 1
        conflict_budget = 100 * _luby(restart_num)
        conflicts_here = 0
        self._rebuild_heap()
        while True:
            conflict = self._propagate()
            if conflict is not None:
                self.conflicts += 1
                conflicts_here += 1
                if len(self.trail_lim) == 0:
                    self.unsat = True
                    return self._result(UNSAT, d0, c0, p0)
                if len(self.trail_lim) <= len(assumptions):
                    # conflict inside the assumption prefix: UNSAT under assumptions
                    self._backtrack(0)
                    return self._result(UNSAT, d0, c0, p0)
                learned, bj = self._analyze(conflict)
                self._learn(learned, bj)
                self.var_inc /= self.var_decay
                if conflicts_here >= conflict_budget:
                    conflicts_here = 0
                    restart_num += 1
                    conflict_budget = 100 * _luby(restart_num)
                    self._backtrack(len(assumptions) if len(self.trail_lim) > len(assumptions) else len(self.trail_lim))
                if self.conflicts % 256 == 0:
                    self._rebuild_heap()
                    if timeout_s is not None and time.monotonic() - t0 > timeout_s:
                        self._backtrack(0)
                        return self._result(TIMEOUT, d0, c0, p0)
                continue
            if timeout_s is not None and time.monotonic() - t0 > timeout_s:
                self._backtrack(0)
                return self._result(TIMEOUT, d0, c0, p0)
            # next decision: assumptions first
            lvl = len(self.trail_lim)
            if lvl < len(assumptions):
                l = assumptions[lvl]
                v = self._value_lit(l)
                if v == 0:
                    self._backtrack(0)
                    return self._result(UNSAT, d0, c0, p0)
                self.trail_lim.append(len(self.trail))
                if v == -1:
                    self._enqueue(l, None)
                continue
            var = self._pick()
            if var == 0:
                model = {v: self.values[v - 1] == 1 for v in range(1, self.nvars + 1)}
                res = self._result(SAT, d0, c0, p0, model)
                self._backtrack(0)
                return res
            self.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._enqueue(var if self.phase[var - 1] == 1 else -var, None)

    def _pick(self):
        heap = self.heap
        values = self.values
        while heap:
            _a, var = heapq.heappop(heap)
            self.in_heap[var - 1] = False
            if values[var - 1] == -1:
                return var
        for var in range(1, self.nvars + 1):
            if values[var - 1] == -1:
                self._rebuild_heap()
                return self._pick()
        return 0

    def _learn(self, learned, bj):
        self._backtrack(bj)
        if len(learned) == 1:
            self._enqueue(learned[0], None)
            return
        ci = len(self.clauses)
        self.clauses.append(learned)
        self.watches.setdefault(learned[0], []).append(ci)
        self.watches.setdefault(learned[1], []).append(ci)
        self._enqueue(learned[0], ci)

    def _result(self, status, d0, c0, p0, model=None):
        return SolveResult(status, model=model, stats={
            "decisions": self.decisions - d0,
            "conflicts": self.conflicts - c0,
            "propagations": self.propagations - p0,
        })


# -- module-level API -----------------------------------------------

def new_session(c: CNF, seed=0):
    return Session(c, seed=seed)


def add_clause(session, clause):
    session.add_clause(clause)


def solve(session, assumptions=(), timeout_s=None):
    res = session.solve(assumptions, timeout_s=timeout_s)
    if res.status == SAT and __debug__:
        for cl in session.clauses:
            assert any(res.model[abs(l)] == (l > 0) for l in cl), "model check failed"
    return res


# -- external solver bridge -----------------------------------------------

class ExternalSession:
    """Runs an external solver binary on a DIMACS file per solve call.

    Assumptions are appended as unit clauses, so UNSAT answers are relative
    to them, matching the built-in Session contract (without learnt reuse).
    """

    def __init__(self, cnf, solver_path, seed=0):
        if shutil.which(solver_path) is None and not os.path.exists(solver_path):
            raise FileNotFoundError(f"external solver not found: {solver_path}")
        self.solver_path = solver_path
        self.nvars = cnf.num_vars if cnf else 0
        self.clauses = [list(c) for c in cnf.clauses] if cnf else []
        self.decisions = self.conflicts = self.propagations = 0

    def add_var(self):
        self.nvars += 1
        return self.nvars

    def add_clause(self, lits):
        for l in lits:
            if abs(l) > self.nvars:
                self.nvars = abs(l)
        self.clauses.append(list(lits))

    def solve(self, assumptions=(), timeout_s=None):
        lines = [f"p cnf {self.nvars} {len(self.clauses) + len(assumptions)}"]
        for c in self.clauses:
            lines.append(" ".join(map(str, c)) + " 0")
        for a in assumptions:
            lines.append(f"{a} 0")
        with tempfile.NamedTemporaryFile("w", suffix=".cnf", delete=False) as f:
            f.write("\n".join(lines) + "\n")
            path = f.name
        try:
            proc = subprocess.run([self.solver_path, path], capture_output=True,
                                  text=True, timeout=timeout_s)
        except subprocess.TimeoutExpired:
            os.unlink(path)
            return SolveResult(TIMEOUT, stats={"decisions": 0, "conflicts": 0,
                                               "propagations": 0})
        os.unlink(path)
        status = None
        model = {}
        for line in proc.stdout.splitlines():
            if line.startswith("s "):
                status = SAT if "UNSAT" not in line else UNSAT
            elif line.startswith("v "):
                for tok in line[2:].split():
                    l = int(tok)
                    if l:
                        model[abs(l)] = l > 0
        if status is None:
            raise RuntimeError(f"external solver produced no status line:\n{proc.stdout}")
        for v in range(1, self.nvars + 1):
            model.setdefault(v, False)
        return SolveResult(status, model=model if status == SAT else None,
                           stats={"decisions": 0, "conflicts": 0, "propagations": 0})
