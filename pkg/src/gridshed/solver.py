"""Branch-and-bound for mixed-integer conic instances.

The tree search is deterministic and single-threaded. Node relaxations are
pluggable: a plain LP solver for fully linear instances, or an LP solver
wrapped in a lazy outer-approximation loop that separates violated rotated
cones with supporting hyperplanes. Cuts are collected per node and inherited
by children, so every node LP stays small while ancestors' separation work
is never repeated along a path.

The bundled LP engine is scipy's HiGHS interface. Anything implementing
the :class:`ScipyLinProgBackend` call signature
(``solve(c, A_ub, b_ub, A_eq, b_eq, lo, hi) -> (status, x, fun)``) can be
attached instead, and a native conic engine can replace the whole node
relaxation by providing ``handles_cones`` plus ``solve_node``.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import cuts as cutlib
from .instance import ConicMipInstance, SolveResult, _build_csr

log = logging.getLogger("gridshed.solver")


class SolverError(RuntimeError):
    pass


@dataclass
class BnbConfig:
    time_limit: float = 300.0
    rel_gap: float = 1e-4
    abs_gap: float = 1e-9
    node_selection: str = "hybrid"       # best-bound | depth-first | hybrid
    branching: str = "pseudo-cost"       # most-fractional | pseudo-cost
    max_cut_rounds: int = 60             # lazy-cut rounds per node visit
    feas_tol: float = 1e-6
    int_tol: float = 1e-6
    incumbent_cone_tol: float = 1e-8     # cone tolerance for accepting incumbents
    frac_cone_tol: float = 1e-3          # separation depth at fractional points
    heuristic_period: int = 40           # nodes between rounding heuristics
    max_node_visits: int = 50            # re-queue limit for cut-stalled nodes
    log_every: float = 5.0


@dataclass
class NodeSolution:
    status: str                   # optimal | infeasible | unbounded | error
    x: np.ndarray | None = None
    objective: float = -math.inf  # in the instance's max sense
    cone_viol: float = 0.0
    rounds: int = 0


class ScipyLinProgBackend:
    """LP engine backed by scipy.optimize.linprog (HiGHS)."""

    name = "scipy-highs"

    def __init__(self, feas_tol: float = 1e-9):
        self.options = {
            "presolve": True,
            "primal_feasibility_tolerance": feas_tol,
            "dual_feasibility_tolerance": feas_tol,
        }

    def solve(self, c, A_ub, b_ub, A_eq, b_eq, lo, hi):
        have_ub = A_ub is not None and A_ub.shape[0] > 0
        have_eq = A_eq is not None and A_eq.shape[0] > 0
        res = linprog(
            c,
            A_ub=A_ub if have_ub else None,
            b_ub=b_ub if have_ub else None,
            A_eq=A_eq if have_eq else None,
            b_eq=b_eq if have_eq else None,
            bounds=np.column_stack([lo, hi]),
            method="highs",
            options=self.options,
        )
        if res.status == 0:
            return "optimal", res.x, float(res.fun)
        if res.status == 2:
            return "infeasible", None, math.inf
        if res.status == 3:
            return "unbounded", None, -math.inf
        return "error", None, math.inf


class _Node:
    __slots__ = ("lo", "hi", "cut_rows", "bound", "x", "depth", "visits", "seq", "closed")

    def __init__(self, lo, hi, cut_rows, depth=0):
        self.lo = lo
        self.hi = hi
        self.cut_rows = cut_rows      # list[Row], owned by this node
        self.bound = math.inf
        self.x = None
        self.depth = depth
        self.visits = 0
        self.seq = 0
        self.closed = False


class _Work:
    """Shared solve state: instance arrays, cone tables, ordering pairs."""

    def __init__(self, inst: ConicMipInstance, config: BnbConfig, backend=None,
                 seed_cones: bool = True):
        self.inst = inst
        self.config = config
        self.backend = backend or ScipyLinProgBackend()
        self.seed_cones = seed_cones
        obj = inst.obj if inst.obj is not None else np.zeros(inst.n_vars)
        self.sign = -1.0 if inst.maximize else 1.0
        self.c_min = self.sign * obj
        self.A_ub, self.b_ub, self.A_eq, self.b_eq = inst.lp_arrays()
        self.int_cols = inst.integer_cols()
        self.pairs = _ordering_pairs(inst)
        self.lp_solves = 0
        self.cuts_added = 0
        self.prune_threshold = -math.inf
        self.n_cones = len(inst.cones)
        if self.n_cones and seed_cones:
            # static polyhedral seed for every cone, baked into the base LP
            seeds = _seed_rows(inst)
            extra = _build_csr(
                [(np.asarray(r.cols, dtype=np.int64), np.asarray(r.vals, dtype=float))
                 for r in seeds],
                inst.n_vars,
            )
            self.A_ub = sp.vstack([self.A_ub, extra], format="csr")
            self.b_ub = np.concatenate([self.b_ub, [r.rhs for r in seeds]])
            self.cuts_added += len(seeds)
        if self.n_cones:
            cones = inst.cones
            self.cx = np.array([c.x_col for c in cones])
            self.cy = np.array([c.y_col for c in cones])
            self.ac = np.array([c.a.col if c.a.col is not None else 0 for c in cones])
            self.av = np.array([c.a.coef if c.a.col is not None else 0.0 for c in cones])
            self.ak = np.array([c.a.const for c in cones])
            self.bc = np.array([c.b.col if c.b.col is not None else 0 for c in cones])
            self.bv = np.array([c.b.coef if c.b.col is not None else 0.0 for c in cones])
            self.bk = np.array([c.b.const for c in cones])

    def cone_violations(self, x) -> np.ndarray:
        if not self.n_cones:
            return np.zeros(0)
        a = self.av * x[self.ac] + self.ak
        b = self.bv * x[self.bc] + self.bk
        lhs = x[self.cx] ** 2 + x[self.cy] ** 2
        return np.maximum(lhs - a * b, np.maximum(-a, -b))

    def is_integral(self, x) -> bool:
        if not self.int_cols.size:
            return True
        vals = x[self.int_cols]
        return bool(np.abs(vals - np.round(vals)).max() <= self.config.int_tol)

    def solve_lp(self, node: _Node):
        A_ub, b_ub = self.A_ub, self.b_ub
        if node.cut_rows:
            extra = _build_csr(
                [(np.asarray(r.cols, dtype=np.int64), np.asarray(r.vals, dtype=float))
                 for r in node.cut_rows],
                self.inst.n_vars,
            )
            A_ub = sp.vstack([A_ub, extra], format="csr")
            b_ub = np.concatenate([b_ub, [r.rhs for r in node.cut_rows]])
        self.lp_solves += 1
        status, x, fun = self.backend.solve(
            self.c_min, A_ub, b_ub, self.A_eq, self.b_eq, node.lo, node.hi)
        obj = self.sign * fun if math.isfinite(fun) else math.inf
        return status, x, obj

    def propagate(self, lo, hi) -> bool:
        """Fixpoint bound propagation over the x <= y ordering rows.

        Returns False on a proven conflict (lo > hi somewhere).
        """
        changed = True
        while changed:
            changed = False
            for s, b in self.pairs:
                if hi[b] < hi[s]:
                    hi[s] = hi[b]
                    changed = True
                if lo[s] > lo[b]:
                    lo[b] = lo[s]
                    changed = True
        return bool(np.all(lo <= hi + 1e-12))


def _ordering_pairs(inst: ConicMipInstance) -> list[tuple[int, int]]:
    """Rows of the exact shape x - y <= 0 (energization orderings)."""
    pairs = []
    for ridx in range(inst.n_rows):
        if inst.row_sense[ridx] != "<=" or inst.row_rhs[ridx] != 0.0:
            continue
        cols, vals = inst.row_cols[ridx], inst.row_vals[ridx]
        if cols.size != 2:
            continue
        if vals[0] == 1.0 and vals[1] == -1.0:
            pairs.append((int(cols[0]), int(cols[1])))
        elif vals[0] == -1.0 and vals[1] == 1.0:
            pairs.append((int(cols[1]), int(cols[0])))
    return pairs


class LinearNodeSolver:
    """Node relaxation for instances without cone memberships."""

    handles_cones = False

    def solve_node(self, work: _Work, node: _Node) -> NodeSolution:
        status, x, obj = work.solve_lp(node)
        if status != "optimal":
            return NodeSolution(status=status)
        return NodeSolution(status="optimal", x=x, objective=obj)


class OuterApproximationSolver:
    """LP node relaxation with lazy supporting-hyperplane cuts for cones.

    Every round solves the node LP and separates all cones violated beyond
    the current target: the loose feasibility tolerance at fractional
    points, the tight incumbent tolerance once the point is integral. The
    final LP objective is always a valid node bound because every added row
    is valid for the cone.
    """

    handles_cones = True

    def solve_node(self, work: _Work, node: _Node) -> NodeSolution:
        cfg = work.config
        rounds = 0
        while True:
            status, x, obj = work.solve_lp(node)
            if status != "optimal":
                return NodeSolution(status=status, rounds=rounds)
            if obj <= work.prune_threshold:
                # bound already below the incumbent: no point refining
                return NodeSolution(status="optimal", x=x, objective=obj,
                                    cone_viol=math.inf, rounds=rounds)
            viols = work.cone_violations(x)
            vmax = float(viols.max()) if viols.size else 0.0
            target = (cfg.incumbent_cone_tol if work.is_integral(x)
                      else max(cfg.frac_cone_tol, cfg.feas_tol))
            if vmax <= target or rounds >= cfg.max_cut_rounds:
                return NodeSolution(status="optimal", x=x, objective=obj,
                                    cone_viol=vmax, rounds=rounds)
            new_rows = []
            for cidx in np.flatnonzero(viols > target):
                cone = work.inst.cones[cidx]
                new_rows += cutlib.lazy_cone_cut(
                    x, cone, tol=target, lo=node.lo, hi=node.hi,
                    name=f"oa[{cidx}]r{rounds}",
                )
            pinned = [r for r in new_rows if r.sense == "=="]
            for r in pinned:
                # degenerate separation pins a column; fold into node bounds
                node.lo[r.cols[0]] = max(node.lo[r.cols[0]], 0.0)
                node.hi[r.cols[0]] = min(node.hi[r.cols[0]], 0.0)
            new_rows = [r for r in new_rows if r.sense != "=="]
            if not new_rows and not pinned:
                return NodeSolution(status="optimal", x=x, objective=obj,
                                    cone_viol=vmax, rounds=rounds)
            node.cut_rows.extend(new_rows)
            work.cuts_added += len(new_rows) + len(pinned)
            rounds += 1


def default_node_solver(inst: ConicMipInstance):
    return OuterApproximationSolver() if inst.cones else LinearNodeSolver()


def _seed_rows(inst: ConicMipInstance) -> list:
    rows = []
    for cidx, cone in enumerate(inst.cones):
        rows += cutlib.ring_seed_cuts(cone, name=f"seed[{cidx}]")
    return rows


def outer_approximation_loop(inst: ConicMipInstance, backend=None,
                             config: BnbConfig | None = None, seed_cuts: bool = True):
    """Continuous outer-approximation solve of a conic instance.

    Returns (status, point, objective, rounds). Integrality is ignored
    beyond its effect on the target tolerance; the objective is a valid
    relaxation bound at every round because cuts never exclude cone points.
    """
    if not inst.cones:
        raise SolverError("instance has no cones; solve it as a plain LP")
    config = config or BnbConfig()
    work = _Work(inst, config, backend, seed_cones=seed_cuts)
    lo, hi = inst.bounds_arrays()
    if not work.propagate(lo, hi):
        return "infeasible", None, None, 0
    node = _Node(lo, hi, [])
    sol = OuterApproximationSolver().solve_node(work, node)
    if sol.status != "optimal":
        return sol.status, None, None, sol.rounds
    return "optimal", sol.x, sol.objective, sol.rounds


def fix_and_resolve(inst: ConicMipInstance, assignment: dict,
                    config: BnbConfig | None = None, node_solver=None, backend=None,
                    _work: _Work | None = None, _base_cuts=None) -> SolveResult:
    """Continuous solve with the integer columns clamped to an assignment.

    ``assignment`` maps column index -> value for every integer column.
    Used for redispatch and as the incumbent-repair heuristic inside the
    tree search. Infeasible fixings return an infeasible result rather
    than raising.
    """
    t0 = time.time()
    config = config or BnbConfig()
    work = _work or _Work(inst, config, backend)
    lo, hi = inst.bounds_arrays()
    missing = [int(c) for c in work.int_cols if int(c) not in assignment]
    if missing:
        raise SolverError(f"assignment misses integer columns {missing}")
    for col in work.int_cols:
        val = float(assignment[int(col)])
        if val < lo[col] - 1e-9 or val > hi[col] + 1e-9:
            return SolveResult(status="infeasible", time_s=time.time() - t0,
                               message=f"assignment violates bounds of column {col}")
        lo[col] = hi[col] = val
    if not work.propagate(lo, hi):
        return SolveResult(status="infeasible", time_s=time.time() - t0,
                           message="bound propagation conflict")
    node = _Node(lo, hi, list(_base_cuts) if _base_cuts is not None else [])
    solver = node_solver or default_node_solver(inst)
    if inst.cones and not getattr(solver, "handles_cones", False):
        raise SolverError("node solver cannot handle cone memberships")
    sol = solver.solve_node(work, node)
    elapsed = time.time() - t0
    if sol.status != "optimal":
        return SolveResult(status=sol.status, time_s=elapsed, message="fixed solve failed")
    return SolveResult(status="optimal", x=sol.x, objective=sol.objective,
                       bound=sol.objective, gap=0.0, nodes=1, cuts=work.cuts_added,
                       time_s=elapsed)


class _Tree:
    """Open nodes in both best-bound and depth order, lazy deletion."""

    def __init__(self):
        self.heap = []     # (-bound, seq, node)
        self.stack = []    # LIFO for diving
        self.seq = 0
        self.open_count = 0

    def push(self, node: _Node):
        self.seq += 1
        node.seq = self.seq
        heapq.heappush(self.heap, (-node.bound, node.seq, node))
        self.stack.append(node)
        self.open_count += 1

    def _note_closed(self):
        self.open_count -= 1

    def pop_best(self) -> _Node | None:
        while self.heap:
            node = heapq.heappop(self.heap)[2]
            if not node.closed:
                node.closed = True
                self._note_closed()
                return node
        return None

    def pop_deepest(self) -> _Node | None:
        while self.stack:
            node = self.stack.pop()
            if not node.closed:
                node.closed = True
                self._note_closed()
                return node
        return None

    def best_open_bound(self) -> float:
        while self.heap and self.heap[0][2].closed:
            heapq.heappop(self.heap)
        return -self.heap[0][0] if self.heap else -math.inf

    def __len__(self):
        return self.open_count


def solve(inst: ConicMipInstance, config: BnbConfig | None = None, node_solver=None,
          backend=None) -> SolveResult:
    """Branch-and-bound driver.

    Deterministic given (instance, config): node ordering, branching ties
    and the LP backend all break ties by fixed column / insertion order.
    """
    errors = inst.validate()
    if errors:
        raise SolverError("instance invalid: " + "; ".join(errors))
    if inst.obj is None:
        raise SolverError("instance has no objective")
    config = config or BnbConfig()
    work = _Work(inst, config, backend)
    solver = node_solver or default_node_solver(inst)
    if inst.cones and not getattr(solver, "handles_cones", False):
        raise SolverError("instance has cones but the node solver is linear-only")

    state = _SearchState(work, solver, config)
    lo, hi = inst.bounds_arrays()
    if not work.propagate(lo, hi):
        return state.finish("infeasible", "root propagation conflict")
    root = _Node(lo, hi, [])

    state.try_zero_incumbent()
    sol = state.evaluate(root)
    if sol.status in ("infeasible", "unbounded", "error"):
        label = {"infeasible": "", "unbounded": "relaxation unbounded",
                 "error": "root relaxation failed"}[sol.status]
        return state.finish(sol.status, label)
    state.root_bound = root.bound
    state.global_bound = root.bound

    dive: _Node | None = None
    if not state.process(root):
        dive = root

    while True:
        if state.out_of_time():
            state.timed_out = True
            break
        if dive is not None:
            node, dive = dive, None
        else:
            state.refresh_bound()
            if state.converged():
                break
            node = state.next_node()
            if node is None:
                break
        if state.prune(node):
            continue
        dive = state.branch(node)
        state.maybe_heuristic(node)
        state.maybe_log()

    if dive is not None and not dive.closed:
        state.tree.push(dive)
    return state.result()


class _SearchState:
    def __init__(self, work: _Work, solver, config: BnbConfig):
        self.work = work
        self.solver = solver
        self.config = config
        self.t0 = time.time()
        self.tree = _Tree()
        self.inc_x = None
        self.inc_obj = -math.inf
        self.global_bound = math.inf
        self.root_bound = math.inf
        self.residual_bound = -math.inf
        self.nodes = 0
        self.timed_out = False
        self.dirty_closed = False
        self.found_search_incumbent = False
        self.pc_up: dict[int, list] = {}
        self.pc_down: dict[int, list] = {}
        self.last_log = self.t0
        self.bound_history: list[float] = []
        self.incumbent_history: list[float] = []

    # -------------------------------------------------------------- helpers

    def slack(self) -> float:
        if self.inc_obj == -math.inf:
            return 0.0
        return max(self.config.abs_gap, self.config.rel_gap * max(abs(self.inc_obj), 1e-10))

    def out_of_time(self) -> bool:
        return time.time() - self.t0 > self.config.time_limit

    def next_node(self) -> _Node | None:
        mode = self.config.node_selection
        if mode == "depth-first":
            return self.tree.pop_deepest()
        if mode == "hybrid" and not self.found_search_incumbent:
            return self.tree.pop_deepest()
        return self.tree.pop_best()

    def try_zero_incumbent(self):
        zeros = np.zeros(self.work.inst.n_vars)
        if self.work.inst.check_point(zeros, self.config.feas_tol).ok(self.config.feas_tol):
            self.update_incumbent(zeros, float(self.work.inst.obj @ zeros), from_search=False)

    def update_incumbent(self, x, obj, from_search: bool = True) -> bool:
        if obj <= self.inc_obj + 1e-12:
            return False
        check = self.work.inst.check_point(x, self.config.feas_tol)
        if not check.ok(self.config.feas_tol):
            log.debug("rejecting incumbent candidate: violation %.2e", check.max_violation())
            return False
        self.inc_x, self.inc_obj = np.array(x), float(obj)
        self.incumbent_history.append(self.inc_obj)
        if from_search:
            self.found_search_incumbent = True
        log.info("[bnb] incumbent %.8f (nodes=%d)", self.inc_obj, self.nodes)
        return True

    def evaluate(self, node: _Node) -> NodeSolution:
        self.nodes += 1
        node.visits += 1
        self.work.prune_threshold = (self.inc_obj + self.slack()
                                     if self.inc_obj > -math.inf else -math.inf)
        sol = self.solver.solve_node(self.work, node)
        if sol.status == "optimal":
            node.bound = min(sol.objective, node.bound)
            node.x = sol.x
        return sol

    def process(self, node: _Node) -> bool:
        """Digest an evaluated node; True when it is closed."""
        if node.x is None:
            return True
        if node.bound <= self.inc_obj + self.slack():
            self.residual_bound = max(self.residual_bound, node.bound)
            return True
        if self.work.is_integral(node.x):
            viol = (float(self.work.cone_violations(node.x).max())
                    if self.work.n_cones else 0.0)
            if viol <= self.config.incumbent_cone_tol:
                self.update_incumbent(node.x, node.bound)
                return True
            # cut rounds exhausted at an integral point: repair, keep open
            self.incumbent_from_assignment(node.x, node)
            if node.bound <= self.inc_obj + self.slack():
                self.residual_bound = max(self.residual_bound, node.bound)
                return True
            if node.visits >= self.config.max_node_visits:
                self.residual_bound = max(self.residual_bound, node.bound)
                self.dirty_closed = True
                return True
            return False
        return False

    def incumbent_from_assignment(self, x, node: _Node):
        assignment = {int(c): float(round(x[c])) for c in self.work.int_cols}
        res = fix_and_resolve(self.work.inst, assignment, self.config, self.solver,
                              _work=self.work, _base_cuts=node.cut_rows)
        if res.status == "optimal":
            self.update_incumbent(res.x, res.objective)

    def branch(self, node: _Node) -> _Node | None:
        """Split on a fractional column; returns a child to dive into."""
        col = self.pick_branch_col(node.x)
        if col is None:
            # integral but not closed: revisit to accumulate more cuts
            sol = self.evaluate(node)
            if sol.status != "optimal":
                return None
            if not self.process(node):
                node.closed = False
                self.tree.push(node)
            return None
        frac = node.x[col] - math.floor(node.x[col])
        prefer = int(round(node.x[col]))
        parent_bound = node.bound
        children = []
        for val in (prefer, 1 - prefer):
            lo, hi = node.lo.copy(), node.hi.copy()
            lo[col] = hi[col] = float(val)
            if not self.work.propagate(lo, hi):
                continue
            child = _Node(lo, hi, list(node.cut_rows), node.depth + 1)
            child.bound = parent_bound
            sol = self.evaluate(child)
            if sol.status in ("infeasible", "error", "unbounded"):
                continue
            table = self.pc_up if val == 1 else self.pc_down
            dist = max(1.0 - frac, 1e-6) if val == 1 else max(frac, 1e-6)
            table.setdefault(col, []).append(max(parent_bound - child.bound, 0.0) / dist)
            if not self.process(child):
                children.append(child)
        dive = None
        if children:
            if self.config.node_selection in ("hybrid", "depth-first"):
                children.sort(key=lambda n: n.bound)
                dive = children.pop()
            for ch in children:
                self.tree.push(ch)
        return dive

    def pick_branch_col(self, x) -> int | None:
        cols = self.work.int_cols
        if not cols.size:
            return None
        vals = x[cols]
        frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
        mask = frac > self.config.int_tol
        if not mask.any():
            return None
        if self.config.branching == "pseudo-cost" and (self.pc_up or self.pc_down):
            best, best_score = None, -1.0
            for c, f in zip(cols[mask], frac[mask]):
                up = float(np.mean(self.pc_up.get(int(c), [1.0])))
                down = float(np.mean(self.pc_down.get(int(c), [1.0])))
                score = max(up * (1.0 - f), 1e-8) * max(down * f, 1e-8)
                if score > best_score + 1e-15:
                    best, best_score = int(c), score
            return best
        return int(cols[mask][int(np.argmax(frac[mask]))])

    def maybe_heuristic(self, node: _Node):
        if node.x is None or self.nodes % self.config.heuristic_period:
            return
        assignment = self.rounded_assignment(node.x)
        if assignment is not None:
            res = fix_and_resolve(self.work.inst, assignment, self.config, self.solver,
                                  _work=self.work, _base_cuts=node.cut_rows)
            if res.status == "optimal":
                self.update_incumbent(res.x, res.objective)

    def rounded_assignment(self, x) -> dict | None:
        vals = {int(c): int(round(x[c])) for c in self.work.int_cols}
        int_set = set(vals)
        for _ in range(len(self.work.pairs) + 1):
            changed = False
            for s, b in self.work.pairs:
                if s in int_set and b in int_set and vals[s] > vals[b]:
                    vals[s] = 0
                    changed = True
            if not changed:
                return {c: float(v) for c, v in vals.items()}
        return None

    def converged(self) -> bool:
        if self.inc_obj == -math.inf or not math.isfinite(self.global_bound):
            return False
        spread = self.global_bound - self.inc_obj
        denom = max(abs(self.inc_obj), abs(self.global_bound), 1e-10)
        return spread <= self.config.abs_gap or spread / denom <= self.config.rel_gap

    def refresh_bound(self):
        new_bound = max(self.tree.best_open_bound(), self.inc_obj, self.residual_bound)
        if new_bound < self.global_bound:
            self.global_bound = new_bound
        self.bound_history.append(self.global_bound)

    def current_gap(self) -> float | None:
        if self.inc_obj == -math.inf or not math.isfinite(self.global_bound):
            return None
        denom = max(abs(self.inc_obj), abs(self.global_bound), 1e-10)
        return max(self.global_bound - self.inc_obj, 0.0) / denom

    def maybe_log(self):
        now = time.time()
        if now - self.last_log < self.config.log_every:
            return
        self.last_log = now
        gap = self.current_gap()
        log.info(
            "[bnb] nodes=%d open=%d inc=%.8f bound=%.8f gap=%s cuts=%d lps=%d",
            self.nodes, len(self.tree), self.inc_obj, self.global_bound,
            "n/a" if gap is None else f"{gap:.2e}", self.work.cuts_added,
            self.work.lp_solves,
        )

    def prune(self, node: _Node) -> bool:
        if node.bound <= self.inc_obj + self.slack():
            self.residual_bound = max(self.residual_bound, node.bound)
            return True
        return False

    def finish(self, status: str, message: str = "") -> SolveResult:
        return SolveResult(status=status, nodes=self.nodes, cuts=self.work.cuts_added,
                           time_s=time.time() - self.t0, message=message)

    def result(self) -> SolveResult:
        self.refresh_bound()
        elapsed = time.time() - self.t0
        if self.inc_x is None:
            if self.timed_out:
                return SolveResult(status="error", nodes=self.nodes,
                                   cuts=self.work.cuts_added, time_s=elapsed,
                                   message="time limit before any incumbent")
            return self.finish("infeasible")
        bound = max(min(self.global_bound, self.root_bound), self.inc_obj)
        denom = max(abs(self.inc_obj), abs(bound), 1e-10)
        gap = max(bound - self.inc_obj, 0.0) / denom
        within = (bound - self.inc_obj) <= max(self.config.abs_gap,
                                               self.config.rel_gap * denom)
        if within:
            status = "optimal"
        elif self.timed_out or self.dirty_closed:
            status = "feasible_at_limit"
        else:
            status = "optimal" if len(self.tree) == 0 else "feasible_at_limit"
        return SolveResult(status=status, x=self.inc_x, objective=self.inc_obj, bound=bound,
                           gap=gap, nodes=self.nodes, cuts=self.work.cuts_added,
                           time_s=elapsed, bound_history=self.bound_history,
                           incumbent_history=self.incumbent_history)
