"""Numerical evaluation of the sphere-packing exponent for state channels
with noncausal transmitter CSI.

The quantity is a min (over tilted state pmfs) - max (over conditional input
pmfs) - min (over hypothetical channels whose constrained rate maximum stays
below the target rate) of a two-part divergence: the state tilt pays
D(tilted || true state pmf) and the channel swap pays the conditional
divergence D(V || W) under the tilted (state, input) joint.

Search strategy: dense simplex grids for the two outer layers with
early-abort pruning against the running minimum, a pruned depth-first scan
over per-row channel grids for the inner layer, and local refinement at 1/5
step around the incumbent witnesses. Channel feasibility is decided by exact
information-theoretic sandwich bounds wherever they are conclusive and by the
constrained rate maximization only on the residual band, so reported values
are exact minima over the scanned grids up to that rate check.

Membership convention: the feasible set at rate R is treated as the closure
{rate <= R - strictness_margin} with margin 0 by default; rates are
nonnegative, so the set is empty whenever R <= 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from ._search import Deadline, local_simplex_grid, map_ordered, simplex_grid
from .probability import INFEASIBLE, Channel, CondPmf, JointPmf, Pmf, conditional_kl, kl_divergence
from .rate import GpProblem, SearchOpts, augment_receiver_csi, gp_rate_max


@dataclass(frozen=True)
class ExponentOpts:
    """Grid resolutions, refinement depth and budgets for exponent queries."""

    ps_step: float = 0.05
    pxgs_step: float = 0.05
    v_step: float = 0.1
    refine_depth: int = 1
    strictness_margin: float = 0.0
    workers: int = 1
    budget_seconds: float | None = None
    exact_check_budget: int = 2000
    undecided_buffer: int = 50000
    rate_opts: SearchOpts = field(default_factory=lambda: SearchOpts(
        restarts=4, max_iter=60, seed_budget=32, h_budget=400))

    def __post_init__(self):
        for name in ("ps_step", "pxgs_step", "v_step"):
            step = getattr(self, name)
            if not 0 < step <= 0.5:
                raise ValueError(f"{name} must lie in (0, 0.5], got {step}")


@dataclass(frozen=True)
class ExponentQuery:
    problem: GpProblem
    rate: float
    opts: ExponentOpts = field(default_factory=ExponentOpts)

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("query rate must be positive")


@dataclass(frozen=True)
class ExponentResult:
    """Value plus the witnesses that reproduce it: the argmin state tilt, the
    argmax conditional input pmf, and the argmin channel; value is +inf (the
    INFEASIBLE sentinel) when no admissible channel exists on the grid."""

    value: float
    witness_state_pmf: Pmf | None
    witness_input_cond: CondPmf | None
    witness_channel: Channel | None
    feasibility_margin: float | None
    flags: tuple[str, ...] = ()

    @property
    def infeasible(self) -> bool:
        return math.isinf(self.value)


@dataclass(frozen=True)
class VSetResult:
    member: bool
    rate: float
    budget_exceeded: bool = False


@dataclass(frozen=True)
class ExponentCurve:
    samples: tuple[tuple[float, ExponentResult], ...]


def v_set_contains(v: Channel, rate_r: float, p_sx: JointPmf,
                   opts: ExponentOpts | None = None) -> VSetResult:
    """Membership in the constrained-rate feasible set at rate R: the
    constrained rate maximum must not exceed R - strictness_margin (closure
    convention; empty for R <= 0)."""
    opts = opts or ExponentOpts()
    res = gp_rate_max(v, p_sx, opts.rate_opts)
    if rate_r <= 0:
        return VSetResult(member=False, rate=res.rate, budget_exceeded=res.budget_exceeded)
    member = res.rate <= rate_r - opts.strictness_margin
    return VSetResult(member=member, rate=res.rate, budget_exceeded=res.budget_exceeded)


class _RowCandidates:
    """Per-(s,x) candidate rows for the hypothetical channel: the simplex
    grid plus the true channel row, infinite-divergence rows dropped, sorted
    ascending by divergence (ties by original position)."""

    def __init__(self, w: np.ndarray, grid: np.ndarray):
        n_s, n_x, n_y = w.shape
        self.rows = {}
        for s in range(n_s):
            for x in range(n_x):
                wrow = w[s, x]
                cands = [np.asarray(g) for g in grid]
                if not any(np.array_equal(g, wrow) for g in cands):
                    cands.append(wrow)
                arr = np.stack(cands)
                kl = np.array([kl_divergence(c, wrow) for c in arr])
                keep = np.isfinite(kl)
                arr, kl = arr[keep], kl[keep]
                order = np.argsort(kl, kind="stable")
                arr, kl = arr[order], kl[order]
                ent = np.array([_entropy_vec(c) for c in arr])
                self.rows[(s, x)] = (arr, kl, ent)


def _entropy_vec(v: np.ndarray) -> float:
    pos = v > 0
    return float(-(v[pos] * np.log(v[pos])).sum())


def _local_row_candidates(w_row: np.ndarray, center: np.ndarray, step: float):
    """Refinement candidates: fine local grid around the incumbent row, the
    incumbent itself, and the true row."""
    pts = [np.asarray(p) for p in local_simplex_grid(center, step, 5)]
    pts.append(center)
    if not any(np.array_equal(p, w_row) for p in pts):
        pts.append(w_row)
    uniq = []
    for p in pts:
        if not any(np.array_equal(p, q) for q in uniq):
            uniq.append(p)
    arr = np.stack(uniq)
    kl = np.array([kl_divergence(c, w_row) for c in arr])
    keep = np.isfinite(kl)
    arr, kl = arr[keep], kl[keep]
    order = np.argsort(kl, kind="stable")
    arr, kl = arr[order], kl[order]
    ent = np.array([_entropy_vec(c) for c in arr])
    return arr, kl, ent


@dataclass
class _InnerOutcome:
    value: float          # exact min over the scanned grid, or +inf
    capped: bool          # True when the search was cut at kl_cap
    v_full: np.ndarray | None
    exact_checks: int
    budget_hit: bool
    upper_only: bool = False  # value is only an upper bound (<= floor case)


class _InnerScanner:
    """Shared machinery for the inner channel minimization at a fixed
    (tilted state pmf, conditional input pmf) cell."""

    def __init__(self, problem: GpProblem, limit: float, opts: ExponentOpts):
        self.problem = problem
        self.limit = limit
        self.opts = opts
        self._cap_hint: float | None = None  # lazily computed, see _true_channel_member
        self.w = problem.channel.w
        n_s, n_x, _ = self.w.shape
        self.pat_all = np.array(list(itertools.product(range(n_x), repeat=n_s)), dtype=np.int64)
        # pattern multisets for the budgeted in-scan membership oracle
        cap = n_x * n_s + 1
        flat: list[int] = []
        offs: list[int] = []
        sizes: list[int] = []
        for u_size in range(1, cap + 1):
            for ms in itertools.combinations_with_replacement(range(self.pat_all.shape[0]), u_size):
                offs.append(len(flat))
                sizes.append(u_size)
                flat.extend(ms)
                if len(sizes) >= opts.rate_opts.h_budget:
                    break
        self.ms_flat = np.array(flat, dtype=np.int64)
        self.ms_off = np.array(offs, dtype=np.int64)
        self.ms_size = np.array(sizes, dtype=np.int64)

    def bounds(self, p_s_til: np.ndarray, mid_rows: np.ndarray, kl_cap: float,
               row_cands) -> tuple[float, float, bool]:
        """Cheap sandwich on the inner minimum (no exact rate checks): the
        smallest undecided divergence is a lower bound, the best
        bound-confirmed feasible divergence an upper bound. The exact flag is
        set when no undecided candidate lies below the upper bound, in which
        case the upper bound is the inner minimum itself."""
        prep = self._prepare(p_s_til, mid_rows, row_cands)
        if prep is None:
            return math.inf, math.inf, True
        (cand, row_kl, row_h, row_w, row_s, row_x, p_x, i_xs, pu_pat, row_of,
         active, n_rows) = prep
        und_idx = np.empty((self.opts.undecided_buffer, n_rows), dtype=np.int64)
        und_kl = np.empty(self.opts.undecided_buffer)
        best_combo = np.empty(n_rows, dtype=np.int64)
        best, n_und, overflow = kernels.scan_v_grid(
            cand, row_kl, row_h, row_w, row_s, row_x,
            np.ascontiguousarray(p_s_til), p_x, i_xs,
            self.pat_all, pu_pat, row_of,
            self.limit, kl_cap, und_idx, und_kl, best_combo)
        if overflow:
            return 0.0, float(best), False
        lower = float(min(best, und_kl[:n_und].min())) if n_und else float(best)
        return lower, float(best), n_und == 0 or lower >= best

    def _prepare(self, p_s_til: np.ndarray, mid_rows: np.ndarray, row_cands):
        n_s, n_x, n_y = self.w.shape
        p_sx = p_s_til[:, None] * mid_rows  # (S, X)
        active = [(s, x) for s in range(n_s) for x in range(n_x) if p_sx[s, x] > 0.0]
        n_rows = len(active)
        if n_rows == 0:
            return None
        row_of = np.full((n_s, n_x), -1, dtype=np.int64)
        for r, (s, x) in enumerate(active):
            row_of[s, x] = r
        max_c = max(row_cands[(s, x)][0].shape[0] for s, x in active)
        cand = np.zeros((n_rows, max_c, n_y))
        row_kl = np.full((n_rows, max_c), np.inf)
        row_h = np.zeros((n_rows, max_c))
        row_w = np.empty(n_rows)
        row_s = np.empty(n_rows, dtype=np.int64)
        row_x = np.empty(n_rows, dtype=np.int64)
        for r, (s, x) in enumerate(active):
            arr, kl, ent = row_cands[(s, x)]
            c = arr.shape[0]
            cand[r, :c] = arr
            cand[r, c:] = arr[0]  # padding, unreachable behind the +inf divergence
            row_kl[r, :c] = kl
            row_h[r, :c] = ent
            row_w[r] = p_sx[s, x]
            row_s[r] = s
            row_x[r] = x
        p_x = p_sx.sum(axis=0)
        i_xs = (_entropy_vec(p_s_til) + _entropy_vec(p_x) - _entropy_vec(p_sx.ravel()))
        pu_pat = np.ones(self.pat_all.shape[0])
        marg = np.where(p_s_til[:, None] > 0, mid_rows, 0.0)
        for ui in range(self.pat_all.shape[0]):
            m = 1.0
            for s in range(n_s):
                if p_s_til[s] > 0.0:
                    m *= marg[s, self.pat_all[ui, s]]
            pu_pat[ui] = m
        return (cand, row_kl, row_h, row_w, row_s, row_x, p_x, i_xs, pu_pat,
                row_of, active, n_rows)

    def run(self, p_s_til: np.ndarray, mid_rows: np.ndarray, kl_cap: float,
            row_cands, floor: float = -math.inf) -> _InnerOutcome:
        """Inner minimization; when the confirmed-feasible upper bound is
        already <= floor the exact value cannot raise the caller's running
        maximum, so the undecided rate checks are skipped and the bound is
        returned with upper_only set."""
        prep = self._prepare(p_s_til, mid_rows, row_cands)
        if prep is None:
            return _InnerOutcome(value=INFEASIBLE, capped=False, v_full=None,
                                 exact_checks=0, budget_hit=False)
        (cand, row_kl, row_h, row_w, row_s, row_x, p_x, i_xs, pu_pat, row_of,
         active, n_rows) = prep

        und_idx = np.empty((self.opts.undecided_buffer, n_rows), dtype=np.int64)
        und_kl = np.empty(self.opts.undecided_buffer)
        best_combo = np.empty(n_rows, dtype=np.int64)

        exact_checks = 0
        budget_hit = False
        cap = kl_cap
        for _attempt in range(6):
            best, n_und, overflow = kernels.scan_v_grid(
                cand, row_kl, row_h, row_w, row_s, row_x,
                np.ascontiguousarray(p_s_til), p_x, i_xs,
                self.pat_all, pu_pat, row_of,
                self.limit, cap, und_idx, und_kl, best_combo)
            combo = [int(v) for v in best_combo] if math.isfinite(best) else None
            if math.isfinite(best) and best <= floor and not overflow:
                return _InnerOutcome(value=float(best), capped=False,
                                     v_full=self._assemble(active, row_cands, combo),
                                     exact_checks=exact_checks, budget_hit=budget_hit,
                                     upper_only=True)
            if n_und:
                order = np.lexsort(tuple(und_idx[:n_und, r] for r in range(n_rows - 1, -1, -1))
                                   + (und_kl[:n_und],))
            else:
                order = ()
            for i in order:
                kl_v = float(und_kl[i])
                if kl_v >= best:
                    break
                if exact_checks >= self.opts.exact_check_budget:
                    budget_hit = True
                    break
                exact_checks += 1
                idx = [int(v) for v in und_idx[i]]
                v_full = self._assemble(active, row_cands, idx)
                if np.array_equal(v_full, self.w) and self._true_channel_member():
                    member = True
                else:
                    rate = kernels.rate_max_quick(
                        v_full, np.ascontiguousarray(p_s_til), np.ascontiguousarray(mid_rows),
                        self.limit, self.pat_all, self.ms_flat, self.ms_off, self.ms_size,
                        self.opts.rate_opts.max_iter, self.opts.rate_opts.gtol)
                    member = rate <= self.limit
                if member:
                    best = kl_v
                    combo = idx
                    break
            if not overflow or budget_hit:
                break
            # overflow: tighten the divergence cap and rescan
            new_cap = min(cap, best)
            if not new_cap < cap:
                budget_hit = True
                break
            cap = new_cap
        if combo is None:
            return _InnerOutcome(value=INFEASIBLE, capped=math.isfinite(kl_cap),
                                 v_full=None, exact_checks=exact_checks,
                                 budget_hit=budget_hit)
        v_full = self._assemble(active, row_cands, combo)
        return _InnerOutcome(value=float(best), capped=False, v_full=v_full,
                             exact_checks=exact_checks, budget_hit=budget_hit)

    def _assemble(self, active, row_cands, combo) -> np.ndarray:
        v = self.w.copy()
        for r, (s, x) in enumerate(active):
            v[s, x, :] = row_cands[(s, x)][0][combo[r]]
        return v

    def _true_channel_member(self) -> bool:
        """The true channel's constrained rate never exceeds its capacity, so
        one capacity search settles its membership for every cell at once.
        Lazy: only computed the first time the true channel lands in the
        undecided band (idempotent under concurrent recomputation). Inconclusive
        (False) answers fall back to the per-cell rate check."""
        if self._cap_hint is None:
            from .rate import gp_capacity
            light = SearchOpts(restarts=2, max_iter=150, seed_budget=64, h_budget=2000)
            self._cap_hint = gp_capacity(self.problem, light).rate
        return self._cap_hint <= self.limit


def inner_min(rate_r: float, p_s: Pmf, p_x_given_s: CondPmf, problem: GpProblem,
              opts: ExponentOpts | None = None) -> ExponentResult:
    """Minimize the conditional divergence against the true channel over the
    feasible channel grid at a fixed (tilted state pmf, input policy) pair."""
    opts = opts or ExponentOpts()
    if rate_r <= 0:
        return ExponentResult(value=INFEASIBLE, witness_state_pmf=p_s,
                              witness_input_cond=p_x_given_s, witness_channel=None,
                              feasibility_margin=None, flags=("empty-feasible-set",))
    limit = rate_r - opts.strictness_margin
    scanner = _InnerScanner(problem, limit, opts)
    grid = simplex_grid(problem.n_outputs, opts.v_step)
    row_cands = _RowCandidates(problem.channel.w, grid).rows
    out = scanner.run(p_s.probs, p_x_given_s.rows, np.inf, row_cands)
    flags = ("budget",) if out.budget_hit else ()
    if out.v_full is None:
        return ExponentResult(value=INFEASIBLE, witness_state_pmf=p_s,
                              witness_input_cond=p_x_given_s, witness_channel=None,
                              feasibility_margin=None, flags=flags)
    v = Channel(out.v_full)
    p_sx = JointPmf(p_s.probs[:, None] * p_x_given_s.rows, ("s", "x"))
    rmax = gp_rate_max(v, p_sx, opts.rate_opts)
    return ExponentResult(value=out.value, witness_state_pmf=p_s,
                          witness_input_cond=p_x_given_s, witness_channel=v,
                          feasibility_margin=rate_r - rmax.rate, flags=flags)


def _dedup_rows(rows) -> np.ndarray:
    uniq: list[np.ndarray] = []
    for r in rows:
        r = np.asarray(r)
        if not any(np.array_equal(r, q) for q in uniq):
            uniq.append(r)
    return np.stack(uniq)


_CHUNK = 8  # cells per incumbent update; fixed so results don't depend on workers


def _middle_max(scanner: _InnerScanner, ps: np.ndarray, cap_cell: float,
                mid_combos, bounds_rows, resolve_rows, warm_key: bytes | None):
    """Maximize the inner minimum over the given middle cells.

    Pass 1 sandwiches every cell on the bounding candidate grid; cells whose
    bound is exact (and the grids coincide) need no further work. Pass 2
    resolves cells on the resolution grid in descending upper-bound order
    (the warm cell first) until remaining bounds cannot raise the maximum;
    the resolution grid must contain the bounding grid so upper bounds stay
    valid. The resolved maximum is order-independent; only the witness could
    differ between tie-valued cells, and the ordering is deterministic."""
    same_grid = bounds_rows is resolve_rows
    entries = []
    budget = False
    for k, rows in enumerate(mid_combos):
        lo, up, exact = scanner.bounds(ps, rows, cap_cell, bounds_rows)
        if same_grid and lo >= cap_cell:
            return math.inf, None, budget
        entries.append((-up, k, exact and same_grid, rows))
    entries.sort(key=lambda t: (t[0], t[1]))
    if warm_key is not None:
        for j, e in enumerate(entries):
            if e[3].tobytes() == warm_key:
                entries.insert(0, entries.pop(j))
                break
    mid_max = -math.inf
    mid_wit = None
    pending_rows = None  # exact-bound witness whose channel is fetched lazily
    for neg_up, _k, exact, rows in entries:
        up = -neg_up
        if up <= mid_max:
            break
        if exact:
            mid_max = up
            mid_wit = None
            pending_rows = rows
            if mid_max >= cap_cell:
                return math.inf, None, budget
            continue
        out = scanner.run(ps, rows, cap_cell, resolve_rows, floor=mid_max)
        budget = budget or out.budget_hit
        if not out.upper_only and out.value > mid_max:
            mid_max = out.value
            mid_wit = (rows, out.v_full)
            pending_rows = None
        if mid_max >= cap_cell:
            return math.inf, None, budget
    if pending_rows is not None:
        out = scanner.run(ps, pending_rows, cap_cell, resolve_rows)
        mid_wit = (pending_rows, out.v_full)
    if mid_wit is None or mid_wit[1] is None:
        return math.inf, None, budget
    return mid_max, mid_wit, budget


@dataclass
class _ScanOutcome:
    value: float
    ps: np.ndarray | None
    mid_rows: np.ndarray | None
    v_full: np.ndarray | None
    budget: bool


def _minimax_scan(problem: GpProblem, scanner: _InnerScanner, ps_points,
                  mid_combos, bounds_rows, resolve_rows, opts: ExponentOpts,
                  deadline: Deadline,
                  priority_ps: np.ndarray | None = None) -> _ScanOutcome:
    """Min (over ps_points) - max (over middle cells) - min (inner scan) on
    the given candidate sets, with early-abort pruning against the running
    minimum. Deterministic: cells are ordered by (state tilt, index), the
    chunk size is fixed, and within a chunk only the pre-chunk incumbent and
    warm cell are used, so results do not depend on the worker count."""
    p_s_true = problem.state_pmf.probs
    cells = []
    for i, p in enumerate(ps_points):
        d0 = kl_divergence(p, p_s_true)
        if math.isfinite(d0):
            cells.append((d0, i, p))
    cells.sort(key=lambda c: (c[0], c[1]))
    if priority_ps is not None:
        for j, (_d0, _i, p) in enumerate(cells):
            if np.array_equal(p, priority_ps):
                cells.insert(0, cells.pop(j))
                break

    budget_flag = False
    incumbent = math.inf
    wit = None
    warm_key: bytes | None = None

    def eval_cell(args):
        d0, _idx, ps = args
        if d0 >= incumbent:
            return None
        mval, mwit, budget = _middle_max(scanner, ps, incumbent - d0, mid_combos,
                                         bounds_rows, resolve_rows, warm_key)
        if mwit is None:
            return (math.inf, None, budget)
        return (d0 + mval, (ps, mwit[0], mwit[1]), budget)

    for lo in range(0, len(cells), _CHUNK):
        if deadline.exceeded():
            budget_flag = True
            break
        outs = map_ordered(eval_cell, cells[lo: lo + _CHUNK], opts.workers)
        for res in outs:
            if res is None:
                continue
            total, w_cell, budget = res
            budget_flag = budget_flag or budget
            if w_cell is not None and total < incumbent:
                incumbent = total
                wit = w_cell
                warm_key = w_cell[1].tobytes()
    if wit is None:
        return _ScanOutcome(value=math.inf, ps=None, mid_rows=None, v_full=None,
                            budget=budget_flag)
    return _ScanOutcome(value=incumbent, ps=wit[0], mid_rows=wit[1], v_full=wit[2],
                        budget=budget_flag)


def esp_exponent(query: ExponentQuery, _priority_ps: np.ndarray | None = None) -> ExponentResult:
    """Full min-max-min evaluation. The coarse pass scans the default grids;
    each refinement round rescans on composite grids (coarse plus a 1/5-step
    local neighborhood of the incumbent witnesses) so every layer keeps its
    exact min/max semantics at the finer resolution. Deterministic for a
    fixed query."""
    problem, rate_r, o = query.problem, query.rate, query.opts
    deadline = Deadline(o.budget_seconds)
    limit = rate_r - o.strictness_margin
    p_s_true = problem.state_pmf.probs
    n_s, n_x, n_y = problem.channel.w.shape

    scanner = _InnerScanner(problem, limit, o)
    grid_v = simplex_grid(n_y, o.v_step)
    row_cands = _RowCandidates(problem.channel.w, grid_v).rows
    mid_grid = simplex_grid(n_x, o.pxgs_step)
    mid_combos = [mid_grid[list(combo)]
                  for combo in itertools.product(range(mid_grid.shape[0]), repeat=n_s)]

    ps_points = [np.asarray(p) for p in simplex_grid(n_s, o.ps_step)]
    if not any(np.array_equal(p, p_s_true) for p in ps_points):
        ps_points.append(p_s_true)

    out = _minimax_scan(problem, scanner, ps_points, mid_combos, row_cands,
                        row_cands, o, deadline, priority_ps=_priority_ps)
    flags: set[str] = set()
    if out.budget:
        flags.add("budget")
    if out.v_full is None:
        return ExponentResult(value=INFEASIBLE, witness_state_pmf=None,
                              witness_input_cond=None, witness_channel=None,
                              feasibility_margin=None, flags=tuple(sorted(flags)))

    ps_w, mid_w, v_w = out.ps, out.mid_rows, out.v_full
    value = out.value
    step_ps, step_mid, step_v = o.ps_step, o.pxgs_step, o.v_step
    hit_edge = False
    for _round in range(o.refine_depth):
        if deadline.exceeded():
            flags.add("budget")
            break
        comp_rows = {}
        for s in range(n_s):
            for x in range(n_x):
                base, _base_kl, _base_h = row_cands[(s, x)]
                loc, _loc_kl, _loc_h = _local_row_candidates(
                    problem.channel.w[s, x], v_w[s, x], step_v)
                arr = _dedup_rows(list(base) + list(loc))
                kl = np.array([kl_divergence(c, problem.channel.w[s, x]) for c in arr])
                keep = np.isfinite(kl)
                arr, kl = arr[keep], kl[keep]
                order = np.argsort(kl, kind="stable")
                arr, kl = arr[order], kl[order]
                comp_rows[(s, x)] = (arr, kl, np.array([_entropy_vec(c) for c in arr]))
        # composite middle cells: a local fine block plus the coarse product
        local_mid = [local_simplex_grid(mid_w[s], step_mid, 5) for s in range(n_s)]
        ref_combos: list[np.ndarray] = []
        seen = set()
        for combo in itertools.product(*(range(len(g)) for g in local_mid)):
            rows = np.stack([local_mid[s][combo[s]] for s in range(n_s)])
            key = rows.tobytes()
            if key not in seen:
                seen.add(key)
                ref_combos.append(rows)
        for rows in mid_combos:
            key = rows.tobytes()
            if key not in seen:
                seen.add(key)
                ref_combos.append(rows)
        comp_ps = [np.asarray(p) for p in local_simplex_grid(ps_w, step_ps, 5)]
        ref = _minimax_scan(problem, scanner, comp_ps, ref_combos, row_cands,
                            comp_rows, o, deadline, priority_ps=ps_w)
        if ref.budget:
            flags.add("budget")
        if ref.v_full is None:
            break
        if (np.max(np.abs(ref.ps - ps_w)) >= step_ps - 1e-12
                or np.max(np.abs(ref.v_full - v_w)) >= step_v - 1e-12):
            hit_edge = True
        ps_w, mid_w, v_w = ref.ps, ref.mid_rows, ref.v_full
        value = ref.value
        step_ps /= 5
        step_mid /= 5
        step_v /= 5

    # recompute the value from the witnesses so they stay consistent
    ps_pmf = Pmf(ps_w)
    mid_cond = CondPmf(mid_w)
    v_chan = Channel(v_w)
    p_sx = JointPmf(ps_pmf.probs[:, None] * mid_cond.rows, ("s", "x"))
    value = kl_divergence(ps_pmf, problem.state_pmf) + conditional_kl(
        v_chan, problem.channel, p_sx)
    rmax = gp_rate_max(v_chan, p_sx, o.rate_opts)
    if hit_edge:
        flags.add("grid-boundary")
    return ExponentResult(value=float(value), witness_state_pmf=ps_pmf,
                          witness_input_cond=mid_cond, witness_channel=v_chan,
                          feasibility_margin=rate_r - rmax.rate, flags=tuple(sorted(flags)))


def esp_curve(problem: GpProblem, rates, opts: ExponentOpts | None = None) -> ExponentCurve:
    """Exponent at each rate (strictly increasing), warm-starting from the
    previous witness and enforcing monotone cleanup (a sample exceeding its
    left neighbor is replaced by that neighbor, flagged as repaired)."""
    opts = opts or ExponentOpts()
    rates = [float(r) for r in rates]
    if any(b <= a for a, b in zip(rates, rates[1:])):
        raise ValueError("rates must be strictly increasing")
    samples: list[tuple[float, ExponentResult]] = []
    prev_ps = None
    prev: ExponentResult | None = None
    for r in rates:
        res = esp_exponent(ExponentQuery(problem, r, opts), _priority_ps=prev_ps)
        if prev is not None and res.value > prev.value + 1e-12:
            res = replace(prev, flags=tuple(sorted(set(prev.flags) | {"repaired"})),
                          feasibility_margin=None if prev.feasibility_margin is None
                          else prev.feasibility_margin + (r - samples[-1][0]))
        samples.append((r, res))
        prev = res
        if res.witness_state_pmf is not None:
            prev_ps = res.witness_state_pmf.probs
    return ExponentCurve(samples=tuple(samples))


def esp_receiver_csi(problem: GpProblem, rate_r: float,
                     opts: ExponentOpts | None = None) -> ExponentResult:
    """Exponent for the model where the receiver sees the state too, realized
    on the output-augmented channel."""
    opts = opts or ExponentOpts()
    return esp_exponent(ExponentQuery(augment_receiver_csi(problem), rate_r, opts))
