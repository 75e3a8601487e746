"""Rate functional for state-dependent channels with noncausal transmitter
CSI, and its optimizations: unconstrained capacity, rate maximization under a
pinned (state, input) joint, and the full-receiver-CSI capacity.

The search space follows the classical structure of the problem: the input is
a deterministic function of an auxiliary variable and the state (deterministic
maps suffice because the objective is convex in the input kernel for a fixed
auxiliary coupling, so the maximum sits at extreme points), while the
auxiliary weights per state are optimized by projected gradient ascent seeded
from a coarse simplex grid. Auxiliary alphabet size defaults to
|X|*|S| + 1, the standard support bound for this functional; it is a
configurable cap, not something the model dictates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._search import Deadline, map_ordered, rng_for, simplex_grid
from .probability import Channel, CondPmf, JointPmf, Pmf, mutual_information


@dataclass(frozen=True)
class GpProblem:
    """A channel together with its i.i.d. state distribution."""

    channel: Channel
    state_pmf: Pmf

    def __post_init__(self):
        if self.state_pmf.size != self.channel.n_states:
            raise ValueError(
                f"state pmf has {self.state_pmf.size} letters, channel has {self.channel.n_states} states"
            )

    @property
    def n_states(self) -> int:
        return self.channel.n_states

    @property
    def n_inputs(self) -> int:
        return self.channel.n_inputs

    @property
    def n_outputs(self) -> int:
        return self.channel.n_outputs


@dataclass(frozen=True)
class AuxPolicy:
    """One point of the rate optimization: a deterministic map h: U x S -> X
    plus per-state auxiliary weights P(u|s)."""

    u_size: int
    h: np.ndarray  # (U, S) int
    p_u_given_s: CondPmf  # rows indexed by s, length U

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.int64)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        if h.ndim != 2 or h.shape[0] != self.u_size:
            raise ValueError(f"h must be (u_size, |S|), got {h.shape}")
        if self.p_u_given_s.n_outputs != self.u_size:
            raise ValueError("p_u_given_s rows must have length u_size")
        if self.p_u_given_s.n_inputs != h.shape[1]:
            raise ValueError("p_u_given_s must have one row per state")
        if h.min() < 0:
            raise ValueError("h entries must be nonnegative input letters")


@dataclass(frozen=True)
class RateResult:
    rate: float
    policy: AuxPolicy
    induced_joint: JointPmf
    budget_exceeded: bool = False


@dataclass(frozen=True)
class RateMaxResult:
    rate: float
    policy: AuxPolicy | None
    budget_exceeded: bool = False


@dataclass(frozen=True)
class SearchOpts:
    """Knobs for the policy searches; defaults match the documented accuracy
    model for alphabets up to size 3."""

    u_size_cap: int | None = None  # None -> |X|*|S| + 1
    grid_step: float = 0.1
    restarts: int = 32
    max_iter: int = 500
    gtol: float = 1e-8
    seed: int = 0
    seed_budget: int = 2048
    h_budget: int = 20000
    budget_seconds: float | None = None
    workers: int = 1


def induced_joint(problem: GpProblem, policy: AuxPolicy) -> JointPmf:
    """P(u,s,x,y) = P_S(s) P(u|s) 1{x = h(u,s)} W(y|x,s)."""
    w = problem.channel.w
    n_s, n_x, n_y = w.shape
    n_u = policy.u_size
    if policy.h.shape[1] != n_s:
        raise ValueError("policy state count does not match problem")
    if policy.h.max() >= n_x:
        raise ValueError("policy maps to an input letter outside the alphabet")
    q = policy.p_u_given_s.rows  # (S, U)
    p_s = problem.state_pmf.probs
    table = np.zeros((n_u, n_s, n_x, n_y))
    for u in range(n_u):
        for s in range(n_s):
            x = policy.h[u, s]
            table[u, s, x, :] = p_s[s] * q[s, u] * w[s, x, :]
    return JointPmf(table, ("u", "s", "x", "y"))


def gp_rate(problem: GpProblem, policy: AuxPolicy) -> float:
    """I(U;Y) - I(U;S) on the induced joint; negative for bad policies."""
    joint = induced_joint(problem, policy)
    return mutual_information(joint, ("u",), ("y",)) - mutual_information(joint, ("u",), ("s",))


def _patterns(n_inputs: int, n_states: int) -> np.ndarray:
    """All deterministic per-state input assignments, one row per pattern."""
    return np.array(list(itertools.product(range(n_inputs), repeat=n_states)), dtype=np.int64)


def _pattern_multisets(n_patterns: int, size: int):
    return itertools.combinations_with_replacement(range(n_patterns), size)


def _ascend_from_seeds(seeds, pat, p_s, w, cell_of, cell_target, opts: SearchOpts):
    """Project the seed pool onto the feasible set, ascend from the best
    `restarts` seeds, and return the best (value, weights) found. The best
    raw seed value is kept as a floor so results are monotone in pool size."""
    pool = np.ascontiguousarray([kernels.project_policy(np.asarray(s, dtype=np.float64),
                                                        cell_of, cell_target)
                                 for s in seeds])
    vals = kernels.policy_value_batch(pool, pat, p_s, w)
    order = np.argsort(-vals, kind="stable")
    top = int(np.argmax(vals))
    best_val = float(vals[top])
    best_q = pool[top]
    for i in order[: max(1, opts.restarts)]:
        q, val = kernels.ascend_policy(pool[i], pat, p_s, w, cell_of, cell_target,
                                       opts.max_iter, opts.gtol)
        if val > best_val:
            best_val = val
            best_q = q
    return best_val, best_q


def _capacity_seeds(pat, n_u, n_s, opts: SearchOpts, h_index: int) -> np.ndarray:
    seeds = [np.full((n_s, n_u), 1.0 / n_u)]
    for u in range(n_u):
        e = np.zeros((n_s, n_u))
        e[:, u] = 1.0
        seeds.append(e)
    row_grid = simplex_grid(n_u, opts.grid_step)
    n_combo = row_grid.shape[0] ** n_s
    if n_combo <= opts.seed_budget:
        for combo in itertools.product(range(row_grid.shape[0]), repeat=n_s):
            seeds.append(row_grid[list(combo)])
    else:
        rng = rng_for(opts.seed, 11, h_index)
        picks = rng.integers(0, row_grid.shape[0], size=(opts.seed_budget, n_s))
        for combo in picks:
            seeds.append(row_grid[combo])
    rng = rng_for(opts.seed, 12, h_index)
    for _ in range(opts.restarts):
        seeds.append(rng.dirichlet(np.ones(n_u), size=n_s))
    return np.ascontiguousarray(seeds)


def gp_capacity(problem: GpProblem, opts: SearchOpts | None = None) -> RateResult:
    """Best rate over deterministic maps (enumerated up to the auxiliary cap,
    modulo relabeling of U) and per-state weights (grid-seeded multistart
    ascent). Monotone in cap, grid density, and restarts by construction."""
    opts = opts or SearchOpts()
    deadline = Deadline(opts.budget_seconds)
    w = problem.channel.w
    p_s = problem.state_pmf.probs
    n_s, n_x, _ = w.shape
    cap = opts.u_size_cap if opts.u_size_cap is not None else n_x * n_s + 1
    patterns = _patterns(n_x, n_s)

    jobs = []
    for u_size in range(1, cap + 1):
        for ms in _pattern_multisets(patterns.shape[0], u_size):
            jobs.append((u_size, ms))
            if len(jobs) > opts.h_budget:
                break
    budget_exceeded = len(jobs) > opts.h_budget
    jobs = jobs[: opts.h_budget]

    def run_job(args):
        j, (u_size, ms) = args
        pat = patterns[list(ms)]  # (U, S)
        cell_of = np.zeros((n_s, u_size), dtype=np.int64)
        cell_target = np.zeros((n_s, 1))
        cell_target[:, 0] = 1.0
        seeds = _capacity_seeds(pat, u_size, n_s, opts, j)
        val, q = _ascend_from_seeds(seeds, pat, p_s, w, cell_of, cell_target, opts)
        return val, u_size, pat, q

    results: list = []
    chunk = 32
    for lo in range(0, len(jobs), chunk):
        if deadline.exceeded():
            budget_exceeded = True
            break
        part = [(i, jobs[i]) for i in range(lo, min(lo + chunk, len(jobs)))]
        results.extend(map_ordered(run_job, part, opts.workers))

    best = None
    for val, u_size, pat, q in results:
        key = (-val, u_size, tuple(pat.ravel()), tuple(np.asarray(q).ravel()))
        if best is None or key < best[0]:
            best = (key, val, u_size, pat, q)
    if best is None:
        raise RuntimeError("no policy evaluated within budget")
    _, val, u_size, pat, q = best
    policy = AuxPolicy(u_size=u_size, h=pat, p_u_given_s=CondPmf(_clean_rows(q)))
    joint = induced_joint(problem, policy)
    rate = mutual_information(joint, ("u",), ("y",)) - mutual_information(joint, ("u",), ("s",))
    return RateResult(rate=rate, policy=policy, induced_joint=joint,
                      budget_exceeded=budget_exceeded)


def _clean_rows(q: np.ndarray) -> np.ndarray:
    """Snap ascent output onto the simplex exactly (kills 1e-16 drift)."""
    q = np.maximum(np.asarray(q, dtype=np.float64), 0.0)
    return q / q.sum(axis=1, keepdims=True)


def rate_bounds(v: Channel, p_sx: JointPmf) -> tuple[float, float]:
    """Cheap exact sandwich for the constrained rate maximum.

    Any admissible coupling satisfies I(U;Y) - I(U;S) <= I(X;Y|S) (the chain
    rule plus the Markov structure), while choosing U = X or a state-
    independent pattern variable achieves max(I(X;Y) - I(X;S), 0)."""
    t = p_sx.table
    ps = t.sum(axis=1)
    px = t.sum(axis=0)
    joint_sxy = t[:, :, None] * v.w  # (S, X, Y)
    py = joint_sxy.sum(axis=(0, 1))
    py_s = joint_sxy.sum(axis=1)  # (S, Y)
    py_x = joint_sxy.sum(axis=0)  # (X, Y)

    def h(vec):
        pos = vec > 0
        return float(-(vec[pos] * np.log(vec[pos])).sum())

    i_xy_s = 0.0
    for s in range(t.shape[0]):
        if ps[s] > 0:
            i_xy_s += ps[s] * h(py_s[s] / ps[s])
    for s in range(t.shape[0]):
        for x in range(t.shape[1]):
            if t[s, x] > 0:
                i_xy_s -= t[s, x] * h(v.w[s, x])
    i_xy = h(py)
    for x in range(t.shape[1]):
        if px[x] > 0:
            i_xy -= px[x] * h(py_x[x] / px[x])
    i_xs = h(ps) + h(px) - h(t.ravel())
    lb = max(i_xy - i_xs, 0.0)
    ub = i_xy_s
    return lb, ub


def _rate_max_seeds(pat, cell_of, cell_target, n_u, n_s, opts, h_index,
                    full_pattern_multiset=False, marg=None):
    seeds = []
    uniform = np.zeros((n_s, n_u))
    for s in range(n_s):
        for c in range(cell_target.shape[1]):
            members = cell_of[s] == c
            k = int(members.sum())
            if k:
                uniform[s, members] = cell_target[s, c] / k
    seeds.append(uniform)
    if full_pattern_multiset and marg is not None:
        # state-independent pattern variable: weights form a product measure
        prod = np.empty((n_s, n_u))
        for u in range(n_u):
            m = 1.0
            for s in range(n_s):
                m *= marg[s, pat[u, s]]
            prod[:, u] = m
        seeds.append(prod)
    rng = rng_for(opts.seed, 21, h_index)
    for _ in range(opts.restarts):
        raw = rng.dirichlet(np.ones(n_u), size=n_s)
        seeds.append(raw)
    return np.ascontiguousarray(seeds)


def gp_rate_max(v: Channel, p_sx: JointPmf, opts: SearchOpts | None = None) -> RateMaxResult:
    """Maximum of the rate functional over couplings whose (state, input)
    joint equals p_sx, the joint being preserved exactly by construction
    (weights live on scaled sub-simplices within each preimage cell)."""
    opts = opts or SearchOpts()
    deadline = Deadline(opts.budget_seconds)
    w = v.w
    n_s, n_x, _ = w.shape
    if p_sx.shape != (n_s, n_x):
        raise ValueError(f"p_sx shape {p_sx.shape} does not match channel ({n_s}, {n_x})")
    t = p_sx.table
    ps = t.sum(axis=1)
    lb, ub = rate_bounds(v, p_sx)
    if ub - lb <= 1e-12:
        return RateMaxResult(rate=lb, policy=None, budget_exceeded=False)

    # conditional input distribution per state; states with zero mass are free
    marg = np.zeros((n_s, n_x))
    for s in range(n_s):
        marg[s] = t[s] / ps[s] if ps[s] > 0 else (1.0 if n_x == 1 else np.eye(n_x)[0])
    support = [set(np.nonzero(t[s] > 0)[0]) for s in range(n_s)]

    cap = opts.u_size_cap if opts.u_size_cap is not None else n_x * n_s + 1
    patterns = _patterns(n_x, n_s)
    n_pat = patterns.shape[0]

    jobs = []
    for u_size in range(1, cap + 1):
        for ms in _pattern_multisets(n_pat, u_size):
            cols = patterns[list(ms)]
            ok = all(support[s] <= set(cols[:, s]) for s in range(n_s))
            if ok:
                jobs.append((u_size, ms))
            if len(jobs) > opts.h_budget:
                break
    budget_exceeded = len(jobs) > opts.h_budget
    jobs = jobs[: opts.h_budget]

    def run_job(args):
        j, (u_size, ms) = args
        pat = patterns[list(ms)]
        cell_of = pat.T.copy()  # (S, U): cell of u under state s is its input letter
        cell_target = marg
        full = u_size == n_pat and list(ms) == list(range(n_pat))
        seeds = _rate_max_seeds(pat, cell_of, cell_target, u_size, n_s, opts, j,
                                full_pattern_multiset=full, marg=marg)
        val, q = _ascend_from_seeds(seeds, pat, ps, w, cell_of, cell_target, opts)
        return val, u_size, pat, q

    results: list = []
    chunk = 32
    for lo in range(0, len(jobs), chunk):
        if deadline.exceeded():
            budget_exceeded = True
            break
        part = [(i, jobs[i]) for i in range(lo, min(lo + chunk, len(jobs)))]
        results.extend(map_ordered(run_job, part, opts.workers))

    best = None
    for val, u_size, pat, q in results:
        key = (-val, u_size, tuple(pat.ravel()), tuple(np.asarray(q).ravel()))
        if best is None or key < best[0]:
            best = (key, val, u_size, pat, q)
    if best is None:
        return RateMaxResult(rate=lb, policy=None, budget_exceeded=budget_exceeded)
    _, val, u_size, pat, q = best
    rate = max(val, lb)
    policy = None
    if val >= lb:
        try:
            policy = AuxPolicy(u_size=u_size, h=pat, p_u_given_s=CondPmf(_clean_rows(q)))
        except ValueError:
            policy = None
    return RateMaxResult(rate=min(rate, ub), policy=policy, budget_exceeded=budget_exceeded)


def _ba_capacity(rows: np.ndarray, tol: float = 1e-9, max_iter: int = 20000) -> float:
    """Plain DMC capacity of a row-stochastic matrix by alternating
    maximization, with the standard upper/lower capacity bracket as the
    stopping rule."""
    n_x, n_y = rows.shape
    r = np.full(n_x, 1.0 / n_x)
    logw = np.where(rows > 0, np.log(np.where(rows > 0, rows, 1.0)), 0.0)
    for _ in range(max_iter):
        py = r @ rows
        d = np.zeros(n_x)
        for x in range(n_x):
            sel = rows[x] > 0
            d[x] = float(np.sum(rows[x, sel] * (logw[x, sel] - np.log(py[sel]))))
        c_low = float(r @ d)
        c_up = float(d.max())
        if c_up - c_low <= tol:
            return max(c_low, 0.0)
        r = r * np.exp(d - d.max())
        r = r / r.sum()
    return max(c_low, 0.0)


def receiver_csi_capacity(problem: GpProblem, tol: float = 1e-9) -> float:
    """Capacity when the receiver also sees the state: the state-weighted
    average of the per-state channel capacities."""
    total = 0.0
    for s in range(problem.n_states):
        p = problem.state_pmf.probs[s]
        if p > 0:
            total += p * _ba_capacity(problem.channel.w[s], tol=tol)
    return total


def augment_receiver_csi(problem: GpProblem) -> GpProblem:
    """Associated channel with output alphabet Y x S (index y*|S| + s) that
    hands the state to the receiver."""
    w = problem.channel.w
    n_s, n_x, n_y = w.shape
    out = np.zeros((n_s, n_x, n_y * n_s))
    for s in range(n_s):
        for x in range(n_x):
            for y in range(n_y):
                out[s, x, y * n_s + s] = w[s, x, y]
    return GpProblem(channel=Channel(out), state_pmf=problem.state_pmf)
