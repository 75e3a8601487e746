"""Probability primitives and information measures on finite alphabets.

Everything works in nats; converting to bits is a display concern handled
by the CLI. All types are immutable after construction and all operations
are pure, so they are safe to share across worker threads.

Conventions: 0*ln(0) = 0 and 0*ln(0/0) = 0, applied termwise. Divergences
return the module constant ``INFEASIBLE`` (= math.inf) when absolute
continuity fails; callers test with ``math.isinf`` rather than comparing
against an overflow artifact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Sentinel for "support violation / infeasible": an explicit value, never the
# result of a floating overflow.
INFEASIBLE = math.inf

# Inputs whose total mass is farther than this from 1 are rejected;
# anything closer is renormalized exactly onto the simplex.
SIMPLEX_TOL = 1e-9

# Entries slightly negative from file-format rounding are clipped to 0.
NEG_CLIP = 1e-12


class AlphabetMismatchError(ValueError):
    """Operands are defined over incompatible alphabets or shapes."""


def _as_distribution(values, name: str) -> np.ndarray:
    """Validate, clip and renormalize a nonnegative vector onto the simplex."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name}: expected a nonempty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: entries must be finite")
    if np.any(arr < -NEG_CLIP):
        raise ValueError(f"{name}: negative entry {arr.min():.3g}")
    arr = np.where(arr < 0.0, 0.0, arr)
    total = float(arr.sum())
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{name}: entries sum to {total!r}, not 1 (tolerance {SIMPLEX_TOL:g})")
    arr = arr / total
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over a dense alphabet 0..k-1."""

    probs: np.ndarray

    def __init__(self, probs):
        object.__setattr__(self, "probs", _as_distribution(probs, "Pmf"))

    @property
    def size(self) -> int:
        return int(self.probs.size)

    @staticmethod
    def uniform(k: int) -> "Pmf":
        return Pmf(np.full(k, 1.0 / k))

    @staticmethod
    def point_mass(k: int, letter: int) -> "Pmf":
        p = np.zeros(k)
        p[letter] = 1.0
        return Pmf(p)

    def __eq__(self, other) -> bool:
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)


@dataclass(frozen=True)
class CondPmf:
    """Stochastic matrix: row a is the conditional distribution P(.|a)."""

    rows: np.ndarray

    def __init__(self, rows):
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"CondPmf: expected a 2-d matrix, got shape {arr.shape}")
        stacked = np.stack([_as_distribution(arr[a], f"CondPmf row {a}") for a in range(arr.shape[0])])
        stacked.setflags(write=False)
        object.__setattr__(self, "rows", stacked)

    @property
    def n_inputs(self) -> int:
        return int(self.rows.shape[0])

    @property
    def n_outputs(self) -> int:
        return int(self.rows.shape[1])

    def row(self, a: int) -> Pmf:
        return Pmf(self.rows[a])

    def __eq__(self, other) -> bool:
        return isinstance(other, CondPmf) and np.array_equal(self.rows, other.rows)


@dataclass(frozen=True)
class JointPmf:
    """Joint pmf over a product alphabet of up to 4 factors.

    The table is kept in its natural shape; ``axes`` names each factor so
    marginalizations can be requested by name rather than position.
    """

    table: np.ndarray
    axes: tuple[str, ...]

    def __init__(self, table, axes):
        arr = np.asarray(table, dtype=np.float64)
        axes = tuple(axes)
        if arr.ndim != len(axes):
            raise ValueError(f"JointPmf: table has {arr.ndim} axes but {len(axes)} names given")
        if not 1 <= arr.ndim <= 4:
            raise ValueError("JointPmf: between 1 and 4 factors supported")
        if len(set(axes)) != len(axes):
            raise ValueError(f"JointPmf: duplicate axis names in {axes}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("JointPmf: entries must be finite")
        if np.any(arr < -NEG_CLIP):
            raise ValueError(f"JointPmf: negative entry {arr.min():.3g}")
        arr = np.where(arr < 0.0, 0.0, arr)
        total = float(arr.sum())
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"JointPmf: entries sum to {total!r}, not 1")
        arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "table", arr)
        object.__setattr__(self, "axes", axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.table.shape)

    def axis_index(self, name: str) -> int:
        try:
            return self.axes.index(name)
        except ValueError:
            raise AlphabetMismatchError(f"no axis named {name!r}; have {self.axes}") from None

    def marginal(self, keep: tuple[str, ...] | list[str]) -> "JointPmf":
        """Marginalize onto the named axes, preserving their given order."""
        keep = tuple(keep)
        idx = [self.axis_index(a) for a in keep]
        drop = tuple(i for i in range(self.table.ndim) if i not in idx)
        summed = self.table.sum(axis=drop) if drop else self.table
        # reorder remaining axes to match the requested order
        remaining = [a for a in self.axes if a in keep]
        perm = [remaining.index(a) for a in keep]
        return JointPmf(np.transpose(summed, perm), keep)

    def marginal_pmf(self, name: str) -> Pmf:
        return Pmf(self.marginal((name,)).table)


@dataclass(frozen=True)
class Channel:
    """State-dependent DMC: w[s, x, y] = probability of output y given (x, s).

    Also used for the hypothetical channels that compete against the true
    channel inside the exponent minimization.
    """

    w: np.ndarray

    def __init__(self, w):
        arr = np.asarray(w, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"Channel: expected a 3-axis table [s][x][y], got shape {arr.shape}")
        rows = np.empty_like(arr)
        for s in range(arr.shape[0]):
            for x in range(arr.shape[1]):
                rows[s, x] = _as_distribution(arr[s, x], f"Channel row (s={s}, x={x})")
        rows.setflags(write=False)
        object.__setattr__(self, "w", rows)

    @property
    def n_states(self) -> int:
        return int(self.w.shape[0])

    @property
    def n_inputs(self) -> int:
        return int(self.w.shape[1])

    @property
    def n_outputs(self) -> int:
        return int(self.w.shape[2])

    def row(self, s: int, x: int) -> Pmf:
        return Pmf(self.w[s, x])

    def __eq__(self, other) -> bool:
        return isinstance(other, Channel) and np.array_equal(self.w, other.w)


def _xlogx(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    pos = v > 0.0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def entropy(p: Pmf | np.ndarray) -> float:
    """Shannon entropy in nats, with the 0*ln(0)=0 convention."""
    v = p.probs if isinstance(p, Pmf) else np.asarray(p, dtype=np.float64)
    return float(-_xlogx(v).sum())


def kl_divergence(p: Pmf | np.ndarray, q: Pmf | np.ndarray) -> float:
    """D(p || q) in nats; INFEASIBLE when p puts mass where q has none."""
    pv = p.probs if isinstance(p, Pmf) else np.asarray(p, dtype=np.float64)
    qv = q.probs if isinstance(q, Pmf) else np.asarray(q, dtype=np.float64)
    if pv.shape != qv.shape:
        raise AlphabetMismatchError(f"kl_divergence: shapes {pv.shape} vs {qv.shape}")
    pos = pv > 0.0
    if np.any(qv[pos] <= 0.0):
        return INFEASIBLE
    return float(np.sum(pv[pos] * (np.log(pv[pos]) - np.log(qv[pos]))))


def conditional_kl(v: Channel, w: Channel, p_sx: JointPmf) -> float:
    """D(V || W | P_SX): per-(s,x)-row KL averaged under the weighting pmf.

    Rows with zero weight contribute nothing even where V and W disagree;
    a support violation on a positively weighted row yields INFEASIBLE.
    """
    if v.w.shape != w.w.shape:
        raise AlphabetMismatchError(f"conditional_kl: channel shapes {v.w.shape} vs {w.w.shape}")
    if p_sx.shape != (v.n_states, v.n_inputs):
        raise AlphabetMismatchError(
            f"conditional_kl: weight shape {p_sx.shape} vs channel ({v.n_states}, {v.n_inputs})"
        )
    total = 0.0
    weights = p_sx.table
    for s in range(v.n_states):
        for x in range(v.n_inputs):
            wt = weights[s, x]
            if wt <= 0.0:
                continue
            d = kl_divergence(v.w[s, x], w.w[s, x])
            if math.isinf(d):
                return INFEASIBLE
            total += wt * d
    return total


def mutual_information(joint: JointPmf, axes_a, axes_b) -> float:
    """I(A; B) between two disjoint groups of axes, clamped into [0, inf)."""
    axes_a = tuple(axes_a) if not isinstance(axes_a, str) else (axes_a,)
    axes_b = tuple(axes_b) if not isinstance(axes_b, str) else (axes_b,)
    if set(axes_a) & set(axes_b):
        raise AlphabetMismatchError(f"axis groups overlap: {axes_a} vs {axes_b}")
    pa = joint.marginal(axes_a).table
    pb = joint.marginal(axes_b).table
    pab = joint.marginal(axes_a + axes_b).table
    mi = entropy(pa.ravel()) + entropy(pb.ravel()) - entropy(pab.ravel())
    if mi < -1e-10:
        raise ValueError(f"mutual information evaluated to {mi!r}; inputs inconsistent")
    return max(mi, 0.0)


def compose_output(p_sx: JointPmf, w: Channel) -> Pmf:
    """Push an (s, x) joint through the channel: out(y) = sum_sx P(s,x) w[s,x,y]."""
    if p_sx.shape != (w.n_states, w.n_inputs):
        raise AlphabetMismatchError(
            f"compose_output: weight shape {p_sx.shape} vs channel ({w.n_states}, {w.n_inputs})"
        )
    out = np.einsum("sx,sxy->y", p_sx.table, w.w)
    return Pmf(out)
