"""Method-of-types machinery: type classes, (strongly) typical sets,
conditional typicality, and minimal-image-size bounds.

Sequences are index vectors into dense alphabets 0..k-1. Counting is exact
(Python integers) so small-blocklength results can serve as oracles for the
asymptotic statements evaluated elsewhere.

Typicality is per-letter absolute-deviation ("strong") typicality with an
explicit zero-support exclusion: a sequence is delta-typical for P when every
letter frequency is within delta of P and letters outside P's support never
occur. The slack delta is always an explicit parameter.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .probability import Channel, CondPmf, Pmf

# Enumeration guards: refuse blowups instead of thrashing.
MAX_TYPE_ENUMERATION = 10_000_000
MAX_IMAGE_SPACE = 20_000
MAX_IMAGE_EXACT = 20


class InstanceTooLargeError(ValueError):
    """The requested exact computation exceeds the enumeration budget."""


@dataclass(frozen=True)
class TypeClass:
    """Occurrence counts of each letter in a length-n sequence."""

    counts: tuple[int, ...]
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("TypeClass: blocklength must be >= 1")
        if sum(self.counts) != self.n:
            raise ValueError(f"TypeClass: counts {self.counts} do not sum to n={self.n}")

    @property
    def empirical(self) -> Pmf:
        return Pmf(np.asarray(self.counts, dtype=np.float64) / self.n)

    def multiplicity(self) -> int:
        """Number of sequences with these counts (exact multinomial)."""
        out = math.factorial(self.n)
        for c in self.counts:
            out //= math.factorial(c)
        return out


def type_of(seq, alphabet_size: int) -> TypeClass:
    """Tally a sequence into its type class."""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.ndim != 1 or seq.size < 1:
        raise ValueError("type_of: expected a nonempty 1-d sequence")
    if seq.min() < 0 or seq.max() >= alphabet_size:
        raise ValueError(f"type_of: letter out of range 0..{alphabet_size - 1}")
    counts = np.bincount(seq, minlength=alphabet_size)
    return TypeClass(tuple(int(c) for c in counts), int(seq.size))


def enumerate_types(n: int, k: int) -> list[TypeClass]:
    """All compositions of n into k parts, in lexicographic order.

    The count is C(n+k-1, k-1); enumeration refuses anything past the guard.
    """
    if n < 1 or k < 1:
        raise ValueError("enumerate_types: need n >= 1 and k >= 1")
    total = math.comb(n + k - 1, k - 1)
    if total > MAX_TYPE_ENUMERATION:
        raise InstanceTooLargeError(f"enumerate_types: {total} types exceeds guard")
    out = []
    for cuts in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        counts = []
        for c in cuts:
            counts.append(c - prev - 1)
            prev = c
        counts.append(n + k - 2 - prev)
        out.append(TypeClass(tuple(counts), n))
    return out


@dataclass(frozen=True)
class TypicalSet:
    """Delta-typical set for a reference pmf at blocklength n."""

    pmf: Pmf
    n: int
    delta: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("TypicalSet: blocklength must be >= 1")
        if self.delta < 0:
            raise ValueError("TypicalSet: delta must be >= 0")

    def admits(self, t: TypeClass) -> bool:
        if t.n != self.n:
            return False
        p = self.pmf.probs
        for a, c in enumerate(t.counts):
            if p[a] == 0.0 and c > 0:
                return False
            if abs(c / self.n - p[a]) > self.delta + 1e-15:
                return False
        return True

    def enumerate_sequences(self):
        """Yield every member sequence; exact but exponential, small n only."""
        k = self.pmf.size
        if k ** self.n > MAX_TYPE_ENUMERATION:
            raise InstanceTooLargeError(f"enumerate_sequences: {k}^{self.n} too large")
        for seq in itertools.product(range(k), repeat=self.n):
            if typical_membership(self, seq):
                yield seq


def typical_membership(ts: TypicalSet, seq) -> bool:
    """Per-letter frequency check with zero-support exclusion."""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.size != ts.n:
        raise ValueError(f"typical_membership: sequence length {seq.size} != n={ts.n}")
    return ts.admits(type_of(seq, ts.pmf.size))


def typical_count(ts: TypicalSet) -> int:
    """Exact cardinality of the typical set, by summing multinomials over
    admissible types (no sequence enumeration needed)."""
    k = ts.pmf.size
    n_types = math.comb(ts.n + k - 1, k - 1)
    if n_types > MAX_TYPE_ENUMERATION:
        raise InstanceTooLargeError(f"typical_count: {n_types} types exceeds guard")
    total = 0
    for t in enumerate_types(ts.n, k):
        if ts.admits(t):
            total += t.multiplicity()
    return total


def typical_probability(ts: TypicalSet) -> float:
    """Exact probability of the typical set under the product law pmf^n."""
    p = ts.pmf.probs
    total = 0.0
    for t in enumerate_types(ts.n, ts.pmf.size):
        if not ts.admits(t):
            continue
        logmass = 0.0
        degenerate = False
        for a, c in enumerate(t.counts):
            if c == 0:
                continue
            if p[a] == 0.0:
                degenerate = True
                break
            logmass += c * math.log(p[a])
        if not degenerate:
            total += t.multiplicity() * math.exp(logmass)
    return total


def conditional_typical_membership(cond: CondPmf, delta: float, s_seq, x_seq) -> bool:
    """Pair-frequency check: N(s,x)/n must be within delta of (N(s)/n)*P(x|s),
    with pairs outside the conditional support forbidden."""
    s_seq = np.asarray(s_seq, dtype=np.int64)
    x_seq = np.asarray(x_seq, dtype=np.int64)
    if s_seq.size != x_seq.size:
        raise ValueError("conditional_typical_membership: length mismatch")
    n = s_seq.size
    rows = cond.rows
    pair_counts = np.zeros((cond.n_inputs, cond.n_outputs), dtype=np.int64)
    for s, x in zip(s_seq, x_seq):
        pair_counts[s, x] += 1
    s_counts = pair_counts.sum(axis=1)
    for s in range(cond.n_inputs):
        for x in range(cond.n_outputs):
            if rows[s, x] == 0.0 and pair_counts[s, x] > 0:
                return False
            if abs(pair_counts[s, x] / n - (s_counts[s] / n) * rows[s, x]) > delta + 1e-15:
                return False
    return True


def _seq_letters(index: int, n: int, k: int) -> tuple[int, ...]:
    """Decode a row-major mixed-radix sequence index (first letter most
    significant) into letters."""
    letters = []
    for _ in range(n):
        index, rem = divmod(index, k)
        letters.append(rem)
    return tuple(reversed(letters))


def product_channel_row(ch: Channel, x_seq, s_seq) -> np.ndarray:
    """W^n(. | x_seq, s_seq) over all |Y|^n output sequences, indexed
    row-major mixed-radix."""
    x_seq = np.asarray(x_seq, dtype=np.int64)
    s_seq = np.asarray(s_seq, dtype=np.int64)
    n = x_seq.size
    ky = ch.n_outputs
    out = np.ones(1)
    for t in range(n):
        out = np.kron(out, ch.w[s_seq[t], x_seq[t]])
    assert out.size == ky ** n
    return out


@dataclass(frozen=True)
class ImageSizeBounds:
    lower: int
    upper: int
    exact: int | None = None


def min_image_size(pairs, ch: Channel, tau: float, exact_limit: int = MAX_IMAGE_EXACT) -> ImageSizeBounds:
    """Bounds on the smallest output set receiving mass > tau from every
    (x_seq, s_seq) pair.

    Upper bound: greedy covering, repeatedly adding the output sequence that
    maximizes the minimum accumulated mass across pairs. Lower bound: for each
    pair, any single output sequence contributes at most its own mass, so at
    least floor(tau / max_mass) + 1 sequences are needed. Exact value: an
    exhaustive search over subset sizes between the bounds, attempted only
    when the output space is at most ``exact_limit``.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("min_image_size: need at least one (x_seq, s_seq) pair")
    if not 0 < tau < 1:
        raise ValueError("min_image_size: tau must lie in (0, 1)")
    n = len(np.asarray(pairs[0][0]).ravel())
    space = ch.n_outputs ** n
    if space > MAX_IMAGE_SPACE:
        raise InstanceTooLargeError(f"min_image_size: output space {space} exceeds guard")

    masses = np.stack([product_channel_row(ch, x, s) for x, s in pairs])  # (pairs, space)

    lower = 1
    for row in masses:
        lower = max(lower, int(tau / row.max()) + 1)

    # greedy upper bound
    covered = np.zeros(len(pairs))
    chosen: list[int] = []
    remaining = np.ones(space, dtype=bool)
    while covered.min() <= tau:
        gains = covered[:, None] + np.where(remaining[None, :], masses, -1.0)
        best = int(np.argmax(gains.min(axis=0)))
        chosen.append(best)
        covered = covered + masses[:, best]
        remaining[best] = False
        if not remaining.any() and covered.min() <= tau:
            raise ValueError("min_image_size: total mass cannot exceed tau for every pair")
    upper = len(chosen)

    exact = None
    if space <= exact_limit:
        for size in range(lower, upper + 1):
            found = False
            for subset in itertools.combinations(range(space), size):
                if masses[:, subset].sum(axis=1).min() > tau:
                    found = True
                    break
            if found:
                exact = size
                break
        if exact is not None:
            return ImageSizeBounds(lower=exact, upper=exact, exact=exact)
    return ImageSizeBounds(lower=lower, upper=upper, exact=exact)
