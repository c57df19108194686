"""Lower-bound and optimality probes for dictionary-restricted widths.

Contents: projection errors (restriction is the best approximation on a
fixed index set), Stechkin selection and its inequality, single-spike
fooling sequences that certify linear lower bounds, an exhaustive best
m-term oracle for tiny supports, and seeded stress inputs for rate sweeps.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InfeasibleError, ParameterError, PreconditionError, ResourceError
from .index_domain import DomainConfig, Index, delta_levels
from .sequence import HybridSequence
from .spaces import SpaceParams, inv, quasinorm

EXHAUSTIVE_MAX_SUPPORT = 14
EXHAUSTIVE_MAX_M = 4
STECHKIN_SLACK = 1e-12


def projection_error(seq: HybridSequence, keep, tgt: SpaceParams) -> float:
    """Target quasi-norm of ``seq`` with the entries in ``keep`` removed."""
    return quasinorm(seq.without(keep), tgt)


def lp_norm(x, p: float) -> float:
    """Scaled l_p (quasi-)norm of a vector, ``p = inf`` allowed."""
    a = np.abs(np.asarray(x, dtype=float))
    if a.size == 0:
        return 0.0
    top = float(a.max())
    if top == 0 or math.isinf(p):
        return top
    return top * math.fsum((a / top) ** p) ** (1.0 / p)


def stechkin_select(values, m: int) -> set:
    """Positions of the ``m`` largest magnitudes, ties resolved towards smaller positions."""
    a = np.abs(np.asarray(values, dtype=float))
    order = np.lexsort((np.arange(len(a)), -a))
    return set(int(i) for i in order[: max(0, min(m, len(a)))])


class StechkinCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def stechkin_check(values, selected, p0: float, p1: float) -> StechkinCheck:
    """Compare the l_p1 tail off ``selected`` with ``(|selected|+1)**-(1/p0-1/p1) * ||values||_p0``.

    ``selected`` must dominate: every selected magnitude is at least every
    unselected one.
    """
    if not p0 <= p1:
        raise ParameterError(f"need p0 <= p1, got p0={p0}, p1={p1}")
    a = np.abs(np.asarray(values, dtype=float))
    sel = np.zeros(len(a), dtype=bool)
    sel[list(selected)] = True
    if sel.any() and (~sel).any() and a[sel].min() < a[~sel].max():
        raise PreconditionError("selected entries do not dominate the remaining ones")
    lhs = lp_norm(a[~sel], p1)
    rhs = (int(sel.sum()) + 1) ** (-(inv(p0) - inv(p1))) * lp_norm(a, p0)
    return StechkinCheck(lhs, rhs, lhs <= rhs * (1 + STECHKIN_SLACK))


@dataclass(frozen=True)
class FoolingSpec:
    """Single-spike input at level ``(M, 0, ..., 0)`` normalized in the source space."""

    src: SpaceParams
    tgt: SpaceParams
    M: int
    d: int

    @property
    def star_level(self) -> tuple:
        return (self.M,) + (0,) * (self.d - 1)

    @property
    def amplitude(self) -> float:
        return 2.0 ** (-(self.src.r - inv(self.src.p) + self.src.s) * self.M)

    def predicted_error(self) -> float:
        """Target error ``C * 2**((r1 - 1/p1 + s1) * M)`` when the spike is not kept."""
        return self.amplitude * 2.0 ** ((self.tgt.r - inv(self.tgt.p) + self.tgt.s) * self.M)


def fooling_level(m: int) -> int:
    """Smallest ``L`` with ``2**L > m``: the level ``(L, 0, ..., 0)`` always has a free shift."""
    return int(m).bit_length()


def fooling_sequence(spec: FoolingSpec, excluded=()) -> HybridSequence:
    """``C * e_(j*, k*)`` with ``k*`` the smallest shift at level ``j*`` outside ``excluded``."""
    DomainConfig(spec.d).check_level(spec.star_level)
    taken = {tuple(ix[1]) for ix in excluded if tuple(ix[0]) == spec.star_level}
    size = 1 << spec.M
    if len(taken) >= size:
        raise InfeasibleError(f"all {size} shifts of level {spec.star_level} are excluded")
    first = 0
    while (first,) + (0,) * (spec.d - 1) in taken:
        first += 1
    shift = (first,) + (0,) * (spec.d - 1)
    return HybridSequence.single(spec.d, spec.star_level, shift, spec.amplitude)


@dataclass(frozen=True)
class WidthEstimate:
    m: int
    value: float
    kind: str = "sigma"
    method: str = "exhaustive"
    witness: frozenset = field(default=frozenset(), compare=False)


def exhaustive_best_m(seq: HybridSequence, m: int, tgt: SpaceParams) -> WidthEstimate:
    """Best approximation error over all index subsets of the support with at most ``m`` elements.

    Coefficient copying is optimal on any fixed subset, so only subsets need
    to be searched.
    """
    n = len(seq)
    if n > EXHAUSTIVE_MAX_SUPPORT or m > EXHAUSTIVE_MAX_M:
        raise ResourceError(
            f"exhaustive search limited to support <= {EXHAUSTIVE_MAX_SUPPORT} and m <= {EXHAUSTIVE_MAX_M}"
        )
    if m < 0:
        raise ParameterError("m must be nonnegative")
    best, best_set = quasinorm(seq, tgt), frozenset()
    for size in range(1, min(m, n) + 1):
        for combo in itertools.combinations(range(n), size):
            keep = np.ones(n, dtype=bool)
            keep[list(combo)] = False
            err = quasinorm(seq.mask(keep), tgt)
            if err < best:
                best, best_set = err, frozenset(combo)
    keys = seq.keys()
    return WidthEstimate(m, best, "sigma", "exhaustive", frozenset(keys[i] for i in best_set))


def stress_family(src: SpaceParams, depth: int, seed, d: int, *, alpha: float = 1.0, beta: float = 0.0,
                  width: int | None = 3) -> HybridSequence:
    """Seeded input spread over every level of ``Delta_depth(alpha, beta)``.

    Each level ``j`` carries ``min(width, 2**|j|_1)`` coefficients at random
    shifts (all shifts when ``width`` is None) with random magnitudes and
    signs, rescaled so that the level contributes exactly 1 to the source
    b-quasi-norm with fine index ``q = inf``.  The result therefore has
    ``h^{r0,s0}_{p0,inf}b`` norm 1.
    """
    rng = np.random.default_rng(seed)
    levels = delta_levels(alpha, beta, depth, d)
    out_l, out_k, out_v = [], [], []
    p0 = src.p
    for j in levels:
        l1 = int(j.sum())
        size = 1 << l1
        n = size if width is None else min(width, size)
        if n == size:
            flat = np.arange(size, dtype=np.int64)
        elif size <= 4 * n:
            flat = rng.choice(size, n, replace=False).astype(np.int64)
        else:
            flat = np.unique(rng.integers(0, size, size=2 * n, dtype=np.int64))[:n]
            while len(flat) < n:
                flat = np.unique(np.concatenate([flat, rng.integers(0, size, size=n, dtype=np.int64)]))[:n]
        shifts = np.stack(np.unravel_index(flat, tuple(1 << int(x) for x in j)), axis=1) if d > 1 \
            else flat.reshape(-1, 1)
        mags = rng.uniform(0.5, 1.0, size=len(flat)) * rng.choice([-1.0, 1.0], size=len(flat))
        level_weight = (src.r - inv(p0)) * l1 + src.s * int(j.max())
        mags *= 2.0 ** (-level_weight) / lp_norm(mags, p0)
        out_l.append(np.broadcast_to(j, (len(flat), d)))
        out_k.append(shifts)
        out_v.append(mags)
    return HybridSequence(d, np.concatenate(out_l), np.concatenate(out_k), np.concatenate(out_v))


def source_norm_inf(seq: HybridSequence, src: SpaceParams) -> float:
    """Norm in the source space with fine index replaced by ``inf`` (b-type)."""
    return quasinorm(seq, SpaceParams("b", src.p, math.inf, src.r, src.s))


def random_sequence(rng: np.random.Generator, d: int, n: int, max_level: int,
                    level=None) -> HybridSequence:
    """``n`` distinct random indices with levels in ``{0..max_level}^d`` (or the fixed ``level``).

    Fewer than ``n`` entries come back when the level range is too small.
    """
    seen = {}
    attempts = 0
    while len(seen) < n and attempts < 50 * n:
        attempts += 1
        j = tuple(int(x) for x in (level if level is not None else rng.integers(0, max_level + 1, size=d)))
        k = tuple(int(rng.integers(0, 1 << ji)) for ji in j)
        if (j, k) not in seen:
            seen[(j, k)] = float(rng.uniform(0.1, 1.0) * rng.choice([-1.0, 1.0]) * 2.0 ** rng.uniform(-4, 4))
    return HybridSequence.from_dict(d, seen) if seen else HybridSequence.empty(d)
