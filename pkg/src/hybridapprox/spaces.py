r"""Hybrid-smoothness sequence spaces :math:`h^{r,s}_{p,q}x`, ``x in {b, f}``.

For a finitely supported sequence ``a`` the b-quasi-norm is

.. math::
    \Big[\sum_j 2^{q((r-1/p)|j|_1 + s|j|_\infty)}
          \big(\sum_k |a_{j,k}|^p\big)^{q/p}\Big]^{1/q}

and the f-quasi-norm is the :math:`L_p([0,1)^d)` norm of
:math:`x \mapsto (\sum_j 2^{q(r|j|_1+s|j|_\infty)} |\sum_k a_{j,k}\chi^{j,k}(x)|^q)^{1/q}`.
Infinite ``p`` or ``q`` are genuine suprema.  The f-norm is evaluated
exactly on the dyadic grid of the finest level present, where the integrand
is piecewise constant.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError, ResourceError
from .sequence import HybridSequence

DEFAULT_CELL_BUDGET = 2 ** 24

_EQ_TOL = 1e-12


def parse_extended(x) -> float:
    """Accept numbers or the strings ``"inf"``/``"∞"`` for an extended positive real."""
    if isinstance(x, str):
        t = x.strip().lower()
        if t in ("inf", "infinity", "∞", "+inf"):
            return math.inf
        x = float(t)
    return float(x)


def inv(p: float) -> float:
    """``1/p`` with ``1/inf = 0``."""
    return 0.0 if math.isinf(p) else 1.0 / p


def positive_part(x: float) -> float:
    return x if x > 0 else 0.0


def _fmt(x: float) -> str | float:
    return "inf" if math.isinf(x) else x


@dataclass(frozen=True)
class SpaceParams:
    """Parameter tuple ``(kind, p, q, r, s)`` of one hybrid sequence space."""

    kind: str
    p: float
    q: float
    r: float
    s: float

    def __post_init__(self):
        if self.kind not in ("b", "f"):
            raise ParameterError(f"kind must be 'b' or 'f', got {self.kind!r}")
        for name in ("p", "q"):
            v = getattr(self, name)
            if not v > 0:
                raise ParameterError(f"{name} must be positive, got {v}")
        if self.kind == "f" and math.isinf(self.p):
            raise ParameterError("f-type spaces require p < inf")
        for name in ("r", "s"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")

    @classmethod
    def make(cls, kind, p, q, r, s) -> "SpaceParams":
        return cls(str(kind).lower(), parse_extended(p), parse_extended(q), float(r), float(s))

    @classmethod
    def from_dict(cls, obj) -> "SpaceParams":
        try:
            return cls.make(obj.get("kind", "b"), obj["p"], obj["q"], obj["r"], obj["s"])
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParameterError(f"malformed space parameters {obj!r}: {exc}") from None

    @classmethod
    def parse(cls, text: str) -> "SpaceParams":
        """Parse ``"kind,p,q,r,s"``, e.g. ``"b,1,inf,2,0"``."""
        parts = [t.strip() for t in text.split(",")]
        if len(parts) != 5:
            raise ParameterError(f"expected 'kind,p,q,r,s', got {text!r}")
        return cls.make(*parts)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": _fmt(self.p), "q": _fmt(self.q), "r": self.r, "s": self.s}

    def replace(self, **changes) -> "SpaceParams":
        fields = self.to_dict()
        fields.update(changes)
        return SpaceParams.make(**fields)


def _level_groups(seq: HybridSequence) -> np.ndarray:
    """Start offsets of the runs of equal level (entries are sorted by level)."""
    lv = seq.levels
    change = np.any(lv[1:] != lv[:-1], axis=1)
    return np.concatenate([[0], np.flatnonzero(change) + 1])


def _log2_lp_runs(a: np.ndarray, starts: np.ndarray, p: float) -> np.ndarray:
    """``log2`` of the l_p norm of each contiguous run of the nonnegative array ``a``."""
    mx = np.maximum.reduceat(a, starts)
    if math.isinf(p):
        return np.log2(mx)
    counts = np.diff(np.append(starts, len(a)))
    scaled = (a / np.repeat(mx, counts)) ** p
    return np.log2(mx) + np.log2(np.add.reduceat(scaled, starts)) / p


def _log2_lq(logt: np.ndarray, q: float) -> float:
    top = float(np.max(logt))
    if math.isinf(q):
        return top
    return top + math.log2(math.fsum(np.exp2(q * (logt - top)))) / q


def _binary_normalized(values: np.ndarray) -> tuple:
    """``(|values| * 2**-E, E)`` with ``E`` the binary exponent of the largest magnitude.

    Both norms work on the normalized magnitudes, so scaling a sequence by a
    power of two changes only ``E`` and the result scales exactly.
    """
    a = np.abs(values)
    _, e = math.frexp(float(a.max()))
    return np.ldexp(a, -e), e


def b_quasinorm(seq: HybridSequence, params: SpaceParams) -> float:
    if params.kind != "b":
        raise ParameterError("b_quasinorm needs kind='b'")
    if len(seq) == 0:
        return 0.0
    a, e = _binary_normalized(seq.values)
    starts = _level_groups(seq)
    lv = seq.levels[starts]
    weight = (params.r - inv(params.p)) * lv.sum(axis=1) + params.s * lv.max(axis=1)
    logt = weight + _log2_lp_runs(a, starts, params.p)
    return math.ldexp(float(2.0 ** _log2_lq(logt, params.q)), e)


def _upsample(block: np.ndarray, level, finest: int) -> np.ndarray:
    d = block.ndim
    shape, target = [], []
    for i in range(d):
        rep = 1 << (finest - int(level[i]))
        shape += [block.shape[i], 1]
        target += [block.shape[i], rep]
    out = np.broadcast_to(block.reshape(shape), target)
    return out.reshape((1 << finest,) * d)


def f_quasinorm(seq: HybridSequence, params: SpaceParams, cell_budget: int = DEFAULT_CELL_BUDGET) -> float:
    if params.kind != "f":
        raise ParameterError("f_quasinorm needs kind='f'")
    if math.isinf(params.p):
        raise ParameterError("f-type spaces require p < inf")
    if len(seq) == 0:
        return 0.0
    d = seq.dimension
    finest = int(seq.levels.max())
    cells = 1 << (d * finest)
    if cells > cell_budget:
        raise ResourceError(f"f_quasinorm needs 2**{d * finest} cells at finest level J*={finest} (budget {cell_budget})")

    vals, e = _binary_normalized(seq.values)
    starts = _level_groups(seq)
    ends = np.append(starts[1:], len(seq))
    lv = seq.levels[starts]
    log_weight = params.r * lv.sum(axis=1) + params.s * lv.max(axis=1)
    level_max = np.maximum.reduceat(vals, starts)
    log_scale = float(np.max(log_weight + np.log2(level_max)))
    q = params.q

    def level_terms():
        for g, (lo, hi) in enumerate(zip(starts, ends)):
            j = seq.levels[lo]
            block = np.zeros(tuple(1 << int(x) for x in j))
            block[tuple(seq.shifts[lo:hi].T)] = vals[lo:hi]
            yield _upsample(block, j, finest) * 2.0 ** (log_weight[g] - log_scale)

    # pointwise max first, so cells touched by a single level are exact for every q
    top = np.zeros((1 << finest,) * d)
    for t in level_terms():
        np.maximum(top, t, out=top)
    if math.isinf(q):
        pointwise = top
    else:
        acc = np.zeros_like(top)
        safe = np.where(top > 0, top, 1.0)
        for t in level_terms():
            acc += (t / safe) ** q
        pointwise = top * acc ** (1.0 / q)
    p = params.p
    pointwise_p = pointwise ** p
    return math.ldexp(float(2.0 ** log_scale * np.mean(pointwise_p) ** (1.0 / p)), e)


def quasinorm(seq: HybridSequence, params: SpaceParams, **kwargs) -> float:
    if params.kind == "b":
        return b_quasinorm(seq, params)
    return f_quasinorm(seq, params, **kwargs)


class EmbeddingParams(NamedTuple):
    alpha_emb: float
    beta_emb: float


def integrability_gap(src: SpaceParams, tgt: SpaceParams) -> float:
    """Plain difference ``1/p0 - 1/p1`` (may be negative)."""
    return inv(src.p) - inv(tgt.p)


def embedding_gap(src: SpaceParams, tgt: SpaceParams) -> EmbeddingParams:
    """``(r0 - r1 - (1/p0 - 1/p1)_+, s1 - s0)``."""
    alpha = src.r - tgt.r - positive_part(integrability_gap(src, tgt))
    return EmbeddingParams(alpha, tgt.s - src.s)


class Verdict(str, enum.Enum):
    CONTINUOUS = "continuous"
    NOT_CONTINUOUS = "not-continuous"
    BOUNDARY = "boundary-case"


def _eq(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=_EQ_TOL, abs_tol=_EQ_TOL)


def check_embedding(src: SpaceParams, tgt: SpaceParams, d: int = 1) -> Verdict:
    """Decide ``src -> tgt`` continuity from the standard sufficient/necessary conditions.

    ``d`` only matters for negative ``alpha_emb`` where the relevant slope is
    ``alpha_emb * d``.  Parameter constellations on the critical line where no
    if-and-only-if statement on the fine indices is available come back as
    :attr:`Verdict.BOUNDARY`.
    """
    alpha, beta = embedding_gap(src, tgt)
    ad = alpha * d
    if (alpha >= 0 > beta and not _eq(beta, 0)) or (alpha > beta >= 0 and not _eq(alpha, beta)) or (0 > ad > beta and not _eq(ad, beta)):
        return Verdict.CONTINUOUS

    critical = (_eq(alpha, beta) and beta >= -_EQ_TOL) or (alpha < 0 and _eq(ad, beta))
    if critical:
        fine_ok = src.q <= tgt.q
        if src.kind == tgt.kind == "b":
            return Verdict.CONTINUOUS if fine_ok else Verdict.NOT_CONTINUOUS
        same_prs = _eq(src.p, tgt.p) if math.isfinite(src.p) else src.p == tgt.p
        same_prs = same_prs and _eq(src.r, tgt.r) and _eq(src.s, tgt.s)
        if same_prs and src.kind == tgt.kind:
            return Verdict.CONTINUOUS if fine_ok else Verdict.NOT_CONTINUOUS
        if same_prs and src.kind == "b":
            # b_{p,q0} -> b_{p,min(p,q1)} -> f_{p,q1}
            if src.q <= min(src.p, tgt.q):
                return Verdict.CONTINUOUS
        elif same_prs and src.kind == "f":
            # f_{p,q0} -> b_{p,max(p,q0)} -> b_{p,q1}
            if max(src.p, src.q) <= tgt.q:
                return Verdict.CONTINUOUS
        return Verdict.BOUNDARY

    return Verdict.NOT_CONTINUOUS
