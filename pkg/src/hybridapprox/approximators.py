r"""Linear and non-linear approximation of hybrid sequences.

The linear scheme keeps every coefficient whose level lies in
:math:`\Delta_M(\alpha, \beta)`.  The non-linear scheme adds, for each layer
:math:`\mu = M+1, \dots, N_M`, the :math:`m_{M,\mu}` coefficients that are
largest after weighting by

.. math:: 2^{-(|j|_1-|j|_\infty)\epsilon/2}\, 2^{(r_0-1/p_0)|j|_1 + s_0|j|_\infty}\,|a_{j,k}|.

All parameters are derived from the source/target pair by
:func:`make_linear_plan` and :func:`make_nonlinear_plan`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UseLinearInstead
from .index_domain import Index, delta_shift_count, layer_of, nabla_size
from .sequence import HybridSequence
from .spaces import SpaceParams, integrability_gap, inv, positive_part

_ROUND = 12


@dataclass(frozen=True)
class LinearPlan:
    src: SpaceParams
    tgt: SpaceParams
    epsilon: float
    alpha: float
    beta: float

    @property
    def slope_gap(self) -> float:
        """``alpha - beta``; the linear scheme uses about ``2**(M/slope_gap)`` coefficients."""
        return self.alpha - self.beta

    def to_dict(self) -> dict:
        return {
            "src": self.src.to_dict(),
            "tgt": self.tgt.to_dict(),
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "beta": self.beta,
        }


@dataclass(frozen=True)
class NonlinearPlan:
    base: LinearPlan
    kappa: float
    kappa_window: tuple

    @property
    def src(self) -> SpaceParams:
        return self.base.src

    @property
    def tgt(self) -> SpaceParams:
        return self.base.tgt

    @property
    def epsilon(self) -> float:
        return self.base.epsilon

    @property
    def alpha(self) -> float:
        return self.base.alpha

    @property
    def beta(self) -> float:
        return self.base.beta

    def last_layer(self, M: int) -> int:
        """``N_M = floor(((r0-r1) - (s1-s0)) / (alpha-beta) * M)``."""
        src, tgt = self.src, self.tgt
        ratio = ((src.r - tgt.r) - (tgt.s - src.s)) / self.base.slope_gap
        return int(math.floor(round(ratio * M, _ROUND)))

    def budget(self, M: int, mu: int, d: int) -> int:
        """``m_{M,mu} = min(ceil(2**(kappa*M + (1/(alpha-beta) - kappa)*mu)), |nabla_mu|)``."""
        expo = round(self.kappa * M + (1.0 / self.base.slope_gap - self.kappa) * mu, _ROUND)
        raw = math.ceil(2.0 ** expo) if expo < 1000 else math.inf
        cap = nabla_size(self.alpha, self.beta, mu, d)
        return int(min(raw, cap))

    def budgets(self, M: int, d: int) -> list:
        return [self.budget(M, mu, d) for mu in range(M + 1, self.last_layer(M) + 1)]

    def to_dict(self) -> dict:
        out = self.base.to_dict()
        out["kappa"] = self.kappa
        return out


@dataclass(frozen=True)
class ApproxResult:
    approximant: HybridSequence
    residual: HybridSequence

    @property
    def kept(self) -> frozenset:
        return self.approximant.support()

    @property
    def dof(self) -> int:
        return len(self.approximant)


def _check_rate_condition(src: SpaceParams, tgt: SpaceParams, gap: float) -> None:
    ds = tgt.s - src.s
    if not ds > 0:
        raise ParameterError(f"need s1 - s0 > 0, got {ds}")
    lhs = src.r - tgt.r - gap
    if not lhs > ds:
        raise ParameterError(f"rate condition violated: r0 - r1 - (1/p0 - 1/p1) = {lhs} is not > s1 - s0 = {ds}")


def make_linear_plan(src: SpaceParams, tgt: SpaceParams, epsilon: float | None = None) -> LinearPlan:
    """Layer slopes for the linear scheme.

    ``epsilon`` defaults to the midpoint of ``(0, s1 - s0)``.  When ``p1 <= p0``
    the integrability gap is treated as zero, i.e. the target integrability is
    replaced by ``p0``.
    """
    gap = positive_part(integrability_gap(src, tgt))
    _check_rate_condition(src, tgt, gap)
    ds = tgt.s - src.s
    if epsilon is None:
        epsilon = ds / 2
    if not 0 < epsilon < ds:
        raise ParameterError(f"epsilon must lie in (0, {ds}), got {epsilon}")
    alpha = src.r - tgt.r - gap - epsilon
    beta = ds - epsilon
    return LinearPlan(src, tgt, float(epsilon), float(alpha), float(beta))


def make_nonlinear_plan(src: SpaceParams, tgt: SpaceParams, epsilon: float | None = None,
                        kappa: float | None = None) -> NonlinearPlan:
    gap = integrability_gap(src, tgt)
    if not gap > 0:
        raise UseLinearInstead(
            f"p0={src.p} >= p1={tgt.p}: the linear scheme already attains the best rate"
        )
    base = make_linear_plan(src, tgt, epsilon)
    lo = 1.0 / base.slope_gap
    hi = lo + 1.0 / gap
    if kappa is None:
        kappa = (lo + hi) / 2
    if not lo < kappa < hi:
        raise ParameterError(f"kappa must lie in the open interval ({lo}, {hi}), got {kappa}")
    return NonlinearPlan(base, float(kappa), (lo, hi))


def _layers(plan, seq: HybridSequence) -> np.ndarray:
    return layer_of(seq.levels, plan.alpha, plan.beta) if len(seq) else np.zeros(0, dtype=np.int64)


def apply_linear(plan: LinearPlan, M: int, seq: HybridSequence) -> ApproxResult:
    """Keep exactly the coefficients with level in ``Delta_M``."""
    inside = _layers(plan, seq) <= M
    return ApproxResult(seq.mask(inside), seq.mask(~inside))


def log2_weights(levels: np.ndarray, values: np.ndarray, epsilon: float, src: SpaceParams) -> np.ndarray:
    """``log2`` of the rearrangement weights (``-inf`` for zero coefficients)."""
    levels = np.atleast_2d(levels)
    l1 = levels.sum(axis=1).astype(float)
    linf = levels.max(axis=1).astype(float)
    expo = -(l1 - linf) * epsilon / 2 + (src.r - inv(src.p)) * l1 + src.s * linf
    with np.errstate(divide="ignore"):
        return expo + np.log2(np.abs(values))


def _ranking(levels, shifts, logw) -> np.ndarray:
    """Permutation sorting by descending weight, ties broken lexicographically on ``(j, k)``."""
    keys = [shifts[:, i] for i in range(shifts.shape[1] - 1, -1, -1)]
    keys += [levels[:, i] for i in range(levels.shape[1] - 1, -1, -1)]
    keys.append(-logw)
    return np.lexsort(keys)


def weighted_rearrangement(seq: HybridSequence, layer_indices, epsilon: float, src: SpaceParams,
                           *, alpha: float, beta: float) -> list:
    """Order the indices of one layer by non-increasing weight.

    Indices missing from ``seq`` carry weight zero and go last.  ``alpha`` and
    ``beta`` identify the layer geometry so that mixed-layer input is rejected.
    """
    layer_indices = [Index(tuple(map(int, j)), tuple(map(int, k))) for j, k in layer_indices]
    if not layer_indices:
        return []
    d = seq.dimension
    levels = np.array([ix.level for ix in layer_indices], dtype=np.int64).reshape(-1, d)
    shifts = np.array([ix.shift for ix in layer_indices], dtype=np.int64).reshape(-1, d)
    mus = layer_of(levels, alpha, beta)
    if np.any(mus != mus[0]):
        raise ParameterError(f"indices span several layers: {sorted(set(mus.tolist()))}")
    lookup = seq.to_dict()
    values = np.array([lookup.get(ix, 0.0) for ix in layer_indices])
    order = _ranking(levels, shifts, log2_weights(levels, values, epsilon, src))
    return [layer_indices[i] for i in order]


def nonlinear_selection(plan: NonlinearPlan, M: int, seq: HybridSequence) -> np.ndarray:
    """Boolean mask of the entries of ``seq`` retained by the non-linear scheme."""
    mus = _layers(plan, seq)
    keep = mus <= M
    last = plan.last_layer(M)
    band = np.flatnonzero((mus > M) & (mus <= last))
    if len(band) == 0:
        return keep
    lv, sh = seq.levels[band], seq.shifts[band]
    logw = log2_weights(lv, seq.values[band], plan.epsilon, plan.src)
    order = _ranking(lv, sh, logw)
    # stable sort by layer keeps the within-layer ranking
    order = order[np.argsort(mus[band][order], kind="stable")]
    ranked_mu = mus[band][order]
    first = np.searchsorted(ranked_mu, ranked_mu, side="left")
    rank = np.arange(len(order)) - first
    layer_ids, where = np.unique(ranked_mu, return_inverse=True)
    per_layer = np.array([plan.budget(M, int(mu), seq.dimension) for mu in layer_ids])
    keep[band[order[rank < per_layer[where.reshape(-1)]]]] = True
    return keep


def apply_nonlinear(plan: NonlinearPlan, M: int, seq: HybridSequence) -> ApproxResult:
    keep = nonlinear_selection(plan, M, seq)
    return ApproxResult(seq.mask(keep), seq.mask(~keep))


def dof_of(plan, M: int, d: int) -> int:
    """Worst-case number of retained coefficients, independent of the input."""
    count = delta_shift_count(plan.alpha, plan.beta, M, d)
    if isinstance(plan, NonlinearPlan):
        count += sum(plan.budgets(M, d))
    return count


def plan_record(plan, M: int | None = None, d: int | None = None) -> dict:
    """JSON-ready audit record of a plan, optionally evaluated at level ``M``."""
    out = plan.to_dict()
    if M is not None:
        out["M"] = M
        if isinstance(plan, NonlinearPlan):
            out["N_M"] = plan.last_layer(M)
            if d is not None:
                out["budgets"] = plan.budgets(M, d)
    return out


def plan_to_json(plan, M: int | None = None, d: int | None = None) -> str:
    return json.dumps(plan_record(plan, M, d), sort_keys=True)
