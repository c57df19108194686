r"""Dyadic index sets of hyperbolic wavelet coefficients.

A coefficient is addressed by :math:`\lambda = (j, k)` with a resolution
vector :math:`j \in \mathbb{N}_0^d` and a translation :math:`k`.  On the unit
cube :math:`[0,1)^d` the admissible translations of level ``j`` are

.. math:: \mathfrak{D}_j = \prod_i \{0, \dots, 2^{j_i} - 1\},

so that :math:`|\mathfrak{D}_j| = 2^{|j|_1}` exactly.

Given slopes ``alpha > beta >= 0`` the level vectors are grouped into the
nested sets :math:`\Delta_\mu = \{j : \alpha|j|_1 - \beta|j|_\infty \le \mu\}`
and the layers :math:`\mathfrak{L}_\mu = \Delta_\mu \setminus \Delta_{\mu-1}`.
Everything here is pure: results depend only on the arguments.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import InfiniteSetError, ParameterError, ResourceError

# Relative slack when comparing alpha*|j|_1 - beta*|j|_inf against an integer.
LAYER_TOL = 1e-12

# Translations are stored as int64, so every level component must stay below 63.
MAX_LEVEL = 62

# Largest number of level vectors scanned when enumerating Delta_mu.
BOX_SCAN_LIMIT = 20_000_000
# explicit Index lists beyond this size are refused
MATERIALIZE_LIMIT = 5_000_000

LevelVec = tuple  # tuple[int, ...] of nonnegative resolution levels


class Index(NamedTuple):
    """Coefficient address ``(level, shift)``."""

    level: tuple
    shift: tuple


@dataclass(frozen=True)
class DomainConfig:
    """Dimension of the unit cube the index sets live on."""

    dimension: int

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ParameterError(f"dimension must be a positive integer, got {self.dimension!r}")

    def check_level(self, j) -> tuple:
        j = tuple(int(x) for x in j)
        if len(j) != self.dimension:
            raise ParameterError(f"level {j} has length {len(j)}, domain dimension is {self.dimension}")
        if any(x < 0 for x in j):
            raise ParameterError(f"level {j} has negative entries")
        if any(x > MAX_LEVEL for x in j):
            raise ParameterError(f"level {j} exceeds the supported maximum component {MAX_LEVEL}")
        return j

    def check_index(self, j, k) -> Index:
        j = self.check_level(j)
        k = tuple(int(x) for x in k)
        if len(k) != self.dimension:
            raise ParameterError(f"shift {k} has length {len(k)}, domain dimension is {self.dimension}")
        for ji, ki in zip(j, k):
            if not 0 <= ki < (1 << ji):
                raise ParameterError(f"shift {k} outside the translation range of level {j}")
        return Index(j, k)

    def shift_count(self, j) -> int:
        """``|D_j| = 2**|j|_1``."""
        return 1 << sum(self.check_level(j))


@dataclass(frozen=True)
class LayerPartition:
    """Materialized layers ``L_0, ..., L_max_layer`` for slopes ``(alpha, beta)``."""

    alpha: float
    beta: float
    max_layer: int
    layers: list = field(default_factory=list)

    def delta(self, mu: int) -> set:
        out = set()
        for layer in self.layers[: mu + 1]:
            out |= layer
        return out


def _norms(levels: np.ndarray):
    levels = np.asarray(levels)
    return levels.sum(axis=1), levels.max(axis=1, initial=0)


def layer_values(levels, alpha: float, beta: float) -> np.ndarray:
    """``alpha*|j|_1 - beta*|j|_inf`` for every row of ``levels``."""
    l1, linf = _norms(np.atleast_2d(levels))
    return alpha * l1 - beta * linf


def layer_of(levels, alpha: float, beta: float) -> np.ndarray:
    """Layer number ``mu`` with ``j in L_mu`` for every row of ``levels``."""
    v = layer_values(levels, alpha, beta)
    slack = LAYER_TOL * np.maximum(1.0, np.abs(v))
    mu = np.ceil(v - slack)
    return np.maximum(mu, 0).astype(np.int64)


def _check_slopes(alpha, beta, mu=0):
    if beta < 0:
        raise ParameterError(f"beta must be nonnegative, got {beta}")
    if alpha <= beta:
        raise InfiniteSetError(f"alpha={alpha} <= beta={beta}: the sets Delta_mu are infinite")
    if mu < 0 or int(mu) != mu:
        raise ParameterError(f"layer number must be a nonnegative integer, got {mu}")


def _check_domain(domain) -> DomainConfig:
    if isinstance(domain, int):
        domain = DomainConfig(domain)
    return domain


@lru_cache(maxsize=64)
def _box(d: int, bound: int) -> np.ndarray:
    grid = np.indices((bound + 1,) * d).reshape(d, -1).T
    grid = np.ascontiguousarray(grid, dtype=np.int64)
    grid.setflags(write=False)
    return grid


def _scan_box(d: int, bound: int) -> np.ndarray:
    if (bound + 1) ** d > BOX_SCAN_LIMIT:
        raise ResourceError(f"level scan over {bound + 1}**{d} vectors exceeds {BOX_SCAN_LIMIT}")
    return _box(d, bound)


def box_bound(alpha: float, beta: float, mu: float) -> int:
    """Largest level component that can occur in ``Delta_mu``."""
    return int(math.floor(mu / (alpha - beta) * (1 + LAYER_TOL) + LAYER_TOL))


def delta_levels(alpha: float, beta: float, mu: int, domain) -> np.ndarray:
    """``Delta_mu`` as an ``(n, d)`` array in lexicographic order."""
    domain = _check_domain(domain)
    _check_slopes(alpha, beta, mu)
    box = _scan_box(domain.dimension, box_bound(alpha, beta, mu))
    return box[layer_of(box, alpha, beta) <= mu]


def layer_levels(alpha: float, beta: float, mu: int, domain) -> np.ndarray:
    """``L_mu`` as an ``(n, d)`` array in lexicographic order."""
    domain = _check_domain(domain)
    _check_slopes(alpha, beta, mu)
    box = _scan_box(domain.dimension, box_bound(alpha, beta, mu))
    return box[layer_of(box, alpha, beta) == mu]


def enumerate_shifts(j, domain) -> list:
    """All indices ``(j, k)`` with ``0 <= k_i < 2**j_i``, ordered lexicographically by ``k``."""
    domain = _check_domain(domain)
    j = domain.check_level(j)
    return [Index(j, k) for k in itertools.product(*(range(1 << ji) for ji in j))]


def enumerate_delta(alpha: float, beta: float, mu: int, domain) -> set:
    """Level vectors ``j`` with ``alpha*|j|_1 - beta*|j|_inf <= mu``.

    The scan covers the box ``{0, ..., floor(mu/(alpha-beta))}^d``, which
    contains the whole set because ``alpha*|j|_1 - beta*|j|_inf >=
    (alpha-beta)*|j|_inf``.
    """
    return {tuple(int(x) for x in row) for row in delta_levels(alpha, beta, mu, domain)}


def enumerate_layer(alpha: float, beta: float, mu: int, domain) -> set:
    """``L_mu = Delta_mu \\ Delta_{mu-1}`` (``L_0 = Delta_0``)."""
    return {tuple(int(x) for x in row) for row in layer_levels(alpha, beta, mu, domain)}


def enumerate_nabla_mu(alpha: float, beta: float, mu: int, domain) -> list:
    """All coefficient indices whose level lies in ``L_mu``."""
    domain = _check_domain(domain)
    levels = layer_levels(alpha, beta, mu, domain)
    total = sum(1 << int(x) for x in levels.sum(axis=1))
    if total > MATERIALIZE_LIMIT:
        raise ResourceError(f"nabla_{mu} has {total} indices, above the limit {MATERIALIZE_LIMIT}")
    out = []
    for row in levels:
        out.extend(enumerate_shifts(tuple(int(x) for x in row), domain))
    return out


def layer_partition(alpha: float, beta: float, max_layer: int, domain) -> LayerPartition:
    domain = _check_domain(domain)
    levels = delta_levels(alpha, beta, max_layer, domain)
    mus = layer_of(levels, alpha, beta)
    layers = [set() for _ in range(max_layer + 1)]
    for row, mu in zip(levels, mus):
        layers[mu].add(tuple(int(x) for x in row))
    return LayerPartition(alpha, beta, max_layer, layers)


@lru_cache(maxsize=4096)
def nabla_size(alpha: float, beta: float, mu: int, d: int) -> int:
    """Exact ``|nabla_mu| = sum over L_mu of 2**|j|_1``."""
    levels = layer_levels(alpha, beta, mu, d)
    return sum(1 << int(s) for s in levels.sum(axis=1))


@lru_cache(maxsize=4096)
def delta_shift_count(alpha: float, beta: float, mu: int, d: int) -> int:
    """Exact number of coefficient indices with level in ``Delta_mu``."""
    levels = delta_levels(alpha, beta, mu, d)
    return sum(1 << int(s) for s in levels.sum(axis=1))


def weighted_level_sum(alpha: float, beta: float, delta: float, mu: int, domain) -> float:
    """``sum over j in Delta_mu of 2**(delta*|j|_1)``, accumulated with ``math.fsum``.

    The sum behaves like ``2**(delta*mu/(alpha-beta))`` for ``mu >= alpha-beta``.
    """
    if not beta > 0:
        raise ParameterError(f"weighted_level_sum needs beta > 0, got {beta}")
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if mu < alpha - beta:
        raise ParameterError(f"mu={mu} below alpha-beta={alpha - beta}")
    levels = delta_levels(alpha, beta, mu, domain)
    return math.fsum(np.exp2(delta * levels.sum(axis=1).astype(float)))


def layer_decay_sum(alpha: float, beta: float, delta: float, mu: int, domain) -> float:
    """``sum over j in L_mu of 2**(-delta*(|j|_1 - |j|_inf))``; bounded uniformly in ``mu``."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if mu < 2:
        raise ParameterError(f"layer_decay_sum is stated for mu >= 2, got {mu}")
    levels = layer_levels(alpha, beta, mu, domain)
    l1, linf = _norms(levels)
    return math.fsum(np.exp2(-delta * (l1 - linf).astype(float)))


def cardinality_profile(alpha: float, beta: float, mu_max: int, domain) -> list:
    """``[(mu, |Delta_mu|, |L_mu|) for mu = 0..mu_max]`` from a single box scan."""
    levels = delta_levels(alpha, beta, mu_max, domain)
    counts = np.bincount(layer_of(levels, alpha, beta), minlength=mu_max + 1)
    cumulative = np.cumsum(counts)
    return [(mu, int(cumulative[mu]), int(counts[mu])) for mu in range(mu_max + 1)]
