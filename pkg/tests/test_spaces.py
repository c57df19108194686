import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridapprox.errors import ParameterError, ResourceError
from hybridapprox.sequence import HybridSequence
from hybridapprox.spaces import (
    SpaceParams,
    Verdict,
    b_quasinorm,
    check_embedding,
    embedding_gap,
    f_quasinorm,
    quasinorm,
)
from hybridapprox.widths_lab import random_sequence

INF = math.inf


def naive_b(entries: dict, p, q, r, s):
    """Textbook b-quasi-norm from a ``{(j, k): v}`` dict, no rescaling tricks."""
    per_level = {}
    for (j, _), v in entries.items():
        per_level.setdefault(j, []).append(abs(v))
    terms = []
    for j, vals in per_level.items():
        lp = max(vals) if p == INF else sum(x ** p for x in vals) ** (1 / p)
        terms.append(2.0 ** ((r - (0 if p == INF else 1 / p)) * sum(j) + s * max(j)) * lp)
    if not terms:
        return 0.0
    return max(terms) if q == INF else sum(t ** q for t in terms) ** (1 / q)


def naive_f(entries: dict, d, p, q, r, s):
    """Cell-by-cell evaluation of the f-quasi-norm on the finest dyadic grid."""
    if not entries:
        return 0.0
    J = max(max(j) for j, _ in entries)
    levels = sorted({j for j, _ in entries})
    total = 0.0
    for cell in itertools.product(range(2 ** J), repeat=d):
        parts = []
        for j in levels:
            k = tuple(c >> (J - ji) for c, ji in zip(cell, j))
            v = entries.get((j, k), 0.0)
            parts.append(2.0 ** (r * sum(j) + s * max(j)) * abs(v))
        g = max(parts) if q == INF else sum(x ** q for x in parts) ** (1 / q)
        total += g ** p
    return (total / 2 ** (d * J)) ** (1 / p)


def seq_strategy(d_max=2, level_max=3, n_max=10):
    @st.composite
    def build(draw):
        d = draw(st.integers(1, d_max))
        n = draw(st.integers(1, n_max))
        out = {}
        for _ in range(n):
            j = tuple(draw(st.integers(0, level_max)) for _ in range(d))
            k = tuple(draw(st.integers(0, 2 ** ji - 1)) for ji in j)
            out[(j, k)] = draw(st.floats(-8, 8, allow_nan=False).filter(lambda x: abs(x) > 1e-3))
        return d, out
    return build()


params_p = st.sampled_from([0.5, 1.0, 2.0, 3.0, INF])
params_q = st.sampled_from([0.5, 1.0, 2.0, INF])
smooth = st.floats(-1, 2)


def test_b_examples():
    one = HybridSequence.single(2, (0, 0), (0, 0), 1.0)
    for p, q in itertools.product([0.5, 2, INF], [1, INF]):
        assert b_quasinorm(one, SpaceParams("b", p, q, 1.3, -0.4)) == 1.0
    two = HybridSequence.from_dict(2, {((0, 0), (0, 0)): 1.0, ((1, 0), (0, 0)): 1.0})
    assert b_quasinorm(two, SpaceParams("b", 2, 1, 1, 0.5)) == pytest.approx(3.0, rel=1e-15)


def test_f_examples():
    c = HybridSequence.single(3, (0, 0, 0), (0, 0, 0), -2.5)
    assert f_quasinorm(c, SpaceParams("f", 1.5, 2, 1, 1)) == 2.5


def test_empty_is_zero():
    e = HybridSequence.empty(2)
    assert quasinorm(e, SpaceParams("b", 1, 1, 0, 0)) == 0.0
    assert quasinorm(e, SpaceParams("f", 1, 1, 0, 0)) == 0.0


def test_f_requires_finite_p():
    with pytest.raises(ParameterError):
        SpaceParams("f", INF, 2, 0, 0)


def test_f_cell_budget():
    seq = HybridSequence.single(2, (5, 5), (0, 0), 1.0)
    with pytest.raises(ResourceError, match="J\\*=5"):
        f_quasinorm(seq, SpaceParams("f", 2, 2, 0, 0), cell_budget=2 ** 9)


def test_dispatch():
    rng = np.random.default_rng(3)
    seq = random_sequence(rng, 2, 50, 3)
    b = SpaceParams("b", 2, 1, 0.5, 0.25)
    f = SpaceParams("f", 2, 1, 0.5, 0.25)
    assert quasinorm(seq, b) == b_quasinorm(seq, b)
    assert quasinorm(seq, f) == f_quasinorm(seq, f)


def test_params_parsing():
    sp = SpaceParams.parse("b,1,inf,2,0")
    assert sp == SpaceParams("b", 1.0, INF, 2.0, 0.0)
    assert SpaceParams.from_dict(sp.to_dict()) == sp
    with pytest.raises(ParameterError):
        SpaceParams.parse("x,1,1,1,1")
    with pytest.raises(ParameterError):
        SpaceParams.parse("b,1,1")


@settings(max_examples=150, deadline=None)
@given(seq_strategy(), params_p, params_q, smooth, smooth)
def test_b_matches_naive(data, p, q, r, s):
    d, entries = data
    seq = HybridSequence.from_dict(d, entries)
    assert b_quasinorm(seq, SpaceParams("b", p, q, r, s)) == pytest.approx(naive_b(entries, p, q, r, s), rel=1e-12)


@settings(max_examples=120, deadline=None)
@given(seq_strategy(level_max=3, n_max=8), st.sampled_from([0.5, 1.0, 2.0, 3.0]), params_q, smooth, smooth)
def test_f_matches_cell_oracle(data, p, q, r, s):
    d, entries = data
    seq = HybridSequence.from_dict(d, entries)
    got = f_quasinorm(seq, SpaceParams("f", p, q, r, s))
    assert got == pytest.approx(naive_f(entries, d, p, q, r, s), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 2), st.data(), st.sampled_from([0.5, 1.0, 2.0, 3.0]), params_q, smooth, smooth)
def test_single_level_f_equals_b(d, data, p, q, r, s):
    j = tuple(data.draw(st.integers(0, 4)) for _ in range(d))
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 32 - 1)))
    seq = random_sequence(rng, d, 6, 4, level=j)
    fb = f_quasinorm(seq, SpaceParams("f", p, q, r, s))
    bb = b_quasinorm(seq, SpaceParams("b", p, q, r, s))
    assert fb == pytest.approx(bb, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(seq_strategy(), st.sampled_from(["b", "f"]), st.sampled_from([0.5, 1.0, 2.0]), params_q, smooth, smooth,
       st.floats(1e-3, 1e3))
def test_homogeneity(data, kind, p, q, r, s, t):
    d, entries = data
    seq = HybridSequence.from_dict(d, entries)
    sp = SpaceParams(kind, p, q, r, s)
    base = quasinorm(seq, sp)
    assert quasinorm(seq.scale(-t), sp) == pytest.approx(t * base, rel=1e-12)
    assert quasinorm(seq.scale(2.0 ** 7), sp) == 2.0 ** 7 * base


@settings(max_examples=100, deadline=None)
@given(seq_strategy(), st.sampled_from(["b", "f"]), st.sampled_from([0.5, 1.0, 2.0]), params_q, smooth, smooth,
       st.integers(0, 2 ** 32 - 1))
def test_lattice_monotone(data, kind, p, q, r, s, seed):
    d, entries = data
    seq = HybridSequence.from_dict(d, entries)
    rng = np.random.default_rng(seed)
    shrink = seq.with_values(seq.values * rng.uniform(0, 1, len(seq)))
    sp = SpaceParams(kind, p, q, r, s)
    assert quasinorm(shrink, sp) <= quasinorm(seq, sp) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(seq_strategy(), st.sampled_from(["b", "f"]), st.sampled_from([0.5, 1.0, 2.0]), smooth, smooth,
       st.lists(params_q, min_size=2, max_size=2, unique=True))
def test_q_monotone(data, kind, p, r, s, qs):
    d, entries = data
    seq = HybridSequence.from_dict(d, entries)
    q0, q1 = sorted(qs)
    assert quasinorm(seq, SpaceParams(kind, p, q1, r, s)) <= quasinorm(seq, SpaceParams(kind, p, q0, r, s))


def test_embedding_gap_examples():
    src, tgt = SpaceParams.make("b", 1, "inf", 2, 0), SpaceParams.make("b", 2, 2, 0, 1)
    assert embedding_gap(src, tgt) == (1.5, 1.0)
    assert embedding_gap(src, src) == (0.0, 0.0)
    assert embedding_gap(SpaceParams("b", 2, 2, 3, 0), SpaceParams("b", 1, 2, 1, 0)) == (2.0, 0.0)


def test_check_embedding_examples():
    src, tgt = SpaceParams.make("b", 1, "inf", 2, 0), SpaceParams.make("b", 2, 2, 0, 1)
    assert check_embedding(src, tgt) is Verdict.CONTINUOUS
    a, b = SpaceParams("b", 2, 1, 1, 0.5), SpaceParams("b", 2, 2, 1, 0.5)
    assert check_embedding(a, b) is Verdict.CONTINUOUS
    assert check_embedding(b, a) is Verdict.NOT_CONTINUOUS
    crit_src, crit_tgt = SpaceParams("b", 2, 2, 2, 0), SpaceParams("b", 2, 1, 1, 1)
    assert embedding_gap(crit_src, crit_tgt) == (1.0, 1.0)
    assert check_embedding(crit_src, crit_tgt) is Verdict.NOT_CONTINUOUS
    assert check_embedding(crit_tgt.replace(q=2), crit_tgt) is Verdict.NOT_CONTINUOUS
    # beta_emb > alpha_emb >= 0 sits outside every sufficient condition
    assert check_embedding(SpaceParams("b", 2, 2, 1, 0), SpaceParams("b", 2, 2, 0, 2)) is Verdict.NOT_CONTINUOUS


def test_check_embedding_mixed_kinds_on_critical_line():
    b_src, f_tgt = SpaceParams("b", 2, 1, 1, 0), SpaceParams("f", 2, 3, 1, 0)
    assert check_embedding(b_src, f_tgt) is Verdict.CONTINUOUS
    f_src = SpaceParams("f", 2, 3, 1, 0)
    assert check_embedding(f_src, SpaceParams("b", 2, 1, 1, 0)) is Verdict.BOUNDARY


def _rigorous_ratio_bound(src, tgt, depth, d):
    """``(sum over |j|_inf <= depth of 2**(-q1*(a|j|_1 - b|j|_inf)))**(1/q1)`` for a b -> b pair."""
    a, b = embedding_gap(src, tgt)
    terms = [2.0 ** -(a * sum(j) - b * max(j)) for j in itertools.product(range(depth + 1), repeat=d)]
    return max(terms) if tgt.q == INF else math.fsum(t ** tgt.q for t in terms) ** (1 / tgt.q)


@pytest.mark.parametrize("src,tgt", [
    (SpaceParams.make("b", 1, "inf", 2, 0), SpaceParams.make("b", 2, 2, 0, 1)),
    (SpaceParams.make("b", 2, 2, 2, 0), SpaceParams.make("b", 1, 1, 0, 1)),
    (SpaceParams.make("b", 0.5, 1, 1, 0), SpaceParams.make("b", "inf", "inf", -1, -0.5)),
])
def test_continuity_witness_bounded(src, tgt):
    d = 2
    assert check_embedding(src, tgt, d) is Verdict.CONTINUOUS
    bound = _rigorous_ratio_bound(src, tgt, 6, d)
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        seq = random_sequence(rng, d, int(rng.integers(1, 30)), 6)
        worst = max(worst, quasinorm(seq, tgt) / quasinorm(seq, src))
    assert worst <= bound * (1 + 1e-12)


def test_reconstructed_critical_line_witness_grows():
    # one spike per level (L, 0), each contributing 1 to the source sum
    src, tgt = SpaceParams("b", 2, 2, 2, 0), SpaceParams("b", 2, 1, 1, 1)
    assert check_embedding(src, tgt, 2) is Verdict.NOT_CONTINUOUS
    ratios = []
    for n in (4, 16, 49):
        entries = {((L, 0), (0, 0)): 2.0 ** (-(2 - 0.5) * L) for L in range(1, n + 1)}
        seq = HybridSequence.from_dict(2, entries)
        ratios.append(quasinorm(seq, tgt) / quasinorm(seq, src))
    assert ratios == pytest.approx([2.0, 4.0, 7.0], rel=1e-12)
