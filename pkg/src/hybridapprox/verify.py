"""Registered property checks and rate sweeps behind ``hybridapprox verify``.

Every check takes its config section and a seeded generator and returns a
:class:`CheckResult` holding measured and expected values.  The JSON summary
contains no timings, so repeated runs with one config are byte-identical.
"""
from __future__ import annotations

import copy
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .approximators import apply_linear, apply_nonlinear, make_linear_plan, make_nonlinear_plan
from .errors import ConfigError, HybridError
from .index_domain import cardinality_profile, layer_decay_sum, weighted_level_sum
from .rates import SweepConfig, run_sweep
from .sequence import HybridSequence
from .spaces import SpaceParams, b_quasinorm, f_quasinorm, quasinorm
from .widths_lab import (
    exhaustive_best_m,
    projection_error,
    random_sequence,
    stechkin_check,
    stechkin_select,
)

MAIN_SRC = {"kind": "b", "p": 1, "q": "inf", "r": 2, "s": 0}
MAIN_TGT = {"kind": "b", "p": 2, "q": 2, "r": 0, "s": 1}

# Brute-force extremes over the stated mu ranges for alpha = 1, beta = 0.5,
# rounded up in the third significant digit.
COMBINATORICS_BOUNDS = {
    "delta_count_spread": {"1": 1.10, "2": 1.40, "3": 2.01},
    "weighted_sum_ratio": {
        "1": {"0.5": 3.42, "1": 2.0},
        "2": {"0.5": 23.3, "1": 8.0},
        "3": {"0.5": 119.0, "1": 24.0},
    },
    "layer_decay_sum": {
        "1": {"0.5": 2.0, "1": 2.0},
        "2": {"0.5": 13.7, "1": 8.0},
        "3": {"0.5": 70.0, "1": 24.0},
    },
}

DEFAULT_CONFIG = {
    "seed": 20240611,
    "checks": ["stechkin", "lattice", "combinatorics", "linear_rate", "nonlinear_rate",
               "no_gain", "energy", "oracle", "fb_consistency"],
    "stechkin": {"instances": 10000, "max_length": 200, "p0": [0.5, 1, 2], "slack": 1e-12},
    "lattice": {"pairs": 1000, "perturbations": 100, "max_support": 24, "slack": 1e-12},
    "combinatorics": {
        "alpha": 1.0, "beta": 0.5, "dims": [1, 2, 3],
        "count_range": [5, 60], "weighted_range": [10, 30], "decay_range": [2, 40],
        "deltas": [0.5, 1.0], "bounds": COMBINATORICS_BOUNDS,
    },
    "linear_rate": {
        "sweep": {"d": 2, "src": MAIN_SRC, "tgt": MAIN_TGT, "epsilon": 0.5, "M_range": [4, 11],
                  "dof_budget": 4000000},
        "expected": 0.5, "tol_fooling": 0.05, "tol_stress": 0.15,
    },
    "nonlinear_rate": {
        "sweep": {"d": 2, "src": MAIN_SRC, "tgt": MAIN_TGT, "epsilon": 0.5, "M_range": [4, 11],
                  "dof_budget": 4000000},
        "expected": 1.0, "tol": 0.15, "min_gain": 0.3,
    },
    "no_gain": {
        "sweep": {"d": 2, "src": {"kind": "b", "p": 2, "q": 2, "r": 2, "s": 0},
                  "tgt": {"kind": "b", "p": 1, "q": 2, "r": 0, "s": 1}, "M_range": [4, 16]},
        "max_diff": 0.1,
    },
    "energy": {
        "sweep": {"src": {"kind": "b", "p": 2, "q": 2, "r": 2, "s": 0},
                  "tgt": {"kind": "b", "p": 2, "q": 2, "r": 0, "s": 1}, "M_range": [4, 16]},
        "dims": [2, 3], "expected": 1.0, "tol": 0.15, "max_drift": 0.1,
    },
    "oracle": {"instances": 50, "max_support": 12, "max_m": 3, "M_choices": [0, 1, 2]},
    "fb_consistency": {"single": 500, "multi": 500, "rel_tol": 1e-10, "max_level": 4},
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict
    expected: dict
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "measured": self.measured,
                "expected": self.expected, "notes": self.notes}


CHECKS = {}


def register(name):
    def deco(fn):
        CHECKS[name] = fn
        return fn
    return deco


def _random_space(rng, kinds=("b", "f")) -> SpaceParams:
    kind = str(rng.choice(kinds))
    ps = [0.5, 1.0, 1.5, 2.0, 3.0] + ([] if kind == "f" else [math.inf])
    return SpaceParams(kind, float(rng.choice(ps)), float(rng.choice([0.5, 1.0, 2.0, 4.0, math.inf])),
                       float(rng.uniform(-1, 2)), float(rng.uniform(-1, 2)))


# -- exact inequality suites -----------------------------------------------------------


@register("stechkin")
def check_stechkin(cfg, rng) -> CheckResult:
    worst, failures = 0.0, 0
    for _ in range(cfg["instances"]):
        n = int(rng.integers(1, cfg["max_length"] + 1))
        mode = int(rng.integers(0, 3))
        if mode == 0:
            values = rng.uniform(-1, 1, n)
        elif mode == 1:
            values = rng.standard_cauchy(n)
        else:
            # ties and exact zeros
            values = rng.integers(-3, 4, n).astype(float)
        p0 = float(rng.choice(cfg["p0"]))
        p1 = float(rng.choice([p0, p0 * (1 + rng.exponential()), math.inf]))
        m = int(rng.integers(0, n + 1))
        res = stechkin_check(values, stechkin_select(values, m), p0, p1)
        ok = res.lhs <= res.rhs * (1 + cfg["slack"])
        failures += not ok
        if res.rhs > 0:
            worst = max(worst, res.lhs / res.rhs)
    return CheckResult("stechkin", failures == 0,
                       {"instances": cfg["instances"], "failures": failures, "max_lhs_over_rhs": worst},
                       {"failures": 0, "max_lhs_over_rhs": f"<= 1 + {cfg['slack']}"})


@register("lattice")
def check_lattice(cfg, rng) -> CheckResult:
    beaten, best_margin = 0, math.inf
    for _ in range(cfg["pairs"]):
        tgt = _random_space(rng)
        d = int(rng.integers(1, 3))
        seq = random_sequence(rng, d, int(rng.integers(1, cfg["max_support"] + 1)), 3 if d == 1 else 2)
        keep = rng.random(len(seq)) < rng.random()
        base = projection_error(seq, [k for k, flag in zip(seq.keys(), keep) if flag], tgt)
        on = np.flatnonzero(keep)
        for _ in range(cfg["perturbations"]):
            values = seq.values.copy()
            scale = np.abs(values[on]) * rng.exponential(size=len(on))
            values[on] = values[on] - (seq.values[on] + rng.normal(size=len(on)) * scale)
            values[on] *= rng.random(len(on)) < 0.8
            err = quasinorm(seq.with_values(values), tgt)
            if err < base * (1 - cfg["slack"]):
                beaten += 1
            if base > 0:
                best_margin = min(best_margin, err / base)
    return CheckResult("lattice", beaten == 0,
                       {"pairs": cfg["pairs"], "perturbations": cfg["perturbations"], "beaten": beaten,
                        "min_error_over_projection_error": best_margin},
                       {"beaten": 0, "min_error_over_projection_error": f">= 1 - {cfg['slack']}"})


@register("combinatorics")
def check_combinatorics(cfg, rng) -> CheckResult:
    a, b = cfg["alpha"], cfg["beta"]
    bounds = cfg["bounds"]
    measured, expected, ok = {}, {}, True
    lo, hi = cfg["count_range"]
    wlo, whi = cfg["weighted_range"]
    dlo, dhi = cfg["decay_range"]
    for d in cfg["dims"]:
        key = str(d)
        prof = cardinality_profile(a, b, hi, d)
        ratios = [n / mu ** d for mu, n, _ in prof if lo <= mu <= hi]
        spread = max(ratios) / min(ratios)
        measured[f"delta_count_spread[d={d}]"] = spread
        expected[f"delta_count_spread[d={d}]"] = bounds["delta_count_spread"][key]
        ok &= spread <= bounds["delta_count_spread"][key]
        for delta in cfg["deltas"]:
            dk = f"{delta:g}"
            w = max(weighted_level_sum(a, b, delta, mu, d) / 2.0 ** (delta * mu / (a - b))
                    for mu in range(wlo, whi + 1))
            s = max(layer_decay_sum(a, b, delta, mu, d) for mu in range(dlo, dhi + 1))
            measured[f"weighted_sum_ratio[d={d},delta={dk}]"] = w
            measured[f"layer_decay_sum[d={d},delta={dk}]"] = s
            expected[f"weighted_sum_ratio[d={d},delta={dk}]"] = bounds["weighted_sum_ratio"][key][dk]
            expected[f"layer_decay_sum[d={d},delta={dk}]"] = bounds["layer_decay_sum"][key][dk]
            ok &= w <= bounds["weighted_sum_ratio"][key][dk]
            ok &= s <= bounds["layer_decay_sum"][key][dk]
    return CheckResult("combinatorics", bool(ok), measured, expected)


# -- rate sweeps -------------------------------------------------------------------------


def _sweep(section: dict, seed: int, **changes) -> SweepConfig:
    obj = dict(section)
    obj.setdefault("seed", seed)
    obj.update(changes)
    return SweepConfig.from_dict(obj)


def _sweep_summary(rep) -> dict:
    return {"slope": rep.fitted_slope, "r2": rep.r_squared, "points": len(rep.points),
            "last_dof": rep.points[-1][1] if rep.points else None, "truncated": rep.truncated}


@register("linear_rate")
def check_linear_rate(cfg, rng, seed=0) -> CheckResult:
    fool = run_sweep(_sweep(cfg["sweep"], seed, input="fooling", algorithm="linear",
                            tolerance=cfg["tol_fooling"]))
    stress = run_sweep(_sweep(cfg["sweep"], seed, input="stress", algorithm="linear",
                              tolerance=cfg["tol_stress"]))
    exp = cfg["expected"]
    ok = abs(fool.fitted_slope - exp) <= cfg["tol_fooling"] and abs(stress.fitted_slope - exp) <= cfg["tol_stress"]
    notes = fool.notes + stress.notes
    return CheckResult("linear_rate", ok,
                       {"fooling": _sweep_summary(fool), "stress": _sweep_summary(stress)},
                       {"slope": exp, "tol_fooling": cfg["tol_fooling"], "tol_stress": cfg["tol_stress"]},
                       sorted(set(notes)))


@register("nonlinear_rate")
def check_nonlinear_rate(cfg, rng, seed=0) -> CheckResult:
    nl = run_sweep(_sweep(cfg["sweep"], seed, input="stress", algorithm="nonlinear"))
    lin = run_sweep(_sweep(cfg["sweep"], seed, input="stress", algorithm="linear"))
    gain = nl.fitted_slope - lin.fitted_slope
    ok = abs(nl.fitted_slope - cfg["expected"]) <= cfg["tol"] and gain >= cfg["min_gain"]
    return CheckResult("nonlinear_rate", ok,
                       {"nonlinear": _sweep_summary(nl), "linear": _sweep_summary(lin), "gain": gain,
                        "N_M": nl.plan.get("N_M"), "kappa": nl.plan.get("kappa")},
                       {"slope": cfg["expected"], "tol": cfg["tol"], "min_gain": cfg["min_gain"]},
                       sorted(set(nl.notes + lin.notes)))


@register("no_gain")
def check_no_gain(cfg, rng, seed=0) -> CheckResult:
    lin = run_sweep(_sweep(cfg["sweep"], seed, input="stress", algorithm="linear"))
    nl = run_sweep(_sweep(cfg["sweep"], seed, input="stress", algorithm="nonlinear"))
    diff = abs(lin.fitted_slope - nl.fitted_slope)
    return CheckResult("no_gain", diff < cfg["max_diff"],
                       {"linear": _sweep_summary(lin), "nonlinear": _sweep_summary(nl), "diff": diff},
                       {"max_diff": cfg["max_diff"]}, sorted(set(lin.notes + nl.notes)))


@register("energy")
def check_energy(cfg, rng, seed=0) -> CheckResult:
    measured, ok, notes = {}, True, set()
    slopes = {}
    for d in cfg["dims"]:
        for alg in ("linear", "nonlinear"):
            rep = run_sweep(_sweep(cfg["sweep"], seed, d=d, input="stress", algorithm=alg))
            measured[f"{alg}[d={d}]"] = _sweep_summary(rep)
            slopes[(alg, d)] = rep.fitted_slope
            ok &= abs(rep.fitted_slope - cfg["expected"]) <= cfg["tol"]
            notes.update(rep.notes)
    for alg in ("linear", "nonlinear"):
        vals = [slopes[(alg, d)] for d in cfg["dims"]]
        drift = max(vals) - min(vals)
        measured[f"drift[{alg}]"] = drift
        ok &= drift <= cfg["max_drift"]
    return CheckResult("energy", bool(ok), measured,
                       {"slope": cfg["expected"], "tol": cfg["tol"], "max_drift": cfg["max_drift"]},
                       sorted(notes))


# -- oracles and norm consistency ---------------------------------------------------------


def _subset_oracle(seq: HybridSequence, m: int, tgt: SpaceParams) -> float:
    """Minimum over bitmasks with at most ``m`` set bits of the error after removing those entries."""
    n = len(seq)
    best = math.inf
    for mask in range(1 << n):
        if bin(mask).count("1") > m:
            continue
        drop = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        best = min(best, quasinorm(seq.mask(~drop), tgt))
    return best


@register("oracle")
def check_oracle(cfg, rng) -> CheckResult:
    src, tgt = SpaceParams.from_dict(MAIN_SRC), SpaceParams.from_dict(MAIN_TGT)
    nl = make_nonlinear_plan(src, tgt, 0.5)
    mismatches, sandwich_fail, done = 0, 0, 0
    while done < cfg["instances"]:
        seq = random_sequence(rng, 2, int(rng.integers(2, cfg["max_support"] + 1)), 4)
        M = int(rng.choice(cfg["M_choices"]))
        kept_b = apply_nonlinear(nl, M, seq).kept
        if len(kept_b) > cfg["max_m"]:
            continue
        done += 1
        m = len(kept_b)
        est = exhaustive_best_m(seq, m, tgt)
        if est.value != _subset_oracle(seq, m, tgt):
            mismatches += 1
        err_b = projection_error(seq, kept_b, tgt)
        err_a = projection_error(seq, apply_linear(nl.base, M, seq).kept, tgt)
        if not est.value <= err_b <= err_a:
            sandwich_fail += 1
    return CheckResult("oracle", mismatches == 0 and sandwich_fail == 0,
                       {"instances": done, "mismatches": mismatches, "sandwich_failures": sandwich_fail},
                       {"mismatches": 0, "sandwich_failures": 0})


@register("fb_consistency")
def check_fb(cfg, rng) -> CheckResult:
    worst, single_fail = 0.0, 0
    for _ in range(cfg["single"]):
        d = int(rng.integers(1, 3))
        level = rng.integers(0, cfg["max_level"] + 1, size=d)
        seq = random_sequence(rng, d, int(rng.integers(1, 9)), cfg["max_level"], level=level)
        p = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
        q = float(rng.choice([0.5, 1.0, 2.0, math.inf]))
        r, s = float(rng.uniform(-1, 2)), float(rng.uniform(-1, 2))
        fb = f_quasinorm(seq, SpaceParams("f", p, q, r, s))
        bb = b_quasinorm(seq, SpaceParams("b", p, q, r, s))
        rel = abs(fb - bb) / bb
        worst = max(worst, rel)
        single_fail += rel > cfg["rel_tol"]
    mono_fail, homo_fail = 0, 0
    for _ in range(cfg["multi"]):
        d = int(rng.integers(1, 3))
        seq = random_sequence(rng, d, int(rng.integers(2, 13)), cfg["max_level"] if d == 1 else 3)
        kind = str(rng.choice(["b", "f"]))
        p = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
        r, s = float(rng.uniform(-1, 2)), float(rng.uniform(-1, 2))
        qs = sorted(float(x) for x in rng.choice([0.5, 1.0, 2.0, 4.0, math.inf], size=2, replace=False))
        lo, hi = (quasinorm(seq, SpaceParams(kind, p, q, r, s)) for q in qs)
        mono_fail += not lo >= hi
        # powers of two scale every floating-point intermediate exactly
        t = 2.0 ** int(rng.integers(-20, 21))
        sp = SpaceParams(kind, p, qs[0], r, s)
        homo_fail += quasinorm(seq.scale(-t), sp) != t * lo
    ok = single_fail == 0 and mono_fail == 0 and homo_fail == 0
    return CheckResult("fb_consistency", ok,
                       {"single_level": cfg["single"], "max_rel_f_vs_b": worst, "single_failures": single_fail,
                        "multi_level": cfg["multi"], "q_monotonicity_failures": mono_fail,
                        "homogeneity_failures": homo_fail},
                       {"max_rel_f_vs_b": f"<= {cfg['rel_tol']}", "q_monotonicity_failures": 0,
                        "homogeneity_failures": 0})


_SWEEP_CHECKS = {"linear_rate", "nonlinear_rate", "no_gain", "energy"}


# -- driver -----------------------------------------------------------------------------------


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Default config merged with the JSON file at ``path``; decode errors carry line and column."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    cfg = _merge(DEFAULT_CONFIG, user)
    unknown = [c for c in cfg["checks"] if c not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; available: {sorted(CHECKS)}")
    return cfg


def run_checks(cfg: dict, log=sys.stderr) -> tuple:
    """Run the configured checks; returns ``(results, timings)``."""
    seed = int(cfg["seed"])
    results, timings = [], {}
    for i, name in enumerate(cfg["checks"]):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        if name in _SWEEP_CHECKS:
            res = CHECKS[name](cfg[name], rng, seed=seed)
        else:
            res = CHECKS[name](cfg[name], rng)
        timings[name] = time.perf_counter() - t0
        if log is not None:
            print(f"{name}: {'pass' if res.passed else 'FAIL'} ({timings[name]:.2f}s)", file=log)
        results.append(res)
    return results, timings


def summarize(cfg: dict, results) -> dict:
    failed = [r.name for r in results if not r.passed]
    return {
        "seed": cfg["seed"],
        "checks": [r.to_dict() for r in results],
        "failed": failed,
        "status": "fail" if failed else "pass",
    }


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True)


def verify_suite(path=None, log=sys.stderr) -> tuple:
    """``(exit_code, summary)``; exit 0 when every check passes, 1 otherwise.

    Configuration problems propagate as :class:`ConfigError`, parameter
    violations inside a check as :class:`ParameterError`.
    """
    cfg = load_config(path)
    results, _ = run_checks(cfg, log)
    summary = summarize(cfg, results)
    return (0 if summary["status"] == "pass" else 1), summary


__all__ = ["CHECKS", "CheckResult", "DEFAULT_CONFIG", "HybridError", "load_config", "run_checks",
           "summarize", "summary_json", "verify_suite"]
