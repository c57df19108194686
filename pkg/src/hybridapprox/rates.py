"""Error-versus-DOF sweeps and log-log rate fits."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .approximators import (
    NonlinearPlan,
    apply_linear,
    apply_nonlinear,
    dof_of,
    make_linear_plan,
    make_nonlinear_plan,
    plan_record,
)
from .errors import FitError, ParameterError, UseLinearInstead
from .index_domain import delta_levels, delta_shift_count
from .spaces import SpaceParams, integrability_gap, positive_part, quasinorm
from .widths_lab import FoolingSpec, fooling_level, fooling_sequence, stress_family

DEFAULT_DOF_BUDGET = 8_000_000
DEFAULT_INPUT_BUDGET = 2_000_000
STRESS_TOL = 0.15
FOOLING_TOL = 0.05
GENERATORS = {
    "stress": "stress-equalized-levels/v1",
    "fooling": "fooling-single-spike/v1",
}


def predicted_rates(src: SpaceParams, tgt: SpaceParams) -> tuple:
    """``(nonlinear, linear)`` decay exponents of the best m-term and Kolmogorov dictionary widths."""
    ds = tgt.s - src.s
    gap = positive_part(integrability_gap(src, tgt))
    if not ds > 0 or not src.r - tgt.r - gap > ds:
        raise ParameterError(
            f"rate condition r0 - r1 - (1/p0 - 1/p1)_+ > s1 - s0 > 0 fails "
            f"({src.r - tgt.r - gap} vs {ds})"
        )
    nonlinear = (src.r - tgt.r) - ds
    return nonlinear, nonlinear - gap


class Fit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    dropped: int = 0


def fit_slope(points) -> Fit:
    """Least squares on ``(log2 m, log2 error)``; the slope is returned as a positive decay rate."""
    pts = [(float(m), float(e)) for m, e in points]
    good = [(m, e) for m, e in pts if e > 0 and m > 0 and math.isfinite(e)]
    dropped = len(pts) - len(good)
    if dropped:
        warnings.warn(f"fit_slope dropped {dropped} non-positive points", RuntimeWarning, stacklevel=2)
    if len(good) < 3:
        raise FitError(f"need at least 3 usable points, have {len(good)}")
    x = np.log2([m for m, _ in good])
    y = np.log2([e for _, e in good])
    k, c = np.polyfit(x, y, 1)
    resid = y - (k * x + c)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return Fit(float(-k), float(c), r2, dropped)


@dataclass(frozen=True)
class SweepConfig:
    d: int
    src: SpaceParams
    tgt: SpaceParams
    algorithm: str = "both"
    M_min: int = 4
    M_max: int = 11
    epsilon: float | None = None
    kappa: float | None = None
    input: str = "stress"
    seed: int = 0
    dof_budget: int = DEFAULT_DOF_BUDGET
    input_budget: int = DEFAULT_INPUT_BUDGET
    stress_width: int | str | None = "auto"
    depth_margin: int = 6
    fit_skip: int = 2
    tolerance: float | None = None
    csv_path: str | None = None
    json_path: str | None = None

    def __post_init__(self):
        if self.algorithm not in ("linear", "nonlinear", "both"):
            raise ParameterError(f"algorithm must be linear, nonlinear or both, got {self.algorithm!r}")
        if self.input not in GENERATORS:
            raise ParameterError(f"input must be one of {sorted(GENERATORS)}, got {self.input!r}")
        if self.M_min < 0 or self.M_max < self.M_min:
            raise ParameterError(f"invalid M range [{self.M_min}, {self.M_max}]")
        if self.d < 1:
            raise ParameterError("dimension must be positive")

    @classmethod
    def from_dict(cls, obj: dict) -> "SweepConfig":
        obj = dict(obj)
        try:
            obj["src"] = SpaceParams.from_dict(obj["src"])
            obj["tgt"] = SpaceParams.from_dict(obj["tgt"])
            if "M_range" in obj:
                obj["M_min"], obj["M_max"] = (int(x) for x in obj.pop("M_range"))
            return cls(**obj)
        except KeyError as exc:
            raise ParameterError(f"sweep config misses field {exc}") from None
        except TypeError as exc:
            raise ParameterError(f"bad sweep config: {exc}") from None

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["src"] = self.src.to_dict()
        out["tgt"] = self.tgt.to_dict()
        return out

    def resolved_width(self):
        if self.stress_width != "auto":
            return self.stress_width
        # sparse levels are the hard case when p0 < p1, dense levels when p1 < p0
        return None if self.tgt.p < self.src.p else 3


@dataclass
class RateReport:
    algorithm: str
    points: list
    fitted_slope: float
    intercept: float
    r_squared: float
    predicted_slope: float
    predicted_rates: tuple
    tolerance: float
    verdict: str
    generator: str
    truncated: bool = False
    dropped: int = 0
    notes: list = field(default_factory=list)
    plan: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "algorithm": self.algorithm,
            "generator": self.generator,
            "plan": self.plan,
            "points": [{"M": M, "dof": m, "error": e} for M, m, e in self.points],
            "fit": {"slope": self.fitted_slope, "intercept": self.intercept, "r2": self.r_squared,
                    "dropped": self.dropped},
            "predicted": {"nonlinear": self.predicted_rates[0], "linear": self.predicted_rates[1],
                          "slope": self.predicted_slope, "tolerance": self.tolerance},
            "truncated": self.truncated,
            "notes": self.notes,
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["M", "dof", "error"])
        for M, m, e in self.points:
            writer.writerow([M, m, repr(float(e))])
        return buf.getvalue()


def _plan_for(config: SweepConfig, algorithm: str):
    """Plan for one arm; the non-linear arm degenerates to the linear one when p1 <= p0."""
    if algorithm == "linear":
        return make_linear_plan(config.src, config.tgt, config.epsilon), []
    try:
        return make_nonlinear_plan(config.src, config.tgt, config.epsilon, config.kappa), []
    except UseLinearInstead:
        note = "p1 <= p0: last correction layer N_M equals M, non-linear scheme coincides with the linear one"
        return make_linear_plan(config.src, config.tgt, config.epsilon), [note]


def _usable_range(config: SweepConfig, plan) -> tuple:
    Ms, dofs = [], []
    truncated = False
    for M in range(config.M_min, config.M_max + 1):
        m = dof_of(plan, M, config.d)
        if m > config.dof_budget:
            truncated = True
            break
        Ms.append(M)
        dofs.append(m)
    return Ms, dofs, truncated


def _stress_depth(config: SweepConfig, plan, M: int) -> int:
    last = plan.last_layer(M) if isinstance(plan, NonlinearPlan) else M
    return last + config.depth_margin


def stress_size(config: SweepConfig, plan, M: int) -> int:
    """Number of entries the stress input for a sweep ending at ``M`` would materialize."""
    depth = _stress_depth(config, plan, M)
    width = config.resolved_width()
    if width is None:
        return delta_shift_count(plan.alpha, plan.beta, depth, config.d)
    l1 = delta_levels(plan.alpha, plan.beta, depth, config.d).sum(axis=1)
    return int(sum(min(width, 1 << int(x)) for x in l1))


def run_sweep(config: SweepConfig, algorithm: str | None = None) -> RateReport:
    """Sweep ``M`` for one algorithm and fit the decay of the target-space error against the DOF."""
    algorithm = algorithm or config.algorithm
    if algorithm == "both":
        raise ParameterError("run_sweep handles one algorithm; use run_sweeps for 'both'")
    nonlinear_arm = algorithm == "nonlinear"
    plan, notes = _plan_for(config, algorithm)
    is_linear_plan = not isinstance(plan, NonlinearPlan)
    nonlinear_exp, linear_exp = predicted_rates(config.src, config.tgt)
    predicted = nonlinear_exp if nonlinear_arm else linear_exp
    tol = config.tolerance if config.tolerance is not None else (
        FOOLING_TOL if config.input == "fooling" else STRESS_TOL)

    Ms, dofs, truncated = _usable_range(config, plan)
    if truncated:
        notes.append(f"M range truncated at M={Ms[-1] if Ms else None}: DOF budget {config.dof_budget}")
    if config.input == "stress":
        cut = len(Ms)
        while cut and stress_size(config, plan, Ms[cut - 1]) > config.input_budget:
            cut -= 1
        if cut < len(Ms):
            Ms, dofs, truncated = Ms[:cut], dofs[:cut], True
            notes.append(f"M range truncated at M={Ms[-1] if Ms else None}: input budget {config.input_budget}")

    apply = apply_linear if is_linear_plan else apply_nonlinear
    points = []
    if config.input == "stress" and Ms:
        seq = stress_family(config.src, _stress_depth(config, plan, Ms[-1]), config.seed, config.d,
                            alpha=plan.alpha, beta=plan.beta, width=config.resolved_width())
        for M, m in zip(Ms, dofs):
            res = apply(plan, M, seq)
            points.append((M, m, quasinorm(res.residual, config.tgt)))
    elif config.input == "fooling":
        if not is_linear_plan:
            raise ParameterError("fooling inputs certify lower bounds for the linear scheme only")
        for M, m in zip(Ms, dofs):
            spec = FoolingSpec(config.src, config.tgt, fooling_level(m), config.d)
            # the spike sits beyond Delta_M, so the kept set of A_M never contains it
            res = apply(plan, M, fooling_sequence(spec))
            points.append((M, m, quasinorm(res.residual, config.tgt)))

    usable = points[config.fit_skip:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = fit_slope([(m, e) for _, m, e in usable])
    verdict = "pass" if abs(fit.slope - predicted) <= tol else "fail"
    M_last = Ms[-1] if Ms else None
    return RateReport(
        algorithm=algorithm,
        points=points,
        fitted_slope=fit.slope,
        intercept=fit.intercept,
        r_squared=fit.r_squared,
        predicted_slope=predicted,
        predicted_rates=(nonlinear_exp, linear_exp),
        tolerance=tol,
        verdict=verdict,
        generator=GENERATORS[config.input],
        truncated=truncated,
        dropped=fit.dropped,
        notes=notes,
        plan=plan_record(plan, M_last, config.d),
        config=config.to_dict(),
    )


def run_sweeps(config: SweepConfig) -> dict:
    """``{algorithm: RateReport}`` for every arm requested by ``config.algorithm``."""
    arms = ["linear", "nonlinear"] if config.algorithm == "both" else [config.algorithm]
    return {arm: run_sweep(config, arm) for arm in arms}


def write_outputs(config: SweepConfig, reports: dict) -> None:
    if config.json_path:
        with open(config.json_path, "w") as fh:
            json.dump({k: r.to_dict() for k, r in reports.items()}, fh, indent=2, sort_keys=True)
    if config.csv_path:
        with open(config.csv_path, "w") as fh:
            for name, rep in reports.items():
                if len(reports) > 1:
                    fh.write(f"# {name}\n")
                fh.write(rep.to_csv())


def with_overrides(config: SweepConfig, **changes) -> SweepConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(config, **changes)
