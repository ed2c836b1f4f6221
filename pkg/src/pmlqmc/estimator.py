"""Multilevel QMC estimator with randomly shifted lattice rules.

Level ``l`` draws ``R`` independent shifts of its own lattice rule and
evaluates ``N_l`` points per shift.  The level estimate is the mean of the
``R`` shift averages of ``dP_l = P_l - P_{l-1}`` (``dP_0 = P_0``) and its
variance is estimated from the spread of those shift averages.

The adaptive loop first drives the statistical error below ``eps/sqrt(2)``
by doubling ``N_l`` on the most profitable level, then checks the bias
estimate against the same budget and adds a level if needed.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import qmc
from .errors import ConfigurationError, InsufficientDataError, PMLQMCError
from .point_selection import Approach

LEVEL_COLUMNS = [
    "level", "N", "R", "mean_P", "var_P", "mean_dP", "var_dP",
    "rho", "V_ell", "cost_online_units", "cost_offline_units",
]
TOLERANCE_COLUMNS = ["epsilon", "approach", "total_units", "total_seconds", "achieved_error_estimate"]


@dataclass(frozen=True)
class EstimatorConfig:
    approach: str
    max_level: int
    tolerance: float
    shifts: int = 10
    n_init: int = 8
    growth_factor: int = 2
    seed: int = 0
    s: int = 400
    start_level: int | None = None
    threads: int = 1
    max_iterations: int = 400

    def __post_init__(self):
        Approach.parse(self.approach)
        if not (self.tolerance > 0 and math.isfinite(self.tolerance)):
            raise ConfigurationError("tolerance must be positive")
        if self.shifts < 2:
            raise ConfigurationError("at least two shifts per level are needed for a variance estimate")
        if not (isinstance(self.growth_factor, int) and self.growth_factor > 1):
            raise ConfigurationError("growth factor must be an integer greater than 1")
        if self.n_init < 1:
            raise ConfigurationError("initial sample count must be positive")
        if self.max_level < 0:
            raise ConfigurationError("max_level must be non-negative")
        if self.start_level is not None and not 0 <= self.start_level <= self.max_level:
            raise ConfigurationError("start_level must lie in [0, max_level]")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")

    @property
    def first_level(self):
        return min(2, self.max_level) if self.start_level is None else self.start_level


@dataclass
class LevelStats:
    level: int
    N: int
    R: int
    mean_P: float
    var_P: float
    mean_dP: float
    var_dP: float
    rho: float
    V_ell: float
    eq1_residual: float = 0.0
    cost_online_units: int = 0
    cost_offline_units: int = 0

    def row(self):
        return [self.level, self.N, self.R] + [
            _fmt(getattr(self, c)) for c in LEVEL_COLUMNS[3:9]
        ] + [self.cost_online_units, self.cost_offline_units]


def _fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.17g}"


def level_statistics(fine, coarse=None) -> LevelStats:
    """Moments of one level from samples shaped (R, N) or (N,).

    `coarse` holds ``P_{l-1}`` on the same points (omit it on level 0).  The
    returned ``eq1_residual`` is the relative mismatch between ``var_dP`` and
    ``var_P + var_Pc - 2 cov`` computed from the same samples.
    """
    fine = np.asarray(fine, dtype=float)
    if fine.ndim == 1:
        fine = fine[None, :]
    R, N = fine.shape
    if R * N < 2:
        raise InsufficientDataError(f"need at least 2 samples per level, got {R * N}")
    pf = fine.ravel()
    if coarse is None:
        d = fine
        rho = float("nan")
        resid = 0.0
    else:
        coarse = np.asarray(coarse, dtype=float).reshape(fine.shape)
        d = fine - coarse
        pc = coarse.ravel()
        C = np.cov(np.vstack([pf, pc]), ddof=1)
        var_dp = float(np.var(d.ravel(), ddof=1))
        via_eq1 = C[0, 0] + C[1, 1] - 2.0 * C[0, 1]
        scale = C[0, 0] + C[1, 1]
        resid = abs(var_dp - via_eq1) / scale if scale > 0 else abs(var_dp - via_eq1)
        denom = math.sqrt(C[0, 0] * C[1, 1])
        rho = float(C[0, 1] / denom) if denom > 0 else float("nan")
    shift_means = d.mean(axis=1)
    V = float(np.var(shift_means, ddof=1) / R) if R > 1 else float("nan")
    return LevelStats(
        level=-1,
        N=N,
        R=R,
        mean_P=float(fine.mean(axis=1).mean()),
        var_P=float(np.var(pf, ddof=1)),
        mean_dP=float(shift_means.mean()),
        var_dP=float(np.var(d.ravel(), ddof=1)),
        rho=rho,
        V_ell=V,
        eq1_residual=float(resid),
    )


@dataclass
class CostLedger:
    """Unit and wall-clock costs, per level.

    Unit model: a field evaluation costs ``s`` per point, an eigensolve
    ``n^3`` for ``n`` points and an assemble-and-solve ``nnz(K)^1.5``.
    """

    approach: str
    samp_fine: list = field(default_factory=list)  # per-sample units
    samp_coarse: list = field(default_factory=list)
    fem: list = field(default_factory=list)
    eig: list = field(default_factory=list)
    samples: list = field(default_factory=list)  # N_l * R_l
    gna_finest_samp: int = 0
    gna_finest_eig: int = 0
    eig_seconds: float = 0.0
    field_seconds: float = 0.0
    fem_seconds: float = 0.0

    def online(self, level):
        return self.samples[level] * (self.samp_fine[level] + self.samp_coarse[level] + self.fem[level])

    @property
    def total_online(self):
        return sum(self.online(l) for l in range(len(self.samples)))

    @property
    def total_offline(self):
        return sum(self.eig)

    @property
    def total(self):
        return self.total_online + self.total_offline

    @property
    def total_seconds(self):
        return self.eig_seconds + self.field_seconds + self.fem_seconds


def cost_report(ledger: CostLedger) -> dict:
    """Offline/online totals plus the finest-level-only GNA variant for comparison.

    The variant computes one eigendecomposition on the finest point set and
    charges a finest-level field evaluation for every sample; it is reported,
    never executed.
    """
    n_total = sum(ledger.samples)
    hypo_online = sum(
        ledger.samples[l] * (ledger.gna_finest_samp + ledger.fem[l]) for l in range(len(ledger.samples))
    )
    return {
        "approach": ledger.approach,
        "offline_units": ledger.total_offline,
        "online_units": ledger.total_online,
        "total_units": ledger.total,
        "field_units": sum(ledger.samples[l] * (ledger.samp_fine[l] + ledger.samp_coarse[l]) for l in range(len(ledger.samples))),
        "fem_units": sum(ledger.samples[l] * ledger.fem[l] for l in range(len(ledger.samples))),
        "samples": n_total,
        "gna_finest_only": {
            "offline_units": ledger.gna_finest_eig,
            "online_units": hypo_online,
            "total_units": ledger.gna_finest_eig + hypo_online,
        },
    }


@dataclass
class RunReport:
    config: dict
    levels: list
    estimate: float
    stat_error: float
    bias_estimate: float
    achieved_error_estimate: float
    tolerance_met: bool
    cost: dict
    ledger: CostLedger = field(repr=False)
    samples: list = field(repr=False)  # per level: (fine (R, N), coarse (R, N) or None)
    notes: list = field(default_factory=list)

    @property
    def L(self):
        return len(self.levels) - 1

    @property
    def total_units(self):
        return self.ledger.total

    @property
    def total_seconds(self):
        return self.ledger.total_seconds

    def to_dict(self):
        return {
            "config": self.config,
            "estimate": self.estimate,
            "stat_error": self.stat_error,
            "bias_estimate": self.bias_estimate,
            "achieved_error_estimate": self.achieved_error_estimate,
            "tolerance_met": self.tolerance_met,
            "levels": [_json_clean(asdict(s)) for s in self.levels],
            "cost": self.cost,
            "samples_per_level": [s.N * s.R for s in self.levels],
            "notes": list(self.notes),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def level_rows(self):
        return [s.row() for s in self.levels]


def _json_clean(d):
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


def bias_estimate(mean_dP) -> float:
    """Extrapolated remaining bias from the correction means ``E[dP_1..L]``.

    With ``q`` the observed decay rate of ``|E[dP_l]|`` the remaining bias
    is ``|E[dP_L]| / (2^q - 1)``.  With a single correction, or without
    observed decay, ``|E[dP_L]|`` itself is returned; with none the bias is
    unknown and reported as infinite.
    """
    m = [abs(x) for x in mean_dP]
    if not m:
        return float("inf")
    last = m[-1]
    if len(m) < 2 or last == 0 or m[-2] <= last:
        return last
    return last / (m[-2] / last - 1.0)


class _Sampler:
    def __init__(self, problem, cfg, executor, z=None):
        self.problem = problem
        self.cfg = cfg
        self.executor = executor
        z = qmc.default_generating_vector(problem.s) if z is None else np.asarray(z, dtype=np.int64)
        if len(z) < problem.s:
            raise ConfigurationError(f"generating vector has {len(z)} entries, s={problem.s} needed")
        self.z = z[: problem.s]
        self.rules = {}
        self.fine = {}
        self.coarse = {}

    def rule(self, level):
        if level not in self.rules:
            self.rules[level] = qmc.make_lattice_rule(self.z, self.cfg.shifts, self.cfg.seed, level)
        return self.rules[level]

    def extend(self, level, n_new):
        """Grow level `level` to `n_new` points per shift."""
        R = self.cfg.shifts
        have = self.fine[level].shape[1] if level in self.fine else 0
        if n_new <= have:
            return
        idx = np.arange(have, n_new)
        rule = self.rule(level)
        XI = np.concatenate([qmc.gaussian_points(rule, r, idx) for r in range(R)])
        try:
            pf, pc = self.problem.evaluate_batch(level, XI, self.executor)
        except PMLQMCError as exc:
            raise type(exc)(f"level {level}, samples {have}..{n_new - 1}: {exc}") from exc
        pf = pf.reshape(R, -1)
        pc = pc.reshape(R, -1)
        if level in self.fine:
            self.fine[level] = np.concatenate([self.fine[level], pf], axis=1)
            self.coarse[level] = np.concatenate([self.coarse[level], pc], axis=1)
        else:
            self.fine[level], self.coarse[level] = pf, pc

    def stats(self, level):
        st = level_statistics(self.fine[level], self.coarse[level] if level > 0 else None)
        st.level = level
        return st


def run(config: EstimatorConfig, problem, generating_vector=None) -> RunReport:
    """Adaptive MLQMC run of `problem` to the RMSE tolerance in `config`."""
    if Approach.parse(config.approach) is not problem.approach:
        raise ConfigurationError("estimator and problem were built for different approaches")
    if config.s != problem.s:
        raise ConfigurationError(f"estimator s={config.s} differs from the problem's s={problem.s}")
    if config.max_level > problem.max_level:
        raise ConfigurationError(
            f"max_level {config.max_level} exceeds the {problem.max_level} levels of the problem"
        )
    t_start = dict(problem.timings)
    executor = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        sampler = _Sampler(problem, config, executor, generating_vector)
        report = _adapt(config, problem, sampler)
    finally:
        if executor is not None:
            executor.shutdown()
    led = report.ledger
    led.field_seconds = problem.timings.get("field_seconds", 0.0) - t_start.get("field_seconds", 0.0)
    led.fem_seconds = problem.timings.get("fem_seconds", 0.0) - t_start.get("fem_seconds", 0.0)
    return report


def _adapt(cfg, problem, sampler):
    eps = cfg.tolerance
    budget = eps / math.sqrt(2.0)
    L = cfg.first_level
    N = [cfg.n_init] * (L + 1)
    for l in range(L + 1):
        sampler.extend(l, N[l])
    notes = []
    it = 0
    while True:
        stats = [sampler.stats(l) for l in range(L + 1)]
        stat_var = sum(s.V_ell for s in stats)
        unit = [problem.sample_costs(l).total for l in range(L + 1)]
        if math.sqrt(stat_var) > budget and it < cfg.max_iterations:
            gain = [s.V_ell / (N[l] * cfg.shifts * unit[l]) for l, s in enumerate(stats)]
            l_star = int(np.argmax(gain))
            N[l_star] *= cfg.growth_factor
            sampler.extend(l_star, N[l_star])
            it += 1
            continue
        # a one-level hierarchy has nothing left to refine
        bias = bias_estimate([s.mean_dP for s in stats[1:]]) if cfg.max_level > 0 else 0.0
        if bias > budget and L < cfg.max_level and it < cfg.max_iterations:
            L += 1
            N.append(cfg.n_init)
            sampler.extend(L, cfg.n_init)
            it += 1
            continue
        break
    if it >= cfg.max_iterations:
        notes.append(f"stopped after {cfg.max_iterations} adaptation steps")
    stat_err = math.sqrt(stat_var)
    met = stat_err <= budget and bias <= budget
    if not met:
        notes.append("tolerance not met within max_level" if bias > budget else "statistical error above budget")

    ledger = CostLedger(approach=problem.approach.value)
    for l, s in enumerate(stats):
        c = problem.sample_costs(l)
        ledger.samp_fine.append(c.field_fine)
        ledger.samp_coarse.append(c.field_coarse)
        ledger.fem.append(c.fem)
        ledger.eig.append(problem.eig_units(l))
        ledger.samples.append(N[l] * cfg.shifts)
        ledger.eig_seconds += problem.levels[l].eig_seconds
        s.cost_online_units = ledger.online(l)
        s.cost_offline_units = ledger.eig[l]
    ledger.gna_finest_samp = problem.s * problem.levels[problem.max_level].n_points
    ledger.gna_finest_eig = problem.eig_units(problem.max_level)

    estimate = float(sum(s.mean_dP for s in stats))
    return RunReport(
        config=config_echo(cfg),
        levels=stats,
        estimate=estimate,
        stat_error=stat_err,
        bias_estimate=float(bias),
        achieved_error_estimate=math.sqrt(stat_var + bias**2),
        tolerance_met=bool(met),
        cost=cost_report(ledger),
        ledger=ledger,
        samples=[(sampler.fine[l], sampler.coarse[l] if l > 0 else None) for l in range(L + 1)],
        notes=notes,
    )


def config_echo(cfg: EstimatorConfig) -> dict:
    d = asdict(cfg)
    d["approach"] = Approach.parse(cfg.approach).value
    return d


@dataclass(frozen=True)
class TelescopingResult:
    residual: float
    standard_error: float

    @property
    def within_3se(self):
        return abs(self.residual) <= 3.0 * self.standard_error


def telescoping_check(report: RunReport) -> TelescopingResult:
    """Compare ``E[P_0] + sum E[dP_l]`` with the finest level's own ``E[P_L]``.

    Both sides come from the retained samples; the standard error combines
    every level's estimator variance with that of the direct estimate.
    """
    L = report.L
    tele = sum(s.mean_dP for s in report.levels)
    fine_L = report.samples[L][0]
    shift_means = fine_L.mean(axis=1)
    direct = float(shift_means.mean())
    if L == 0:
        return TelescopingResult(tele - direct, math.sqrt(report.levels[0].V_ell))
    v_direct = float(np.var(shift_means, ddof=1) / len(shift_means))
    se = math.sqrt(sum(s.V_ell for s in report.levels) + v_direct)
    return TelescopingResult(float(tele - direct), se)

