"""The level hierarchy: FEM models, evaluation points and KL bases per level.

A :class:`Problem` bundles everything the estimator needs to turn a vector
of standard normals into a coupled pair ``(P_l, P_{l-1})``.  How the coarse
field of a pair is produced depends on the approach:

* NNA evaluates a second expansion, level ``l-1``'s own basis on its own
  points, with the same ``xi``.
* GNA and LNA evaluate one expansion on the level-``l`` points and restrict
  the values to the coarse subset.  Restriction is plain indexing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fem, point_selection as ps, random_field as rf, reference_rules as rr
from .errors import ConfigurationError, InputError
from .point_selection import Approach


@dataclass(frozen=True)
class FieldModel:
    """Gaussian field ``Z = zbar + KL(xi)``; lognormal models return ``exp(Z)``."""

    params: rf.MaternParams
    zbar: float
    lognormal: bool = True

    @classmethod
    def from_lognormal_moments(cls, mean, std, nu=2.0, lam=0.3):
        zbar, sigma2 = rf.lognormal_moments_to_gaussian(mean, std)
        return cls(rf.MaternParams(nu, lam, sigma2), zbar, True)

    def transform(self, values):
        return np.exp(values) if self.lognormal else values


@dataclass
class LevelData:
    level: int
    order: int
    model: fem.ElasticModel
    points: ps.GlobalPointSet  # where this level's field is evaluated
    basis: rf.KLBasis
    coarse_index: np.ndarray | None  # global indices of the coarse field inside `points`
    eig_seconds: float = 0.0

    @property
    def n_points(self):
        return len(self.points)


@dataclass
class SampleCosts:
    """Deterministic unit charges of one coupled sample on one level."""

    field_fine: int
    field_coarse: int
    fem: int

    @property
    def total(self):
        return self.field_fine + self.field_coarse + self.fem


@dataclass
class Problem:
    approach: Approach
    mesh: fem.Mesh
    material: fem.Material
    field_model: FieldModel
    s: int
    levels: list
    plan: ps.EvalPointPlan
    timings: dict = field(default_factory=dict)

    @property
    def max_level(self):
        return len(self.levels) - 1

    # -- field ------------------------------------------------------------

    def fine_field(self, level, xi):
        lv = self.levels[level]
        return self.field_model.transform(rf.gaussian_values(lv.basis, xi))

    def coarse_field(self, level, xi, fine_values=None):
        """Field values on level ``level - 1``'s integration points for this pair."""
        if level == 0:
            return None
        lv = self.levels[level]
        if lv.coarse_index is None:
            prev = self.levels[level - 1]
            return self.field_model.transform(rf.gaussian_values(prev.basis, xi))
        if fine_values is None:
            fine_values = self.fine_field(level, xi)
        return fine_values[..., lv.coarse_index]

    # -- QoI --------------------------------------------------------------

    def evaluate(self, level, xi):
        """``(P_l, P_{l-1})`` for one xi; the second entry is ``None`` on level 0."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.s,):
            raise InputError(f"xi must have shape ({self.s},), got {xi.shape}")
        fine = self.fine_field(level, xi)
        p_fine = self.levels[level].model.qoi(fine)
        if level == 0:
            return p_fine, None
        coarse = self.coarse_field(level, xi, fine)
        return p_fine, self.levels[level - 1].model.qoi(coarse)

    def evaluate_batch(self, level, XI, executor=None):
        """Vectorised field evaluation followed by one solve per row of XI.

        Returns two arrays; the coarse one is all-NaN on level 0.
        """
        XI = np.atleast_2d(np.asarray(XI, dtype=float))
        t0 = time.perf_counter()
        fine = self.fine_field(level, XI)
        coarse = self.coarse_field(level, XI, fine) if level > 0 else None
        t1 = time.perf_counter()
        fine_model = self.levels[level].model
        coarse_model = self.levels[level - 1].model if level > 0 else None

        def one(k):
            pf = fine_model.qoi(fine[k])
            pc = coarse_model.qoi(coarse[k]) if coarse_model is not None else np.nan
            return pf, pc

        idx = range(len(XI))
        out = list(executor.map(one, idx)) if executor is not None else [one(k) for k in idx]
        t2 = time.perf_counter()
        self.timings["field_seconds"] = self.timings.get("field_seconds", 0.0) + (t1 - t0)
        self.timings["fem_seconds"] = self.timings.get("fem_seconds", 0.0) + (t2 - t1)
        arr = np.array(out, dtype=float).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]

    # -- cost model -------------------------------------------------------

    def sample_costs(self, level) -> SampleCosts:
        lv = self.levels[level]
        fine = self.s * lv.n_points
        coarse = 0
        fem_units = lv.model.solve_cost_units()
        if level > 0:
            prev = self.levels[level - 1]
            if lv.coarse_index is None:
                coarse = self.s * prev.n_points
            fem_units += prev.model.solve_cost_units()
        return SampleCosts(fine, coarse, fem_units)

    def eig_units(self, level) -> int:
        return int(self.levels[level].n_points) ** 3


def evaluate_qoi_pair(problem: Problem, level: int, xi):
    """Coupled QoIs ``(P_l, P_{l-1} or None)`` for one standard-normal vector."""
    if not 0 <= level <= problem.max_level:
        raise InputError(f"level {level} outside [0, {problem.max_level}]")
    return problem.evaluate(level, xi)


def table_levels(max_level: int):
    """``(order, rule)`` pairs of the built-in hierarchy up to `max_level`."""
    return [(rr.level_spec(l).element_order, rr.rule_for_level(l)) for l in range(max_level + 1)]


def build_problem(
    approach,
    mesh: fem.Mesh,
    material: fem.Material,
    field_model: FieldModel,
    s: int,
    max_level: int | None = None,
    levels: Sequence | None = None,
    gna_coupling: str = "restrict",
    _basis_cache: dict | None = None,
) -> Problem:
    """Assemble the per-level data for one approach.

    `levels` overrides the built-in hierarchy with a list of ``(order, rule)``
    pairs.  `_basis_cache` lets several problems on the same mesh share KL
    decompositions of identical point sets.
    """
    approach = Approach.parse(approach)
    if levels is None:
        if max_level is None:
            raise ConfigurationError("give either max_level or an explicit level list")
        levels = table_levels(max_level)
    levels = list(levels)
    if not levels:
        raise ConfigurationError("hierarchy needs at least one level")
    if gna_coupling not in ("restrict", "own_basis"):
        raise ConfigurationError(f"unknown GNA coupling {gna_coupling!r}")
    rules = [rule for _, rule in levels]
    plan = ps.select(approach, rules)
    cache = {} if _basis_cache is None else _basis_cache
    n_el = mesh.n_elements

    out = []
    for l, (order, rule) in enumerate(levels):
        model = fem.build_model(mesh, order, rule, material)
        pl = plan[l]
        gpts = ps.expand_to_global(pl.fine, mesh, level=l)
        key = (gpts.coords.tobytes(), field_model.params, s)
        t0 = time.perf_counter()
        if key not in cache:
            cache[key] = rf.kl_decompose(gpts, field_model.params, min(s, len(gpts)), mean=field_model.zbar)
        basis = cache[key]
        if basis.s != s:
            raise ConfigurationError(
                f"level {l} has {len(gpts)} field points, fewer than the stochastic dimension {s}"
            )
        eig_seconds = time.perf_counter() - t0
        coarse = None
        restrict = approach is Approach.LNA or (approach is Approach.GNA and gna_coupling == "restrict")
        if l > 0 and restrict:
            coarse = ps.global_coarse_indices(pl.coarse_indices, pl.fine.points.shape[0], n_el)
            coarse.setflags(write=False)
        out.append(LevelData(l, order, model, gpts, basis, coarse, eig_seconds))
    return Problem(approach, mesh, material, field_model, s, out, plan)
