"""Random-field evaluation points for the three selection strategies.

NNA evaluates the field at each level's own quadrature points.  GNA builds one
chain ``x_0 ⊆ x_1 ⊆ ... ⊆ x_L`` starting from the finest rule, and LNA nests
only consecutive pairs: on level ``l`` the fine set is ``q_l`` and the coarse
set is a subset of it picked to sit close to ``q_{l-1}``.

Both nested strategies use the same greedy step: walk the target points in
rule order and take, for each, the nearest candidate not taken yet (squared
distances, ties to the lowest candidate index).  Membership is tracked by
index so selected points are exact copies of the candidates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, HierarchyError, MeshError


class Approach(str, enum.Enum):
    NNA = "nna"
    GNA = "gna"
    LNA = "lna"

    @classmethod
    def parse(cls, value) -> "Approach":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown approach {value!r}; expected one of nna, gna, lna"
            ) from None


@dataclass(frozen=True)
class LocalPointSet:
    level: int
    points: np.ndarray  # (n, 2) reference-triangle coordinates

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class PlanLevel:
    """Evaluation points of one level.

    ``coarse_indices`` (``None`` on level 0 and for NNA) index into ``fine``:
    for LNA they define the coarse representation of the pair, for GNA they
    locate ``x_{l-1}`` inside ``x_l``.
    """

    fine: LocalPointSet
    coarse_indices: np.ndarray | None = None

    @property
    def coarse_points(self):
        if self.coarse_indices is None:
            return None
        return self.fine.points[self.coarse_indices]


@dataclass(frozen=True)
class EvalPointPlan:
    approach: Approach
    per_level: tuple[PlanLevel, ...]

    @property
    def max_level(self):
        return len(self.per_level) - 1

    def __getitem__(self, level):
        return self.per_level[level]


@dataclass(frozen=True)
class GlobalPointSet:
    level: int
    coords: np.ndarray  # (n_elements * points_per_element, 2), element-major
    points_per_element: int

    def __len__(self):
        return len(self.coords)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _points_of(rule):
    return np.asarray(getattr(rule, "points", rule), dtype=float)


def greedy_nearest(targets, candidates) -> np.ndarray:
    """Indices into `candidates`, one per target, chosen greedily in target order."""
    targets = np.asarray(targets, dtype=float)
    candidates = np.asarray(candidates, dtype=float)
    if len(targets) > len(candidates):
        raise HierarchyError(
            f"cannot pick {len(targets)} distinct points from {len(candidates)} candidates"
        )
    taken = np.zeros(len(candidates), dtype=bool)
    chosen = np.empty(len(targets), dtype=np.intp)
    for i, t in enumerate(targets):
        d2 = np.sum((candidates - t) ** 2, axis=1)
        d2[taken] = np.inf
        k = int(np.argmin(d2))  # first minimum -> lowest index on ties
        taken[k] = True
        chosen[i] = k
    return chosen


def _check_hierarchy(points: Sequence[np.ndarray]):
    if len(points) == 0:
        raise ConfigurationError("at least one quadrature rule is required")
    for l in range(len(points) - 1):
        if len(points[l]) >= len(points[l + 1]):
            raise HierarchyError(
                f"level {l} has {len(points[l])} points and level {l + 1} has "
                f"{len(points[l + 1])}; counts must strictly increase to nest"
            )


def select_nna(rules) -> EvalPointPlan:
    points = [_points_of(r) for r in rules]
    if len(points) == 0:
        raise ConfigurationError("at least one quadrature rule is required")
    levels = tuple(PlanLevel(LocalPointSet(l, _frozen(p))) for l, p in enumerate(points))
    return EvalPointPlan(Approach.NNA, levels)


def select_gna(rules) -> EvalPointPlan:
    points = [_points_of(r) for r in rules]
    _check_hierarchy(points)
    L = len(points) - 1
    chain = [None] * (L + 1)
    parent = [None] * (L + 1)
    chain[L] = points[L]
    for l in range(L - 1, -1, -1):
        idx = greedy_nearest(points[l], chain[l + 1])
        chain[l] = chain[l + 1][idx]
        parent[l + 1] = idx
    levels = tuple(
        PlanLevel(
            LocalPointSet(l, _frozen(chain[l])),
            None if parent[l] is None else _frozen(parent[l], np.intp),
        )
        for l in range(L + 1)
    )
    return EvalPointPlan(Approach.GNA, levels)


def select_lna(rules) -> EvalPointPlan:
    points = [_points_of(r) for r in rules]
    _check_hierarchy(points)
    levels = [PlanLevel(LocalPointSet(0, _frozen(points[0])))]
    for l in range(1, len(points)):
        idx = greedy_nearest(points[l - 1], points[l])
        levels.append(PlanLevel(LocalPointSet(l, _frozen(points[l])), _frozen(idx, np.intp)))
    return EvalPointPlan(Approach.LNA, tuple(levels))


def select(approach, rules) -> EvalPointPlan:
    approach = Approach.parse(approach)
    return {Approach.NNA: select_nna, Approach.GNA: select_gna, Approach.LNA: select_lna}[
        approach
    ](rules)


def element_vertices(mesh) -> np.ndarray:
    """(n_elements, 3, 2) vertex coordinates; raises on non-positive signed area."""
    nodes = np.asarray(mesh.nodes, dtype=float)
    tris = np.asarray(mesh.triangles, dtype=np.intp)
    V = nodes[tris]
    e1 = V[:, 1] - V[:, 0]
    e2 = V[:, 2] - V[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    bad = np.flatnonzero(area2 <= 0)
    if bad.size:
        raise MeshError(f"element {int(bad[0])} has non-positive signed area {area2[bad[0]] / 2:g}")
    return V


def expand_to_global(local, mesh, level=None) -> GlobalPointSet:
    """Map local points through every element's affine map, element-major.

    `local` may be a LocalPointSet, a PlanLevel (its fine set is used) or an
    (n, 2) array.
    """
    if isinstance(local, PlanLevel):
        local = local.fine
    if isinstance(local, LocalPointSet):
        level = local.level if level is None else level
        local = local.points
    local = np.asarray(local, dtype=float)
    V = element_vertices(mesh)
    u = local[:, 0][None, :, None]
    v = local[:, 1][None, :, None]
    X = V[:, None, 0] + u * (V[:, None, 1] - V[:, None, 0]) + v * (V[:, None, 2] - V[:, None, 0])
    return GlobalPointSet(
        level=-1 if level is None else level,
        coords=_frozen(X.reshape(-1, 2)),
        points_per_element=len(local),
    )


def global_coarse_indices(coarse_indices, points_per_element, n_elements) -> np.ndarray:
    """Element-major global indices ``e * ppe + coarse_indices[i]``."""
    ci = np.asarray(coarse_indices, dtype=np.intp)
    return (np.arange(n_elements, dtype=np.intp)[:, None] * points_per_element + ci[None, :]).ravel()


def plan_rows(plan: EvalPointPlan):
    """CSV rows ``approach,level,role,index,u,v,fine_index`` for one plan.

    NNA and GNA levels are written as a ``single`` block.  LNA writes a
    ``single`` block for level 0 and a ``fine`` plus a ``coarse`` block for
    every level above it; coarse rows carry the index of the fine point.
    """
    rows = []
    name = plan.approach.value
    for l, pl in enumerate(plan.per_level):
        if plan.approach is Approach.LNA and l > 0:
            for i, (u, v) in enumerate(pl.fine.points):
                rows.append([name, l, "fine", i, f"{u:.17g}", f"{v:.17g}", ""])
            for i, k in enumerate(pl.coarse_indices):
                u, v = pl.fine.points[k]
                rows.append([name, l, "coarse", i, f"{u:.17g}", f"{v:.17g}", int(k)])
        else:
            for i, (u, v) in enumerate(pl.fine.points):
                rows.append([name, l, "single", i, f"{u:.17g}", f"{v:.17g}", ""])
    return rows
