"""Symmetric quadrature rules on the unit right reference triangle.

The triangle has vertices (0, 0), (1, 0), (0, 1); weights sum to its area 1/2.
One rule is embedded per level of the p-hierarchy:

=====  =====  ======  ==============================================
level  order  points  source
=====  =====  ======  ==============================================
0      2      16      Dunavant, degree 8
1      3      19      Dunavant, degree 9
2      4      28      degree 11, six nodes on the edges
3      5      37      Dunavant, degree 13
4      6      61      Dunavant, degree 17
5      7      73      Dunavant, degree 19
6      8      126     Wandzura-Xiao, degree 25
=====  =====  ======  ==============================================
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from math import factorial

import numpy as np

from .errors import ConfigurationError

MAX_LEVEL = 6
POINT_COUNTS = (16, 19, 28, 37, 61, 73, 126)


@dataclass(frozen=True)
class QuadratureRule:
    level: int
    points: np.ndarray  # (n, 2), read-only
    weights: np.ndarray  # (n,), read-only
    nominal_degree: int
    source: str = ""

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class LevelSpec:
    level: int
    element_order: int
    rule: QuadratureRule

    @property
    def nodes_per_element(self):
        p = self.element_order
        return (p + 1) * (p + 2) // 2


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _validate(rule):
    P, w = rule.points, rule.weights
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(w))):
        raise ConfigurationError(f"level {rule.level}: non-finite rule data")
    if np.any(P < 0) or np.any(P.sum(axis=1) > 1 + 1e-12):
        raise ConfigurationError(f"level {rule.level}: point outside the reference triangle")
    d = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    if d.min() <= 1e-10:
        raise ConfigurationError(f"level {rule.level}: repeated quadrature point")


@lru_cache(maxsize=None)
def _load_all():
    raw = json.loads(resources.files("pmlqmc.data").joinpath("rules.json").read_text())
    rules = []
    for entry in raw["levels"]:
        rule = QuadratureRule(
            level=entry["level"],
            points=_frozen(entry["points"]),
            weights=_frozen(entry["weights"]),
            nominal_degree=entry["degree"],
            source=entry["source"],
        )
        _validate(rule)
        rules.append(rule)
    return tuple(rules)


def rule_for_level(level: int) -> QuadratureRule:
    """Return the embedded rule of `level` (0..6). Same object on every call."""
    if not isinstance(level, (int, np.integer)) or not 0 <= level <= MAX_LEVEL:
        raise ConfigurationError(f"level must be an integer in [0, {MAX_LEVEL}], got {level!r}")
    return _load_all()[int(level)]


def rules_up_to(max_level: int) -> list[QuadratureRule]:
    return [rule_for_level(l) for l in range(max_level + 1)]


def level_spec(level: int) -> LevelSpec:
    """Element order is tied to the level: order = level + 2."""
    return LevelSpec(level=level, element_order=level + 2, rule=rule_for_level(level))


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of u^a v^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def integrate_monomial(rule: QuadratureRule, a: int, b: int) -> float:
    if a < 0 or b < 0:
        raise ConfigurationError("monomial exponents must be non-negative")
    u, v = rule.points[:, 0], rule.points[:, 1]
    return float(np.sum(rule.weights * u**a * v**b))


def dump_rules_csv(path, max_level: int = MAX_LEVEL):
    """Write `level,index,u,v,weight` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "index", "u", "v", "weight"])
        for rule in rules_up_to(max_level):
            for i, ((u, v), wt) in enumerate(zip(rule.points, rule.weights)):
                w.writerow([rule.level, i, f"{u:.17g}", f"{v:.17g}", f"{wt:.17g}"])
