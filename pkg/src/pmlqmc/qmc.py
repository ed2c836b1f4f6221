"""Randomly shifted rank-1 lattice rules in radical-inverse order.

Point ``n`` of shift ``r`` is ``Phi^{-1}(frac(phi_2(n) * z + shift_r))``,
where ``phi_2`` reverses the binary digits of ``n``.  Taking ``n = 0..2^m-1``
gives the full ``2^m``-point lattice, and any prefix is usable, so the number
of points can grow without discarding earlier samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError, InputError, ParseError

CLAMP = 2.0**-53
TIE_RTOL = 1e-12


def radical_inverse_base2(n):
    """Van der Corput radical inverse; exact for ``n < 2**53``.

    Accepts a non-negative integer or an integer array.
    """
    scalar = np.isscalar(n)
    a = np.atleast_1d(np.asarray(n))
    if a.size and (a.min() < 0):
        raise InputError("radical inverse is defined for non-negative integers")
    a = a.astype(np.uint64)
    rev = np.zeros_like(a)
    for _ in range(64):
        rev = (rev << np.uint64(1)) | (a & np.uint64(1))
        a = a >> np.uint64(1)
    out = rev.astype(np.float64) * 2.0**-64
    return float(out[0]) if scalar else out


def inverse_normal_cdf(p):
    """Standard normal quantile, elementwise. Raises outside the open unit interval."""
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0) | ~(arr < 1)):
        raise InputError("inverse normal CDF needs 0 < p < 1")
    out = ndtri(arr)
    return float(out) if np.ndim(p) == 0 else out


@dataclass(frozen=True)
class LatticeRule:
    z: np.ndarray  # (s,) positive integers
    shifts: np.ndarray  # (R, s) in [0, 1)
    rng_seed: int = 0

    def __post_init__(self):
        if np.any(self.z < 1):
            raise ConfigurationError("generating vector entries must be positive")
        if self.shifts.ndim != 2 or self.shifts.shape[0] < 1 or self.shifts.shape[1] != len(self.z):
            raise ConfigurationError("shifts must have shape (R, s) with R >= 1")
        if np.any(self.shifts < 0) or np.any(self.shifts >= 1):
            raise ConfigurationError("shift components must lie in [0, 1)")

    @property
    def s(self):
        return len(self.z)

    @property
    def R(self):
        return self.shifts.shape[0]


@dataclass(frozen=True)
class QmcPoint:
    unit: np.ndarray
    gauss: np.ndarray


def draw_shifts(R: int, s: int, seed: int, level: int = 0) -> np.ndarray:
    """R uniform shifts from a counter-based generator keyed by (seed, level)."""
    if R < 1:
        raise ConfigurationError("at least one shift is required")
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(level)])
    gen = np.random.Generator(np.random.Philox(ss))
    return gen.random((R, s))


def make_lattice_rule(z, R: int, seed: int, level: int = 0) -> LatticeRule:
    z = np.asarray(z, dtype=np.int64)
    shifts = draw_shifts(R, len(z), seed, level)
    z.setflags(write=False)
    shifts.setflags(write=False)
    return LatticeRule(z, shifts, int(seed))


def unit_points(rule: LatticeRule, r: int, n) -> np.ndarray:
    """Shifted lattice points in (0, 1)^s for indices ``n``; shape (len(n), s)."""
    if not 0 <= r < rule.R:
        raise InputError(f"shift index {r} outside [0, {rule.R})")
    phi = np.atleast_1d(radical_inverse_base2(np.asarray(n)))
    # frac(phi * z) first keeps the products exact: phi has few bits, z is an integer
    x = np.mod(phi[:, None] * rule.z[None, :], 1.0)
    x = np.mod(x + rule.shifts[r][None, :], 1.0)
    return np.clip(x, CLAMP, 1.0 - CLAMP)


def gaussian_points(rule: LatticeRule, r: int, n) -> np.ndarray:
    return ndtri(unit_points(rule, r, n))


def lattice_point(rule: LatticeRule, r: int, n: int) -> QmcPoint:
    u = unit_points(rule, r, [n])[0]
    return QmcPoint(u, ndtri(u))


# -- generating vectors -------------------------------------------------------


def load_generating_vector(path) -> np.ndarray:
    """Read one positive integer per line (blank lines and ``#`` comments skipped)."""
    z = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                value = int(text)
            except ValueError:
                raise ParseError(f"expected an integer, got {text!r}", path, lineno) from None
            if value < 1:
                raise ParseError(f"generating vector entries must be positive, got {value}", path, lineno)
            z.append(value)
    if not z:
        raise ParseError("empty generating vector file", path)
    return np.array(z, dtype=np.int64)


def default_generating_vector(s: int | None = None) -> np.ndarray:
    """Bundled CBC vector (N = 4096, weights 1/j^2, 400 coordinates)."""
    with resources.as_file(resources.files("pmlqmc.data").joinpath("lattice_4096_s400.txt")) as p:
        z = load_generating_vector(p)
    if s is not None:
        if s > len(z):
            raise ConfigurationError(f"bundled generating vector has {len(z)} coordinates, {s} requested")
        z = z[:s]
    return z


def product_weights(s: int) -> np.ndarray:
    j = np.arange(1, s + 1, dtype=float)
    return 1.0 / j**2


def _bernoulli2(x):
    return x * x - x + 1.0 / 6.0


def _is_prime(n):
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


def _check_cbc_args(N, s):
    if s < 1:
        raise ConfigurationError("dimension s must be at least 1")
    if N < 2 or not (_is_prime(N) or (N & (N - 1)) == 0):
        raise ConfigurationError(f"N={N} must be a prime or a power of two")


def worst_case_error2(z, N: int, gammas=None) -> float:
    """Squared shift-averaged worst-case error of the N-point lattice with vector z."""
    z = np.asarray(z, dtype=np.int64)
    gammas = product_weights(len(z)) if gammas is None else np.asarray(gammas, dtype=float)
    k = np.arange(N, dtype=np.int64)
    omega = 2.0 * math.pi**2 * _bernoulli2(np.arange(N) / N)
    pm1 = np.zeros(N)  # product minus one, kept separately to avoid cancellation
    for zj, gj in zip(z, gammas):
        t = gj * omega[(k * zj) % N]
        pm1 = pm1 * (1.0 + t) + t
    return float(pm1.mean())


def cbc_construct(N: int, s: int, gammas=None, return_errors: bool = False):
    """Component-by-component generating vector for the weighted Korobov space.

    Naive O(s N^2) search: candidate z_j runs over the units modulo N and
    the smallest candidate wins ties.
    """
    _check_cbc_args(N, s)
    gammas = product_weights(s) if gammas is None else np.asarray(gammas, dtype=float)
    if len(gammas) < s:
        raise ConfigurationError("need one weight per coordinate")
    cands = np.array([c for c in range(1, N) if math.gcd(c, N) == 1], dtype=np.int64)
    omega = 2.0 * math.pi**2 * _bernoulli2(np.arange(N) / N)
    k = np.arange(N, dtype=np.int64)
    pm1 = np.zeros(N)
    z, errors = [], []
    block = max(1, 2**22 // N)
    for j in range(s):
        e2 = np.empty(len(cands))
        scale = 0.0
        for b in range(0, len(cands), block):
            c = cands[b : b + block]
            idx = (c[:, None] * k[None, :]) % N
            t = gammas[j] * omega[idx]
            terms = pm1[None, :] * (1.0 + t) + t
            e2[b : b + block] = terms.mean(axis=1)
            scale = max(scale, float(np.abs(terms).mean()))
        # the lattice sum cancels heavily; agreement to rounding of its terms is a tie
        best = int(np.flatnonzero(e2 <= e2.min() + TIE_RTOL * scale)[0])
        z.append(int(cands[best]))
        errors.append(float(e2[best]))
        t = gammas[j] * omega[(cands[best] * k) % N]
        pm1 = pm1 * (1.0 + t) + t
    z = np.array(z, dtype=np.int64)
    return (z, np.array(errors)) if return_errors else z


def dump_shifts_csv(rule: LatticeRule, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "j", "xi"])
        for r, row in enumerate(rule.shifts):
            for j, x in enumerate(row):
                w.writerow([r, j, f"{x:.17g}"])
