"""Matérn covariance, discrete Karhunen-Loève bases and field sampling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.spatial.distance
from scipy.special import gamma, kv

from .errors import ConfigurationError, InputError, NumericalError


@dataclass(frozen=True)
class MaternParams:
    nu: float = 2.0
    lam: float = 0.3
    sigma2: float = 1.0

    def __post_init__(self):
        for name in ("nu", "lam", "sigma2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"Matérn parameter {name} must be positive and finite, got {v!r}")


def matern_from_distance(params: MaternParams, r) -> np.ndarray:
    """Matérn covariance as a function of distance, with C(0) = sigma2."""
    r = np.asarray(r, dtype=float)
    nu = params.nu
    z = math.sqrt(2.0 * nu) * r / params.lam
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        val = params.sigma2 / (2.0 ** (nu - 1.0) * gamma(nu)) * z**nu * kv(nu, z)
    # kv overflows for tiny z at large nu; the analytic limit takes over there
    val = np.where((z == 0) | ~np.isfinite(val), params.sigma2, val)
    return val


def matern(params: MaternParams, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("Matérn kernel evaluated at a non-finite coordinate")
    return float(matern_from_distance(params, np.linalg.norm(x - y)))


def covariance_matrix(params: MaternParams, X, Y=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = X if Y is None else np.asarray(Y, dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InputError("non-finite coordinates in covariance assembly")
    R = scipy.spatial.distance.cdist(X, Y)
    C = matern_from_distance(params, R)
    if Y is X:
        C = 0.5 * (C + C.T)
    return C


@dataclass(frozen=True)
class KLBasis:
    coords: np.ndarray  # (n, 2) global points the basis lives on
    eigenvalues: np.ndarray  # (s,), non-increasing
    eigenvectors: np.ndarray  # (n, s), orthonormal columns
    mean: float
    trace: float
    params: MaternParams
    level: int = -1
    _scaled: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        scaled = self.eigenvectors * np.sqrt(self.eigenvalues)[None, :]
        scaled.setflags(write=False)
        object.__setattr__(self, "_scaled", scaled)

    @property
    def s(self) -> int:
        return len(self.eigenvalues)

    @property
    def n_points(self) -> int:
        return len(self.coords)

    @property
    def captured_ratio(self) -> float:
        return float(np.sum(self.eigenvalues) / self.trace)

    def truncated_covariance(self) -> np.ndarray:
        return self._scaled @ self._scaled.T


@dataclass(frozen=True)
class FieldSample:
    values: np.ndarray
    is_lognormal: bool = False

    def restrict(self, indices) -> "FieldSample":
        return FieldSample(self.values[np.asarray(indices)], self.is_lognormal)


def _fix_signs(vecs):
    """Make the first entry that is not negligibly small positive in every column."""
    tol = 1e-10 * np.max(np.abs(vecs), axis=0, keepdims=True)
    first = np.argmax(np.abs(vecs) > tol, axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs[None, :]


def kl_decompose(points, params: MaternParams, s: int, mean: float = 0.0) -> KLBasis:
    """Top-`s` eigenpairs of the covariance matrix on `points`.

    The eigenproblem is the plain (unweighted) matrix one, so eigenvalues sum
    to ``n * sigma2`` over the full spectrum.
    """
    coords = np.asarray(getattr(points, "coords", points), dtype=float)
    level = getattr(points, "level", -1)
    n = len(coords)
    if not isinstance(s, (int, np.integer)) or not 1 <= s <= n:
        raise ConfigurationError(f"stochastic dimension s={s!r} must lie in [1, {n}]")
    C = covariance_matrix(params, coords)
    trace = n * params.sigma2
    try:
        theta, vecs = scipy.linalg.eigh(C, subset_by_index=[n - s, n - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigendecomposition of {n}x{n} covariance failed: {exc}") from exc
    theta = theta[::-1].copy()
    vecs = vecs[:, ::-1]
    if theta.min() < -1e-10 * trace:
        raise NumericalError(
            f"covariance on {n} points has eigenvalue {theta.min():g}; kernel is not positive semi-definite"
        )
    theta[theta < 0] = 0.0
    vecs = _fix_signs(vecs)
    # exact ties: order clustered vectors lexicographically so the result is reproducible
    order = sorted(range(s), key=lambda k: (-theta[k], tuple(vecs[:, k])))
    theta = theta[order]
    vecs = np.ascontiguousarray(vecs[:, order])
    theta.setflags(write=False)
    vecs.setflags(write=False)
    c = coords.copy()
    c.setflags(write=False)
    return KLBasis(c, theta, vecs, float(mean), float(trace), params, level)


def gaussian_values(basis: KLBasis, xi) -> np.ndarray:
    """Field values for one xi vector (s,) or a batch (m, s) -> (n,) / (m, n)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != basis.s:
        raise InputError(f"xi has length {xi.shape[-1]}, basis needs {basis.s}")
    return basis.mean + xi @ basis._scaled.T


def sample_gaussian(basis: KLBasis, xi) -> FieldSample:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1:
        raise InputError("sample_gaussian takes a single xi vector")
    return FieldSample(gaussian_values(basis, xi), False)


def sample_lognormal(basis: KLBasis, xi) -> FieldSample:
    g = sample_gaussian(basis, xi)
    return FieldSample(np.exp(g.values), True)


def lognormal_moments_to_gaussian(mean: float, stddev: float) -> tuple[float, float]:
    """Gaussian (mean, variance) whose exponential has the given mean and std."""
    if not (mean > 0 and stddev > 0):
        raise ConfigurationError("lognormal mean and standard deviation must be positive")
    sigma2 = math.log1p((stddev / mean) ** 2)
    return math.log(mean) - 0.5 * sigma2, sigma2


def dump_spectrum_csv(basis: KLBasis, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "theta_n", "cumulative_ratio"])
        cum = np.cumsum(basis.eigenvalues) / basis.trace
        for k, (t, c) in enumerate(zip(basis.eigenvalues, cum), start=1):
            w.writerow([k, f"{t:.17g}", f"{c:.17g}"])

