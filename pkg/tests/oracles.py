"""Independent reference implementations used only by the tests.

Everything here is written from first principles in plain Python (or
mpmath for high precision) and shares no code with the package.
"""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np


def simplex_monomial(a, b):
    """Exact integral of u^a v^b over the unit right triangle."""
    return Fraction(math.factorial(a) * math.factorial(b), math.factorial(a + b + 2))


def radical_inverse(n):
    bits = bin(n)[2:]
    return sum(int(c) * 2.0 ** -(k + 1) for k, c in enumerate(reversed(bits))) if n else 0.0


def inverse_normal(p, dps=40):
    # 2p - 1 must be resolved down to the smallest tail probability
    tail = min(p, 1 - p)
    with mpmath.workdps(dps + int(-mpmath.log10(tail)) if tail > 0 else dps):
        return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


def matern(r, nu, lam, sigma2, dps=40):
    with mpmath.workdps(dps):
        if r == 0:
            return float(sigma2)
        z = mpmath.sqrt(2 * nu) * r / lam
        return float(sigma2 * 2 ** (1 - nu) / mpmath.gamma(nu) * z**nu * mpmath.besselk(nu, z))


def greedy_trace(targets, candidates):
    """Nearest-not-taken selection, walking targets in order.

    Ties go to the lowest candidate index, distances are Euclidean.
    """
    taken = set()
    out = []
    for t in targets:
        best, best_d = None, None
        for k, c in enumerate(candidates):
            if k in taken:
                continue
            d = math.dist(t, c)
            if best_d is None or d < best_d:
                best, best_d = k, d
        taken.add(best)
        out.append(best)
    return out


def korobov_error2(z, N, gammas):
    """Shift-averaged squared worst-case error, straight from the definition."""
    total = 0.0
    for k in range(N):
        prod = 1.0
        for zj, gj in zip(z, gammas):
            x = (k * zj % N) / N
            prod *= 1.0 + gj * 2.0 * math.pi**2 * (x * x - x + 1.0 / 6.0)
        total += prod
    return total / N - 1.0


def cbc_bruteforce(N, s, gammas):
    z = []
    for j in range(s):
        best, best_e = None, None
        for c in range(1, N):
            if math.gcd(c, N) != 1:
                continue
            e = korobov_error2(z + [c], N, gammas[: j + 1])
            if best_e is None or e < best_e - 1e-13:
                best, best_e = c, e
        z.append(best)
    return z


def cst_stiffness(xy, E, nu, thickness=1.0):
    """Plane-strain constant-strain triangle stiffness by the textbook formula."""
    (x1, y1), (x2, y2), (x3, y3) = xy
    A = 0.5 * ((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))
    b = [y2 - y3, y3 - y1, y1 - y2]
    c = [x3 - x2, x1 - x3, x2 - x1]
    B = [[0.0] * 6 for _ in range(3)]
    for i in range(3):
        B[0][2 * i] = b[i] / (2 * A)
        B[1][2 * i + 1] = c[i] / (2 * A)
        B[2][2 * i] = c[i] / (2 * A)
        B[2][2 * i + 1] = b[i] / (2 * A)
    f = E / ((1 + nu) * (1 - 2 * nu))
    D = [[f * (1 - nu), f * nu, 0.0], [f * nu, f * (1 - nu), 0.0], [0.0, 0.0, f * (1 - 2 * nu) / 2]]
    DB = [[sum(D[i][k] * B[k][j] for k in range(3)) for j in range(6)] for i in range(3)]
    return [[A * thickness * sum(B[k][i] * DB[k][j] for k in range(3)) for j in range(6)] for i in range(6)]


def solve2(a11, a12, a21, a22, f1, f2):
    det = a11 * a22 - a12 * a21
    return (f1 * a22 - a12 * f2) / det, (a11 * f2 - a21 * f1) / det


def gauss_legendre(n):
    """Nodes and weights on [0, 1] by Newton iteration on Legendre polynomials."""
    xs, ws = [], []
    for i in range(1, n + 1):
        x = math.cos(math.pi * (i - 0.25) / (n + 0.5))
        for _ in range(100):
            p0, p1 = 1.0, x
            for k in range(2, n + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = n * (x * p1 - p0) / (x * x - 1)
            dx = p1 / dp
            x -= dx
            if abs(dx) < 1e-16:
                break
        xs.append(0.5 * (x + 1))
        ws.append(1.0 / ((1 - x * x) * dp * dp))
    return xs, ws


def traction_load(model, sigma, shape):
    """Consistent nodal loads of a constant stress on every boundary edge.

    `shape(order, uv)` evaluates the element shape functions; only the edge
    geometry and the Gauss-Legendre integration live here.
    """
    mesh, p = model.mesh, model.dofmap.order
    edges = {}
    for e, t in enumerate(mesh.triangles):
        for k in range(3):
            key = tuple(sorted((t[k], t[(k + 1) % 3])))
            edges.setdefault(key, []).append((e, k))
    ts, ws = gauss_legendre(p + 1)
    f = np.zeros(model.n_dofs)
    ref_edge = {0: lambda t: (t, 0.0), 1: lambda t: (1 - t, t), 2: lambda t: (0.0, 1 - t)}
    for owners in edges.values():
        if len(owners) != 1:
            continue
        e, k = owners[0]
        tri = mesh.triangles[e]
        a, b = mesh.nodes[tri[k]], mesh.nodes[tri[(k + 1) % 3]]
        length = np.linalg.norm(b - a)
        n = np.array([b[1] - a[1], a[0] - b[0]]) / length
        trac = sigma @ n
        uv = np.array([ref_edge[k](t) for t in ts])
        N, _ = shape(p, uv)
        integ = (np.array(ws)[:, None] * N).sum(axis=0) * length
        nodes = model.dofmap.element_nodes[e]
        f[2 * nodes] += integ * trac[0]
        f[2 * nodes + 1] += integ * trac[1]
    return f
