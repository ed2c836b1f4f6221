"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (shown in the terminal summary and
printed directly under ``-s``) before asserting, so a failing criterion still
reports what was measured.
"""

import math
import time

import numpy as np
import pytest

from pmlqmc import estimator as est, fem, hierarchy as hz, point_selection as ps, qmc
from pmlqmc import random_field as rf, reference_rules as rr

from .oracles import cst_stiffness, greedy_trace, inverse_normal, simplex_monomial, traction_load

RESULTS = {}

S = 100
L_MAX = 4
SHIFTS = 10
WARMUP_N = 20  # per shift, so 200 warm-up samples per level
SEED = 0
APPROACHES = ("nna", "gna", "lna")
EPS_FACTORS = (0.02, 0.01)


def record(k, ok, detail, seconds):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({seconds:.1f} s) {detail}"
    RESULTS[k] = line
    print(line)
    return ok


# -- 1-5: component correctness -----------------------------------------------


def test_criterion_1_quadrature_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    counts = []
    for l in range(rr.MAX_LEVEL + 1):
        rule = rr.rule_for_level(l)
        counts.append(len(rule))
        for n in range(rule.nominal_degree + 1):
            for a in range(n + 1):
                exact = float(simplex_monomial(a, n - a))
                worst = max(worst, abs(rr.integrate_monomial(rule, a, n - a) - exact) / exact)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and counts == [16, 19, 28, 37, 61, 73, 126] and dt < 1.0
    assert record(1, ok, f"max relative error {worst:.2e}, counts {counts}", dt)


def test_criterion_2_nesting():
    t0 = time.perf_counter()
    rules = rr.rules_up_to(rr.MAX_LEVEL)
    rows = lambda a: {tuple(r) for r in np.asarray(a).tolist()}
    gna, lna = ps.select_gna(rules), ps.select_lna(rules)
    gna_ok = all(
        np.array_equal(gna[l + 1].fine.points[gna[l + 1].coarse_indices], gna[l].fine.points)
        for l in range(rr.MAX_LEVEL)
    ) and np.array_equal(gna[-1].fine.points, rules[-1].points)
    lna_ok = all(
        rows(lna[l].coarse_points) <= rows(rules[l].points) and len(lna[l].coarse_points) == len(rules[l - 1])
        for l in range(1, rr.MAX_LEVEL + 1)
    )
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(n, n + 6))
        targets = rng.random((n, 2)).tolist()
        cands = rng.random((m, 2)).tolist()
        mismatches += ps.greedy_nearest(targets, cands).tolist() != greedy_trace(targets, cands)
    dt = time.perf_counter() - t0
    ok = gna_ok and lna_ok and mismatches == 0 and dt < 10.0
    assert record(2, ok, f"GNA nested {gna_ok}, LNA nested {lna_ok}, fuzz mismatches {mismatches}/1000", dt)


def test_criterion_3_lattice():
    t0 = time.perf_counter()
    phi_ok = [qmc.radical_inverse_base2(n) for n in (0, 1, 2, 3, 6)] == [0.0, 0.5, 0.25, 0.75, 0.375]
    z = qmc.default_generating_vector(S)
    rule = qmc.LatticeRule(z, np.zeros((1, S)))
    grid_ok = True
    for m in (4, 8, 12):
        N = 2**m
        x = qmc.unit_points(rule, 0, np.arange(N))
        x = np.where(x < 1e-15, 0.0, x)  # undo the clamp of the origin
        grid_ok &= all(np.array_equal(np.sort(x[:, j]) * N, np.arange(N, dtype=float)) for j in range(S))
    p = np.linspace(0, 1, 1002)[1:-1]
    got = qmc.inverse_normal_cdf(p)
    ref = np.array([inverse_normal(v) for v in p])
    nz = ref != 0
    rel = float(np.max(np.abs(got[nz] - ref[nz]) / np.abs(ref[nz])))
    dt = time.perf_counter() - t0
    ok = phi_ok and grid_ok and rel <= 1e-9 and dt < 5.0
    assert record(3, ok, f"phi2 {phi_ok}, grid {grid_ok}, inverse normal rel error {rel:.1e}", dt)


def test_criterion_4_field():
    t0 = time.perf_counter()
    r = np.linspace(0, 3, 301)
    exp_err = float(np.max(np.abs(rf.matern_from_distance(rf.MaternParams(0.5, 0.3, 1.0), r) - np.exp(-r / 0.3))))
    mesh = fem.slope_mesh()
    pts = ps.expand_to_global(rr.rule_for_level(0).points, mesh).coords
    params = rf.MaternParams(2.0, 0.3, 1.0)
    full = rf.kl_decompose(pts[:300], params, 300)
    trace_err = abs(full.eigenvalues.sum() - 300.0) / 300.0
    X = np.random.default_rng(4).random((10, 2)) * [20.0, 14.0] * 0.05
    b = rf.kl_decompose(X, params, 10)
    n = 100_000
    Z = rf.gaussian_values(b, np.random.default_rng(11).standard_normal((n, 10)))
    emp = np.cov(Z, rowvar=False)
    ref = b.truncated_covariance()
    d = np.diag(ref)
    worst = float(np.max(np.abs(emp - ref) / np.sqrt((np.outer(d, d) + ref**2) / n)))
    dt = time.perf_counter() - t0
    ok = exp_err <= 1e-10 and trace_err <= 1e-8 and worst < 4.0 and dt < 60.0
    assert record(4, ok, f"exponential error {exp_err:.1e}, trace error {trace_err:.1e}, covariance {worst:.2f} SE", dt)


def test_criterion_5_fem():
    t0 = time.perf_counter()
    mesh = fem.slope_mesh()
    mat = fem.Material()
    D = mat.plane_strain_matrix()
    patch_worst = 0.0
    for level in range(rr.MAX_LEVEL + 1):
        spec = rr.level_spec(level)
        model = fem.build_model(mesh, spec.element_order, spec.rule, fem.Material(density=0.0))
        s = D @ np.array([0.0, -2e-3, 1e-3])
        sigma = np.array([[s[0], s[2]], [s[2], s[1]]])
        f = traction_load(model, sigma, fem.lagrange_values)
        sol = fem.solve(model.stiffness(), f, model.dofmap.fixed_dofs, model.dofmap.qoi_dof)
        X = model.dofmap.node_coords
        exact = np.column_stack([1e-3 * X[:, 1], -2e-3 * X[:, 1]]).ravel()
        patch_worst = max(patch_worst, np.max(np.abs(sol.displacement - exact)) / np.max(np.abs(exact)))
    null_worst, min_eig = 0.0, np.inf
    for level in (0, 1, 2):
        spec = rr.level_spec(level)
        model = fem.build_model(mesh, spec.element_order, spec.rule, mat)
        K = model.stiffness().toarray()
        Xn = model.dofmap.node_coords
        for t in (np.tile([1.0, 0.0], len(Xn)), np.tile([0.0, 1.0], len(Xn)), np.column_stack([-Xn[:, 1], Xn[:, 0]]).ravel()):
            null_worst = max(null_worst, np.linalg.norm(K @ t) / (np.linalg.norm(K) * np.linalg.norm(t)))
        fr = model.free_dofs
        min_eig = min(min_eig, np.linalg.eigvalsh(K[np.ix_(fr, fr)]).min())
    xy = [(0.3, -0.2), (2.0, 0.4), (0.7, 1.9)]
    tri = fem.make_mesh(xy, [[0, 1, 2]], [0], 1)
    Kc = fem.assemble_stiffness(tri, 1, rr.rule_for_level(0), mat).toarray()
    Kref = np.array(cst_stiffness(xy, mat.young, mat.poisson))
    cst_err = np.max(np.abs(Kc - Kref)) / np.max(np.abs(Kref))
    dt = time.perf_counter() - t0
    ok = patch_worst <= 1e-8 and null_worst <= 1e-10 and min_eig > 0 and cst_err <= 1e-10 and dt < 30.0
    assert record(
        5, ok,
        f"patch error {patch_worst:.1e}, nullspace residual {null_worst:.1e}, "
        f"min eigenvalue after BCs {min_eig:.2e}, CST error {cst_err:.1e}",
        dt,
    )


# -- 6-9: the bundled slope with the linear surrogate -------------------------


@pytest.fixture(scope="module")
def slope():
    mesh = fem.slope_mesh()
    mat = fem.Material(field_reference=8020.0)
    field = hz.FieldModel.from_lognormal_moments(8020.0, 400.0, nu=2.0, lam=0.3)
    cache = {}
    t0 = time.perf_counter()
    problems = {a: hz.build_problem(a, mesh, mat, field, S, max_level=L_MAX, _basis_cache=cache) for a in APPROACHES}
    return problems, time.perf_counter() - t0


@pytest.fixture(scope="module")
def warmup(slope):
    problems, t_build = slope
    z = qmc.default_generating_vector(S)
    t0 = time.perf_counter()
    out = {}
    for a, p in problems.items():
        stats = []
        for l in range(L_MAX + 1):
            rule = qmc.make_lattice_rule(z, SHIFTS, SEED, l)
            XI = np.concatenate([qmc.gaussian_points(rule, r, np.arange(WARMUP_N)) for r in range(SHIFTS)])
            pf, pc = p.evaluate_batch(l, XI)
            stats.append(est.level_statistics(pf.reshape(SHIFTS, -1), pc.reshape(SHIFTS, -1) if l else None))
        out[a] = stats
    return out, t_build + time.perf_counter() - t0


@pytest.fixture(scope="module")
def runs(slope, warmup):
    problems, _ = slope
    stats, _ = warmup
    v0 = stats["lna"][0].var_P  # the level-0 point set is the plain quadrature rule for NNA and LNA
    eps = [f * math.sqrt(v0) for f in EPS_FACTORS]
    t0 = time.perf_counter()
    reports = {}
    for a in APPROACHES:
        for e in eps:
            cfg = est.EstimatorConfig(approach=a, max_level=L_MAX, tolerance=e, shifts=SHIFTS, seed=SEED, s=S)
            reports[(a, e)] = est.run(cfg, problems[a])
    return eps, reports, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_6_variance_decay(warmup):
    stats, dt = warmup
    parts, ok = [], True
    for a in APPROACHES:
        v1, v4 = stats[a][1].var_dP, stats[a][L_MAX].var_dP
        means = [s.mean_P for s in stats[a]]
        spread = (max(means) - min(means)) / abs(np.mean(means))
        decay_ok = v4 <= v1 / 8 if a != "nna" else v4 >= v1 / 4
        ok &= decay_ok and spread < 0.10
        parts.append(f"{a}: V1/V4 {v1 / v4:.2f} ({'ok' if decay_ok else 'no'}), E[P] spread {spread:.2%}")
    ok &= dt < 1800
    assert record(6, ok, "; ".join(parts), dt)


@pytest.mark.slow
def test_criterion_7_sample_counts(runs):
    eps, reports, dt = runs
    e = eps[0]
    parts, ok = [], True
    for a in ("gna", "lna"):
        N = [s.N for s in reports[(a, e)].levels]
        dec = all(x > y for x, y in zip(N, N[1:]))
        ok &= dec
        parts.append(f"{a} N={N} ({'strictly decreasing' if dec else 'not strictly decreasing'})")
    ratio = reports[("nna", e)].total_units / reports[("lna", e)].total_units
    ok &= ratio >= 1.5
    parts.append(f"nna N={[s.N for s in reports[('nna', e)].levels]}, NNA/LNA units {ratio:.2f}")
    assert record(7, ok, f"eps={e:.3g}: " + "; ".join(parts), dt)


@pytest.mark.slow
def test_criterion_8_cost_ordering(runs):
    eps, reports, dt = runs
    parts, ok = [], True
    for e in eps:
        u = {a: reports[(a, e)].total_units for a in APPROACHES}
        order = u["lna"] <= u["gna"] <= u["nna"]
        ratio = u["nna"] / u["lna"]
        ok &= order and ratio >= 1.5
        parts.append(
            f"eps={e:.3g}: LNA {u['lna']:.3e} GNA {u['gna']:.3e} NNA {u['nna']:.3e} "
            f"(ordered {order}, NNA/LNA {ratio:.2f})"
        )
    assert record(8, ok, "; ".join(parts), dt)


@pytest.mark.slow
def test_criterion_9_estimator_identities(slope, runs):
    problems, _ = slope
    eps, reports, _ = runs
    t0 = time.perf_counter()
    eq1 = max(s.eq1_residual for r in reports.values() for s in r.levels[1:])
    tele = [est.telescoping_check(r) for r in reports.values()]
    tele_ok = all(t.within_3se for t in tele)
    worst_tele = max(abs(t.residual) / t.standard_error for t in tele)
    e = eps[0]
    cfg = est.EstimatorConfig(approach="lna", max_level=L_MAX, tolerance=e, shifts=SHIFTS, seed=SEED, s=S)
    same = est.run(cfg, problems["lna"]).to_json() == reports[("lna", e)].to_json()
    dt = time.perf_counter() - t0
    ok = eq1 <= 1e-10 and tele_ok and same
    assert record(
        9, ok, f"max moment-identity residual {eq1:.1e}, worst telescoping {worst_tele:.2f} SE, byte-identical rerun {same}", dt
    )
