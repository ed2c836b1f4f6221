import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmlqmc import qmc
from pmlqmc.errors import ConfigurationError, InputError, ParseError

from .oracles import cbc_bruteforce, inverse_normal, korobov_error2, radical_inverse


def test_radical_inverse_small_values():
    vals = [qmc.radical_inverse_base2(n) for n in (0, 1, 2, 3, 6)]
    assert vals == [0.0, 0.5, 0.25, 0.75, 0.375]


@given(st.integers(0, 2**40))
def test_radical_inverse_matches_digit_reversal(n):
    assert qmc.radical_inverse_base2(n) == radical_inverse(n)


def test_radical_inverse_array_and_permutation():
    m = 10
    x = qmc.radical_inverse_base2(np.arange(2**m))
    assert sorted((x * 2**m).astype(int).tolist()) == list(range(2**m))


def test_radical_inverse_rejects_negative():
    with pytest.raises(InputError):
        qmc.radical_inverse_base2(-1)


def test_inverse_normal_against_high_precision():
    p = np.linspace(0, 1, 1002)[1:-1]
    got = qmc.inverse_normal_cdf(p)
    ref = np.array([inverse_normal(x) for x in p])
    mask = ref != 0
    assert np.max(np.abs(got[mask] - ref[mask]) / np.abs(ref[mask])) < 1e-9


def test_inverse_normal_tails():
    for p in (1e-300, 1e-20, 2.0**-53):
        assert qmc.inverse_normal_cdf(p) == pytest.approx(inverse_normal(p), rel=1e-9)
    for p in (1e-10, 2.0**-40):
        assert qmc.inverse_normal_cdf(1 - p) == pytest.approx(inverse_normal(1 - p), rel=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_inverse_normal_domain(p):
    with pytest.raises(InputError):
        qmc.inverse_normal_cdf(p)


def test_unshifted_lattice_is_a_grid_per_coordinate():
    z = qmc.default_generating_vector(20)
    rule = qmc.LatticeRule(z, np.zeros((1, 20)))
    for m in (3, 6, 10):
        N = 2**m
        x = qmc.unit_points(rule, 0, np.arange(N))
        for j in range(20):
            # the zero point is clamped away from 0
            got = np.sort(np.where(x[:, j] < 1e-15, 0.0, x[:, j]))
            assert np.array_equal(got * N, np.arange(N, dtype=float))


def test_points_are_clamped_inside_unit_cube():
    rule = qmc.LatticeRule(np.array([1, 3]), np.zeros((1, 2)))
    x = qmc.unit_points(rule, 0, [0])
    assert np.all(x > 0) and np.all(x < 1)
    assert np.all(np.isfinite(qmc.gaussian_points(rule, 0, [0])))


def test_prefix_extensibility():
    rule = qmc.make_lattice_rule(qmc.default_generating_vector(8), 3, seed=4)
    a = qmc.gaussian_points(rule, 1, np.arange(16))
    b = qmc.gaussian_points(rule, 1, np.arange(8, 16))
    assert np.array_equal(a[8:], b)


def test_shifts_are_deterministic_and_level_dependent():
    a = qmc.draw_shifts(10, 5, seed=1, level=0)
    assert np.array_equal(a, qmc.draw_shifts(10, 5, seed=1, level=0))
    assert not np.array_equal(a, qmc.draw_shifts(10, 5, seed=1, level=1))
    assert not np.array_equal(a, qmc.draw_shifts(10, 5, seed=2, level=0))
    assert np.all((a >= 0) & (a < 1))


def test_lattice_point_record():
    rule = qmc.make_lattice_rule([1, 5], 2, seed=0)
    p = qmc.lattice_point(rule, 1, 3)
    assert np.allclose(p.gauss, qmc.inverse_normal_cdf(p.unit))


def test_lattice_rule_validation():
    with pytest.raises(ConfigurationError):
        qmc.LatticeRule(np.array([0, 1]), np.zeros((1, 2)))
    with pytest.raises(ConfigurationError):
        qmc.LatticeRule(np.array([1, 1]), np.zeros((1, 3)))
    with pytest.raises(ConfigurationError):
        qmc.LatticeRule(np.array([1, 1]), np.ones((1, 2)))
    with pytest.raises(InputError):
        qmc.unit_points(qmc.LatticeRule(np.array([1]), np.zeros((2, 1))), 2, [0])


def test_worst_case_error_matches_definition():
    z = [1, 5, 3]
    g = qmc.product_weights(3)
    assert qmc.worst_case_error2(z, 16, g) == pytest.approx(korobov_error2(z, 16, g), rel=1e-12)


@pytest.mark.parametrize("N,s", [(8, 3), (13, 3), (32, 4), (31, 3)])
def test_cbc_matches_bruteforce(N, s):
    g = list(qmc.product_weights(s))
    assert qmc.cbc_construct(N, s).tolist() == cbc_bruteforce(N, s, g)


def test_cbc_errors_decrease_with_n():
    _, e_small = qmc.cbc_construct(64, 5, return_errors=True)
    _, e_big = qmc.cbc_construct(1024, 5, return_errors=True)
    assert e_big[-1] < e_small[-1]
    assert np.all(np.diff(e_big) > 0)


@pytest.mark.parametrize("N", [1, 12, 100])
def test_cbc_rejects_bad_n(N):
    with pytest.raises(ConfigurationError):
        qmc.cbc_construct(N, 2)


def test_bundled_vector():
    z = qmc.default_generating_vector()
    assert len(z) == 400 and z[0] == 1
    assert np.all(z % 2 == 1)
    # frozen from the CBC construction with N = 4096 and weights 1/j^2
    assert z[:10].tolist() == [1, 1557, 1087, 701, 1163, 321, 1649, 207, 1827, 1203]
    assert np.array_equal(z[:6], qmc.cbc_construct(4096, 6))


def test_bundled_vector_too_short():
    with pytest.raises(ConfigurationError):
        qmc.default_generating_vector(401)


def test_load_generating_vector_errors(tmp_path):
    good = tmp_path / "z.txt"
    good.write_text("# header\n1\n\n 7 # comment\n")
    assert qmc.load_generating_vector(good).tolist() == [1, 7]
    bad = tmp_path / "bad.txt"
    bad.write_text("1\nfoo\n")
    with pytest.raises(ParseError, match=":2"):
        qmc.load_generating_vector(bad)
    neg = tmp_path / "neg.txt"
    neg.write_text("3\n-1\n")
    with pytest.raises(ParseError):
        qmc.load_generating_vector(neg)


def test_dump_shifts(tmp_path):
    rule = qmc.make_lattice_rule([1, 3, 5], 2, seed=0)
    qmc.dump_shifts_csv(rule, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "r,j,xi" and len(lines) == 7
    assert float(lines[4].split(",")[2]) == rule.shifts[1, 0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 6))
def test_shifted_points_equal_manual_formula(seed, m):
    z = qmc.default_generating_vector(4)
    rule = qmc.make_lattice_rule(z, 2, seed)
    n = np.arange(2**m)
    x = qmc.unit_points(rule, 1, n)
    phi = np.array([radical_inverse(int(k)) for k in n])
    manual = np.mod(np.mod(phi[:, None] * z, 1.0) + rule.shifts[1], 1.0)
    assert np.allclose(x, np.clip(manual, qmc.CLAMP, 1 - qmc.CLAMP), atol=0)
