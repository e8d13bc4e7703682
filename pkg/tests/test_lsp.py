import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from grooving.lsp import (
    DEPENDENT,
    SYSTEMS,
    BoundarySystem,
    char_roots,
    in_sector,
    independence,
    lsp_check_dirichlet,
    lsp_check_neumann,
    poly_eval,
    poly_remainder,
    quartic_coefficients,
    sample_grid,
    sector_sweep,
    upper_sqrt,
)

finite = st.floats(-1e3, 1e3)
PHI = math.pi / 4


@given(finite, finite)
def test_upper_sqrt(re, im):
    z = complex(re, im)
    s = upper_sqrt(z)
    assert s.imag >= 0
    assert abs(s * s - z) <= 1e-12 * max(1.0, abs(z))


def sector_lambda():
    return st.tuples(st.floats(1e-2, 1e2), st.floats(-(math.pi - PHI) + 1e-6, math.pi - PHI - 1e-6)).map(
        lambda ra: cmath.rect(*ra)
    )


@given(st.floats(0.0, 100.0), sector_lambda(), st.floats(0.0, 5.0))
def test_char_roots_solve_quartic_in_upper_half_plane(xi, lam, g0):
    coeffs = quartic_coefficients(xi * xi, lam, g0)
    for tau in char_roots(xi, lam, g0, PHI):
        assert tau.imag > 0
        scale = max(abs(c) * abs(tau) ** (4 - k) for k, c in enumerate(coeffs))
        assert abs(poly_eval(coeffs, tau)) <= 1e-10 * scale


def test_char_roots_distinct_from_conjugates():
    t1, t2 = char_roots(1.0, 2.0 + 1.0j)
    roots = np.roots(quartic_coefficients(1.0, 2.0 + 1.0j))
    assert sum(r.imag > 0 for r in roots) == 2
    assert min(abs(roots - t1)) < 1e-12 and min(abs(roots - t2)) < 1e-12


def test_cubic_remainder_by_hand():
    a, b = 1.3 - 0.2j, 0.7 + 0.5j
    p, q = poly_remainder([1, 0, 0, 0], a, b)
    assert p == pytest.approx(a * a - b)
    assert q == pytest.approx(-a * b)
    assert poly_remainder([2, 5], a, b) == (2, 5)
    assert poly_remainder([4], a, b) == (0, 4)


@given(st.lists(st.complex_numbers(max_magnitude=10), min_size=1, max_size=7), st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_remainder_agrees_with_polydiv_and_roots(coeffs, a, b):
    p, q = poly_remainder(coeffs, a, b)
    _, rem = np.polydiv(np.array(coeffs, dtype=complex), np.array([1, -a, b], dtype=complex))
    rem = np.concatenate([np.zeros(2 - len(rem)), rem])
    scale = 1 + max(abs(c) for c in coeffs) * (1 + abs(a) + abs(b)) ** len(coeffs)
    assert abs(p - rem[0]) < 1e-9 * scale and abs(q - rem[1]) < 1e-9 * scale
    # at a root of the quadratic, the polynomial equals its remainder
    r = (a + cmath.sqrt(a * a - 4 * b)) / 2
    assert abs(poly_eval(coeffs, r) - (p * r + q)) < 1e-8 * scale


def test_sector_membership_and_rejection():
    assert in_sector(1.0, PHI) and not in_sector(-1.0, PHI) and not in_sector(0, PHI)
    with pytest.raises(ValueError, match="sector"):
        char_roots(1.0, -1.0 + 0.1j, 0.0, PHI)
    with pytest.raises(ValueError):
        char_roots(1.0, 1.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        char_roots(1.0, 0.0)


@given(st.floats(0.0, 50.0), sector_lambda(), st.floats(0.0, 5.0))
def test_remainder_determinant_matches_evaluation(xi, lam, g0):
    for system in ("neumann", "dirichlet"):
        s = independence(SYSTEMS[system], xi, lam, g0)
        ref = s.det * (s.tau1 - s.tau2)
        assume(abs(s.det_eval) > 1e-200)
        assert abs(s.det_eval - ref) <= 1e-8 * max(abs(ref), abs(s.det_eval))


def test_check_functions_nonzero_in_sector():
    for lam in (1.0, 1j, -0.5 + 0.6j):
        assert abs(lsp_check_neumann(0.7, lam, 1.0, PHI)) > 0
        assert abs(lsp_check_dirichlet(0.7, lam, 1.0, PHI)) > 0


def test_dependent_pair_fails_sweep():
    rep = sector_sweep(0.0, PHI, 100, DEPENDENT)
    assert rep.min_det_norm == 0.0 and not rep.passed


@pytest.mark.parametrize("system", ["neumann", "dirichlet"])
@pytest.mark.parametrize("g0", [0.0, 1.0, 5.0])
def test_sweep_passes(system, g0):
    rep = sector_sweep(g0, PHI, 200, system)
    assert rep.passed and rep.invalid == 0
    assert rep.max_root_error < 1e-10


def test_custom_symbol_path():
    quart = BoundarySystem("custom", lambda xi2, c: ([1.0, 0.0], [1.0]), 1, symbol=lambda xi2, lam, c: quartic_coefficients(xi2, lam))
    s = independence(quart, 0.5, 1.0 + 1.0j)
    assert s.valid and abs(s.det - 1.0) < 1e-12


def test_sample_grid_size_and_sector():
    pts = sample_grid(PHI, 1000)
    assert len(pts) >= 1000
    assert all(in_sector(l, PHI) for _, l in pts)
    assert sum(x == 0.0 for x, _ in pts) == len(pts) // 10
    with pytest.raises(ValueError):
        sample_grid(0.0, 10)


def test_write_csv(tmp_path):
    rep = sector_sweep(0.0, PHI, 20)
    rep.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("re_lambda") and len(lines) == len(rep.samples) + 1
