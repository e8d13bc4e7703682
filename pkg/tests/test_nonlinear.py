import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from grooving.field import Background, GridSpec, make_field
from grooving.nonlinear import (
    GrooveParams,
    base_projection,
    coeff_a,
    contract_A,
    flux_identity_residual,
    mean_curvature,
    omega,
    projection,
    term_B,
    term_C,
    term_F,
)

vec2 = arrays(float, 2, elements=st.floats(-5, 5))
vec3 = arrays(float, 3, elements=st.floats(-5, 5))


@given(st.one_of(vec2, vec3))
def test_projection_inverts_metric(p):
    P = projection(p)
    N = len(p)
    assert np.allclose(P, P.T)
    assert np.allclose(P @ (np.eye(N) + np.outer(p, p)), np.eye(N), atol=1e-12)
    assert np.allclose(P @ p, p / (1 + p @ p), atol=1e-12)
    assert omega(p) == pytest.approx(np.sqrt(1 + p @ p))


@given(st.floats(-4, 4), st.sampled_from([1, 2, 3]))
def test_base_projection_is_projection_at_tilt(g0, N):
    e = np.zeros(N)
    e[-1] = g0
    assert np.allclose(base_projection(N, g0), projection(e), atol=1e-14)


@given(st.floats(-3, 3), st.sampled_from([1, 2]))
def test_coeff_a_vanishes_at_zero(g0, N):
    assert np.max(np.abs(coeff_a(np.zeros(N), g0))) < 1e-15


@given(vec2, arrays(float, (2, 2, 2), elements=st.floats(-3, 3)), st.floats(-2, 2))
def test_contract_A_matches_dense_tensor(w, T, g0):
    dense = np.einsum("ijkl,ijk->l", coeff_a(w, g0), T)
    assert np.allclose(contract_A(w, T, g0), dense, atol=1e-12)


def test_contract_A_broadcasts_over_grid():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(2, 7))
    T = rng.normal(size=(2, 2, 2, 7))
    out = contract_A(w, T, 0.5)
    for j in range(7):
        assert np.allclose(out[:, j], contract_A(w[:, j], T[..., j], 0.5))


def test_term_C_zero_when_slopes_match():
    assert term_C(np.array([0.0, 3.0]), 0.7, 0.7) == pytest.approx(0.0)
    assert term_C(np.array([0.0, 3.0]), 0.0, 1.0) == pytest.approx(-0.5)


def test_term_B_requires_jacobian():
    with pytest.raises(ValueError):
        term_B(np.zeros(2), None, 0.0)


def test_term_F_multipliers():
    w = np.array([0.3, -0.2])
    jac = np.array([[1.0, 0.2], [0.2, -0.5]])
    B = term_B(w, jac, 1.0)
    M = 2 * B @ B + np.trace(B) * B
    assert np.allclose(term_F(w, jac, 1.0), M @ (w + np.array([0.0, 1.0])))
    assert np.allclose(term_F(w, jac, 1.0, "plain"), M @ w)


@pytest.mark.parametrize("method", ["trace", "divergence"])
def test_mean_curvature_of_circle_arc(method):
    R, c = 10.0, 2.0
    for n, tol in ((129, 1e-4), (257, 3e-5)):
        g = GridSpec(1, n, 4.0)
        u = make_field(g, lambda x: np.sqrt(R * R - (x - c) ** 2), far_field_tol=np.inf)
        H = mean_curvature(u, method).samples
        assert np.max(np.abs(H + 1.0 / R)) < tol


@pytest.mark.parametrize("method", ["trace", "divergence"])
def test_mean_curvature_of_sphere_cap(method):
    R = 20.0
    g = GridSpec(2, 129, 4.0, 129, 4.0)
    u = make_field(g, lambda a, b: np.sqrt(R * R - a * a - (b - 2) ** 2), far_field_tol=np.inf)
    H = mean_curvature(u, method).samples
    assert np.max(np.abs(H + 2.0 / R)) < 1e-4


def test_mean_curvature_rejects_unknown_method():
    with pytest.raises(ValueError):
        mean_curvature(make_field(GridSpec(1, 33, 1.0), np.zeros(33)), "other")


def test_flux_identity_exact_for_planes():
    g = GridSpec(2, 33, 2.0, 33, 2.0)
    u = make_field(g, lambda a, b: 0.3 * a + 1.5 * b, Background.affine(0.0, [0.3, 1.5]))
    res = flux_identity_residual(u, GrooveParams(gamma=1.0, gamma0=1.5))
    assert np.max(np.abs(res.samples)) < 1e-10


def test_flux_identity_residual_shrinks_with_grid():
    errs = []
    for n in (129, 257):
        g = GridSpec(1, n, 2 * np.pi)
        u = make_field(g, lambda x: x + 0.1 * np.sin(x), Background.affine(0.0, [1.0]), far_field_tol=np.inf)
        r = flux_identity_residual(u, GrooveParams(gamma=1.0, gamma0=1.0)).samples
        m = slice(n // 5, 4 * n // 5)
        errs.append(np.max(np.abs(r[..., m])))
    assert errs[0] / errs[1] > 3.5


@pytest.mark.parametrize("kw", [{"mu": 0.0}, {"mu": 1.0}, {"delta": 1.5}, {"tol": 0.0}, {"max_iter": 0}])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        GrooveParams(gamma=0.1, **kw)


def test_params_derived():
    p = GrooveParams(gamma=0.3, gamma0=1.0)
    assert p.slope_mismatch == pytest.approx(-0.7)
    assert p.beta_1d == pytest.approx(0.25)
