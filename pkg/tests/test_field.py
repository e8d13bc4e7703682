import math
import tempfile
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grooving.field import (
    Background,
    FarFieldWarning,
    GridSpec,
    diff,
    diff_axis,
    extend_even,
    extend_odd,
    fd_weights,
    gradient,
    make_field,
    read_snapshot,
    write_snapshot,
)


def test_grid_rejects_even_tangential_count():
    with pytest.raises(ValueError):
        GridSpec(2, 33, 4.0, 32, 2.0)


def test_grid_axes_and_spacing():
    g = GridSpec(2, 33, 8.0, 17, 2.0)
    xt, xn = g.axes()
    assert xn[0] == 0.0 and xn[-1] == 8.0
    assert xt[0] == -2.0 and xt[-1] == 2.0
    assert g.spacing == (0.25, 0.25)
    assert g.refined().shape == (33, 65)


@given(st.integers(1, 4), st.integers(0, 3))
def test_fd_weights_exact_on_polynomials(order, shift):
    offsets = tuple(range(-shift, -shift + order + 4))
    w = fd_weights(order, offsets)
    # exact for monomials up to the stencil size minus one
    for p in range(len(offsets)):
        vals = np.array(offsets, dtype=float) ** p
        exact = math.factorial(p) if p == order else 0.0
        assert abs(w @ vals - exact) < 1e-8 * max(1, math.factorial(p))


@pytest.mark.parametrize("order", [1, 2, 3, 4])
@pytest.mark.parametrize("accuracy", [2, 4])
def test_diff_axis_convergence_order(order, accuracy):
    errs = []
    # fourth-order stencils hit rounding (~eps / h^order) early on fine grids
    levels = (17, 33, 65) if accuracy == 4 else (65, 129, 257)
    for n in levels:
        x = np.linspace(0.0, 2.0, n)
        h = x[1] - x[0]
        f = np.sin(1.3 * x + 0.2)
        exact = 1.3**order * np.sin(1.3 * x + 0.2 + order * np.pi / 2)
        errs.append(np.max(np.abs(diff_axis(f, order, h, accuracy=accuracy) - exact)))
    rate = math.log2(errs[-2] / errs[-1])
    assert rate > accuracy - 0.3


def test_diff_axis_rejects_short_axis():
    with pytest.raises(ValueError):
        diff_axis(np.zeros(4), 3, 0.1)


def test_diff_moves_affine_background():
    g = GridSpec(1, 65, 4.0)
    u = make_field(g, lambda x: 2.0 + 3.0 * x + np.exp(-x * x), Background.affine(2.0, [3.0]), far_field_tol=np.inf)
    du = diff(u, [1])
    x = g.axes()[0]
    exact = 3.0 - 2 * x * np.exp(-x * x)
    assert np.max(np.abs(du.values() - exact)) < 5e-3
    assert float(du.background.c0) == 3.0
    d2 = diff(u, [2])
    assert np.all(d2.background.slope == 0) and float(d2.background.c0) == 0.0


def test_gradient_rank_and_components():
    g = GridSpec(2, 65, 4.0, 33, 2.0)
    u = make_field(g, lambda a, b: np.sin(a) * np.exp(-b), far_field_tol=np.inf)
    gr = gradient(u)
    assert gr.rank == 1 and gr.samples.shape == (2,) + g.shape
    a, b = g.coords()
    inner = (slice(2, -2), slice(2, -2))
    assert np.max(np.abs(gr.values()[0] - np.cos(a) * np.exp(-b))[inner]) < 5e-3


def test_make_field_rejects_non_finite():
    g = GridSpec(1, 9, 1.0)
    vals = np.zeros(9)
    vals[4] = np.nan
    with pytest.raises(ValueError, match="index"):
        make_field(g, vals)


def test_far_field_flag():
    g = GridSpec(1, 65, 4.0)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        f = make_field(g, lambda x: np.ones_like(x))
    assert f.far_field_flag
    assert any(issubclass(r.category, FarFieldWarning) for r in rec)
    assert not make_field(g, lambda x: np.exp(-20 * x * x)).far_field_flag


def test_reflections():
    g = GridSpec(1, 5, 1.0)
    f = make_field(g, np.array([1.0, 2, 3, 4, 5]), far_field_tol=np.inf)
    assert list(extend_even(f)) == [5, 4, 3, 2, 1, 2, 3, 4, 5]
    assert list(extend_odd(f)) == [-5, -4, -3, -2, 0, 2, 3, 4, 5]


@given(
    st.sampled_from([1, 2]),
    st.integers(3, 9).map(lambda k: 2 * k + 1),
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.floats(0.0, 10.0),
)
def test_snapshot_round_trip(dim, n, c0, slope, t):
    g = GridSpec(1, n, 2.0) if dim == 1 else GridSpec(2, n, 2.0, n, 1.5)
    rng = np.random.default_rng(n)
    bg = Background.affine(c0, [0.0] * (dim - 1) + [slope])
    f = make_field(g, rng.normal(size=g.shape), bg, time=t, far_field_tol=np.inf)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "f.snap"
        write_snapshot(path, f, {"note": "x"})
        back = read_snapshot(path)
    assert back.grid == g
    assert np.array_equal(back.samples, f.samples)
    assert np.array_equal(back.values(), f.values())
    assert back.time == f.time
