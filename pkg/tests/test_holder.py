import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grooving.field import GridSpec
from grooving.holder import (
    append_report,
    dyadic_offsets,
    scaled_norm,
    spatial_seminorm,
    spatial_seminorm_samples,
    temporal_seminorm_samples,
    z_norm,
)
from grooving.potentials import TimeSlabFunction


@given(st.integers(2, 5000), st.integers(1, 6))
def test_offsets_contain_powers_of_two(n, per_octave):
    offs = dyadic_offsets(n, per_octave=per_octave)
    assert offs == sorted(set(offs))
    assert offs[-1] == n - 1
    k = 1
    while k <= n - 1:
        assert k in offs
        k *= 2


def test_offsets_empty_for_single_point():
    assert dyadic_offsets(1) == []


@given(st.floats(-5, 5), st.floats(0.05, 1.0))
def test_seminorm_of_linear_function(c, lam):
    x = np.linspace(0.0, 3.0, 97)
    h = x[1] - x[0]
    val = spatial_seminorm_samples(c * x, lam, (h,))
    # |c| d^(1 - lam) is largest at the longest offset
    assert val == pytest.approx(abs(c) * 3.0 ** (1 - lam), rel=1e-12, abs=1e-14)


@given(st.floats(0.1, 1.0))
def test_seminorm_of_power_function_is_one(lam):
    x = np.linspace(0.0, 1.0, 257)
    assert spatial_seminorm_samples(x**lam, lam, (x[1],)) == pytest.approx(1.0, rel=1e-12)


def test_seminorm_uses_component_norm():
    x = np.linspace(0.0, 1.0, 33)
    data = np.stack([3 * x, 4 * x])
    assert spatial_seminorm_samples(data, 1.0, (x[1],)) == pytest.approx(5.0)


def test_temporal_seminorm_of_linear_time():
    times = np.array([0.0, 0.5, 1.0, 2.0])
    data = np.outer(times, np.ones(5))
    assert temporal_seminorm_samples(times, data, 1.0, 1) == pytest.approx(1.0)
    assert temporal_seminorm_samples(times, data, 0.5, 1) == pytest.approx(2.0**0.5)


def slab(fn, times, grid=GridSpec(1, 65, 4.0)):
    x = grid.axes()[0]
    return TimeSlabFunction(grid, times, np.array([fn(x, t) for t in times]))


def test_scaled_norm_of_static_linear_profile():
    # sup |x| = 4, sup |x'| = 1 weighted by L^(1/4); every seminorm vanishes
    f = slab(lambda x, t: x, np.array([1.0, 1.5, 2.0]))
    est = scaled_norm(f, 1.5, (1.0, 2.0))
    assert est.value == pytest.approx(4.0 + 1.0, rel=1e-12)
    assert est.spatial == 0.0 and est.temporal == pytest.approx(0.0, abs=1e-12)
    unscaled = scaled_norm(slab(lambda x, t: x, np.array([1.0, 3.0])), 1.5, (1.0, 3.0), scaled=False)
    assert unscaled.value == pytest.approx(5.0, rel=1e-12)


def test_scaled_norm_temporal_term():
    times = np.array([1.0, 1.25, 1.5, 1.75, 2.0])
    f = slab(lambda x, t: t * np.ones_like(x), times)
    est = scaled_norm(f, 0.5, (1.0, 2.0))
    # sup term 2; temporal term |dt|^(1 - 1/8) maximal at the full window
    assert est.terms[("t", 0, 0)] == pytest.approx(1.0)
    assert est.value == pytest.approx(2.0 + 1.0, rel=1e-12)


def test_window_validation():
    f = slab(lambda x, t: x, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        spatial_seminorm(f, 0.5, (2.0, 1.0))
    with pytest.raises(ValueError):
        spatial_seminorm(f, 0.5, (5.0, 6.0))
    with pytest.raises(ValueError):
        spatial_seminorm(f, 1.5, (1.0, 2.0))


def test_z_norm_flags_growth_toward_small_times():
    times = 2.0 ** np.arange(-3, 4)
    f = slab(lambda x, t: 2.0 * np.ones_like(x), times)
    res = z_norm(f, 1.0, 0.5)
    assert res.rows[0][0] == 0.25 and res.diverging
    assert res.value == pytest.approx(2.0 * 0.25**-0.25)
    flat = z_norm(f, 0.0, 0.5)
    assert not flat.diverging
    assert flat.value == pytest.approx(2.0)
    grow = z_norm(slab(lambda x, t: np.exp(-x * x), times), 0.0, 0.5)
    # the window length weights the spatial seminorm, so a static bump grows with t
    assert grow.diverging and grow.value == grow.rows[-1][1]


def test_append_report(tmp_path):
    p = tmp_path / "r.csv"
    append_report(p, "v", 1.0, 0.5, [(2.0, 3.0)])
    append_report(p, "v", 1.0, 0.5, [(4.0, 5.0)])
    rows = list(csv.reader(p.open()))
    assert rows[0][0] == "quantity" and len(rows) == 3
    assert rows[2][3:] == ["2.0", "4.0", "5.0"]
