import numpy as np
import pytest

from grooving.experiments import initial_profile
from grooving.field import GridSpec
from grooving.nonlinear import GrooveParams
from grooving.solver import (
    GrooveEngine,
    SolverConfig,
    contact_residual,
    homogeneous_extension,
    picard_solve,
    rescale,
    rescale_points,
)
from grooving.surface import contact_angle_defect

GRID = GridSpec(1, 257, 16.0)
CONFIG = SolverConfig(GRID, t_min=0.125, t_max=2.0, nodes_per_octave=2, panels_per_decade=8)


def test_ladder_is_geometric():
    lad = CONFIG.ladder()
    assert lad[0] == 0.125 and lad[-1] == pytest.approx(2.0)
    assert np.allclose(lad[1:] / lad[:-1], 2**0.5)
    with pytest.raises(ValueError):
        SolverConfig(GRID, t_min=0.1, t_max=0.3, nodes_per_octave=1).ladder()


def test_tilted_plane_is_a_fixed_point():
    p = GrooveParams(gamma=0.7, gamma0=0.7)
    traj, rep = picard_solve(initial_profile("zero", 0.0, GRID, 0.7), p, CONFIG)
    assert rep.converged and rep.iterations == 1 and traj.provenance["trivial"]
    assert np.array_equal(traj.u(2), 0.7 * GRID.axes()[0])
    assert np.max(np.abs(contact_angle_defect(traj, 3))) < 1e-14


def test_rejects_large_slope_mismatch():
    p = GrooveParams(gamma=0.2, gamma0=0.0, eps_star=0.05)
    with pytest.raises(ValueError, match="eps_star"):
        picard_solve(initial_profile("zero", 0.0, GRID, 0.0), p, CONFIG)


def test_mismatch_exactly_at_threshold_is_accepted():
    p = GrooveParams(gamma=0.05, gamma0=0.0, eps_star=0.05, max_iter=1)
    traj, rep = picard_solve(initial_profile("zero", 0.0, GRID, 0.0), p, CONFIG)
    assert rep.iterations == 1


@pytest.fixture(scope="module")
def small_solve():
    p = GrooveParams(gamma=0.05, gamma0=0.0)
    eng = GrooveEngine(CONFIG, p)
    log = []
    traj, rep = picard_solve(initial_profile("zero", 0.0, GRID, 0.0), p, CONFIG, engine=eng,
                             checkpoint=lambda i, w, r: log.append((i, w.copy())))
    return p, eng, traj, rep, log


def test_small_solve_converges(small_solve):
    p, _, traj, rep, log = small_solve
    assert rep.converged and rep.update_norms[-1] < p.tol
    assert max(rep.ratios) < 0.5
    assert [i for i, _ in log] == list(range(1, rep.iterations + 1))
    assert np.max(np.abs(traj.w)) < p.delta


def test_small_solve_contact_angle(small_solve):
    _, _, traj, _, _ = small_solve
    assert np.max(np.abs(contact_residual(traj))) < 1e-3


def test_resume_reproduces_iteration(small_solve):
    p, eng, traj, rep, log = small_solve
    from grooving.solver import IterationReport

    partial = IterationReport(iterations=2, update_norms=rep.update_norms[:2], ratios=rep.ratios[:1])
    again, rep2 = picard_solve(initial_profile("zero", 0.0, GRID, 0.0), p, CONFIG, engine=eng,
                               resume_w=log[1][1], resume_report=partial)
    assert rep2.iterations == rep.iterations
    assert np.array_equal(again.w, traj.w) and np.array_equal(again.v, traj.v)


def test_rescale_by_one_is_identity(small_solve):
    _, _, traj, _, _ = small_solve
    same = rescale(traj, 1.0)
    assert np.allclose(same.v, traj.v, atol=1e-14)
    pts = GRID.axes()[0][:50]
    assert np.allclose(rescale_points(traj, 1.0, pts, 1.0), traj.u(traj.index_of(1.0))[:50], atol=1e-14)


def test_rescale_domain_checks(small_solve):
    _, _, traj, _, _ = small_solve
    with pytest.raises(ValueError):
        rescale_points(traj, 16.0, [15.0], 0.125)
    with pytest.raises(ValueError):
        rescale(traj, -1.0)
    with pytest.raises(ValueError):
        traj.index_of(0.3)


def test_rescale_keeps_matching_times(small_solve):
    _, _, traj, _, _ = small_solve
    r = rescale(traj, 4.0)
    assert np.allclose(r.times, traj.times[traj.times <= 0.5])
    assert r.grid.extent_normal <= 16.0 / 2**0.5 + 1e-12


def test_homogeneous_extension():
    g = GridSpec(2, 9, 2.0, 9, 2.0)
    a, b = g.coords()
    out = homogeneous_extension(lambda e: 2.0 * e[-1] + 1.0, g)
    assert np.allclose(out, 2.0 * b + np.sqrt(a * a + b * b))
