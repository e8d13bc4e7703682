"""Surface differential operators on a graph ``y = u(x)`` over the half-space.

Each operator is evaluated twice: by its graph formula in the base
coordinates and by the ambient definition (tangential projection of the
ambient derivative, with every quantity extended constantly in ``y``).  The
two agree in the continuum, so their discrete gap measures truncation error.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .field import GridSpec, HalfSpaceField, diff_samples, fd_weights
from .nonlinear import omega, projection


@dataclasses.dataclass
class Evaluated:
    """Graph-formula value with its ambient cross-check."""

    graph: np.ndarray
    ambient: np.ndarray

    def discrepancy(self, mask=None) -> float:
        d = np.abs(self.graph - self.ambient)
        if mask is not None:
            d = d[..., mask]
        return float(np.max(d))


def _unit(dim: int, i: int) -> list[int]:
    return [int(k == i) for k in range(dim)]


def _grad(samples: np.ndarray, grid: GridSpec, accuracy: int = 2) -> np.ndarray:
    return np.stack([diff_samples(samples, _unit(grid.dim, i), grid.spacing, accuracy) for i in range(grid.dim)])


class GraphSurface:
    """The graph of a scalar height sampled on a half-space grid."""

    def __init__(self, grid: GridSpec, height):
        if isinstance(height, HalfSpaceField):
            if height.rank != 0:
                raise ValueError("height must be scalar")
            height = height.values()
        elif callable(height):
            height = height(*grid.coords())
        self.grid = grid
        self.u = np.broadcast_to(np.asarray(height, dtype=float), grid.shape).copy()
        self.p = _grad(self.u, grid)
        self.omega = omega(self.p)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def normal(self) -> np.ndarray:
        """Upward unit normal ``(-grad u, 1) / omega``, shape ``(N+1, *grid)``."""
        return np.concatenate([-self.p, np.ones((1,) + self.grid.shape)]) / self.omega

    def ambient_projection(self) -> np.ndarray:
        n = self.normal()
        eye = np.eye(self.dim + 1).reshape((self.dim + 1,) * 2 + (1,) * self.dim)
        return eye - n[:, None] * n[None, :]


def _ambient_divergence(X: np.ndarray, surf: GraphSurface) -> np.ndarray:
    """``tr(P_amb grad X)`` with the ``y``-derivative of every component zero."""
    Pa = surf.ambient_projection()
    out = np.zeros(surf.grid.shape)
    for i in range(surf.dim + 1):
        for j in range(surf.dim):
            out += Pa[i, j] * diff_samples(X[i], _unit(surf.dim, j), surf.grid.spacing)
    return out


def tangency_defect(X: np.ndarray, surf: GraphSurface) -> float:
    n = surf.normal()
    mag = np.maximum(1.0, np.sqrt(np.sum(X * X, axis=0)))
    return float(np.max(np.abs(np.sum(X * n, axis=0)) / mag))


def surface_divergence(X, surf: GraphSurface, tol: float = 1e-8) -> Evaluated:
    """``omega^-1 div(omega X')`` for a tangential ambient field ``X = (X', Y)``.

    Fields that are not tangential to the graph within ``tol`` are rejected.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] != surf.dim + 1:
        raise ValueError("expected N+1 ambient components")
    defect = tangency_defect(X, surf)
    if defect > tol:
        raise ValueError(f"field is not tangential to the graph (|X.n| up to {defect:.3g})")
    om = surf.omega
    graph = np.zeros(surf.grid.shape)
    for i in range(surf.dim):
        graph += diff_samples(om * X[i], _unit(surf.dim, i), surf.grid.spacing)
    graph /= om
    return Evaluated(graph, _ambient_divergence(X, surf))


def surface_gradient(f, surf: GraphSurface) -> Evaluated:
    """``(P(grad u) grad f, grad u . grad f / omega^2)`` and the projected ambient gradient."""
    f = _samples(f, surf.grid)
    g = _grad(f, surf.grid)
    p = surf.p
    head = np.einsum("ij...,j...->i...", projection(p), g)
    tail = np.sum(p * g, axis=0) / surf.omega**2
    graph = np.concatenate([head, tail[None]])
    amb = np.concatenate([g, np.zeros((1,) + surf.grid.shape)])
    ambient = np.einsum("ij...,j...->i...", surf.ambient_projection(), amb)
    return Evaluated(graph, ambient)


def laplace_beltrami(f, surf: GraphSurface) -> Evaluated:
    """``omega^-1 div(omega P(grad u) grad f)`` against the ambient divergence of the surface gradient."""
    f = _samples(f, surf.grid)
    g = _grad(f, surf.grid)
    flux = surf.omega * np.einsum("ij...,j...->i...", projection(surf.p), g)
    graph = np.zeros(surf.grid.shape)
    for i in range(surf.dim):
        graph += diff_samples(flux[i], _unit(surf.dim, i), surf.grid.spacing)
    graph /= surf.omega
    grad_s = surface_gradient(f, surf).graph
    return Evaluated(graph, _ambient_divergence(grad_s, surf))


def _samples(f, grid: GridSpec) -> np.ndarray:
    if isinstance(f, HalfSpaceField):
        return f.values()
    if callable(f):
        f = f(*grid.coords())
    return np.broadcast_to(np.asarray(f, dtype=float), grid.shape).copy()


# --------------------------------------------------------------------------
# evolution checks on solver output


def normal_velocity(traj, k: int) -> np.ndarray:
    """``u_t / omega`` at ladder index ``k``; ``u_t`` comes from the time interpolant of ``v``."""
    t = float(traj.times[k])
    ut = traj.v_slab().derivative(t)[0]
    surf = GraphSurface(traj.grid, traj.u(k))
    return ut / surf.omega


def mean_curvature_samples(u: np.ndarray, grid: GridSpec, accuracy: int = 2) -> np.ndarray:
    p = _grad(u, grid, accuracy)
    hess = np.empty((grid.dim, grid.dim) + grid.shape)
    for i in range(grid.dim):
        for j in range(grid.dim):
            multi = [0] * grid.dim
            multi[i] += 1
            multi[j] += 1
            hess[i, j] = diff_samples(u, multi, grid.spacing, accuracy)
    return np.einsum("ij...,ij...->...", projection(p), hess) / omega(p)


def evolution_residual(traj, k: int) -> np.ndarray:
    """``u_t + div(omega P(grad u) grad H)`` at ladder index ``k``.

    The spatial part composes three derivative passes, so every pass uses
    fourth-order stencils; the wall rows then stay second-order accurate.
    """
    grid = traj.grid
    u = traj.u(k)
    p = _grad(u, grid, 4)
    H = mean_curvature_samples(u, grid, 4)
    gH = _grad(H, grid, 4)
    flux = omega(p) * np.einsum("ij...,j...->i...", projection(p), gH)
    div = np.zeros(grid.shape)
    for i in range(grid.dim):
        div += diff_samples(flux[i], _unit(grid.dim, i), grid.spacing, 4)
    ut = traj.v_slab().derivative(float(traj.times[k]))[0]
    return ut + div


def window_mask(grid: GridSpec, normal_range, tangential_max: float | None = None) -> np.ndarray:
    """Boolean mask of nodes with ``x_N`` in ``normal_range`` (and ``|x'| <= tangential_max``)."""
    coords = grid.coords()
    lo, hi = normal_range
    m = (coords[-1] >= lo - 1e-12) & (coords[-1] <= hi + 1e-12)
    if grid.dim > 1 and tangential_max is not None:
        m &= np.abs(coords[0]) <= tangential_max + 1e-12
    return m


def contact_angle_defect(traj, k: int) -> np.ndarray:
    """``nu . n - sin(theta)`` on the wall, with ``nu = -e_N`` and ``tan(theta) = gamma``.

    The wall derivative uses a six-point one-sided stencil.
    """
    u = traj.u(k)
    grid = traj.grid
    h = grid.spacing[-1]
    w = fd_weights(1, tuple(range(6)))
    dN = sum(c * np.take(u, j, axis=-1) for j, c in enumerate(w)) / h
    if grid.dim == 1:
        tang2 = 0.0
    else:
        tang2 = diff_samples(np.take(u, 0, axis=-1), [1], grid.spacing[:1]) ** 2
    om = np.sqrt(1.0 + tang2 + dN**2)
    gamma = traj.params.gamma
    return dN / om - gamma / np.sqrt(1.0 + gamma**2)
