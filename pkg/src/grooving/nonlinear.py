"""Pointwise geometric nonlinearities of the graph formulation.

Vector arguments carry the component index first (``p.shape == (N, ...)``),
matching the layout of rank-1 fields, so every function broadcasts over grids.
"""

from __future__ import annotations

import dataclasses
import itertools

import numpy as np

from .field import HalfSpaceField, diff, diff_samples, make_field


@dataclasses.dataclass(frozen=True)
class GrooveParams:
    gamma: float
    gamma0: float = 0.0
    mu: float = 0.5
    delta: float = 0.2
    eps_star: float = 0.05
    delta_star: float = 0.2
    tol: float = 1e-8
    max_iter: int = 50

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")

    @property
    def slope_mismatch(self) -> float:
        return self.gamma - self.gamma0

    @property
    def beta_1d(self) -> float:
        return 1.0 / (1.0 + self.gamma0**2) ** 2


def _vec(p) -> np.ndarray:
    return np.asarray(p, dtype=float)


def tilted(w, gamma0: float) -> np.ndarray:
    """``gamma0 e_N + w``."""
    q = np.array(_vec(w), dtype=float, copy=True)
    q[-1] = q[-1] + gamma0
    return q


def omega(p) -> np.ndarray:
    p = _vec(p)
    return np.sqrt(1.0 + np.sum(p * p, axis=0))


def projection(p) -> np.ndarray:
    """``I - p (x) p / (1 + |p|^2)`` with shape ``(N, N, ...)``."""
    p = _vec(p)
    N = p.shape[0]
    eye = np.eye(N).reshape((N, N) + (1,) * (p.ndim - 1))
    return eye - p[:, None] * p[None, :] / (1.0 + np.sum(p * p, axis=0))


def base_projection(dim: int, gamma0: float) -> np.ndarray:
    d = np.ones(dim)
    d[-1] = 1.0 / (1.0 + gamma0**2)
    return np.diag(d)


def coeff_a(w, gamma0: float) -> np.ndarray:
    """Dense ``a_{ijkl}(w)`` with shape ``(N, N, N, N, ...)``; zero at ``w = 0``."""
    w = _vec(w)
    P = projection(tilted(w, gamma0))
    P0 = base_projection(w.shape[0], gamma0).reshape(P.shape[:2] + (1,) * (w.ndim - 1))
    return np.einsum("ij...,kl...->ijkl...", P, P) - np.einsum("ij...,kl...->ijkl...", P0, P0)


def contract_A(w, T, gamma0: float) -> np.ndarray:
    """``(A[w] T)_l = sum a_{ijkl}(w) T_{ijk}``, ``T`` of shape ``(N, N, N, ...)``.

    Evaluated as ``P S(P) - P0 S(P0)`` with ``S(M)_k = sum_ij M_ij T_ijk``
    instead of materialising the 4-tensor.
    """
    w, T = _vec(w), _vec(T)
    P = projection(tilted(w, gamma0))
    P0 = base_projection(w.shape[0], gamma0).reshape(P.shape[:2] + (1,) * (w.ndim - 1))

    def part(M):
        S = np.einsum("ij...,ijk...->k...", M, T)
        return np.einsum("kl...,k...->l...", M, S)

    return part(P) - part(np.broadcast_to(P0, P.shape))


def term_B(w, jac, gamma0: float) -> np.ndarray:
    """``P(gamma0 e_N + w) jac / omega(gamma0 e_N + w)`` with ``jac[i, j] = D_j w_i``.

    For ``w = grad v`` this is ``P(grad u) hess(u) / omega``.
    """
    if jac is None:
        raise ValueError("the Jacobian of w is required")
    p = tilted(w, gamma0)
    return np.einsum("ik...,kj...->ij...", projection(p), _vec(jac)) / omega(p)


def term_C(p, gamma: float, gamma0: float) -> np.ndarray:
    p = _vec(p)
    tang = p[:-1]
    return (gamma * np.sqrt(1.0 + np.sum(tang * tang, axis=0)) - gamma0) / (1.0 + gamma0**2)


def term_F(w, jac, gamma0: float, multiplier: str = "tilted") -> np.ndarray:
    """``(2 B^2 + tr(B) B) m`` with ``m = gamma0 e_N + w`` (default) or ``m = w``."""
    B = term_B(w, jac, gamma0)
    B2 = np.einsum("ik...,kj...->ij...", B, B)
    trB = np.einsum("ii...->...", B)
    M = 2.0 * B2 + trB * B
    m = tilted(w, gamma0) if multiplier == "tilted" else _vec(w)
    return np.einsum("ij...,j...->i...", M, m)


# ---------------------------------------------------------------------------
# field-level helpers


def _unit(dim: int, i: int) -> list[int]:
    return [int(k == i) for k in range(dim)]


def derivative_tensor(u: HalfSpaceField, order: int) -> np.ndarray:
    """All order-``k`` partial derivatives of a scalar field as shape ``(N,)*k + grid``."""
    N = u.dim
    out = np.empty((N,) * order + u.grid.shape)
    for idx in itertools.product(range(N), repeat=order):
        multi = [0] * N
        for i in idx:
            multi[i] += 1
        out[idx] = diff(u, multi).values()
    return out


def mean_curvature(u: HalfSpaceField, method: str = "trace") -> HalfSpaceField:
    """Mean curvature for the upward normal; ``method`` is ``'trace'`` or ``'divergence'``.

    ``trace``: ``tr(P(grad u) hess u) / omega``; ``divergence``: ``div(grad u / omega)``.
    """
    grad = derivative_tensor(u, 1)
    om = omega(grad)
    if method == "trace":
        hess = derivative_tensor(u, 2)
        H = np.einsum("ij...,ij...->...", projection(grad), hess) / om
    elif method == "divergence":
        # composed first derivatives: fourth-order stencils keep the wall error at second order
        vals = u.values()
        flux = [diff_samples(vals, _unit(u.dim, i), u.spacing, accuracy=4) for i in range(u.dim)]
        flux = np.stack(flux) / omega(np.stack(flux))
        H = sum(diff_samples(flux[i], _unit(u.dim, i), u.spacing, accuracy=4) for i in range(u.dim))
    else:
        raise ValueError("method must be 'trace' or 'divergence'")
    return make_field(u.grid, np.asarray(H), time=u.time, far_field_tol=np.inf)


def flux_identity_residual(u: HalfSpaceField, params: GrooveParams, multiplier: str = "tilted") -> HalfSpaceField:
    """``omega P(grad u) grad H - (P0 grad L v + A[grad v] grad^3 v - F[grad v])`` on the grid."""
    N = u.dim
    g0 = params.gamma0
    grad = derivative_tensor(u, 1)
    om = omega(grad)
    H = mean_curvature(u, "trace")
    gradH = derivative_tensor(H, 1)
    lhs = om * np.einsum("ij...,j...->i...", projection(grad), gradH)
    gv = grad.copy()
    gv[-1] -= g0
    hess = derivative_tensor(u, 2)
    third = derivative_tensor(u, 3)
    P0 = base_projection(N, g0)
    # grad L v with L = sum_ij P0_ij D_ij
    gradLv = np.einsum("ij,ijk...->k...", P0, third)
    rhs = np.einsum("lk,k...->l...", P0, gradLv)
    rhs = rhs + contract_A(gv, third, g0) - term_F(gv, hess, g0, multiplier)
    res = lhs - rhs
    return make_field(u.grid, res, time=u.time, rank=1, far_field_tol=np.inf)
