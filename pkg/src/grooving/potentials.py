"""Duhamel volume potentials and the boundary layer potential.

All time integrals ``int_0^t K(t - s) f(s) ds`` use composite 4-point
Gauss-Legendre panels.  Panels are geometric toward ``s = t`` (lag
``tau = t - s``) and optionally toward ``s = 0``; the panel touching ``s = t``
is mapped by ``tau = sigma^4`` so that a ``tau^(-3/4)`` endpoint singularity
becomes bounded.

The spectral semigroup is linear in its data, so sums over quadrature nodes are
accumulated on symbol multipliers and each snapshot is transformed once.
"""

from __future__ import annotations

import dataclasses
from math import comb

import numpy as np

from .field import GridSpec, diff_samples
from .kernel import KernelTable, SpectralSemigroup, kernel_at, normal_weight

GAUSS_X, GAUSS_W = np.polynomial.legendre.leggauss(4)


def _gauss(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * GAUSS_X, half * GAUSS_W


def _geometric_breaks(lo: float, hi: float, per_decade: int) -> np.ndarray:
    """Breakpoints on the absolute lattice ``10^(j/per_decade)`` strictly inside (lo, hi)."""
    if hi <= lo:
        return np.empty(0)
    j0 = int(np.floor(per_decade * np.log10(lo))) + 1
    j1 = int(np.ceil(per_decade * np.log10(hi))) - 1
    pts = 10.0 ** (np.arange(j0, j1 + 1) / per_decade)
    # drop points that would create slivers next to the ends
    ratio = 10.0 ** (0.25 / per_decade)
    return pts[(pts > lo * ratio) & (pts < hi / ratio)]


@dataclasses.dataclass(frozen=True, eq=False)
class DuhamelGrid:
    """Quadrature nodes ``s`` and weights for ``int_0^t ... ds``.

    ``panels`` lists ``(a, b, kind)``: ``kind='s'`` is a panel ``[a, b]`` in
    ``s``, ``kind='lag'`` a panel in ``tau = t - s``, and ``kind='sigma'``
    covers lags ``tau = sigma^4`` with ``sigma`` in ``[a, b]``.
    """

    t: float
    panels: tuple
    s: np.ndarray = dataclasses.field(init=False)
    tau: np.ndarray = dataclasses.field(init=False)
    weights: np.ndarray = dataclasses.field(init=False)

    def __post_init__(self):
        # lags are kept separately: t - s loses the sigma panel to rounding
        lags, wts = [], []
        for a, b, kind in self.panels:
            x, w = _gauss(a, b)
            if kind == "sigma":
                lags.append(x**4)
                wts.append(4.0 * x**3 * w)
            elif kind == "lag":
                lags.append(x)
                wts.append(w)
            else:
                lags.append(self.t - x)
                wts.append(w)
        tau = np.concatenate(lags)
        order = np.argsort(-tau, kind="stable")
        object.__setattr__(self, "tau", tau[order])
        object.__setattr__(self, "s", self.t - tau[order])
        object.__setattr__(self, "weights", np.concatenate(wts)[order])

    @classmethod
    def build(
        cls,
        t: float,
        panels_per_decade: int = 32,
        lag_floor: float | None = None,
        start_floor: float | None = None,
        lag_breaks: tuple[float, ...] = (),
    ) -> "DuhamelGrid":
        """Panels for ``[0, t]``.

        The lag range ``(0, t/2]`` is cut at absolute geometric breakpoints
        down to ``lag_floor`` (default ``1e-12 t``); the last lag panel
        ``[0, lag_floor]`` uses ``tau = sigma^4``.  The start range
        ``[0, t/2]`` is cut geometrically toward ``s = 0`` down to
        ``start_floor`` when given, otherwise it is a single panel.
        """
        if t <= 0:
            raise ValueError("t must be positive")
        half = 0.5 * t
        floor = 1e-12 * t if lag_floor is None else min(lag_floor, half)
        lag = np.concatenate([[floor], _geometric_breaks(floor, half, panels_per_decade), [half]])
        lag = np.unique(np.concatenate([lag, [b for b in lag_breaks if floor < b < half]]))
        panels = [(0.0, floor**0.25, "sigma")]
        panels += [(a, b, "lag") for a, b in zip(lag[:-1], lag[1:])]
        if start_floor is not None and start_floor < half:
            starts = np.concatenate([[0.0, start_floor], _geometric_breaks(start_floor, half, panels_per_decade), [half]])
        else:
            starts = np.array([0.0, half])
        panels += [(a, b, "s") for a, b in zip(starts[:-1], starts[1:])]
        return cls(float(t), tuple(panels))

    def refined(self, factor: int = 2) -> "DuhamelGrid":
        """Split every panel into ``factor`` equal pieces."""
        out = []
        for a, b, kind in self.panels:
            e = np.linspace(a, b, factor + 1)
            out += [(c, d, kind) for c, d in zip(e[:-1], e[1:])]
        return DuhamelGrid(self.t, tuple(out))


class TimeSlabFunction:
    """Snapshots at increasing times with piecewise-cubic interpolation.

    ``variable='t'`` interpolates in ``t``; ``variable='log'`` in ``log t``
    (suited to geometric node ladders).  Before the first node the first
    snapshot is held; evaluation past the last node is rejected.
    """

    def __init__(self, grid: GridSpec | None, times, data, rank: int = 0, variable: str = "t"):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.data = np.asarray(data, dtype=float)
        self.rank = rank
        self.variable = variable
        if self.times.ndim != 1 or len(self.times) != len(self.data):
            raise ValueError("times and data must have matching leading length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if variable == "log" and self.times[0] <= 0:
            raise ValueError("log interpolation needs positive times")
        self._spectra: dict = {}

    def _coord(self, t):
        return np.log(t) if self.variable == "log" else np.asarray(t, dtype=float)

    def _lagrange(self, s, derivative: bool) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        K = len(self.times)
        tol = 1e-12 * max(abs(self.times[-1]), 1.0)
        if np.any(s > self.times[-1] + tol):
            raise ValueError("evaluation time beyond the last snapshot")
        W = np.zeros((len(s), K))
        if K == 1:
            if not derivative:
                W[:, 0] = 1.0
            return W
        first = self.times[0]
        held = s < first * (1 - 1e-12) if first > 0 else s < first - tol
        if not derivative:
            held = held | (s <= first)
            W[held, 0] = 1.0
        rows = np.nonzero(~held)[0]
        if not len(rows):
            return W
        sv = np.clip(s[rows], first, self.times[-1])
        xs = self._coord(self.times)
        xv = self._coord(sv)
        m = min(4, K)
        idx = np.searchsorted(self.times, sv, side="right") - 1
        start = np.clip(idx - (m // 2 - 1), 0, K - m)
        pts = xs[start[:, None] + np.arange(m)]
        for j in range(m):
            others = [i for i in range(m) if i != j]
            denom = np.prod([pts[:, j] - pts[:, i] for i in others], axis=0)
            if derivative:
                # d/dx prod_{i != j} (x - x_i)
                num = np.zeros(len(rows))
                for skip in others:
                    num += np.prod([xv - pts[:, i] for i in others if i != skip], axis=0)
                if self.variable == "log":
                    num = num / sv
            else:
                num = np.prod([xv - pts[:, i] for i in others], axis=0)
            W[rows, start + j] = num / denom
        return W

    def weights(self, s) -> np.ndarray:
        """Interpolation matrix of shape ``(len(s), n_times)``."""
        return self._lagrange(s, False)

    def at(self, s) -> np.ndarray:
        return np.tensordot(self.weights(s), self.data, axes=(1, 0))

    def derivative(self, s) -> np.ndarray:
        """Exact time derivative of the piecewise-cubic interpolant (zero where held)."""
        return np.tensordot(self._lagrange(s, True), self.data, axes=(1, 0))

    def spectrum(self, sg: SpectralSemigroup, parity: str) -> np.ndarray:
        key = (id(sg), parity)
        if key not in self._spectra:
            self._spectra[key] = sg.transform(self.data, parity)
        return self._spectra[key]


def duhamel_multipliers(sg: SpectralSemigroup, W: np.ndarray, weights, tau, chunk: int = 256) -> np.ndarray:
    """``M_k = sum_n weights_n W_nk exp(-tau_n Q)``, shape ``(n_snapshots,) + spectrum shape``.

    Depends only on the quadrature and the snapshot times, so callers that
    iterate on changing data can keep it.
    """
    flatQ = sg.Q.ravel()
    coef = np.asarray(weights)[:, None] * W
    M = np.zeros((W.shape[1], flatQ.size))
    for i in range(0, len(tau), chunk):
        M += coef[i : i + chunk].T @ np.exp(-np.outer(tau[i : i + chunk], flatQ))
    return M.reshape((W.shape[1],) + sg.spec_shape)


def apply_multipliers(M: np.ndarray, spectra: np.ndarray) -> np.ndarray:
    """``sum_k M_k * spectra_k`` (snapshot index first in both)."""
    return np.einsum("k...,k...->...", M, spectra)


def _accumulate(sg: SpectralSemigroup, spectra: np.ndarray, W: np.ndarray, weights, tau, extra=None):
    out = apply_multipliers(duhamel_multipliers(sg, W, weights, tau), spectra)
    return out if extra is None else out * extra


def duhamel_spectrum(f: TimeSlabFunction, dgrid: DuhamelGrid, sg: SpectralSemigroup, parity: str) -> np.ndarray:
    """Fourier-side ``int_0^t exp(-(t-s) L^2) f(s) ds`` for a scalar slab."""
    spectra = f.spectrum(sg, parity)
    W = f.weights(dgrid.s)
    return _accumulate(sg, spectra, W, dgrid.weights, dgrid.tau)


def volume_potential(
    f: TimeSlabFunction, dgrid: DuhamelGrid, sg: SpectralSemigroup, parity: str = "even", deriv=None
) -> np.ndarray:
    if f.rank != 0:
        raise ValueError("scalar slab required")
    spec = duhamel_spectrum(f, dgrid, sg, parity)
    if deriv is not None and any(deriv):
        spec = spec * sg.derivative(deriv)
    return sg.inverse(spec)


def volume_potential_n(f: TimeSlabFunction, dgrid: DuhamelGrid, sg: SpectralSemigroup, deriv=None) -> np.ndarray:
    """``(V_n f)(t) = int_0^t exp(-(t-s) L_n^2) f(s) ds``."""
    return volume_potential(f, dgrid, sg, "even", deriv)


def volume_potential_d(f: TimeSlabFunction, dgrid: DuhamelGrid, sg: SpectralSemigroup, deriv=None) -> np.ndarray:
    """Same with the Dirichlet (odd-reflection) semigroup."""
    return volume_potential(f, dgrid, sg, "odd", deriv)


def _component_slab(G: TimeSlabFunction, k: int) -> TimeSlabFunction:
    cache = G.__dict__.setdefault("_components", {})
    if k not in cache:
        cache[k] = TimeSlabFunction(G.grid, G.times, G.data[:, k], 0, G.variable)
    return cache[k]


def volume_potential_v(G: TimeSlabFunction, dgrid: DuhamelGrid, sg: SpectralSemigroup) -> np.ndarray:
    """Vector potential: Neumann on tangential components, Dirichlet on the normal one."""
    if G.rank != 1:
        raise ValueError("rank-1 slab required")
    N = sg.dim
    return np.stack(
        [volume_potential(_component_slab(G, k), dgrid, sg, "odd" if k == N - 1 else "even") for k in range(N)]
    )


def divergence_potential(
    G: TimeSlabFunction, dgrid: DuhamelGrid, sg: SpectralSemigroup, outer=None, method: str = "spectral"
) -> np.ndarray:
    """``(W G)(t) = div int_0^t exp(-(t-s) L_v^2) G(s) ds``.

    ``outer`` applies one more derivative multi-index to the result (used for
    the gradient of the divergence).  ``method='fd'`` takes the divergence of
    the vector potential by finite differences instead.
    """
    N = sg.dim
    if method == "fd":
        V = volume_potential_v(G, dgrid, sg)
        out = sum(diff_samples(V[k], tuple(int(i == k) for i in range(N)), sg.grid.spacing) for k in range(N))
        if outer is not None and any(outer):
            out = diff_samples(out, outer, sg.grid.spacing)
        return out
    spec = 0
    for k in range(N):
        comp = _component_slab(G, k)
        sk = duhamel_spectrum(comp, dgrid, sg, "odd" if k == N - 1 else "even")
        d = [0] * N
        d[k] += 1
        if outer is not None:
            d = [a + b for a, b in zip(d, outer)]
        spec = spec + sk * sg.derivative(d)
    return sg.inverse(spec)


# ---------------------------------------------------------------------------
# layer potential


class BoundaryLayer:
    """``S h(t) = int_0^t E(t-s) h(s) ds`` with ``E(t)h = int L_x b_n(x, y, t) h(y) dsigma``.

    The lag range is split at ``tau_c`` where the kernel is still resolved by
    the grid.  Above it the boundary measure ``2 h delta`` is propagated
    spectrally; below it the kernel is narrower than a few cells and the
    normal-direction profile of ``b`` is evaluated pointwise from the table
    (tangential spreading over such short lags is neglected for N = 2).
    """

    def __init__(
        self, sg: SpectralSemigroup, table: KernelTable, panels_per_decade: int = 32, resolve: float = 4.0, cache_far: bool = False
    ):
        if table.dim != 1 or abs(table.gamma0 - sg.gamma0) > 0:
            raise ValueError("a 1-D kernel table with matching gamma0 is required")
        self.sg = sg
        self.table = table
        self.ppd = panels_per_decade
        hN = sg.grid.spacing[-1]
        self.tau_c = (resolve * hN) ** 4 / normal_weight(sg.gamma0) ** 2
        self.lag_floor = (hN / 64.0) ** 4
        self._near_cache: dict = {}
        self._far_cache: dict = {}
        self.cache_far = cache_far

    def grid_for(self, t: float) -> DuhamelGrid:
        floor = 10.0 ** (np.floor(self.ppd * np.log10(self.lag_floor)) / self.ppd)
        return DuhamelGrid.build(t, self.ppd, lag_floor=floor, lag_breaks=(self.tau_c,))

    def _near_profiles(self, taus: np.ndarray, normal_order: int) -> np.ndarray:
        key = (normal_order, taus.tobytes())
        if key not in self._near_cache:
            xN = self.sg.grid.axes()[-1]
            rows = np.empty((len(taus), len(xN)))
            for i, tau in enumerate(taus):
                rows[i] = kernel_at(self.table, xN, tau, normal_order)
            self._near_cache[key] = rows
        return self._near_cache[key]

    def evaluate(self, h: TimeSlabFunction, t: float, deriv=None, with_L: int = 1, dgrid: DuhamelGrid | None = None):
        """Field ``D^deriv L^(with_L - 1) S h`` at time ``t`` (``with_L=1`` gives ``D^deriv S h``).

        ``h.data`` has shape ``(K,)`` for N=1 or ``(K, n_tangential)`` for N=2.
        """
        return self.evaluate_many(h, t, [deriv], with_L, dgrid)[0]

    def evaluate_many(self, h: TimeSlabFunction, t: float, derivs, with_L: int = 1, dgrid: DuhamelGrid | None = None):
        """Several derivatives sharing one time quadrature."""
        sg = self.sg
        N = sg.dim
        derivs = [tuple(d) if d is not None else (0,) * N for d in derivs]
        dg = self.grid_for(t) if dgrid is None else dgrid
        tau = dg.tau
        far = tau >= self.tau_c * (1 - 1e-12)
        near = ~far
        W = h.weights(dg.s)
        outs = [0.0] * len(derivs)
        if np.any(far):
            spectra = h.__dict__.setdefault("_spike_spec", {})
            if id(sg) not in spectra:
                spectra[id(sg)] = sg.transform(sg.boundary_spike(h.data), "even")
            key = (dg.t, len(tau), h.variable, h.times.tobytes())
            M = self._far_cache.get(key)
            if M is None:
                M = duhamel_multipliers(sg, W[far], dg.weights[far], tau[far])
                if self.cache_far:
                    self._far_cache[key] = M
            base = apply_multipliers(M, spectra[id(sg)]) * (-sg.q) ** with_L
            for n, d in enumerate(derivs):
                outs[n] = sg.inverse(base * sg.derivative(d) if any(d) else base)
        if np.any(near):
            for n, d in enumerate(derivs):
                outs[n] = outs[n] + self._near(h, W[near], dg.weights[near], tau[near], d, with_L)
        return outs

    def _near(self, h, W, weights, tau, deriv, with_L):
        """Pointwise short-lag part: ``(L_N)^with_L`` acting on ``2 b_1(x_N) h(x')``."""
        sg = self.sg
        N = sg.dim
        a = normal_weight(sg.gamma0)
        dn = deriv[-1]
        hs = W @ h.data.reshape(len(h.times), -1)  # (nodes, n_tangential or 1)
        total = 0.0
        # L^with_L = sum_j C(with_L, j) (a D_N^2)^j (D'^2)^(with_L - j)
        for j in range(with_L + 1):
            tang_order = 2 * (with_L - j)
            if N == 1 and tang_order:
                continue
            coef = comb(with_L, j) * a**j
            prof = self._near_profiles(tau, 2 * j + dn)  # (nodes, n_normal)
            if N == 1:
                total = total + coef * 2.0 * (weights * hs[:, 0]) @ prof
            else:
                dt = tang_order + deriv[0]
                hd = _tangential_derivative(hs, dt, sg) if dt else hs
                total = total + coef * 2.0 * np.einsum("n,nt,nx->tx", weights, hd, prof)
        return total


def _tangential_derivative(a: np.ndarray, order: int, sg: SpectralSemigroup) -> np.ndarray:
    """Spectral derivative along the tangential axis with edge padding (rows = nodes)."""
    p = sg.pad
    padded = np.pad(a, ((0, 0), (p, p)), mode="edge")
    xi = 2 * np.pi * np.fft.fftfreq(padded.shape[1], d=sg.grid.spacing[0])
    out = np.real(np.fft.ifft(np.fft.fft(padded, axis=1) * (1j * xi) ** order, axis=1))
    return out[:, p : p + a.shape[1]]


def layer_potential_reduction(h: TimeSlabFunction, dgrid: DuhamelGrid, sg: SpectralSemigroup, deriv=None) -> np.ndarray:
    """``S h = D_N L int_0^t exp(-(t-s) L_d^2) hbar(s) ds`` with ``hbar = h`` extended constantly in ``x_N``.

    The normal axis is doubled so that the reflection of the non-decaying
    ``hbar`` at the far end stays out of the returned window.  ``D_N L`` is
    applied by one-sided finite differences: the odd extension of ``hbar``
    jumps at ``x_N = 0``, so ``S h`` has a corner there that a global Fourier
    derivative would smear to first order in ``h``.  Each mixed derivative is
    a single stencil (composing one-sided stencils loses an order at the edge).
    """
    grid = sg.grid
    big = dataclasses.replace(grid, n_normal=2 * grid.n_normal - 1, extent_normal=2 * grid.extent_normal)
    sg2 = SpectralSemigroup(big, sg.gamma0, sg.pad if grid.dim == 2 else None)
    shape = (len(h.times),) + big.shape
    hbar = np.broadcast_to(h.data.reshape((len(h.times),) + big.shape[:-1] + (1,)), shape)
    slab = TimeSlabFunction(big, h.times, np.array(hbar), 0, h.variable)
    N = grid.dim
    a = normal_weight(sg.gamma0)
    deriv = tuple(deriv) if deriv is not None else (0,) * N
    Vd = sg2.inverse(duhamel_spectrum(slab, dgrid, sg2, "odd"))
    Vd = Vd[..., : grid.n_normal + 16]
    sp = grid.spacing
    tang = deriv[:-1]
    out = a * diff_samples(Vd, tang + (3 + deriv[-1],), sp)
    if N == 2:
        out = out + diff_samples(Vd, (2 + deriv[0], 1 + deriv[-1]), sp)
    return out[..., : grid.n_normal]


def boundary_operator_direct(table: KernelTable, h: float, x: np.ndarray, tau: float, deriv: int = 0) -> np.ndarray:
    """``D_N^deriv E(tau) h`` for a constant density, N = 1: ``2 h a D^(2+deriv) b(x, tau)``."""
    return 2.0 * h * normal_weight(table.gamma0) * kernel_at(table, x, tau, 2 + deriv)
