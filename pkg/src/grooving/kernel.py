"""Anisotropic biharmonic heat kernel and the reflected semigroups.

The kernel ``b(x, t)`` has symbol ``exp(-t (P xi . xi)^2)`` with
``P = diag(1, ..., 1, 1/(1 + gamma0^2))``.  It is tabulated once at unit time
and evaluated at other times through the exact scaling
``b(x, t) = t^(-N/4) b(t^(-1/4) x, 1)``.

Two evaluation routes for the semigroups are provided:

* ``apply_neumann`` / ``apply_dirichlet`` / ``apply_vector`` sample the table
  at grid offsets and sum the convolution with the reflected data directly;
* :class:`SpectralSemigroup` multiplies by the symbol on the mirrored,
  periodic grid.  It is used inside the time integrals where thousands of
  applications are needed.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator
from scipy.signal import convolve, fftconvolve

from .field import (
    Background,
    HalfSpaceField,
    diff_samples,
    read_header,
)

SYMBOL_FLOOR = 1e-16
EDGE_RATIO = 1e-14
BASE_RADIUS = 48.0


def normal_weight(gamma0: float) -> float:
    return 1.0 / (1.0 + gamma0**2)


def quadratic_symbol(xis: list[np.ndarray], gamma0: float) -> np.ndarray:
    """``P xi . xi`` for wavenumber arrays (normal axis last)."""
    q = normal_weight(gamma0) * xis[-1] ** 2
    for x in xis[:-1]:
        q = q + x**2
    return q


@dataclasses.dataclass(frozen=True, eq=False)
class KernelTable:
    dim: int
    gamma0: float
    spacing: float
    radii: tuple[float, ...]
    unit_profile: np.ndarray
    derivatives: dict = dataclasses.field(default_factory=dict)
    time: float = 1.0

    def axes(self) -> list[np.ndarray]:
        return [(np.arange(n) - (n - 1) // 2) * self.spacing for n in self.unit_profile.shape]

    @property
    def mass(self) -> float:
        return float(self.unit_profile.sum() * self.spacing**self.dim)

    def profile(self, deriv: int = 0) -> np.ndarray:
        if deriv == 0:
            return self.unit_profile
        return self.derivatives[deriv]

    def _interpolant(self, deriv: int):
        cache = self.__dict__.setdefault("_interp", {})
        if deriv not in cache:
            ax = self.axes()
            if self.dim == 1:
                cache[deriv] = CubicSpline(ax[0], self.profile(deriv))
            else:
                cache[deriv] = RegularGridInterpolator(
                    ax, self.profile(deriv), method="cubic", bounds_error=False, fill_value=0.0
                )
        return cache[deriv]


def build_kernel(
    dim: int,
    gamma0: float,
    spacing: float | None = None,
    radius: float | None = None,
    *,
    time: float = 1.0,
    derivatives: tuple[int, ...] = (),
) -> KernelTable:
    """Tabulate ``b(., time)`` by an inverse DFT of the symbol.

    ``derivatives`` (``dim == 1`` only) adds tables of ``d^k b / dx^k``.
    The lattice is symmetric with an odd number of points per axis.
    """
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    if spacing is None:
        spacing = 0.02 if dim == 1 else 0.1
    if radius is None:
        radius = BASE_RADIUS
    scale = time**0.25
    radii = [radius * scale] * dim
    radii[-1] *= np.sqrt(1.0 + gamma0**2)
    # spectral resolution: the symbol must be negligible at the Nyquist wavenumber
    xi_max = np.pi / spacing
    worst = min(time * (xi_max**2) ** 2 * (1.0 if i < dim - 1 else normal_weight(gamma0) ** 2) for i in range(dim))
    if np.exp(-worst) > SYMBOL_FLOOR:
        need = np.pi * (time / np.log(1.0 / SYMBOL_FLOOR)) ** 0.25 * np.sqrt(normal_weight(gamma0))
        raise ValueError(f"lattice spacing {spacing} under-resolves the symbol; need spacing <= {need:.4g}")
    sizes = [2 * int(np.ceil(r / spacing)) + 1 for r in radii]
    xis = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(n, d=spacing) for n in sizes], indexing="ij")
    sym = np.exp(-time * quadratic_symbol(list(xis), gamma0) ** 2)

    def invert(s):
        out = np.fft.ifftn(s).real / spacing**dim
        return np.fft.fftshift(out)

    profile = invert(sym)
    extra = {}
    if derivatives:
        if dim != 1:
            raise ValueError("derivative tables are only built for dim == 1")
        xi = xis[0]
        for k in derivatives:
            extra[k] = np.fft.fftshift(np.fft.ifft((1j * xi) ** k * sym).real) / spacing
    return KernelTable(dim, float(gamma0), float(spacing), tuple(float(r) for r in radii), profile, extra, float(time))


def kernel_at(tbl: KernelTable, x, t: float, deriv: int = 0) -> np.ndarray:
    """``D^deriv b(x, t)`` by scaling and cubic interpolation of the table.

    ``x`` is a scalar/array for N=1 or an array with trailing axis 2 for N=2.
    Points beyond the lattice radius evaluate to zero.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    s = (t / tbl.time) ** 0.25
    x = np.asarray(x, dtype=float)
    y = x / s
    pref = s ** (-(tbl.dim + deriv))
    f = tbl._interpolant(deriv)
    if tbl.dim == 1:
        out = np.where(np.abs(y) <= tbl.radii[0], f(np.clip(y, -tbl.radii[0], tbl.radii[0])), 0.0)
    else:
        if deriv:
            raise ValueError("derivatives are only tabulated for dim == 1")
        out = f(y)
    return pref * out


def write_kernel(path: str | Path, tbl: KernelTable) -> None:
    header = {
        "kind": "kernel",
        "dim": str(tbl.dim),
        "rank": "0",
        "shape": ",".join(str(s) for s in tbl.unit_profile.shape),
        "spacing": repr(tbl.spacing),
        "extent_tangential": repr(float(tbl.radii[0]) if tbl.dim == 2 else 0.0),
        "extent_normal": repr(float(tbl.radii[-1])),
        "background_c0": "0.0",
        "background_slope": ",".join(["0.0"] * tbl.dim),
        "time": repr(tbl.time),
        "gamma0": repr(tbl.gamma0),
    }
    blob = "".join(f"{k}={v}\n" for k, v in header.items()) + "\n"
    with open(path, "wb") as fh:
        fh.write(blob.encode("ascii"))
        fh.write(np.ascontiguousarray(tbl.unit_profile, dtype="<f8").tobytes())


def read_kernel(path: str | Path) -> KernelTable:
    header, payload = read_header(Path(path).read_bytes())
    if header.get("kind") != "kernel":
        raise ValueError("not a kernel snapshot")
    dim = int(header["dim"])
    shape = tuple(int(s) for s in header["shape"].split(","))
    prof = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(float)
    radii = (float(header["extent_normal"]),) if dim == 1 else (
        float(header["extent_tangential"]),
        float(header["extent_normal"]),
    )
    return KernelTable(dim, float(header["gamma0"]), float(header["spacing"]), radii, prof, {}, float(header["time"]))


# ---------------------------------------------------------------------------
# direct-summation semigroups


def _operator_L(a: np.ndarray, spacing, gamma0: float) -> np.ndarray:
    dim = len(spacing)
    out = normal_weight(gamma0) * diff_samples(a, (0,) * (dim - 1) + (2,), spacing)
    for i in range(dim - 1):
        order = tuple(2 if j == i else 0 for j in range(dim))
        out = out + diff_samples(a, order, spacing)
    return out


def _mirror(samples: np.ndarray, parity: str) -> np.ndarray:
    s = samples.copy()
    if parity == "odd":
        s[..., 0] = 0.0
        return np.concatenate([-s[..., :0:-1], s], axis=-1)
    return np.concatenate([s[..., :0:-1], s], axis=-1)


def _check_trace(g: HalfSpaceField, tol: float) -> None:
    trace = np.max(np.abs(g.samples[..., 0]))
    scale = max(np.max(np.abs(g.samples)), 1e-300)
    if trace > tol * scale:
        raise ValueError(f"Dirichlet data must vanish on x_N = 0 (trace {trace:.3g})")


def _apply_reflected(tbl: KernelTable, g: HalfSpaceField, t: float, parity: str) -> HalfSpaceField:
    if g.rank != 0:
        raise ValueError("scalar field required")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return g.with_samples(g.samples.copy())
    h = g.spacing
    n = g.samples.shape[-1]
    ext = _mirror(g.samples, parity)
    if t**0.25 < 2.0 * min(h):
        # kernel narrower than the grid: one explicit step of the generator
        out = ext - t * _operator_L(_operator_L(ext, h, tbl.gamma0), h, tbl.gamma0)
        out = out[..., n - 1 :]
        if parity == "odd":
            out[..., 0] = 0.0
        return g.with_samples(out, time=g.time + t, far_field_flag=False)
    scale = t**0.25
    if g.dim == 1:
        m = min(int(np.ceil(tbl.radii[0] * scale / h[0])), 2 * n)
        offs = np.arange(-m, m + 1) * h[0]
        k = kernel_at(tbl, offs, t) * h[0]
        full = convolve(ext, k, mode="full", method="direct")
        out = full[m + n - 1 : m + 2 * n - 1]
    else:
        nt = g.samples.shape[0]
        mt = min(int(np.ceil(tbl.radii[0] * scale / h[0])), 2 * nt)
        mn = min(int(np.ceil(tbl.radii[1] * scale / h[1])), 2 * n)
        padded = np.pad(ext, ((mt, mt), (0, 0)), mode="edge")
        ot = np.arange(-mt, mt + 1) * h[0]
        on = np.arange(-mn, mn + 1) * h[1]
        pts = np.stack(np.meshgrid(ot, on, indexing="ij"), axis=-1)
        k = kernel_at(tbl, pts, t) * h[0] * h[1]
        full = fftconvolve(padded, k, mode="full")
        out = full[2 * mt : 2 * mt + nt, mn + n - 1 : mn + 2 * n - 1]
    out = np.array(out)
    if parity == "odd":
        out[..., 0] = 0.0
    return g.with_samples(out, time=g.time + t, far_field_flag=False)


def apply_neumann(tbl: KernelTable, g: HalfSpaceField, t: float) -> HalfSpaceField:
    """``exp(-t L_n^2) g``: convolution of ``b(., t)`` with the even extension."""
    return _apply_reflected(tbl, g, t, "even")


def apply_dirichlet(tbl: KernelTable, g: HalfSpaceField, t: float, trace_tol: float = 1e-8) -> HalfSpaceField:
    """``exp(-t L_d^2) g``: convolution with the odd extension.

    ``g`` must vanish on the boundary (relative ``trace_tol``).
    """
    _check_trace(g, trace_tol)
    return _apply_reflected(tbl, g, t, "odd")


def apply_vector(tbl: KernelTable, f: HalfSpaceField, t: float, trace_tol: float = 1e-8) -> HalfSpaceField:
    """Neumann semigroup on tangential components, Dirichlet on the normal one."""
    if f.rank != 1:
        raise ValueError("rank-1 field required")
    comps = []
    for k in range(f.dim):
        c = f.component(k)
        if k == f.dim - 1:
            comps.append(apply_dirichlet(tbl, c, t, trace_tol).samples)
        else:
            comps.append(apply_neumann(tbl, c, t).samples)
    return f.with_samples(np.stack(comps), time=f.time + t, far_field_flag=False)


# ---------------------------------------------------------------------------
# spectral route


class SpectralSemigroup:
    """Reflected semigroups by symbol multiplication on the mirrored grid.

    The normal axis is mirrored to a periodic line of length ``2 X_N``; the
    tangential axis (N=2) is padded on both sides by constant extrapolation.
    Spatial derivatives are applied exactly through ``(i xi)^alpha``.
    """

    def __init__(self, grid, gamma0: float, tangential_pad: int | None = None):
        self.grid = grid
        self.gamma0 = float(gamma0)
        self.dim = grid.dim
        h = grid.spacing
        n = grid.n_normal
        self.n_mirror = 2 * (n - 1)
        xi_n = 2 * np.pi * np.fft.rfftfreq(self.n_mirror, d=h[-1])
        if self.dim == 1:
            self.pad = 0
            self.xis = [xi_n]
        else:
            self.pad = grid.n_tangential // 2 if tangential_pad is None else int(tangential_pad)
            nt = grid.n_tangential + 2 * self.pad
            xi_t = 2 * np.pi * np.fft.fftfreq(nt, d=h[0])
            self.xis = list(np.meshgrid(xi_t, xi_n, indexing="ij"))
        self.q = quadratic_symbol(self.xis, self.gamma0)
        self.Q = self.q**2
        self.spec_shape = self.q.shape

    def transform(self, samples: np.ndarray, parity: str = "even") -> np.ndarray:
        s = np.asarray(samples, dtype=float)
        if parity == "odd":
            s = s.copy()
            s[..., -1] = 0.0
        # periodic line [0, X_N] followed by the reflected interior (X_N, 2 X_N)
        ext = _mirror(s, parity)[..., 1:]
        ext = np.roll(ext, -(self.grid.n_normal - 2), axis=-1)
        if self.dim == 2 and self.pad:
            widths = [(0, 0)] * (ext.ndim - 2) + [(self.pad, self.pad), (0, 0)]
            ext = np.pad(ext, widths, mode="edge")
        axes = tuple(range(ext.ndim - self.dim, ext.ndim))
        return np.fft.rfftn(ext, axes=axes)

    def inverse(self, spec: np.ndarray) -> np.ndarray:
        axes = tuple(range(spec.ndim - self.dim, spec.ndim))
        shape = (self.n_mirror,) if self.dim == 1 else (self.grid.n_tangential + 2 * self.pad, self.n_mirror)
        out = np.fft.irfftn(spec, s=shape, axes=axes)
        out = out[..., : self.grid.n_normal]
        if self.dim == 2 and self.pad:
            out = out[..., self.pad : self.pad + self.grid.n_tangential, :]
        return out

    def derivative(self, deriv) -> np.ndarray | float:
        mult = 1.0
        for x, k in zip(self.xis, deriv):
            if k:
                mult = mult * (1j * x) ** k
        return mult

    def multiplier(self, tau: float, deriv=None, with_L: int = 0) -> np.ndarray:
        m = np.exp(-tau * self.Q)
        if with_L:
            m = m * (-self.q) ** with_L
        if deriv is not None and any(deriv):
            m = m * self.derivative(deriv)
        return m

    def apply(self, samples: np.ndarray, tau: float, parity: str = "even", deriv=None) -> np.ndarray:
        spec = self.transform(samples, parity)
        return self.inverse(spec * self.multiplier(tau, deriv))

    def boundary_spike(self, density: np.ndarray) -> np.ndarray:
        """Sample array carrying the measure ``2 * density`` on ``x_N = 0``.

        Convolving it with ``b`` gives ``int b_n(x, (y', 0), t) density(y') dy'``.
        """
        h = self.grid.spacing
        arr = np.zeros(np.shape(density) + (self.grid.n_normal,))
        arr[..., 0] = 2.0 * np.asarray(density) / h[-1]
        return arr


def field_like(g: HalfSpaceField, samples: np.ndarray, **kw) -> HalfSpaceField:
    rank = 0 if samples.ndim == g.dim else 1
    return HalfSpaceField(g.grid, samples, Background.zero(g.dim, rank), kw.get("time", g.time), rank)
