"""Sampled functions on a truncated half-space grid.

The normal coordinate is always the last spatial axis and covers ``[0, X_N]``
with a sample on the boundary ``x_N = 0``.  For ``N = 2`` the tangential axis is
symmetric, ``[-X', X']``.  Samples are stored with an affine background removed
so that they decay toward the far field.
"""

from __future__ import annotations

import dataclasses
import io
import warnings
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

FAR_FIELD_TOL = 1e-8


class FarFieldWarning(UserWarning):
    pass


@dataclasses.dataclass(frozen=True)
class GridSpec:
    """Tensor grid on the truncated half-space.

    ``n_normal`` samples cover ``[0, extent_normal]``; for ``dim == 2`` there are
    ``n_tangential`` samples (odd) on ``[-extent_tangential, extent_tangential]``.
    """

    dim: int
    n_normal: int
    extent_normal: float
    n_tangential: int = 0
    extent_tangential: float = 0.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("only dim 1 or 2 is supported")
        if self.n_normal < 3 or self.extent_normal <= 0:
            raise ValueError("normal axis needs >= 3 samples and a positive extent")
        if self.dim == 2:
            if self.n_tangential < 3 or self.n_tangential % 2 == 0:
                raise ValueError("tangential axis needs an odd number (>= 3) of samples")
            if self.extent_tangential <= 0:
                raise ValueError("tangential extent must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        if self.dim == 1:
            return (self.n_normal,)
        return (self.n_tangential, self.n_normal)

    @property
    def spacing(self) -> tuple[float, ...]:
        hn = self.extent_normal / (self.n_normal - 1)
        if self.dim == 1:
            return (hn,)
        return (2.0 * self.extent_tangential / (self.n_tangential - 1), hn)

    def axes(self) -> list[np.ndarray]:
        xn = np.linspace(0.0, self.extent_normal, self.n_normal)
        if self.dim == 1:
            return [xn]
        xt = np.linspace(-self.extent_tangential, self.extent_tangential, self.n_tangential)
        return [xt, xn]

    def coords(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same extents with the spacing divided by ``factor``."""
        nt = (self.n_tangential - 1) * factor + 1 if self.dim == 2 else 0
        return dataclasses.replace(self, n_normal=(self.n_normal - 1) * factor + 1, n_tangential=nt)


@dataclasses.dataclass(frozen=True)
class Background:
    """Affine profile ``c0 + slope . x`` (per component for vector fields)."""

    c0: np.ndarray
    slope: np.ndarray

    @classmethod
    def zero(cls, dim: int, rank: int = 0) -> "Background":
        if rank == 0:
            return cls(np.zeros(()), np.zeros(dim))
        return cls(np.zeros(dim), np.zeros((dim, dim)))

    @classmethod
    def affine(cls, c0, slope) -> "Background":
        return cls(np.asarray(c0, dtype=float), np.asarray(slope, dtype=float))

    def evaluate(self, grid: GridSpec) -> np.ndarray:
        xs = grid.coords()
        if self.c0.ndim == 0:
            out = np.full(grid.shape, float(self.c0))
            for i, x in enumerate(xs):
                out = out + self.slope[i] * x
            return out
        out = np.empty((len(self.c0),) + grid.shape)
        for k in range(len(self.c0)):
            out[k] = self.c0[k]
            for i, x in enumerate(xs):
                out[k] = out[k] + self.slope[k, i] * x
        return out


@dataclasses.dataclass(frozen=True, eq=False)
class HalfSpaceField:
    grid: GridSpec
    samples: np.ndarray
    background: Background
    time: float = 0.0
    rank: int = 0
    far_field_flag: bool = False

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return self.grid.spacing

    def values(self) -> np.ndarray:
        """Samples with the background added back."""
        return self.samples + self.background.evaluate(self.grid)

    def with_samples(self, samples: np.ndarray, **kw) -> "HalfSpaceField":
        return dataclasses.replace(self, samples=np.asarray(samples, dtype=float), **kw)

    def component(self, k: int) -> "HalfSpaceField":
        if self.rank != 1:
            raise ValueError("component() needs a rank-1 field")
        bg = Background(np.asarray(self.background.c0[k]), np.asarray(self.background.slope[k]))
        return HalfSpaceField(self.grid, self.samples[k], bg, self.time, 0)


def _far_field_violation(samples: np.ndarray, grid: GridSpec, tol: float) -> bool:
    arr = samples.reshape((-1,) + grid.shape)
    scale = np.max(np.abs(arr)) if arr.size else 0.0
    if scale == 0.0:
        return False
    shells = [arr[..., -2:]]
    if grid.dim == 2:
        shells += [arr[:, :2, :], arr[:, -2:, :]]
    worst = max(float(np.max(np.abs(s))) for s in shells)
    return worst > tol * scale


def make_field(
    grid: GridSpec,
    values: Callable | np.ndarray,
    background: Background | None = None,
    *,
    time: float = 0.0,
    rank: int = 0,
    far_field_tol: float = FAR_FIELD_TOL,
) -> HalfSpaceField:
    """Sample ``values`` on ``grid`` and subtract ``background``.

    ``values`` may be a callable taking the coordinate arrays (``f(x)`` for N=1,
    ``f(x1, x2)`` for N=2) or a ready array of the grid shape.  Non-finite
    samples are rejected; slow far-field decay only sets ``far_field_flag``.
    """
    if background is None:
        background = Background.zero(grid.dim, rank)
    if callable(values):
        arr = np.asarray(values(*grid.coords()), dtype=float)
    else:
        arr = np.asarray(values, dtype=float)
    expected = grid.shape if rank == 0 else (grid.dim,) + grid.shape
    arr = np.broadcast_to(arr, expected).copy()
    bad = np.argwhere(~np.isfinite(arr))
    if len(bad):
        raise ValueError(f"non-finite value at index {tuple(int(i) for i in bad[0])}")
    samples = arr - background.evaluate(grid)
    flag = _far_field_violation(samples, grid, far_field_tol)
    if flag:
        warnings.warn("samples do not decay to the far-field tolerance", FarFieldWarning, stacklevel=2)
    return HalfSpaceField(grid, samples, background, float(time), rank, flag)


def extend_even(g: HalfSpaceField) -> np.ndarray:
    """Even reflection across ``x_N = 0``; normal axis becomes ``[-X_N, X_N]``."""
    if g.rank != 0:
        raise ValueError("extend_even needs a scalar field")
    s = g.samples
    return np.concatenate([s[..., :0:-1], s], axis=-1)


def extend_odd(g: HalfSpaceField) -> np.ndarray:
    """Odd reflection across ``x_N = 0``; the boundary sample is set to zero."""
    if g.rank != 0:
        raise ValueError("extend_odd needs a scalar field")
    s = g.samples.copy()
    s[..., 0] = 0.0
    return np.concatenate([-s[..., :0:-1], s], axis=-1)


# ---------------------------------------------------------------------------
# finite differences


@lru_cache(maxsize=None)
def fd_weights(order: int, offsets: tuple[int, ...]) -> np.ndarray:
    """Weights ``c`` with ``sum c_j f(x + o_j h) ~ h^order f^(order)(x)``."""
    o = np.asarray(offsets, dtype=float)
    m = len(o)
    vander = np.vander(o, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(vander, rhs)


def _central_offsets(order: int) -> tuple[int, ...]:
    half = (order + 1) // 2
    return tuple(range(-half, half + 1))


def diff_axis(a: np.ndarray, order: int, h: float, axis: int = -1, accuracy: int = 2) -> np.ndarray:
    """Finite difference of ``a`` along ``axis`` (second order unless ``accuracy`` says otherwise).

    Centered stencils in the interior, one-sided ``order + accuracy`` point
    stencils where the centered one does not fit.  Composed derivatives use
    ``accuracy = 4`` so the non-smooth edge error stays below second order.
    """
    if accuracy not in (2, 4):
        raise ValueError("accuracy must be 2 or 4")
    if order == 0:
        return a.copy()
    a = np.moveaxis(np.asarray(a, dtype=float), axis, -1)
    n = a.shape[-1]
    if n < max(2 * order + 1, order + accuracy):
        raise ValueError(f"need at least {2 * order + 1} points for order {order}, got {n}")
    central = _central_offsets(order)
    if accuracy == 4:
        central = tuple(range(central[0] - 1, central[-1] + 2))
    half = central[-1]
    w = fd_weights(order, central)
    out = np.zeros_like(a)
    core = slice(half, n - half)
    for wj, oj in zip(w, central):
        out[..., core] += wj * a[..., half + oj : n - half + oj]
    width = order + accuracy
    for j in range(half):
        left = tuple(range(-j, width - j))
        wl = fd_weights(order, left)
        out[..., j] = sum(c * a[..., j + o] for c, o in zip(wl, left))
        jr = n - 1 - j
        right = tuple(-o for o in left)
        wr = fd_weights(order, right)
        out[..., jr] = sum(c * a[..., jr + o] for c, o in zip(wr, right))
    out /= h**order
    return np.moveaxis(out, -1, axis)


def diff_samples(samples: np.ndarray, multi: Sequence[int], spacing: Sequence[float], accuracy: int = 2) -> np.ndarray:
    """Apply ``D^multi`` to a raw sample array (spatial axes are the trailing ones)."""
    out = samples
    nd = len(spacing)
    for i, k in enumerate(multi):
        if k:
            out = diff_axis(out, k, spacing[i], axis=out.ndim - nd + i, accuracy=accuracy)
    return out


def diff(g: HalfSpaceField, order: Sequence[int]) -> HalfSpaceField:
    """Finite-difference derivative ``D^order`` of a field.

    The affine background is differentiated exactly: a first derivative turns
    the slope into a constant background, higher orders drop it.
    """
    order = tuple(int(k) for k in order)
    if len(order) != g.dim or min(order) < 0:
        raise ValueError("order must be a nonnegative multi-index of length dim")
    total = sum(order)
    if total > 4:
        raise ValueError("total derivative order must be <= 4")
    samples = diff_samples(g.samples, order, g.spacing)
    bg = g.background
    if total == 0:
        new_bg = bg
    elif total == 1:
        i = order.index(1)
        if bg.c0.ndim == 0:
            new_bg = Background(np.asarray(bg.slope[i]), np.zeros(g.dim))
        else:
            new_bg = Background(np.asarray(bg.slope[:, i]), np.zeros((len(bg.c0), g.dim)))
    else:
        new_bg = Background.zero(g.dim, g.rank)
    return dataclasses.replace(g, samples=samples, background=new_bg, far_field_flag=False)


def gradient(g: HalfSpaceField) -> HalfSpaceField:
    """Rank-1 field of first derivatives of a scalar field."""
    comps = [diff(g, tuple(int(i == k) for i in range(g.dim))) for k in range(g.dim)]
    c0 = np.array([float(c.background.c0) for c in comps])
    return HalfSpaceField(
        g.grid,
        np.stack([c.samples for c in comps]),
        Background(c0, np.zeros((g.dim, g.dim))),
        g.time,
        1,
    )


# ---------------------------------------------------------------------------
# snapshot format

_HEADER_KEYS = (
    "dim",
    "rank",
    "shape",
    "spacing",
    "extent_tangential",
    "extent_normal",
    "background_c0",
    "background_slope",
    "time",
)


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in np.ravel(values))


def write_snapshot(path: str | Path | io.BufferedIOBase, g: HalfSpaceField, extra: dict | None = None) -> None:
    header = {
        "dim": str(g.dim),
        "rank": str(g.rank),
        "shape": ",".join(str(s) for s in g.samples.shape),
        "spacing": _fmt(g.spacing),
        "extent_tangential": repr(float(g.grid.extent_tangential)),
        "extent_normal": repr(float(g.grid.extent_normal)),
        "background_c0": _fmt(g.background.c0),
        "background_slope": _fmt(g.background.slope),
        "time": repr(float(g.time)),
    }
    if extra:
        header.update({k: str(v) for k, v in extra.items()})
    blob = "".join(f"{k}={v}\n" for k, v in header.items()) + "\n"
    payload = np.ascontiguousarray(g.samples, dtype="<f8").tobytes(order="C")
    if isinstance(path, (str, Path)):
        with open(path, "wb") as fh:
            fh.write(blob.encode("ascii"))
            fh.write(payload)
    else:
        path.write(blob.encode("ascii"))
        path.write(payload)


def read_header(raw: bytes) -> tuple[dict[str, str], bytes]:
    end = raw.index(b"\n\n")
    lines = raw[:end].decode("ascii").split("\n")
    header = dict(line.split("=", 1) for line in lines)
    return header, raw[end + 2 :]


def read_snapshot(path: str | Path) -> HalfSpaceField:
    raw = Path(path).read_bytes()
    header, payload = read_header(raw)
    dim = int(header["dim"])
    rank = int(header["rank"])
    shape = tuple(int(s) for s in header["shape"].split(","))
    samples = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(float)
    spatial = shape[rank:]
    grid = GridSpec(
        dim=dim,
        n_normal=spatial[-1],
        extent_normal=float(header["extent_normal"]),
        n_tangential=spatial[0] if dim == 2 else 0,
        extent_tangential=float(header["extent_tangential"]),
    )
    c0 = np.array([float(v) for v in header["background_c0"].split(",")])
    slope = np.array([float(v) for v in header["background_slope"].split(",")])
    if rank == 0:
        bg = Background(c0.reshape(()), slope.reshape(dim))
    else:
        bg = Background(c0.reshape(dim), slope.reshape(dim, dim))
    return HalfSpaceField(grid, samples, bg, float(header["time"]), rank)
