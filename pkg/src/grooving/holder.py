"""Sampled estimators of space-time Hölder seminorms and the weighted family norms.

Every estimate is a supremum over a finite sample set (dyadic spatial offsets,
snapshot times) and therefore a lower bound of the continuum quantity.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import math
from pathlib import Path

import numpy as np

from .field import diff_samples
from .potentials import TimeSlabFunction

PARABOLIC_WEIGHT = 4


@dataclasses.dataclass
class HolderEstimate:
    lam: float
    mu_t: float
    window: tuple[float, float]
    spatial: float
    temporal: float
    terms: dict
    value: float
    scaled: bool = True
    weight: int = PARABOLIC_WEIGHT


def _window_idx(f: TimeSlabFunction, window) -> np.ndarray:
    a, b = window
    if not b > a:
        raise ValueError("window must satisfy b > a")
    tol = 1e-12 * max(abs(b), 1.0)
    idx = np.nonzero((f.times >= a - tol) & (f.times <= b + tol))[0]
    if len(idx) == 0:
        raise ValueError("no snapshot inside the window")
    return idx


def _spatial_dims(f: TimeSlabFunction) -> int:
    return f.grid.dim


def _pointwise_norm(a: np.ndarray, ncomp_axes: int) -> np.ndarray:
    if ncomp_axes == 0:
        return np.abs(a)
    axes = tuple(range(ncomp_axes))
    return np.sqrt(np.sum(a * a, axis=axes))


def dyadic_offsets(n: int, max_offset: int | None = None, per_octave: int = 4) -> list[int]:
    """Integer offsets ``round(2^(j / per_octave))`` up to the largest available.

    ``per_octave = 1`` gives the plain dyadic set; larger values insert
    geometric intermediates and always contain the dyadic ones.
    """
    top = n - 1 if max_offset is None else min(max_offset, n - 1)
    if top < 1:
        return []
    jmax = int(np.floor(per_octave * np.log2(top) + 1e-9))
    out = sorted({int(round(2.0 ** (j / per_octave))) for j in range(jmax + 1)} | {top})
    return [k for k in out if 1 <= k <= top]


def spatial_seminorm_samples(
    data: np.ndarray, lam: float, spacing, max_offset: int | None = None, per_octave: int = 4
) -> float:
    """``sup |f(x) - f(y)| / |x - y|^lam`` over dyadic axis offsets.

    ``data`` has any leading component axes followed by ``len(spacing)``
    spatial axes; differences use the Euclidean norm over components.
    """
    nd = len(spacing)
    ncomp = data.ndim - nd
    if lam == 0:
        return float(np.max(_pointwise_norm(data, ncomp)))
    best = 0.0
    for ax in range(nd):
        axis = ncomp + ax
        n = data.shape[axis]
        for k in dyadic_offsets(n, max_offset, per_octave):
            d = np.take(data, range(k, n), axis=axis) - np.take(data, range(0, n - k), axis=axis)
            val = float(np.max(_pointwise_norm(d, ncomp))) / (k * spacing[ax]) ** lam
            best = max(best, val)
    return best


def spatial_seminorm(
    f: TimeSlabFunction, lam: float, window, max_offset: int | None = None, per_octave: int = 4
) -> float:
    """Spatial Hölder seminorm over all snapshots in ``window``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("spatial exponent must lie in [0, 1]")
    idx = _window_idx(f, window)
    return max(spatial_seminorm_samples(f.data[i], lam, f.grid.spacing, max_offset, per_octave) for i in idx)


def temporal_seminorm_samples(times: np.ndarray, data: np.ndarray, mu: float, nd: int) -> float:
    ncomp = data.ndim - 1 - nd
    if mu == 0:
        return float(np.max(_pointwise_norm(np.moveaxis(data, 0, -1), ncomp)))
    best = 0.0
    for i, j in itertools.combinations(range(len(times)), 2):
        d = data[j] - data[i]
        best = max(best, float(np.max(_pointwise_norm(d, ncomp))) / abs(times[j] - times[i]) ** mu)
    return best


def temporal_seminorm(f: TimeSlabFunction, mu: float, window) -> float:
    idx = _window_idx(f, window)
    return temporal_seminorm_samples(f.times[idx], f.data[idx], mu, f.grid.dim)


def _derivative_stack(f: TimeSlabFunction, ell: int, m: int, idx: np.ndarray) -> np.ndarray:
    """``grad^ell d_t^m f`` at snapshots ``idx``; tensor axes placed after the time axis."""
    if m > 1:
        raise ValueError("time derivatives beyond first order are not available")
    if m == 1 and len(f.times) < 2:
        raise ValueError("time derivative needs at least two snapshots")
    base = f.data[idx] if m == 0 else f.derivative(f.times[idx])
    N = f.grid.dim
    if ell == 0:
        return base
    comps = []
    for combo in itertools.product(range(N), repeat=ell):
        multi = [0] * N
        for c in combo:
            multi[c] += 1
        comps.append(diff_samples(base, multi, f.grid.spacing))
    # (T, N^ell, *comp, *grid)
    return np.stack(comps, axis=1)


def _largest_int_below(lam: float) -> int:
    return int(math.ceil(lam)) - 1


def scaled_norm(f: TimeSlabFunction, k_mu: float, window, scaled: bool = True, max_offset: int | None = None) -> HolderEstimate:
    """Scaled parabolic Hölder norm of order ``k_mu`` on ``R_+^N x window`` (weight 4)."""
    M = PARABOLIC_WEIGHT
    lam = float(k_mu)
    if lam < 0:
        raise ValueError("order must be nonnegative")
    idx = _window_idx(f, window)
    a, b = window
    L = (b - a) if scaled else 1.0
    times = f.times[idx]
    nd = f.grid.dim
    terms = {}
    total = 0.0
    for m in range(int(lam // M) + 1):
        for ell in range(int(lam - M * m) + 1):
            D = _derivative_stack(f, ell, m, idx)
            val = temporal_seminorm_samples(times, D, 0.0, nd)
            terms[("sup", ell, m)] = val
            total += L ** (ell / M + m) * val
    fl = _largest_int_below(lam)
    semi = 0.0
    spatial = temporal = 0.0
    if fl >= 0:
        for m in range(fl // M + 1):
            ell = fl - M * m
            D = _derivative_stack(f, ell, m, idx)
            val = max(spatial_seminorm_samples(D[i], lam - fl, f.grid.spacing, max_offset) for i in range(len(idx)))
            terms[("x", ell, m)] = val
            spatial += val
    for m in range(int(lam // M) + 1):
        for ell in range(int(lam - M * m) + 1):
            order = ell + M * m
            if lam - M < order <= lam:
                D = _derivative_stack(f, ell, m, idx)
                val = temporal_seminorm_samples(times, D, (lam - order) / M, nd)
                terms[("t", ell, m)] = val
                temporal += val
    semi = spatial + temporal
    total += L ** (lam / M) * semi
    return HolderEstimate(lam - max(fl, 0), (lam - max(fl, 0)) / M, (a, b), spatial, temporal, terms, total, scaled)


@dataclasses.dataclass
class ZNormResult:
    value: float
    diverging: bool
    rows: list  # (t, weighted value)


def z_norm(v: TimeSlabFunction, alpha: float, k_mu: float, ladder=None, max_offset: int | None = None) -> ZNormResult:
    """``max_t t^(-alpha/4) ||v||'`` over windows ``(t/2, t)`` with both ends on the snapshot ladder.

    ``diverging`` is set when the weighted values grow monotonically toward
    either end of the ladder over its last three entries, the sampled sign of
    an unbounded supremum.
    """
    times = v.times
    if ladder is None:
        ladder = [t for t in times if np.any(np.isclose(times, t / 2, rtol=1e-9))]
    if len(ladder) == 0:
        raise ValueError("empty time ladder")
    rows = []
    for t in ladder:
        est = scaled_norm(v, k_mu, (t / 2, t), max_offset=max_offset)
        rows.append((float(t), t ** (-alpha / 4) * est.value))
    vals = np.array([r[1] for r in rows])
    diverging = False
    if len(vals) >= 3:
        head, tail = vals[:3], vals[-3:]
        diverging = bool(np.all(np.diff(head) < 0) and np.argmax(vals) == 0 and head[0] > 1.05 * head[2]) or bool(
            np.all(np.diff(tail) > 0) and np.argmax(vals) == len(vals) - 1 and tail[-1] > 1.05 * tail[0]
        )
    return ZNormResult(float(np.max(vals)), diverging, rows)


def append_report(path: str | Path, quantity: str, alpha: float, k_mu: float, rows) -> None:
    """Append ``(quantity, alpha, k_mu, t_window_lo, t_window_hi, value)`` rows to a CSV."""
    path = Path(path)
    new = not path.exists()
    with path.open("a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["quantity", "alpha", "k_mu", "t_window_lo", "t_window_hi", "value"])
        for t, val in rows:
            w.writerow([quantity, alpha, k_mu, repr(t / 2), repr(t), repr(val)])
