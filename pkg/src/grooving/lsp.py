"""Complementing-condition checks for the squared operator with two boundary rows.

The half-line model problem has symbol ``(|xi|^2 + tau^2 / c)^2 + lambda`` with
``c = 1 + gamma0^2``.  For ``lambda`` in the sector ``|arg lambda| < pi - phi``
two of the four roots in ``tau`` lie in the upper half plane; their monic
quadratic ``tau^2 - alpha tau + beta`` is the stable factor.  A pair of
boundary symbols satisfies the condition when their remainders modulo that
factor are linearly independent.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


# --------------------------------------------------------------------------
# sector and roots


def in_sector(lam: complex, phi: float) -> bool:
    return lam != 0 and abs(np.angle(lam)) < math.pi - phi


def _check_phi(phi: float) -> None:
    if not 0.0 < phi < math.pi / 2:
        raise ValueError("sector angle must lie in (0, pi/2)")


def upper_sqrt(z: complex) -> complex:
    """Square root of ``z`` with nonnegative imaginary part.

    The principal root is taken through its half angle and flipped when it
    lands in the lower half plane.
    """
    z = complex(z)
    r = math.sqrt(abs(z))
    half = 0.5 * math.atan2(z.imag, z.real)
    s = complex(r * math.cos(half), r * math.sin(half))
    return -s if s.imag < 0 else s


def char_roots(xi, lam: complex, gamma0: float = 0.0, phi: float | None = None) -> tuple[complex, complex]:
    """The two roots with positive imaginary part of ``(|xi|^2 + tau^2/c)^2 + lam = 0``.

    Computed in the scaled variable ``tau' = tau / sqrt(c)`` where the symbol
    is ``(|xi|^2 + tau'^2)^2 + lam``: ``tau'^2 = -|xi|^2 +- r`` with
    ``r = sqrt(-lam)`` on the upper branch, and each ``tau'`` is the root of
    ``tau'^2`` in the upper half plane.
    """
    lam = complex(lam)
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    if phi is not None:
        _check_phi(phi)
        if not in_sector(lam, phi):
            raise ValueError(f"lambda={lam} lies outside the sector |arg| < pi - {phi}")
    xi2 = float(np.sum(np.square(np.atleast_1d(np.asarray(xi, dtype=float)))))
    r = upper_sqrt(-lam)
    t1 = upper_sqrt(-xi2 + r)
    t2 = upper_sqrt(-xi2 - r)
    scale = math.sqrt(1.0 + gamma0**2)
    return scale * t1, scale * t2


def quartic_coefficients(xi2: float, lam: complex, gamma0: float = 0.0) -> np.ndarray:
    c = 1.0 + gamma0**2
    return np.array([1.0 / c**2, 0.0, 2.0 * xi2 / c, 0.0, xi2**2 + lam], dtype=complex)


def quartic_roots(xi2: float, lam: complex, gamma0: float = 0.0) -> np.ndarray:
    """All four roots from the companion-matrix solver."""
    return np.roots(quartic_coefficients(xi2, lam, gamma0))


def root_discrepancy(closed: Sequence[complex], reference: np.ndarray) -> float:
    """Largest relative distance from each closed-form root to its nearest reference root."""
    worst = 0.0
    for z in closed:
        d = np.min(np.abs(reference - z))
        worst = max(worst, d / max(abs(z), 1e-300))
    return worst


# --------------------------------------------------------------------------
# polynomial remainders


def poly_remainder(coeffs: Sequence[complex], alpha: complex, beta: complex) -> tuple[complex, complex]:
    """Remainder ``p tau + q`` of a polynomial (highest degree first) modulo ``tau^2 - alpha tau + beta``.

    Synthetic division by the monic quadratic: the leading coefficient is
    eliminated by subtracting ``lead * tau^(k-2) * (tau^2 - alpha tau + beta)``.
    """
    work = [complex(c) for c in coeffs]
    while len(work) > 2:
        lead = work.pop(0)
        work[0] += lead * alpha
        work[1] -= lead * beta
    while len(work) < 2:
        work.insert(0, 0j)
    return work[0], work[1]


def poly_eval(coeffs: Sequence[complex], z: complex) -> complex:
    acc = 0j
    for c in coeffs:
        acc = acc * z + c
    return acc


# --------------------------------------------------------------------------
# boundary systems


@dataclasses.dataclass(frozen=True)
class BoundarySystem:
    """Two boundary symbols as polynomials in ``tau``.

    ``rows(xi2, c)`` returns the coefficient lists (highest degree first) of
    both symbols for tangential frequency ``|xi|^2 = xi2`` and normal weight
    ``c``.  ``degree`` is the homogeneity degree of the independence
    determinant when ``tau`` and ``|xi|`` both carry weight one.
    ``symbol`` optionally replaces the built-in quartic: it maps
    ``(xi2, lam, c)`` to quartic coefficients whose upper roots are then
    taken from the companion-matrix solver.
    """

    name: str
    rows: Callable[[float, float], tuple[Sequence[complex], Sequence[complex]]]
    degree: int
    symbol: Callable[[float, complex, float], np.ndarray] | None = None


def _neumann_rows(xi2: float, c: float):
    return [1.0 / c, 0.0], [1.0 / c**2, 0.0, xi2 / c, 0.0]


def _dirichlet_rows(xi2: float, c: float):
    return [1.0], [1.0 / c, 0.0, xi2]


def _dependent_rows(xi2: float, c: float):
    return [1.0, 0.0], [1.0, 0.0]


NEUMANN = BoundarySystem("neumann", _neumann_rows, 3)
DIRICHLET = BoundarySystem("dirichlet", _dirichlet_rows, 1)
DEPENDENT = BoundarySystem("dependent", _dependent_rows, 1)
SYSTEMS = {s.name: s for s in (NEUMANN, DIRICHLET, DEPENDENT)}


@dataclasses.dataclass
class SampleResult:
    xi_norm: float
    lam: complex
    tau1: complex
    tau2: complex
    alpha: complex
    beta: complex
    det: complex
    det_eval: complex
    det_norm: float
    valid: bool
    root_error: float


def _upper_roots(system: BoundarySystem, xi2: float, lam: complex, c: float) -> tuple[complex, complex, bool, float]:
    if system.symbol is None:
        t1, t2 = char_roots(math.sqrt(xi2), lam, math.sqrt(c - 1.0))
        allr = np.roots(quartic_coefficients(xi2, lam, math.sqrt(c - 1.0)))
        upper = int(np.sum(allr.imag > 0))
        return t1, t2, upper == 2, root_discrepancy((t1, t2), allr)
    allr = np.roots(system.symbol(xi2, lam, c))
    up = sorted(allr[allr.imag > 0], key=lambda z: (z.real, z.imag))
    if len(up) != 2:
        return complex("nan"), complex("nan"), False, float("nan")
    return complex(up[0]), complex(up[1]), True, 0.0


def independence(system: BoundarySystem, xi, lam: complex, gamma0: float = 0.0) -> SampleResult:
    """Remainder determinant of ``system`` at one sample, with the evaluation cross-check.

    ``det_eval`` is ``det[B_j(tau_k)]``, which equals ``det * (tau1 - tau2)``
    when the remainders are exact.  ``det_norm`` repeats the computation in
    the scaled variable (where the weight ``c`` drops out) and divides by
    ``(|xi|^2 + |lam|^(1/2))^(degree/2)``.
    """
    xi2 = float(np.sum(np.square(np.atleast_1d(np.asarray(xi, dtype=float)))))
    c = 1.0 + gamma0**2
    t1, t2, valid, err = _upper_roots(system, xi2, lam, c)
    alpha, beta = t1 + t2, t1 * t2
    r1, r2 = system.rows(xi2, c)
    p1, q1 = poly_remainder(r1, alpha, beta)
    p2, q2 = poly_remainder(r2, alpha, beta)
    det = p1 * q2 - q1 * p2
    det_eval = poly_eval(r1, t1) * poly_eval(r2, t2) - poly_eval(r1, t2) * poly_eval(r2, t1)

    s1, s2 = t1 / math.sqrt(c), t2 / math.sqrt(c)
    a1, b1 = s1 + s2, s1 * s2
    n1, n2 = system.rows(xi2, 1.0)
    pp1, qq1 = poly_remainder(n1, a1, b1)
    pp2, qq2 = poly_remainder(n2, a1, b1)
    scale = (xi2 + abs(lam) ** 0.5) ** (system.degree / 2)
    det_norm = abs(pp1 * qq2 - qq1 * pp2) / scale
    return SampleResult(math.sqrt(xi2), complex(lam), t1, t2, alpha, beta, det, det_eval, det_norm, valid, err)


def lsp_check_neumann(xi, lam: complex, gamma0: float = 0.0, phi: float | None = None) -> complex:
    if phi is not None:
        char_roots(xi, lam, gamma0, phi)
    return independence(NEUMANN, xi, lam, gamma0).det


def lsp_check_dirichlet(xi, lam: complex, gamma0: float = 0.0, phi: float | None = None) -> complex:
    if phi is not None:
        char_roots(xi, lam, gamma0, phi)
    return independence(DIRICHLET, xi, lam, gamma0).det


# --------------------------------------------------------------------------
# sweep


@dataclasses.dataclass
class LspReport:
    gamma0: float
    phi: float
    system: str
    samples: list
    min_im_tau: float
    min_det_norm: float
    invalid: int
    max_root_error: float
    max_eval_mismatch: float
    im_floor: float
    det_floor: float

    @property
    def passed(self) -> bool:
        return self.invalid == 0 and self.min_im_tau > self.im_floor and self.min_det_norm > self.det_floor

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_lambda", "im_lambda", "xi_norm", "im_tau1", "im_tau2", "det_re", "det_im", "det_norm"])
            for s in self.samples:
                w.writerow([repr(v) for v in (s.lam.real, s.lam.imag, s.xi_norm, s.tau1.imag, s.tau2.imag,
                                              s.det.real, s.det.imag, s.det_norm)])


def sample_grid(phi: float, n_samples: int, n_xi: int = 10, xi_range=(1e-2, 1e2), lam_range=(1e-2, 1e2)):
    """Deterministic ``(|xi|, lambda)`` samples: ``xi = 0`` plus a log grid, times a polar ``lambda`` grid."""
    _check_phi(phi)
    xis = np.concatenate([[0.0], np.geomspace(*xi_range, n_xi - 1)])
    n_lam = max(1, -(-n_samples // n_xi))
    n_arg = max(1, int(round(math.sqrt(n_lam))))
    n_mod = -(-n_lam // n_arg)
    mods = np.geomspace(*lam_range, n_mod)
    half = math.pi - phi
    args = -half + 2.0 * half * (np.arange(n_arg) + 0.5) / n_arg
    lams = [m * complex(math.cos(a), math.sin(a)) for m in mods for a in args]
    return [(x, l) for x in xis for l in lams]


def sector_sweep(
    gamma0: float,
    phi: float,
    n_samples: int = 1000,
    system: BoundarySystem | str = "neumann",
    im_floor: float = 0.0,
    det_floor: float = 1e-3,
) -> LspReport:
    if isinstance(system, str):
        system = SYSTEMS[system]
    samples = [independence(system, x, l, gamma0) for x, l in sample_grid(phi, n_samples)]
    ims = [min(s.tau1.imag, s.tau2.imag) for s in samples if s.valid]
    mism = 0.0
    for s in samples:
        ref = s.det * (s.tau1 - s.tau2)
        mism = max(mism, abs(s.det_eval - ref) / max(abs(s.det_eval), abs(ref), 1e-300))
    return LspReport(
        gamma0=gamma0,
        phi=phi,
        system=system.name,
        samples=samples,
        min_im_tau=min(ims) if ims else float("nan"),
        min_det_norm=min(s.det_norm for s in samples),
        invalid=sum(not s.valid for s in samples),
        max_root_error=max(s.root_error for s in samples),
        max_eval_mismatch=mism,
        im_floor=im_floor,
        det_floor=det_floor,
    )
