"""Riesz potential ``I_beta * rho`` for radial densities.

For radial rho the angular integral of ``|x - y|^(beta-3)`` is done in closed
form, leaving

    (I_beta * rho)(r) = int_0^inf T(r, s) rho(s) 4 pi s^2 ds,
    T(r, s) = A_beta [(r+s)^(beta-1) - |r-s|^(beta-1)] / (2 (beta-1) r s),

the spherical average of the kernel (a log for beta = 1).  The discrete
operator stores ``T`` at node pairs, replaced near the diagonal by exact cell
averages so that the integrable singularity at ``r = s`` (beta <= 1) and the
cusp (beta > 1) are integrated analytically.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from scipy import integrate as spi

from .radial import GridError, RadialFunction, RadialGrid

BETA_ONE_TOL = 1e-9
NEAR_BAND = 16


def riesz_constant(beta: float) -> float:
    """``A_beta`` with ``I_beta(x) = A_beta |x|^(beta-3)``."""
    _check_beta(beta)
    return gamma((3.0 - beta) / 2.0) / (gamma(beta / 2.0) * pi**1.5 * 2.0**beta)


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 3.0:
        raise ValueError(f"beta must lie in (0, 3), got {beta}")


def _bracket(beta, r, s):
    """``[(r+s)^(b-1) - |r-s|^(b-1)] / (b-1)``, stable for s << r and b near 1."""
    big = np.maximum(r, s)
    x = np.minimum(r, s) / big
    with np.errstate(divide="ignore", invalid="ignore"):
        if abs(beta - 1.0) < BETA_ONE_TOL:
            return np.log1p(x) - np.log1p(-x)
        e = beta - 1.0
        return big**e * (np.expm1(e * np.log1p(x)) - np.expm1(e * np.log1p(-x))) / e


def sphere_average(beta: float, r, s):
    """``T(r, s)``: average of ``I_beta(r e - s w)`` over unit vectors ``w``."""
    A = riesz_constant(beta)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    return A * _bracket(beta, r, s) / (2.0 * r * s)


def riesz_kernel(beta: float, r, s):
    """Kernel ``k`` with ``(I_beta * rho)(r) = int k(r, s) s rho(s) ds``."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(r <= 0) or np.any(s <= 0):
        raise ValueError("riesz_kernel needs r, s > 0")
    out = 4.0 * pi * s * sphere_average(beta, r, s)
    return float(out) if out.ndim == 0 else out


def _cell_antiderivative(beta, r, s):
    """Antiderivative in s of ``s [(r+s)^(b-1) - |r-s|^(b-1)] / (b-1)``."""
    d = s - r
    ad = np.abs(d)
    if abs(beta - 1.0) < BETA_ONE_TOL:
        v = r + s

        def xlogx2(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(t > 0, t * t * np.log(np.where(t > 0, t, 1.0)), 0.0)

        def xlogx(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)

        plus = xlogx2(v) / 2 - v * v / 4 - r * (xlogx(v) - v)
        # int (d + r) ln|d| dd
        minus = xlogx2(ad) / 2 - d * d / 4 + r * (np.sign(d) * xlogx(ad) - d)
        return plus - minus
    b = beta
    v = r + s
    plus = v ** (b + 1) / (b + 1) - r * v**b / b
    minus = r * np.sign(d) * ad**b / b + ad ** (b + 1) / (b + 1)
    return (plus - minus) / (b - 1.0)


def _cell_average(beta, r, lo, hi):
    """Average of ``T(r, .)`` over the shell ``lo < s < hi`` (volume measure)."""
    A = riesz_constant(beta)
    # int T 4 pi s^2 ds = (2 pi A / r) int s * bracket ds
    integral = 2.0 * pi * A / r * (_cell_antiderivative(beta, r, hi) - _cell_antiderivative(beta, r, lo))
    vol = 4.0 * pi / 3.0 * (hi**3 - lo**3)
    return integral / vol


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DELTA_HARTREE_THREADS", "1")))
    except ValueError:
        return 1


def build_kernel_matrix(beta: float, grid: RadialGrid, band: int = NEAR_BAND) -> np.ndarray:
    """Symmetric matrix ``K`` with ``(I_beta * rho)(r_i) ~ sum_j K_ij w_j rho_j``."""
    x = grid.nodes
    n = grid.n
    K = np.empty((n, n))
    # row blocks keep temporaries small
    step = 512
    for start in range(0, n, step):
        stop = min(n, start + step)
        r = x[start:stop, None]
        K[start:stop] = sphere_average(beta, r, x[None, :])
    lo, hi = grid.edges[:-1], grid.edges[1:]
    for off in range(-band, band + 1):
        i = np.arange(max(0, -off), min(n, n - off))
        j = i + off
        K[i, j] = _cell_average(beta, x[i], lo[j], hi[j])
    # symmetrize the corrected band
    for off in range(1, band + 1):
        i = np.arange(0, n - off)
        j = i + off
        avg = 0.5 * (K[i, j] + K[j, i])
        K[i, j] = avg
        K[j, i] = avg
    return K


@dataclass(frozen=True, eq=False)
class RieszOperator:
    """Discrete ``I_beta *`` acting on radial functions of one grid."""

    beta: float
    grid: RadialGrid
    kernel_matrix: np.ndarray = field(repr=False)

    @property
    def A_beta(self) -> float:
        return riesz_constant(self.beta)

    @classmethod
    def build(cls, beta: float, grid: RadialGrid) -> "RieszOperator":
        _check_beta(beta)
        K = build_kernel_matrix(beta, grid)
        K.setflags(write=False)
        return cls(beta, grid, K)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.kernel_matrix @ (self.grid.weights * values)


def convolve(op: RieszOperator, rho: RadialFunction) -> RadialFunction:
    if not op.grid.same_as(rho.grid):
        raise GridError("density is not on the operator's grid")
    return RadialFunction(op.grid, op.apply(rho.values))


def nonlocal_pairing(op: RieszOperator, f: RadialFunction, g: RadialFunction) -> float:
    """``int (I_beta * f) g dx``."""
    if not (op.grid.same_as(f.grid) and op.grid.same_as(g.grid)):
        raise GridError("functions are not on the operator's grid")
    w = op.grid.weights
    return float((w * g.values) @ (op.kernel_matrix @ (w * f.values)))


def oracle_convolve_3d(beta: float, rho, r: float, breaks=(), epsrel: float = 1e-10) -> float:
    """Reference value of ``(I_beta * rho)(r)`` by 2D adaptive quadrature.

    Polar coordinates are centred at the evaluation point ``x = r e_1``::

        A_beta int_0^inf t^(beta-1) int_{S^2} rho(|x + t w|) dw dt
        = 2 pi A_beta int_0^inf t^(beta-1) int_{-1}^{1} rho(sqrt(r^2+t^2+2rtc)) dc dt

    so the kernel singularity becomes the algebraic weight ``t^(beta-1)``.
    ``rho`` is a callable of the radius or a :class:`RadialFunction`
    (linearly interpolated, zero past the grid).  ``breaks`` lists radii where
    rho is not smooth.
    """
    _check_beta(beta)
    if isinstance(rho, RadialFunction):
        support = rho.grid.r_max
        fn = rho.interpolate
        breaks = tuple(breaks) + (support,)
    else:
        fn = rho
        support = max(breaks) if breaks else None
        if support is None:
            raise ValueError("callable densities need breaks including the support radius")
    A = riesz_constant(beta)
    r = float(r)

    def inner(t):
        if t == 0.0:
            return 2.0 * float(fn(np.array(r)))
        if r == 0.0:
            return 2.0 * float(fn(np.array(t)))
        pts = []
        for b in breaks:
            c = (b * b - r * r - t * t) / (2.0 * r * t)
            if -1.0 < c < 1.0:
                pts.append(c)
        val, _ = spi.quad(
            lambda c: float(fn(np.array(np.sqrt(max(r * r + t * t + 2 * r * t * c, 0.0))))),
            -1.0,
            1.0,
            points=sorted(pts) or None,
            epsabs=0.0,
            epsrel=epsrel,
            limit=200,
        )
        return val

    t_max = r + support
    t_pts = sorted({abs(b - r) for b in breaks} | {b + r for b in breaks})
    t_pts = [t for t in t_pts if 0.0 < t < t_max]
    total = 0.0
    edges = [0.0] + t_pts + [t_max]
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        if a == 0.0:
            val, _ = spi.quad(inner, a, b, weight="alg", wvar=(beta - 1.0, 0.0), epsabs=0.0, epsrel=epsrel, limit=200)
        else:
            val, _ = spi.quad(lambda t: t ** (beta - 1.0) * inner(t), a, b, epsabs=0.0, epsrel=epsrel, limit=200)
        total += val
    return 2.0 * pi * A * total
