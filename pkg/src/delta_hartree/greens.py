"""Closed forms for the Green's function ``G_lam(r) = exp(-sqrt(lam) r) / (4 pi r)``.

``G_lam`` solves ``(-Laplace + lam) G = delta_0`` in R^3.  It is not in H^1,
but differences ``G_lam - G_nu`` are, and their norms are explicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi, sqrt

import numpy as np

from .radial import RadialFunction, RadialGrid


class CoincidentLambdaError(ValueError):
    """Two gauges that should differ are numerically equal."""


def _check_lambda(lam: float) -> None:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")


def _check_distinct(lam: float, nu: float) -> None:
    _check_lambda(lam)
    _check_lambda(nu)
    if abs(lam - nu) < 1e-12 * max(lam, nu):
        raise CoincidentLambdaError(f"lambda={lam} and nu={nu} coincide")


@dataclass(frozen=True)
class GreensHandle:
    lam: float

    def __post_init__(self):
        _check_lambda(self.lam)

    def __call__(self, r):
        return eval_g(self.lam, r)

    def sample(self, grid: RadialGrid) -> RadialFunction:
        return RadialFunction(grid, eval_g(self.lam, grid.nodes))

    @property
    def l2_norm_sq(self) -> float:
        return g_l2_norm_sq(self.lam)


def eval_g(lam: float, r):
    _check_lambda(lam)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("G_lambda is evaluated at r > 0 only")
    out = np.exp(-sqrt(lam) * r) / (4.0 * pi * r)
    return float(out) if out.ndim == 0 else out


def g_l2_norm_sq(lam: float) -> float:
    _check_lambda(lam)
    return 1.0 / (8.0 * pi * sqrt(lam))


def g1_lr_norm_pow(r_exp: float) -> float:
    """``int G_1^r dx = (4 pi)^(1-r) Gamma(3-r) r^(r-3)``."""
    return (4.0 * pi) ** (1.0 - r_exp) * gamma(3.0 - r_exp) * r_exp ** (r_exp - 3.0)


def g_lr_norm_pow(lam: float, r_exp: float) -> float:
    """``||G_lam||_{L^r}^r`` for ``2 <= r < 3``."""
    _check_lambda(lam)
    if not 2.0 <= r_exp < 3.0:
        raise ValueError(f"G_lambda is in L^r only for r < 3; need 2 <= r < 3, got {r_exp}")
    return lam ** (-(3.0 - r_exp) / 2.0) * g1_lr_norm_pow(r_exp)


def g_diff_l2_sq(lam: float, nu: float) -> float:
    _check_distinct(lam, nu)
    a, b = sqrt(lam), sqrt(nu)
    return (1.0 / a + 1.0 / b - 4.0 / (a + b)) / (8.0 * pi)


def g_diff_d12_sq(lam: float, nu: float) -> float:
    _check_distinct(lam, nu)
    a, b = sqrt(lam), sqrt(nu)
    # the difference quotient below equals (a - b)^2 / (a + b); keep the
    # factored form to avoid cancellation when lam and nu are close
    return (a - b) ** 2 / (a + b) / (8.0 * pi)


def g_diff_eval(lam: float, nu: float, r):
    """``G_lam(r) - G_nu(r)`` with the removable singularity at 0 filled in."""
    _check_distinct(lam, nu)
    a, b = sqrt(lam), sqrt(nu)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    safe = np.where(r > 0, r, 1.0)
    # exp(-a r) - exp(-b r) = exp(-b r) * expm1((b - a) r), no cancellation at small r
    num = np.exp(-b * safe) * np.expm1((b - a) * safe)
    out = np.where(r > 0, num / (4.0 * pi * safe), (b - a) / (4.0 * pi))
    return float(out) if out.ndim == 0 else out
