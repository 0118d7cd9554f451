"""Singular states ``u = phi + q G_lam`` and their energy.

A state is stored as a regular radial profile ``phi``, a charge ``q`` and a
gauge ``lam``.  ``u`` itself does not change under a change of gauge; only the
split between ``phi`` and ``q G_lam`` does.  All functionals below are written
in terms of the split:

    mass = ||phi||^2 + 2 q <phi, G> + q^2 / (8 pi sqrt(lam))
    Q(u) = ||phi||_D^2 - 2 lam q <phi, G> + alpha q^2 + sqrt(lam) q^2 / (8 pi)
    N(u) = int (I_beta * |u|^p) |u|^p
    E(u) = Q(u) / 2 - N(u) / (2 p)

Charges are real: a global phase maps any complex charge onto ``q >= 0``, and
only real radial profiles are searched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from math import pi, sqrt

import numpy as np

from . import greens
from .radial import RadialFunction, RadialGrid, build_grid, inner, norm, stiffness_matrix
from .regimes import Parameters, RegimeError, classify_regime
from .riesz import RieszOperator

SEARCH_RESTRICTION = "real radial profiles, charge q >= 0"


class ZeroChargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SingularState:
    phi: RadialFunction
    q: float
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"gauge lambda must be positive, got {self.lam}")
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def grid(self) -> RadialGrid:
        return self.phi.grid

    @cached_property
    def g_values(self) -> np.ndarray:
        return greens.eval_g(self.lam, self.grid.nodes)

    @cached_property
    def phi_l2_sq(self) -> float:
        return norm(self.phi, "L2sq")

    @cached_property
    def phi_d12_sq(self) -> float:
        return norm(self.phi, "D12sq")

    @cached_property
    def cross_inner(self) -> float:
        return float(np.dot(self.grid.weights, self.phi.values * self.g_values))

    @cached_property
    def mass(self) -> float:
        return self.phi_l2_sq + 2.0 * self.q * self.cross_inner + self.q**2 * greens.g_l2_norm_sq(self.lam)

    @cached_property
    def u_values(self) -> np.ndarray:
        return self.phi.values + self.q * self.g_values

    def total(self) -> RadialFunction:
        return RadialFunction(self.grid, self.u_values)

    def scaled(self, c: float) -> "SingularState":
        return SingularState(self.phi * c, self.q * c, self.lam)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "q": self.q,
            "grid": self.grid.spec(),
            "phi": [float(v) for v in self.phi.values],
        }

    @classmethod
    def from_dict(cls, data: dict, grid: RadialGrid | None = None) -> "SingularState":
        spec = data["grid"]
        if grid is None or grid.spec() != _normalized_spec(spec):
            grid = build_grid(**spec)
        phi = np.asarray(data["phi"], dtype=float)
        return cls(RadialFunction(grid, phi), float(data["q"]), float(data["lambda"]))


def _normalized_spec(spec: dict) -> dict:
    return {
        "r_min": float(spec["r_min"]),
        "r_max": float(spec["r_max"]),
        "n": int(spec["n"]),
        "spacing": str(spec["spacing"]),
    }


def dumps_state(state: SingularState, **extra) -> str:
    """JSON text; floats are written with ``repr`` (17 significant digits round-trip)."""
    payload = dict(extra)
    payload["state"] = state.to_dict()
    return json.dumps(payload, indent=1)


def loads_state(text: str) -> SingularState:
    return SingularState.from_dict(json.loads(text)["state"])


@dataclass(frozen=True)
class EnergyBreakdown:
    q_form: float
    nonlocal_: float
    energy: float

    @property
    def nonlocal_term(self) -> float:
        return self.nonlocal_

    def to_dict(self) -> dict:
        return {"q_form": self.q_form, "nonlocal": self.nonlocal_, "energy": self.energy}


def make_state(phi: RadialFunction, q: float = 0.0, lam: float = 1.0) -> SingularState:
    return SingularState(phi, q, lam)


def q_form(u: SingularState, alpha: float) -> float:
    s = sqrt(u.lam)
    return u.phi_d12_sq - 2.0 * u.lam * u.q * u.cross_inner + alpha * u.q**2 + s * u.q**2 / (8.0 * pi)


def _abs_pow(values: np.ndarray, p: float) -> np.ndarray:
    return np.abs(values) ** p


def _check_energy_regime(params_or_p, beta) -> None:
    if isinstance(params_or_p, Parameters):
        params = params_or_p
    else:
        params = Parameters(p=float(params_or_p), beta=beta)
    if not classify_regime(params).energy_finite_ok:
        raise RegimeError(
            f"N(u) is finite only for (3+beta)/3 <= p < (3+beta)/2; p={params.p}, beta={params.beta}"
        )


def nonlocal_term(u: SingularState, op: RieszOperator, p: float) -> float:
    _check_energy_regime(p, op.beta)
    return _nonlocal_values(u.u_values, op, p)


def _nonlocal_values(values: np.ndarray, op: RieszOperator, p: float) -> float:
    rho = _abs_pow(values, p)
    w = op.grid.weights
    return float((w * rho) @ op.apply(rho))


def energy(u: SingularState, op: RieszOperator, params: Parameters) -> EnergyBreakdown:
    _check_energy_regime(params, op.beta)
    Q = q_form(u, params.alpha)
    N = _nonlocal_values(u.u_values, op, params.p)
    return EnergyBreakdown(Q, N, 0.5 * Q - N / (2.0 * params.p))


def h1_energy(phi: RadialFunction, op: RieszOperator, p: float) -> float:
    """``E0(phi) = ||phi||_D^2 / 2 - N(phi) / (2p)`` for charge-free profiles."""
    return 0.5 * norm(phi, "D12sq") - _nonlocal_values(phi.values, op, p) / (2.0 * p)


def regauge(u: SingularState, nu: float) -> SingularState:
    """Same function, decomposed against ``G_nu``: ``phi + q (G_lam - G_nu)``."""
    diff = greens.g_diff_eval(u.lam, nu, u.grid.nodes)
    return SingularState(RadialFunction(u.grid, u.phi.values + u.q * diff), u.q, nu)


def canonical_lambda(q: float, mass: float) -> float:
    return q**4 / (64.0 * pi**2 * mass**2)


def canonical_gauge(u: SingularState) -> SingularState:
    """Regauge to ``lam = q^4 / (64 pi^2 mass^2)``, where ``||q G_lam||^2 = mass``."""
    if u.q == 0.0:
        raise ZeroChargeError("canonical gauge needs a nonzero charge")
    m = u.mass
    if not m > 0:
        raise ValueError("canonical gauge needs positive mass")
    nu = canonical_lambda(u.q, m)
    if abs(nu - u.lam) < 1e-12 * max(nu, u.lam):
        return u
    return regauge(u, nu)


def boundary_residual(u: SingularState, alpha: float) -> float:
    """Normalized defect in ``phi(0) = (alpha + sqrt(lam)/(4 pi)) q``."""
    target = (alpha + sqrt(u.lam) / (4.0 * pi)) * u.q
    scale = max(abs(u.q), sqrt(max(u.phi_l2_sq, 0.0)), 1e-30)
    return (u.phi.at_origin() - target) / scale


def nonlinear_force(u_values: np.ndarray, op: RieszOperator, p: float) -> np.ndarray:
    """``(I_beta * |u|^p) |u|^(p-2) u`` at the nodes."""
    a = np.abs(u_values)
    V = op.apply(a**p)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.where(a > 0, a ** (p - 1.0), 0.0)
    return V * mag * np.sign(u_values)


def energy_gradient(u: SingularState, op: RieszOperator, params: Parameters):
    """Gradient of ``E`` at ``u`` with respect to ``phi`` (grid inner product) and ``q``."""
    _check_energy_regime(params, op.beta)
    grid = u.grid
    w = grid.weights
    L = stiffness_matrix(grid)
    F = nonlinear_force(u.u_values, op, params.p)
    G = u.g_values
    grad_phi = (L @ u.phi.values) / w - u.lam * u.q * G - F
    grad_q = (
        -u.lam * u.cross_inner
        + params.alpha * u.q
        + sqrt(u.lam) * u.q / (8.0 * pi)
        - float(np.dot(w, G * F))
    )
    return RadialFunction(grid, grad_phi), grad_q


def mass_gradient(u: SingularState):
    """Gradient of the mass with respect to ``phi`` (grid inner product) and ``q``."""
    return (
        RadialFunction(u.grid, 2.0 * u.u_values),
        2.0 * u.cross_inner + 2.0 * u.q * greens.g_l2_norm_sq(u.lam),
    )


def directional_derivative(u: SingularState, op: RieszOperator, params: Parameters, v: RadialFunction, dq: float) -> float:
    gphi, gq = energy_gradient(u, op, params)
    return inner(gphi, v) + gq * dq
