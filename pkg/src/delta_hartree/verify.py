"""Numerical checks of the identities and inequalities satisfied by bound states.

Identities are returned as :class:`IdentityReport` with the scale-aware
residual ``|lhs - rhs| / (1 + |lhs| + |rhs|)``.  Inequalities asserting only
the existence of a constant are probed empirically: the supremum of the ratio
over a sample of states is reported, never compared against a fixed value.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from math import pi, sqrt
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import greens
from .radial import RadialFunction, RadialGrid, build_grid, integrate, norm
from .regimes import Parameters, RegimeError, classify_regime, require
from .riesz import RieszOperator
from .state import (
    SingularState,
    _nonlocal_values,
    energy,
    nonlocal_term,
    q_form,
)

NEHARI_TOL = 1e-3
POHOZAEV_TOL = 1e-2
CRITICAL_TOL = 1e-12
CANONICAL_EPS = 1.0 / (64.0 * pi**2)


@dataclass(frozen=True)
class IdentityReport:
    lhs: float
    rhs: float
    residual: float
    passed: bool
    threshold: float
    name: str = ""
    note: str = ""

    @classmethod
    def compare(cls, lhs: float, rhs: float, threshold: float, name: str = "", note: str = "") -> "IdentityReport":
        lhs, rhs = float(lhs), float(rhs)
        res = abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))
        return cls(lhs, rhs, res, bool(res <= threshold), threshold, name, note)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# identities


def pohozaev_residual(u: SingularState, omega: float, op: RieszOperator, params: Parameters, threshold: float = POHOZAEV_TOL) -> IdentityReport:
    """``Q/2 + alpha q^2/2 + 3 omega mass/2`` against ``(3+beta) N / (2p)``."""
    require(params, "l2_nonlinearity_ok", "the Pohozaev identity")
    e = energy(u, op, params)
    lhs = 0.5 * e.q_form + 0.5 * params.alpha * u.q**2 + 1.5 * omega * u.mass
    rhs = (3.0 + params.beta) / (2.0 * params.p) * e.nonlocal_
    return IdentityReport.compare(lhs, rhs, threshold, "pohozaev")


def nehari_residual(u: SingularState, omega: float, op: RieszOperator, params: Parameters, threshold: float = NEHARI_TOL) -> IdentityReport:
    """``Q + omega mass`` against ``N``."""
    require(params, "l2_nonlinearity_ok", "the Nehari identity")
    e = energy(u, op, params)
    return IdentityReport.compare(e.q_form + omega * u.mass, e.nonlocal_, threshold, "nehari")


def critical_identity_residual(
    u: SingularState, alpha: float, params: Parameters | None = None, threshold: float = CRITICAL_TOL
) -> IdentityReport:
    """``Q(u)`` against ``alpha q^2 / 2``, the identity forced at the mass-critical power.

    Pass ``params`` to have the regime checked.  Two degenerate inputs are
    flagged in ``note``: the zero state, and a pure charge (``phi = 0``,
    ``q != 0``, ``alpha >= 0``) for which the identity would require
    ``sqrt(lam) q^2 / (8 pi) = -alpha q^2 / 2`` and therefore cannot hold.
    """
    if params is not None and not classify_regime(params).mass_critical:
        raise RegimeError(f"critical identity needs p = (3+beta)/3; p={params.p}, beta={params.beta}")
    lhs = q_form(u, alpha)
    rhs = 0.5 * alpha * u.q**2
    report = IdentityReport.compare(lhs, rhs, threshold, "critical_identity")
    phi_zero = not np.any(u.phi.values)
    if phi_zero and u.q == 0.0:
        note = "degenerate: zero state"
    elif phi_zero and alpha >= 0:
        note = "infeasible: pure charge with alpha >= 0 has Q = (alpha + sqrt(lam)/(8 pi)) q^2 > alpha q^2 / 2"
    elif u.q == 0.0 and lhs == 0.0:
        note = "degenerate: q = 0 and Q = 0 force u = 0"
    else:
        note = ""
    if note:
        report = IdentityReport(report.lhs, report.rhs, report.residual, report.passed, threshold, report.name, note)
    return report


# ---------------------------------------------------------------------------
# HLS extremal and the scaling family


@dataclass(frozen=True)
class ExtremalProfile:
    """``C eta / (eta^2 + r^2)^(3/2)`` centred at the origin."""

    C: float
    eta: float

    def __post_init__(self):
        if not (self.C > 0 and self.eta > 0):
            raise ValueError("C and eta must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.C * self.eta / (self.eta**2 + r * r) ** 1.5

    @property
    def l2_sq(self) -> float:
        # int C^2 eta^2 / (eta^2 + r^2)^3 4 pi r^2 dr = C^2 pi^2 / (4 eta)
        return self.C**2 * pi**2 / (4.0 * self.eta)

    def sample(self, grid: RadialGrid) -> RadialFunction:
        return RadialFunction(grid, self(grid.nodes))


def _critical_p(beta: float) -> float:
    return (3.0 + beta) / 3.0


def fit_extremal(eta: float, op: RieszOperator) -> ExtremalProfile:
    """Extremal of width ``eta`` with amplitude fixed by ``N(Q) = 1`` on the operator's grid.

    ``N`` is homogeneous of degree ``2p`` in the amplitude, so the root of
    ``N(C) = 1`` is ``C = N(1)^(-1/(2p))``.
    """
    p = _critical_p(op.beta)
    unit = ExtremalProfile(1.0, eta)
    n1 = _nonlocal_values(unit(op.grid.nodes), op, p)
    return ExtremalProfile(n1 ** (-1.0 / (2.0 * p)), eta)


def hls_extremal(eta: float, op: RieszOperator) -> tuple[RadialFunction, float]:
    """Sampled normalized extremal and its squared L2 norm by quadrature."""
    ext = fit_extremal(eta, op)
    prof = ext.sample(op.grid)
    return prof, norm(prof, "L2sq")


def hls_ratio(u: SingularState, op: RieszOperator, params: Parameters, reference: ExtremalProfile | None = None) -> float:
    """``N(u) / (mass / ||Q||^2)^((3+beta)/3)``; at most 1, with equality at extremals."""
    if not classify_regime(params).mass_critical:
        raise RegimeError(f"HLS ratio needs p = (3+beta)/3; p={params.p}, beta={params.beta}")
    m = u.mass
    if m == 0.0:
        return 0.0
    ref = reference or fit_extremal(1.0, op)
    return nonlocal_term(u, op, params.p) / (m / ref.l2_sq) ** params.p


@dataclass
class ScalingCurve:
    t: np.ndarray
    energy: np.ndarray
    mass: np.ndarray
    limit: float | None
    closed_form: float
    eta: float

    @property
    def relative_error(self) -> float | None:
        if self.limit is None:
            return None
        return abs(self.limit - self.closed_form) / abs(self.closed_form)

    def rows(self):
        return [(float(t), float(e)) for t, e in zip(self.t, self.energy)]


def scaling_grid(eta: float, t_values: Sequence[float], n: int = 4096) -> RadialGrid:
    """Log grid wide enough for every member ``Q_t`` (width ``eta / t``)."""
    w_min = eta / max(t_values)
    w_max = eta / min(t_values)
    return build_grid(r_min=1e-6 * w_min, r_max=4000.0 * w_max, n=n)


def scaling_family_curve(
    params: Parameters,
    t_values: Sequence[float],
    eta: float = 1.0,
    op: RieszOperator | None = None,
) -> ScalingCurve:
    """``E(Q_t)`` for ``Q_t(r) = sqrt(mu) t^(3/2) Q(t r) / ||Q||`` and its ``t -> 0`` limit.

    ``E(Q_t) = E_inf + c t^2`` at the mass-critical power, so the limit is the
    Richardson combination of the two smallest ``t`` in ``t^2``.  With a single
    ``t`` no limit is formed.
    """
    reg = classify_regime(params)
    if not reg.mass_critical:
        raise RegimeError(f"scaling family needs p = (3+beta)/3; p={params.p}, beta={params.beta}")
    if params.alpha < 0:
        raise RegimeError("scaling family limit needs alpha >= 0")
    t = np.asarray(list(t_values), dtype=float)
    if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) >= 0):
        raise ValueError("t_values must be a nonempty decreasing sequence of positive reals")
    if op is None:
        op = RieszOperator.build(params.beta, scaling_grid(eta, t))
    grid = op.grid
    ext = fit_extremal(eta, op)
    norm_q = sqrt(ext.l2_sq)
    energies, masses = [], []
    for ti in t:
        vals = sqrt(params.mu) * ti**1.5 / norm_q * ext(ti * grid.nodes)
        u = SingularState(RadialFunction(grid, vals), 0.0, 1.0)
        energies.append(energy(u, op, params).energy)
        masses.append(u.mass)
    energies = np.array(energies)
    closed = -3.0 / (2.0 * (3.0 + params.beta)) * (params.mu / ext.l2_sq) ** params.p
    limit = None
    if t.size >= 2:
        t1, t2 = t[-1] ** 2, t[-2] ** 2
        e1, e2 = energies[-1], energies[-2]
        limit = float((t2 * e1 - t1 * e2) / (t2 - t1))
    return ScalingCurve(t, energies, np.array(masses), limit, float(closed), eta)


# ---------------------------------------------------------------------------
# energy comparison


class NoConvergenceError(RuntimeError):
    def __init__(self, msg, reports=()):
        super().__init__(msg)
        self.reports = reports


class EnergyComparison(NamedTuple):
    e_x: float
    e_h1: float
    gap: float
    x_report: object = None
    h1_report: object = None


def energy_comparison(params: Parameters, grid: RadialGrid, op: RieszOperator, opts=None) -> EnergyComparison:
    """Ground state energies with and without charge; ``gap = e_h1 - e_x``."""
    from .solver import SolverOptions, minimize_h1, minimize_x

    require(params, "ground_state_regime", "energy comparison")
    opts = opts or SolverOptions()
    h1 = minimize_h1(params, grid, op, opts)
    x = minimize_x(params, grid, op, opts, h1_report=h1)
    if not (h1.converged and x.converged):
        raise NoConvergenceError("a minimization did not converge", (x, h1))
    e_x, e_h1 = x.energy.energy, h1.energy.energy
    return EnergyComparison(e_x, e_h1, e_h1 - e_x, x, h1)


# ---------------------------------------------------------------------------
# inequality probes


@dataclass
class ProbeReport:
    sup: float
    argmax: int
    ratios: np.ndarray = field(repr=False)
    skipped: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.sup))

    def to_dict(self) -> dict:
        return {
            "sup": self.sup,
            "argmax": self.argmax,
            "count": int(self.ratios.size),
            "skipped": self.skipped,
            **self.extra,
        }


def _probe(ratios: list, skipped: int, **extra) -> ProbeReport:
    arr = np.array(ratios, dtype=float)
    if arr.size == 0:
        return ProbeReport(float("nan"), -1, arr, skipped, extra)
    k = int(np.argmax(arr))
    return ProbeReport(float(arr[k]), k, arr, skipped, extra)


@dataclass(frozen=True)
class StateRecipe:
    """Grid-independent description of a sample state ``a (1 + b r) exp(-(r/L)^2) + q G_lam``."""

    a: float
    b: float
    L: float
    q: float
    lam: float

    def build(self, grid: RadialGrid) -> SingularState:
        r = grid.nodes
        phi = self.a * (1.0 + self.b * r) * np.exp(-((r / self.L) ** 2))
        return SingularState(RadialFunction(grid, phi), self.q, self.lam)


def random_recipes(count: int, seed: int, charged: bool = True) -> list[StateRecipe]:
    """Seeded sample of smooth states with widths in [0.3, 3] and gauges in [0.1, 50]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.uniform(-1.0, 1.0)
        b = rng.uniform(0.0, 1.0)
        L = float(np.exp(rng.uniform(np.log(0.3), np.log(3.0))))
        q = rng.uniform(0.0, 1.0) if charged else 0.0
        lam = float(np.exp(rng.uniform(np.log(0.1), np.log(50.0))))
        out.append(StateRecipe(a, b, L, q, lam))
    return out


def lr_norm_pow(u: SingularState, r_exp: float) -> float:
    """``||u||_{L^r}^r``, with the ``[0, r_1]`` cap integrated against the charge singularity."""
    grid = u.grid
    dens = np.abs(u.u_values) ** r_exp
    total = float(np.dot(grid.weights, dens))
    if u.q != 0.0:
        r1 = grid.r_min
        # replace the cap weight 4 pi r1^3 by the exact integral of |q / (4 pi r)|^r
        cap_quadrature = 4.0 * pi * r1**3 * dens[0]
        cap_exact = 4.0 * pi * abs(u.u_values[0] * r1) ** r_exp * r1 ** (3.0 - r_exp) / (3.0 - r_exp)
        total += cap_exact - cap_quadrature
    return total


def gn_probe(states: Iterable[SingularState], r_exp: float) -> ProbeReport:
    """Empirical constant of ``||u||_r^r <= K (|phi|_D^a |phi|^b + |q|^r / lam^c)``."""
    if not 2.0 < r_exp < 3.0:
        raise ValueError("the GN-type bound needs 2 < r < 3")
    ratios, skipped = [], 0
    a, b, c = 1.5 * (r_exp - 2.0), 0.5 * (6.0 - r_exp), 0.5 * (3.0 - r_exp)
    for u in states:
        d = sqrt(max(u.phi_d12_sq, 0.0))
        l2 = sqrt(max(u.phi_l2_sq, 0.0))
        bracket = d**a * l2**b + abs(u.q) ** r_exp / u.lam**c
        if bracket == 0.0:
            skipped += 1
            continue
        ratios.append(lr_norm_pow(u, r_exp) / bracket)
    return _probe(ratios, skipped, r_exp=r_exp)


def gauge_norms(u: SingularState, nu: float) -> tuple[float, float]:
    """``(||phi_nu||^2, ||phi_nu||_D^2)`` of the regular part in gauge ``nu``, in closed form.

    ``phi_nu = phi + q (G_lam - G_nu)``, and
    ``<phi, G_lam - G_nu>_D = <phi, nu G_nu - lam G_lam>``, so no sampling of
    a possibly very wide ``G_nu`` is needed.
    """
    lam, q = u.lam, u.q
    if q == 0.0 or nu == lam:
        return u.phi_l2_sq, u.phi_d12_sq
    w = u.grid.weights
    g_nu = greens.eval_g(nu, u.grid.nodes)
    cross_l2 = u.cross_inner - float(np.dot(w, u.phi.values * g_nu))
    cross_d = float(np.dot(w, u.phi.values * (nu * g_nu))) - lam * u.cross_inner
    l2 = u.phi_l2_sq + 2 * q * cross_l2 + q * q * greens.g_diff_l2_sq(lam, nu)
    d12 = u.phi_d12_sq + 2 * q * cross_d + q * q * greens.g_diff_d12_sq(lam, nu)
    return l2, d12


def interpolation_probe(states: Iterable[SingularState], params: Parameters, op: RieszOperator) -> ProbeReport:
    """Empirical constant of ``N(u) <= K (three-term bracket)`` in the state's gauge.

    The canonical-gauge variant (``lam = eps q^4 / mass^2`` with
    ``eps = 1/(64 pi^2)``, bracket in ``|phi|_D``, ``|u|`` and ``|q|``) is
    reported under ``extra["canonical_sup"]``.
    """
    reg = classify_regime(params)
    p, beta = params.p, params.beta
    th = reg.thresholds
    if not (p > th.mass_critical and not reg.mass_critical and p < th.energy_upper):
        raise RegimeError(f"interpolation bound needs (3+beta)/3 < p < (3+beta)/2; p={p}, beta={beta}")
    a = 3 * p - (3 + beta)
    b = 3 + beta - p
    c = 3 + beta - 2 * p
    ratios, canon, skipped = [], [], 0
    for u in states:
        N = nonlocal_term(u, op, p)
        d = sqrt(max(u.phi_d12_sq, 0.0))
        l2 = sqrt(max(u.phi_l2_sq, 0.0))
        q = abs(u.q)
        bracket = d**a * l2**b + d ** (a / 2) * l2 ** (b / 2) * q**p / u.lam ** (c / 4) + q ** (2 * p) / u.lam ** (c / 2)
        if bracket == 0.0:
            skipped += 1
            continue
        ratios.append(N / bracket)
        if q > 0:
            m = u.mass
            nu = CANONICAL_EPS * q**4 / m**2
            _, d12 = gauge_norms(u, nu)
            dn = sqrt(max(d12, 0.0))
            un = sqrt(m)
            cb = dn**a * un**b + dn ** (a / 2) * un ** (b / 2) * q**a + un ** (2 * c) * q ** (2 * a)
            canon.append(N / cb)
    return _probe(ratios, skipped, canonical_sup=float(max(canon)) if canon else None)


@dataclass
class SplittingCurve:
    residuals: np.ndarray
    decreasing: bool


def spreading_sequence(u: SingularState, sizes: Sequence[float], width: float = 1.0) -> list[SingularState]:
    """``u + b_n`` with ``b_n`` a Gaussian bump of the mass of ``u`` and width ``width * n``."""
    grid = u.grid
    out = []
    m = max(u.mass, 1e-300)
    for n in sizes:
        bump = np.exp(-0.5 * (grid.nodes / (width * n)) ** 2)
        bump *= sqrt(m / integrate(RadialFunction(grid, bump * bump)))
        out.append(SingularState(u.phi + RadialFunction(grid, bump), u.q, u.lam))
    return out


def bl_splitting_check(sequence: Sequence[SingularState], limit: SingularState, op: RieszOperator, params: Parameters) -> SplittingCurve:
    """``|N(u_n) - N(u_n - u) - N(u)|`` along the sequence."""
    p = params.p
    n_lim = nonlocal_term(limit, op, p)
    res = []
    for un in sequence:
        if not un.grid.same_as(limit.grid):
            raise ValueError("sequence and limit must share one grid")
        diff = un.u_values - limit.u_values
        res.append(abs(_nonlocal_values(un.u_values, op, p) - _nonlocal_values(diff, op, p) - n_lim))
    res = np.array(res)
    return SplittingCurve(res, bool(np.all(np.diff(res) <= 1e-15 * max(1.0, n_lim))))


# ---------------------------------------------------------------------------
# emitters


def curve_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def reports_json(reports: Sequence[IdentityReport], **extra) -> str:
    payload = dict(extra)
    payload["identities"] = [r.to_dict() for r in reports]
    return json.dumps(payload, indent=1, sort_keys=True)
