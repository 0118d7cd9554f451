"""Problem parameters and the exponent thresholds that decide what is well posed."""

from __future__ import annotations

from dataclasses import asdict, dataclass

MASS_CRITICAL_TOL = 1e-12


class InvalidParameterError(ValueError):
    pass


class RegimeError(ValueError):
    """An operation was requested outside the exponent range where it makes sense."""


@dataclass(frozen=True)
class Parameters:
    """``(p, beta, alpha, mu)``: nonlinearity power, Riesz order, delta strength, mass."""

    p: float
    beta: float
    alpha: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidParameterError(f"p must exceed 1, got {self.p}")
        if not 0 < self.beta < 3:
            raise InvalidParameterError(f"beta must lie in (0, 3), got {self.beta}")
        if not self.mu > 0:
            raise InvalidParameterError(f"mass mu must be positive, got {self.mu}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Thresholds:
    mass_critical: float  # (3+beta)/3
    l2_upper: float  # (5+2beta)/4
    energy_upper: float  # (3+beta)/2
    ye_upper: float  # (5+beta)/3

    @classmethod
    def for_beta(cls, beta: float) -> "Thresholds":
        return cls(
            mass_critical=(3 + beta) / 3,
            l2_upper=(5 + 2 * beta) / 4,
            energy_upper=(3 + beta) / 2,
            ye_upper=(5 + beta) / 3,
        )


@dataclass(frozen=True)
class RegimeReport:
    l2_nonlinearity_ok: bool
    energy_finite_ok: bool
    ground_state_regime: bool
    mass_critical: bool
    ye_existence: bool
    thresholds: Thresholds

    def to_dict(self) -> dict:
        return asdict(self)


def classify_regime(params: Parameters) -> RegimeReport:
    p, beta = params.p, params.beta
    if not p > 1 or not 0 < beta < 3:
        raise InvalidParameterError(f"invalid (p, beta) = ({p}, {beta})")
    th = Thresholds.for_beta(beta)
    critical = abs(p - th.mass_critical) < MASS_CRITICAL_TOL
    above_critical = p > th.mass_critical and not critical
    at_or_above = p >= th.mass_critical or critical
    ye = above_critical and p < th.ye_upper
    return RegimeReport(
        l2_nonlinearity_ok=at_or_above and p < th.l2_upper,
        energy_finite_ok=at_or_above and p < th.energy_upper,
        ground_state_regime=above_critical and p < min(th.ye_upper, th.l2_upper),
        mass_critical=critical,
        ye_existence=ye,
        thresholds=th,
    )


def require(params: Parameters, flag: str, what: str) -> RegimeReport:
    """Classify and raise :class:`RegimeError` unless ``flag`` holds."""
    report = classify_regime(params)
    if not getattr(report, flag):
        raise RegimeError(f"{what} needs {flag.replace('_', ' ')}; p={params.p}, beta={params.beta}")
    return report
