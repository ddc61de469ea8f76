"""
Sample-size bound for dense uniform samples of a manifold with boundary:

    N_M(r, gamma) = beta_M(r) * [beta_M(r / 2) + ln(1 / gamma)]
"""

import math
from dataclasses import dataclass

import structlog

from link_multiplicity.corpus import RegularityData
from link_multiplicity.errors import DomainError, ValidationError
from link_multiplicity.specialfn import ball_volume, betainc

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class BoundQuery:
    """Radius r in (0, Delta_M / 2) and confidence gap gamma in (0, 1)."""

    radius: float
    confidence_gap: float
    regularity: RegularityData

    def __post_init__(self) -> None:
        violations = []
        if not 0.0 < self.radius < self.regularity.delta_M / 2.0:
            violations.append(
                f"radius r={self.radius} must lie in (0, Delta_M/2) = (0, {self.regularity.delta_M / 2.0})"
            )
        if not 0.0 < self.confidence_gap < 1.0:
            violations.append(f"gamma={self.confidence_gap} must lie in (0, 1)")
        if violations:
            raise ValidationError("Sample-size bound hypotheses violated", violations)


def _theta_and_y(regularity: RegularityData, x: float) -> tuple[float, float]:
    ratio = x / (4.0 * regularity.delta_M)
    if not 0.0 < x or ratio >= 1.0:
        raise DomainError(f"beta_M needs 0 < x < 4 Delta_M, got x={x}, Delta_M={regularity.delta_M}")
    theta = math.asin(ratio)
    y = 1.0 - (x * math.cos(theta)) ** 2 / (16.0 * regularity.delta_M**2)
    return theta, y


def beta_M(regularity: RegularityData, x: float) -> float:
    """Vol(M) / [cos^k(theta) / 2^(k+1) * I_y((k+1)/2, 1/2) * Vol(B^k_x)]."""
    k = regularity.intrinsic_dim
    theta, y = _theta_and_y(regularity, x)
    shrink = math.cos(theta) ** k / 2.0 ** (k + 1) * betainc((k + 1) / 2.0, 0.5, y)
    return regularity.volume / (shrink * ball_volume(k, x))


def sample_size_value(query: BoundQuery) -> float:
    """The unrounded bound beta_M(r) * [beta_M(r/2) + ln(1/gamma)]."""
    return beta_M(query.regularity, query.radius) * (
        beta_M(query.regularity, query.radius / 2.0) + math.log(1.0 / query.confidence_gap)
    )


def sample_size_bound(query: BoundQuery) -> int:
    """Ceiling of the bound; samples must be strictly larger than this."""
    return math.ceil(sample_size_value(query))


@dataclass(frozen=True)
class BoundReport:
    """N together with the intermediate quantities and the regularity provenance."""

    sample_size: int
    value: float
    radius: float
    gamma: float
    beta_r: float
    beta_half_r: float
    theta: float
    y: float
    regularity: RegularityData


def bound_report(regularity: RegularityData, radius: float, gamma: float) -> BoundReport:
    query = BoundQuery(radius=radius, confidence_gap=gamma, regularity=regularity)
    theta, y = _theta_and_y(regularity, radius)
    value = sample_size_value(query)
    report = BoundReport(
        sample_size=math.ceil(value),
        value=value,
        radius=radius,
        gamma=gamma,
        beta_r=beta_M(regularity, radius),
        beta_half_r=beta_M(regularity, radius / 2.0),
        theta=theta,
        y=y,
        regularity=regularity,
    )
    logger.info("Sample-size bound computed", radius=radius, gamma=gamma, sample_size=report.sample_size)
    return report
