"""
Special functions used by the sampling bound and the multiplicity oracle:
the regularized incomplete beta function, Euclidean ball volumes and
univariate complex polynomial roots with multiplicities.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import structlog
from numpy.polynomial import polynomial as npoly
from scipy.special import betaln, gammaln

from link_multiplicity.errors import DomainError, RootFindingError

logger = structlog.get_logger(__name__)

# Continued fraction controls (modified Lentz)
BETA_CF_MAX_ITERATIONS = 10_000
BETA_CF_EPS = 1.0e-15
BETA_CF_FPMIN = 1.0e-300

ROOT_RESIDUAL_TOLERANCE = 1.0e-8
ROOT_CLUSTER_TOLERANCE = 1.0e-6
ROOT_POLISH_STEPS = 8


@dataclass(frozen=True)
class BetaArgs:
    """Arguments of I_y(a, b): upper limit y in [0, 1] and shapes a, b > 0."""

    y: float
    a: float
    b: float

    def __post_init__(self) -> None:
        violations = []
        if not (0.0 <= self.y <= 1.0) or math.isnan(self.y):
            violations.append(f"y={self.y} not in [0, 1]")
        if not self.a > 0.0:
            violations.append(f"a={self.a} must be positive")
        if not self.b > 0.0:
            violations.append(f"b={self.b} must be positive")
        if violations:
            raise DomainError("Invalid incomplete beta arguments: " + "; ".join(violations))


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), evaluated with the modified Lentz method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < BETA_CF_FPMIN:
        d = BETA_CF_FPMIN
    d = 1.0 / d
    h = d

    for m in range(1, BETA_CF_MAX_ITERATIONS + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < BETA_CF_FPMIN:
            d = BETA_CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < BETA_CF_FPMIN:
            c = BETA_CF_FPMIN
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < BETA_CF_FPMIN:
            d = BETA_CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < BETA_CF_FPMIN:
            c = BETA_CF_FPMIN
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < BETA_CF_EPS:
            return h

    raise DomainError(f"Incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(args: BetaArgs) -> float:
    """
    Regularized incomplete beta function I_y(a, b) = B_y(a, b) / B_1(a, b).

    Args:
        args: Validated arguments

    Returns:
        Value in [0, 1]
    """
    y, a, b = args.y, args.a, args.b
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 1.0

    log_front = a * math.log(y) + b * math.log1p(-y) - betaln(a, b)
    if y < (a + 1.0) / (a + b + 2.0):
        value = math.exp(log_front) * _beta_continued_fraction(a, b, y) / a
    else:
        value = 1.0 - math.exp(log_front) * _beta_continued_fraction(b, a, 1.0 - y) / b
    return min(1.0, max(0.0, value))


def betainc(a: float, b: float, y: float) -> float:
    """Shorthand for regularized_incomplete_beta(BetaArgs(y, a, b))."""
    return regularized_incomplete_beta(BetaArgs(y=y, a=a, b=b))


def ball_volume(k: int, x: float) -> float:
    """Volume of the k-dimensional Euclidean ball of radius x."""
    if k < 1:
        raise DomainError(f"Ball dimension must be >= 1, got {k}")
    if not x > 0.0:
        raise DomainError(f"Ball radius must be positive, got {x}")
    return math.exp(0.5 * k * math.log(math.pi) + k * math.log(x) - gammaln(0.5 * k + 1.0))


@dataclass(frozen=True)
class ComplexPolynomial:
    """Univariate polynomial with complex coefficients, lowest degree first."""

    coefficients: tuple[complex, ...]
    degree: int = field(init=False)

    def __post_init__(self) -> None:
        coeffs = [complex(c) for c in self.coefficients]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if not coeffs:
            coeffs = [0j]
        object.__setattr__(self, "coefficients", tuple(coeffs))
        object.__setattr__(self, "degree", len(coeffs) - 1)

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coefficients[0] == 0

    def __call__(self, t: complex | np.ndarray) -> complex | np.ndarray:
        return npoly.polyval(t, np.asarray(self.coefficients, dtype=complex))

    def derivative(self) -> "ComplexPolynomial":
        return ComplexPolynomial(tuple(npoly.polyder(np.asarray(self.coefficients, dtype=complex))))


@dataclass(frozen=True)
class Root:
    """A root and its multiplicity."""

    value: complex
    multiplicity: int


def _polish(poly: ComplexPolynomial, roots: np.ndarray) -> np.ndarray:
    """A few Newton steps on the undeflated polynomial; steps that do not reduce the residual are dropped."""
    deriv = poly.derivative()
    polished = roots.copy()
    for _ in range(ROOT_POLISH_STEPS):
        values = poly(polished)
        slopes = deriv(polished)
        safe = np.abs(slopes) > 0
        candidate = polished.copy()
        candidate[safe] = polished[safe] - values[safe] / slopes[safe]
        better = np.abs(poly(candidate)) < np.abs(values)
        polished = np.where(better, candidate, polished)
    return polished


def _cluster_roots(roots: np.ndarray, tolerance: float) -> list[Root]:
    """Single-linkage grouping of roots closer than tolerance."""
    order = np.lexsort((roots.imag, roots.real))
    remaining = [complex(roots[i]) for i in order]
    groups: list[list[complex]] = []
    while remaining:
        group = [remaining.pop(0)]
        grew = True
        while grew:
            grew = False
            for candidate in list(remaining):
                if any(abs(candidate - member) < tolerance for member in group):
                    group.append(candidate)
                    remaining.remove(candidate)
                    grew = True
        groups.append(group)
    return [Root(value=complex(np.mean(group)), multiplicity=len(group)) for group in groups]


def complex_roots(poly: ComplexPolynomial) -> list[Root]:
    """
    All roots of a complex polynomial, grouped by multiplicity.

    Zero roots are split off exactly, the rest come from companion-matrix
    eigenvalues polished by Newton steps.

    Args:
        poly: Polynomial of degree >= 1

    Returns:
        Roots sorted by (real, imag); multiplicities sum to the degree

    Raises:
        DomainError: zero or constant polynomial
        RootFindingError: a root fails the residual check
    """
    if poly.is_zero:
        raise DomainError("The zero polynomial has no finite root set")
    if poly.degree < 1:
        raise DomainError("Constant polynomials have no roots")

    coeffs = np.asarray(poly.coefficients, dtype=complex)
    scale = float(np.max(np.abs(coeffs)))
    zero_order = int(np.argmax(coeffs != 0))
    reduced = coeffs[zero_order:]

    found = np.zeros(zero_order, dtype=complex)
    if reduced.size > 1:
        eigen = npoly.polyroots(reduced)
        found = np.concatenate([found, _polish(poly, np.asarray(eigen, dtype=complex))])

    residuals = np.abs(poly(found)) if found.size else np.zeros(0)
    if np.any(residuals > ROOT_RESIDUAL_TOLERANCE * scale) or not np.all(np.isfinite(found)):
        logger.error("Root residual check failed", degree=poly.degree, max_residual=float(np.max(residuals)))
        raise RootFindingError(
            f"Root solver did not converge for degree {poly.degree} polynomial",
            partial_roots=[complex(r) for r in found],
        )

    roots = _cluster_roots(found, ROOT_CLUSTER_TOLERANCE)
    logger.debug("Polynomial roots found", degree=poly.degree, distinct=len(roots))
    return roots
