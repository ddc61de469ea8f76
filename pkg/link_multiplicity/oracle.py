"""
Exact ground truth for corpus curves: order of vanishing of the implicit
equation, the point-curve degree count by root counting, and the complex link.
All three must agree; certify() checks that they do.
"""

import math
from dataclasses import dataclass

import numpy as np
import structlog

from link_multiplicity.corpus import ON_CURVE_TOLERANCE, CorpusCurve, Parametrization
from link_multiplicity.errors import (
    CertificateMismatch,
    ConsensusError,
    DegenerateSliceError,
    DomainError,
    NumericalError,
    SplitError,
    ValidationError,
)
from link_multiplicity.geometry import (
    SLAB_METRICS,
    AnnulusSpec,
    ChartPoint,
    LinkGeometry,
    SliceFunctional,
    random_unit_direction,
)
from link_multiplicity.specialfn import ComplexPolynomial, complex_roots

logger = structlog.get_logger(__name__)

IMAGE_TOLERANCE = 1.0e-6
COEFFICIENT_TOLERANCE = 1.0e-12
DEFAULT_CONSENSUS_TRIALS = 3
DEFAULT_DRAW_ATTEMPTS = 50
SLAB_BOUNDARY_ANGLES = 256


@dataclass(frozen=True)
class MultiplicityCertificate:
    """Three independent computations of the multiplicity, which agree."""

    curve_id: str
    order_of_vanishing: int
    lambda0: int
    link_cardinality: int
    link_points: LinkGeometry
    slice: SliceFunctional

    @property
    def value(self) -> int:
        return self.order_of_vanishing


def _on_curve(curve: CorpusCurve, point: ChartPoint) -> bool:
    x0, y0 = point.complex_coords[:2]
    return abs(curve.implicit(x0, y0)) <= ON_CURVE_TOLERANCE


def order_of_vanishing(curve: CorpusCurve, point: ChartPoint | None = None) -> int:
    """Lowest total degree of the implicit equation expanded at point (the base point by default)."""
    point = point or curve.base_point
    x0, y0 = (complex(v) for v in point.complex_coords[:2])
    shifted = curve.implicit.expand_at(x0, y0)
    scale = max(abs(c) for c in shifted.values())
    if abs(shifted.get((0, 0), 0j)) > ON_CURVE_TOLERANCE * max(scale, 1.0):
        raise ValidationError(f"Curve {curve.id!r} does not pass through the point", [f"f(p) = {shifted[(0, 0)]}"])
    degrees = [i + j for (i, j), c in shifted.items() if (i, j) != (0, 0) and abs(c) > COEFFICIENT_TOLERANCE * scale]
    if not degrees:
        raise ValidationError(f"Implicit equation of {curve.id!r} vanishes identically")
    return min(degrees)


def level_polynomial(
    phi: Parametrization, base: np.ndarray, direction: tuple[complex, ...], level: complex
) -> ComplexPolynomial:
    """g(t) = <phi(t) - p, xi> - level = sum conj(xi_j) (P_j(t) - p_j) - level."""
    length = max(len(c.coefficients) for c in phi.components)
    coeffs = np.zeros(length, dtype=complex)
    for comp, p, xi in zip(phi.components, base, direction, strict=True):
        padded = np.zeros(length, dtype=complex)
        padded[: len(comp.coefficients)] = comp.coefficients
        padded[0] -= p
        coeffs += np.conj(xi) * padded
    coeffs[0] -= level
    scale = float(np.max(np.abs(coeffs))) or 1.0
    coeffs[np.abs(coeffs) <= COEFFICIENT_TOLERANCE * scale] = 0
    return ComplexPolynomial(tuple(coeffs))


def _distinct_points(points: np.ndarray) -> list[np.ndarray]:
    representatives: list[np.ndarray] = []
    for pt in points:
        if not any(np.linalg.norm(pt - rep) < IMAGE_TOLERANCE for rep in representatives):
            representatives.append(pt)
    return representatives


def _level_images(phi: Parametrization, base: np.ndarray, direction: tuple[complex, ...], level: complex):
    poly = level_polynomial(phi, base, direction, level)
    if poly.degree != phi.degree:
        raise DegenerateSliceError(
            f"Direction drops the degree of the level equation to {poly.degree} (curve degree {phi.degree})"
        )
    roots = complex_roots(poly)
    images = phi(np.array([r.value for r in roots], dtype=complex)).reshape(len(roots), -1)
    return roots, _distinct_points(images)


def _lambda0_single(phi: Parametrization, base: np.ndarray, direction: tuple[complex, ...], level: complex) -> int:
    _, at_zero = _level_images(phi, base, direction, 0.0)
    if not any(np.linalg.norm(img - base) < IMAGE_TOLERANCE for img in at_zero):
        raise DegenerateSliceError("The base point is not among the level-0 intersection points")
    roots, generic = _level_images(phi, base, direction, level)
    if any(r.multiplicity > 1 for r in roots) or len(generic) != phi.degree:
        raise DegenerateSliceError(
            f"Level {level} is not generic: {len(generic)} distinct points, expected {phi.degree}"
        )
    return len(generic) - len(at_zero) + 1


def lambda0_by_roots(curve: CorpusCurve, slice: SliceFunctional, trials: int, seed: int = 0) -> int:
    """
    Point-curve degree count #(C on a generic level) - #(C on level 0) + 1, agreed across trials.

    The first trial uses the slice itself at level delta; further trials draw a
    fresh unit direction and a random complex level from default_rng([seed, k]).

    Raises:
        ValidationError: trials < 1 or no parametrization
        DegenerateSliceError: a draw is not generic
        ConsensusError: trials disagree
    """
    if trials < 1:
        raise ValidationError(f"lambda0 needs at least one trial, got {trials}")
    phi = curve.require_parametrization()
    base = slice.base.complex_coords
    values = [_lambda0_single(phi, base, slice.direction, complex(slice.offset))]
    for k in range(1, trials):
        rng = np.random.default_rng([seed, k])
        direction = random_unit_direction(rng, slice.base.ambient_complex_dim)
        level = complex(rng.standard_normal(), rng.standard_normal())
        values.append(_lambda0_single(phi, base, direction, level))
    if len(set(values)) > 1:
        raise ConsensusError(f"lambda0 trials disagree for {curve.id!r}: {values}")
    logger.debug("lambda0 computed", curve_id=curve.id, value=values[0], trials=trials)
    return values[0]


def _stretch(phi: Parametrization, direction: tuple[complex, ...], t: complex) -> float:
    """|phi'(t)| / |<phi'(t), xi>|: distance travelled on C per unit change of the level."""
    velocity = phi.tangent(t)
    along = abs(complex(np.sum(velocity * np.conj(np.asarray(direction, dtype=complex)))))
    return math.inf if along == 0.0 else float(np.linalg.norm(velocity)) / along


def _link_parameters(phi: Parametrization, slice: SliceFunctional) -> tuple[np.ndarray, np.ndarray]:
    """Parameter values on the level delta and their images."""
    roots, _ = _level_images(phi, slice.base.complex_coords, slice.direction, complex(slice.offset))
    params = np.array([r.value for r in roots], dtype=complex)
    return params, phi(params).reshape(len(params), -1)


def link_points(curve: CorpusCurve, slice: SliceFunctional, annulus: AnnulusSpec) -> LinkGeometry:
    """
    Points of C on the complex offset hyperplane <z - p, xi> = delta inside the outer ball,
    with the stretch factor of C at each of them.

    Raises:
        SplitError: an intersection point lies in the shell epsilon <= |x - p| <= 2 epsilon
    """
    phi = curve.require_parametrization()
    base = slice.base.complex_coords
    params, images = _link_parameters(phi, slice)
    near, ambiguous = [], []
    for img in _distinct_points(images):
        radius = float(np.linalg.norm(img - base))
        if radius < annulus.outer:
            t = params[int(np.argmin(np.linalg.norm(images - img, axis=1)))]
            near.append((ChartPoint.from_complex(img), _stretch(phi, slice.direction, t)))
        elif radius <= 2.0 * annulus.outer:
            ambiguous.append(radius)
    if ambiguous:
        raise SplitError(
            f"Link points do not split at epsilon={annulus.outer}: radii {ambiguous}; use a smaller delta"
        )
    if not near:
        raise SplitError(f"No intersection point within epsilon={annulus.outer} of the base point")
    near.sort(key=lambda item: item[0].coords)
    return LinkGeometry.from_points([pt for pt, _ in near], annulus, stretch=[s for _, s in near])


def slab_radius(
    curve: CorpusCurve,
    slice: SliceFunctional,
    link: LinkGeometry,
    alpha: float,
    metric: str = "real",
    angles: int = SLAB_BOUNDARY_ANGLES,
) -> float:
    """
    Largest distance from a link point x_i to the slab's trace on C around it.

    complex: around t_i the trace is the disc |g(t)| < alpha with g(t) = <phi(t) - p, xi> - delta.
    |phi(t) - x_i|^2 is subharmonic, so its sup is taken on the boundary g(t) = alpha e^(i theta),
    which is traced by following the root nearest the previous one as theta goes round.
    real: the trace holds the arc Re g = 0 through x_i up to the annulus boundary, so it is not
    localized around x_i and the radius is inf.
    """
    if metric not in SLAB_METRICS:
        raise DomainError(f"Unknown slab metric {metric!r}, expected one of {SLAB_METRICS}")
    if not alpha > 0.0:
        raise DomainError(f"Slab thickness alpha must be positive, got {alpha}")
    if metric == "real":
        return math.inf
    phi = curve.require_parametrization()
    base = slice.base.complex_coords
    params, images = _link_parameters(phi, slice)
    targets = np.stack([pt.complex_coords for pt in link.points])
    tracks = np.array([params[int(np.argmin(np.linalg.norm(images - x, axis=1)))] for x in targets])
    radii = np.zeros(len(targets))
    for theta in 2.0 * math.pi * np.arange(angles + 1) / angles:
        level = slice.offset + alpha * complex(math.cos(theta), math.sin(theta))
        roots = np.array([r.value for r in complex_roots(level_polynomial(phi, base, slice.direction, level))])
        tracks = np.array([roots[int(np.argmin(np.abs(roots - t)))] for t in tracks])
        radii = np.maximum(radii, np.linalg.norm(phi(tracks).reshape(len(tracks), -1) - targets, axis=1))
    radius = float(np.max(radii))
    logger.debug("Slab radius traced", curve_id=curve.id, alpha=alpha, radius=radius, metric=metric)
    return radius


def certify(
    curve: CorpusCurve,
    slice: SliceFunctional,
    annulus: AnnulusSpec,
    trials: int = DEFAULT_CONSENSUS_TRIALS,
    seed: int = 0,
) -> MultiplicityCertificate:
    """
    Compute order of vanishing, lambda0 and link cardinality and check they agree.

    Raises:
        ValidationError: the slice base point is not on the curve
        CertificateMismatch: the three integers disagree
    """
    if not _on_curve(curve, slice.base):
        raise ValidationError(f"Base point is not on curve {curve.id!r}", [f"p = {slice.base.coords}"])
    vanishing = order_of_vanishing(curve, slice.base)
    lambda0 = lambda0_by_roots(curve, slice, trials, seed)
    link = link_points(curve, slice, annulus)
    if not vanishing == lambda0 == link.cardinality:
        raise CertificateMismatch(
            f"Multiplicity computations disagree for {curve.id!r}: order of vanishing {vanishing}, "
            f"lambda0 {lambda0}, link cardinality {link.cardinality}"
        )
    logger.info("Certificate issued", curve_id=curve.id, multiplicity=vanishing)
    return MultiplicityCertificate(
        curve_id=curve.id,
        order_of_vanishing=vanishing,
        lambda0=lambda0,
        link_cardinality=link.cardinality,
        link_points=link,
        slice=slice,
    )


def draw_generic_slice(
    curve: CorpusCurve,
    annulus: AnnulusSpec,
    rng: np.random.Generator,
    delta: float,
    max_attempts: int = DEFAULT_DRAW_ATTEMPTS,
) -> tuple[SliceFunctional, MultiplicityCertificate]:
    """Draw unit directions until one certifies; numerical failures trigger a re-draw."""
    for attempt in range(max_attempts):
        direction = random_unit_direction(rng, annulus.center.ambient_complex_dim)
        slice = SliceFunctional(base=annulus.center, direction=direction, offset=delta)
        try:
            return slice, certify(curve, slice, annulus, seed=int(rng.integers(2**32)))
        except NumericalError as e:
            logger.debug("Slice re-drawn", curve_id=curve.id, attempt=attempt, reason=str(e))
    logger.error("No generic slice found", curve_id=curve.id, attempts=max_attempts)
    raise DegenerateSliceError(f"No generic slice for {curve.id!r} after {max_attempts} attempts; try another seed")
