"""
Affine-chart geometry around the base point p.

Points of C^(n+1) are stored as real vectors of length 2n+2 with interleaved
real and imaginary parts: (re0, im0, re1, im1, ...). Under this layout the real
part of the Hermitian product Re<z, w> is the plain real dot product.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import structlog

from link_multiplicity.errors import DomainError, ValidationError

logger = structlog.get_logger(__name__)

UNIT_TOLERANCE = 1.0e-12
SLAB_METRICS = ("real", "complex")

# Names of the terms in the alpha constraint, in the order they are reported
TERM_OUTER = "epsilon - delta"
TERM_INNER = "delta - inner_radius"
TERM_SEPARATION = "mu / 4"
TERM_BOUNDARY = "kappa"
TERM_REGULARITY = "Delta / 2"
# Slab trace on C within alpha of the link points; checked apart from the alpha bound
TERM_LOCALIZATION = "slab radius <= alpha"
LOCALIZATION_TOLERANCE = 1.0e-9


def to_real(values: Sequence[complex] | np.ndarray) -> np.ndarray:
    """Complex coordinates -> interleaved real vector (works row-wise on 2-D input)."""
    arr = np.asarray(values, dtype=complex)
    out = np.empty(arr.shape[:-1] + (2 * arr.shape[-1],), dtype=float)
    out[..., 0::2] = arr.real
    out[..., 1::2] = arr.imag
    return out


def to_complex(coords: np.ndarray) -> np.ndarray:
    """Interleaved real vector(s) -> complex coordinates."""
    arr = np.asarray(coords, dtype=float)
    return arr[..., 0::2] + 1j * arr[..., 1::2]


@dataclass(frozen=True)
class ChartPoint:
    """A point of C^(n+1) stored as 2n+2 interleaved real coordinates."""

    coords: tuple[float, ...]

    def __post_init__(self) -> None:
        coords = tuple(float(c) for c in self.coords)
        if not coords or len(coords) % 2:
            raise DomainError(f"Chart coordinates need an even, positive length, got {len(coords)}")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_complex(cls, values: Sequence[complex]) -> "ChartPoint":
        return cls(tuple(to_real(values)))

    @classmethod
    def origin(cls, ambient_complex_dim: int) -> "ChartPoint":
        return cls((0.0,) * (2 * ambient_complex_dim))

    @property
    def ambient_complex_dim(self) -> int:
        return len(self.coords) // 2

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    @property
    def complex_coords(self) -> np.ndarray:
        return to_complex(self.array)


def _as_rows(z: "ChartPoint | np.ndarray", dim: int) -> tuple[np.ndarray, bool]:
    arr = z.array if isinstance(z, ChartPoint) else np.asarray(z, dtype=float)
    single = arr.ndim == 1
    rows = arr.reshape(1, -1) if single else arr
    if rows.shape[-1] != dim:
        raise DomainError(f"Dimension mismatch: expected {dim} real coordinates, got {rows.shape[-1]}")
    return rows, single


def random_unit_direction(rng: np.random.Generator, ambient_complex_dim: int) -> tuple[complex, ...]:
    """Direction drawn uniformly from the unit sphere of C^(n+1)."""
    gaussian = rng.standard_normal(2 * ambient_complex_dim)
    gaussian /= np.linalg.norm(gaussian)
    return tuple(complex(c) for c in to_complex(gaussian))


@dataclass(frozen=True)
class SliceFunctional:
    """
    The triple (p, xi, delta).

    pi_xi(z) = Re<z - p, xi> and the offset hyperplane is pi_xi^-1(delta).
    """

    base: ChartPoint
    direction: tuple[complex, ...]
    offset: float
    real_direction: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        direction = tuple(complex(c) for c in self.direction)
        object.__setattr__(self, "direction", direction)
        if len(direction) != self.base.ambient_complex_dim:
            raise DomainError(
                f"Direction has {len(direction)} complex entries, base point has {self.base.ambient_complex_dim}"
            )
        norm = math.sqrt(sum(abs(c) ** 2 for c in direction))
        if abs(norm - 1.0) > UNIT_TOLERANCE:
            raise DomainError(f"Slice direction must be a unit vector, norm is {norm!r}")
        if not self.offset > 0.0:
            raise DomainError(f"Slice offset delta must be positive, got {self.offset}")
        object.__setattr__(self, "real_direction", to_real(direction))

    @property
    def real_dim(self) -> int:
        return len(self.base.coords)

    def complex_level(self, z: "ChartPoint | np.ndarray") -> complex | np.ndarray:
        """The complex functional <z - p, xi> (linear in z)."""
        rows, single = _as_rows(z, self.real_dim)
        values = to_complex(rows - self.base.array) @ np.conj(np.asarray(self.direction, dtype=complex))
        return complex(values[0]) if single else values


def pi_xi(slice: SliceFunctional, z: "ChartPoint | np.ndarray") -> float | np.ndarray:
    """Re<z - p, xi>; accepts one point or an (m, 2n+2) array."""
    rows, single = _as_rows(z, slice.real_dim)
    values = (rows - slice.base.array) @ slice.real_direction
    return float(values[0]) if single else values


def hyperplane_distance(
    slice: SliceFunctional, z: "ChartPoint | np.ndarray", metric: str = "real"
) -> float | np.ndarray:
    """
    Distance from z to the offset hyperplane.

    metric="real" measures to the real hyperplane pi_xi^-1(delta), i.e. |pi_xi(z) - delta|.
    metric="complex" measures to the complex hyperplane <z - p, xi> = delta, i.e. |<z - p, xi> - delta|.
    Both are Euclidean distances because xi is a unit vector.
    """
    if metric == "real":
        values = np.abs(np.asarray(pi_xi(slice, z)) - slice.offset)
    elif metric == "complex":
        values = np.abs(np.asarray(slice.complex_level(z)) - slice.offset)
    else:
        raise DomainError(f"Unknown slab metric {metric!r}, expected one of {SLAB_METRICS}")
    return float(values) if values.ndim == 0 else values


@dataclass(frozen=True)
class AnnulusSpec:
    """Closed ball of radius outer around center, minus the open ball of radius inner."""

    center: ChartPoint
    outer: float
    inner: float

    def __post_init__(self) -> None:
        if not 0.0 < self.inner < self.outer:
            raise DomainError(f"Annulus radii must satisfy 0 < inner < outer, got {self.inner}, {self.outer}")


def in_annulus(annulus: AnnulusSpec, z: "ChartPoint | np.ndarray") -> bool | np.ndarray:
    """True iff inner <= |z - p| <= outer."""
    rows, single = _as_rows(z, len(annulus.center.coords))
    radii = np.linalg.norm(rows - annulus.center.array, axis=1)
    inside = (radii >= annulus.inner) & (radii <= annulus.outer)
    return bool(inside[0]) if single else inside


@dataclass(frozen=True)
class LinkGeometry:
    """
    The link points x_i with their minimum pairwise distance mu and boundary gap kappa.

    stretch[i] = |phi'(t_i)| / |<phi'(t_i), xi>| >= 1 when the link comes from a parametrization:
    a slab point at hyperplane distance d lies about d * stretch[i] from x_i.
    """

    points: tuple[ChartPoint, ...]
    cardinality: int
    min_pairwise: float
    boundary_gap: float
    stretch: tuple[float, ...] = ()

    @classmethod
    def from_points(
        cls, points: Sequence[ChartPoint], annulus: AnnulusSpec, stretch: Sequence[float] = ()
    ) -> "LinkGeometry":
        if not points:
            raise ValidationError("A complex link needs at least one point")
        if stretch and len(stretch) != len(points):
            raise ValidationError(f"Got {len(stretch)} stretch factors for {len(points)} link points")
        coords = np.stack([pt.array for pt in points])
        radii = np.linalg.norm(coords - annulus.center.array, axis=1)
        if np.any(radii >= annulus.outer) or np.any(radii < annulus.inner):
            raise ValidationError("Link points must lie strictly inside the outer ball and outside the inner ball")
        if len(points) > 1:
            gaps = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
            mu = float(np.min(gaps[np.triu_indices(len(points), k=1)]))
        else:
            mu = math.inf
        return cls(
            points=tuple(points),
            cardinality=len(points),
            min_pairwise=mu,
            boundary_gap=float(np.min(annulus.outer - radii)),
            stretch=tuple(float(s) for s in stretch),
        )

    @property
    def max_stretch(self) -> float | None:
        return max(self.stretch) if self.stretch else None


@dataclass(frozen=True)
class ViolatedTerm:
    name: str
    bound: float


@dataclass(frozen=True)
class ParameterReport:
    """Outcome of the alpha constraint check; violations are data, not errors."""

    ok: bool
    alpha: float
    terms: dict[str, float]
    violations: tuple[ViolatedTerm, ...] = ()
    unchecked: tuple[str, ...] = ()
    slab_radius: float | None = None
    slab_localized: bool | None = None

    @property
    def upper_bound(self) -> float:
        return min(self.terms.values())

    @property
    def within_hypotheses(self) -> bool:
        """Every alpha term is known and holds, and the slab trace sits inside the alpha-balls around the link."""
        return self.ok and not self.unchecked and self.slab_localized is True

    def describe(self) -> list[str]:
        return [f"alpha={self.alpha} >= {v.name} = {v.bound}" for v in self.violations]


@dataclass(frozen=True)
class LinkParameters:
    """
    The full parameter tuple (epsilon, inner radius, delta, alpha) with the
    derived quantities mu, kappa (from link) and Delta (regularity).

    link and regularity are None in blind mode, where they are unknown. slab_radius is
    the largest distance from a link point to the slab's trace on C around it, for the
    slab metric in use; None when unknown, inf when the trace is not localized.
    """

    slice: SliceFunctional
    annulus: AnnulusSpec
    thickness: float
    regularity: float | None = None
    link: LinkGeometry | None = None
    slab_radius: float | None = None

    def __post_init__(self) -> None:
        violations = []
        if not self.thickness > 0.0:
            violations.append(f"alpha={self.thickness} must be positive")
        if not self.annulus.inner < self.slice.offset < self.annulus.outer:
            violations.append(
                f"delta={self.slice.offset} must lie strictly between inner_radius={self.annulus.inner} "
                f"and epsilon={self.annulus.outer}"
            )
        if self.annulus.center != self.slice.base:
            violations.append("annulus center and slice base point differ")
        if self.regularity is not None and not self.regularity > 0.0:
            violations.append(f"Delta={self.regularity} must be positive")
        if self.slab_radius is not None and not self.slab_radius > 0.0:
            violations.append(f"slab_radius={self.slab_radius} must be positive")
        if violations:
            raise ValidationError("Inconsistent link parameters", violations)

    def constraint_terms(self) -> tuple[dict[str, float], tuple[str, ...]]:
        return constraint_terms(self.slice, self.annulus, self.regularity, self.link)


def constraint_terms(
    slice: SliceFunctional,
    annulus: AnnulusSpec,
    regularity: float | None = None,
    link: LinkGeometry | None = None,
) -> tuple[dict[str, float], tuple[str, ...]]:
    """Known terms of the alpha bound and the names of the unknown ones."""
    terms = {
        TERM_OUTER: annulus.outer - slice.offset,
        TERM_INNER: slice.offset - annulus.inner,
    }
    unchecked = []
    if link is not None:
        terms[TERM_SEPARATION] = link.min_pairwise / 4.0
        terms[TERM_BOUNDARY] = link.boundary_gap
    else:
        unchecked += [TERM_SEPARATION, TERM_BOUNDARY]
    if regularity is not None:
        terms[TERM_REGULARITY] = regularity / 2.0
    else:
        unchecked.append(TERM_REGULARITY)
    return terms, tuple(unchecked)


def validate_parameters(params: LinkParameters) -> ParameterReport:
    """
    alpha < min{epsilon - delta, delta - inner, mu/4, kappa, Delta/2}; every violated term is named.

    The slab localization (slab radius <= alpha) is reported beside the bound and does not
    affect ok: the radius is never below alpha and only equals it where C crosses the
    hyperplane orthogonally, so most runs sit outside that hypothesis.
    """
    terms, unchecked = params.constraint_terms()
    violations = tuple(ViolatedTerm(name, bound) for name, bound in terms.items() if not params.thickness < bound)
    if params.slab_radius is None:
        localized = None
        unchecked += (TERM_LOCALIZATION,)
    else:
        localized = params.slab_radius <= params.thickness * (1.0 + LOCALIZATION_TOLERANCE)
    report = ParameterReport(
        ok=not violations,
        alpha=params.thickness,
        terms=terms,
        violations=violations,
        unchecked=unchecked,
        slab_radius=params.slab_radius,
        slab_localized=localized,
    )
    if violations:
        logger.warning("Alpha constraint violated", alpha=params.thickness, violations=report.describe())
    if localized is False:
        logger.info("Slab trace leaves the alpha-balls", alpha=params.thickness, slab_radius=params.slab_radius)
    return report


def alpha_from_fraction(
    slice: SliceFunctional,
    annulus: AnnulusSpec,
    fraction: float,
    regularity: float | None = None,
    link: LinkGeometry | None = None,
) -> float:
    """fraction times the minimum of the known alpha-bound terms."""
    if not 0.0 < fraction < 1.0:
        raise DomainError(f"Alpha fraction must lie in (0, 1), got {fraction}")
    terms, _ = constraint_terms(slice, annulus, regularity, link)
    return fraction * min(terms.values())
