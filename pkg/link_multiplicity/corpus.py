"""
Ground-truth test curves, uniform sampling of the annulus C' and numerical
estimation of the regularity data (reach, boundary reach, injectivity radius, area).
"""

import math
from dataclasses import dataclass, field

import numpy as np
import structlog
from scipy.integrate import quad
from scipy.optimize import brentq, minimize
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from sklearn.decomposition import PCA

from link_multiplicity.errors import SamplingError, ValidationError
from link_multiplicity.geometry import AnnulusSpec, ChartPoint, to_real
from link_multiplicity.specialfn import ComplexPolynomial, complex_roots

logger = structlog.get_logger(__name__)

ON_CURVE_TOLERANCE = 1.0e-9
PREIMAGE_TOLERANCE = 1.0e-9

SAMPLER_GRID = 257
SAMPLER_PAD_CELLS = 2
SAMPLER_BATCH = 65_536
SAMPLER_MIN_PROPOSALS = 1_000_000
SAMPLER_PROPOSALS_PER_POINT = 10_000
JMAX_MARGIN = 1.0e-6

PROBE_NEIGHBORS = 8
SAFETY_FACTOR = 0.5
GEODESIC_DISTORTION = 1.5
TANGENT_TOLERANCE = 1.0e-12


@dataclass(frozen=True)
class PlanePolynomial:
    """f(x, y) = sum c_ij x^i y^j, stored as ((i, j), c_ij) terms."""

    terms: tuple[tuple[tuple[int, int], complex], ...]

    @classmethod
    def from_dict(cls, coefficients: dict[tuple[int, int], complex]) -> "PlanePolynomial":
        return cls(tuple(sorted((k, complex(v)) for k, v in coefficients.items() if v != 0)))

    def __call__(self, x: complex | np.ndarray, y: complex | np.ndarray) -> complex | np.ndarray:
        return sum(c * np.power(x, i) * np.power(y, j) for (i, j), c in self.terms)

    def expand_at(self, x0: complex, y0: complex) -> dict[tuple[int, int], complex]:
        """Coefficients of f(x + x0, y + y0) in the shifted monomials."""
        shifted: dict[tuple[int, int], complex] = {}
        for (i, j), c in self.terms:
            for k in range(i + 1):
                cx = math.comb(i, k) * x0 ** (i - k)
                for m in range(j + 1):
                    cy = math.comb(j, m) * y0 ** (j - m)
                    shifted[(k, m)] = shifted.get((k, m), 0j) + c * cx * cy
        return shifted


@dataclass(frozen=True)
class Parametrization:
    """t -> (P_0(t), ..., P_n(t)) for polynomials P_j."""

    components: tuple[ComplexPolynomial, ...]
    derivatives: tuple[ComplexPolynomial, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "derivatives", tuple(c.derivative() for c in self.components))

    @classmethod
    def from_coefficients(cls, *components: tuple[complex, ...]) -> "Parametrization":
        return cls(tuple(ComplexPolynomial(tuple(c)) for c in components))

    @classmethod
    def monomial(cls, a: int, b: int) -> "Parametrization":
        return cls.from_coefficients((0,) * a + (1,), (0,) * b + (1,))

    @property
    def ambient_complex_dim(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    def __call__(self, t: complex | np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        return np.stack([c(t) for c in self.components], axis=-1)

    def tangent(self, t: complex | np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=complex)
        return np.stack([d(t) for d in self.derivatives], axis=-1)

    def area_element(self, t: complex | np.ndarray) -> np.ndarray:
        """|phi'(t)|^2, the area distortion of the holomorphic map."""
        t = np.asarray(t, dtype=complex)
        return sum(np.abs(d(t)) ** 2 for d in self.derivatives)

    def preimages(self, point: np.ndarray) -> list[complex]:
        """Parameter values t with phi(t) = point."""
        moving = [(c, p) for c, p in zip(self.components, point, strict=True) if c.degree >= 1]
        for c, p in zip(self.components, point, strict=True):
            if c.degree == 0 and abs(c.coefficients[0] - p) > PREIMAGE_TOLERANCE:
                return []
        pivot, target = min(moving, key=lambda cp: cp[0].degree)
        shifted = ComplexPolynomial((pivot.coefficients[0] - target,) + pivot.coefficients[1:])
        candidates = [r.value for r in complex_roots(shifted)]
        return [t for t in candidates if np.max(np.abs(self(t) - point)) <= PREIMAGE_TOLERANCE * (1 + abs(t))]


@dataclass(frozen=True)
class CorpusCurve:
    """A test curve with base point p and its exact multiplicity there."""

    id: str
    form: str
    implicit: PlanePolynomial
    parametrization: Parametrization | None
    base_point: ChartPoint
    true_multiplicity: int
    exponents: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        problems = []
        x0, y0 = self.base_point.complex_coords[:2]
        if abs(self.implicit(x0, y0)) > ON_CURVE_TOLERANCE:
            problems.append("base point does not satisfy the implicit equation")
        if self.form == "monomial":
            if self.exponents is None:
                problems.append("monomial form needs exponents (a, b)")
            else:
                a, b = self.exponents
                if not (1 <= a < b and math.gcd(a, b) == 1):
                    problems.append(f"monomial exponents must satisfy 1 <= a < b, gcd(a, b) = 1; got {a}, {b}")
                elif self.true_multiplicity != a:
                    problems.append(f"monomial multiplicity must equal a={a}")
        elif self.form != "implicit":
            problems.append(f"unknown form {self.form!r}")
        if problems:
            raise ValidationError(f"Invalid corpus curve {self.id!r}", problems)

    def require_parametrization(self) -> Parametrization:
        if self.parametrization is None:
            raise ValidationError(f"Curve {self.id!r} has no parametrization; only parametrized curves can be sampled")
        return self.parametrization


def monomial_curve(curve_id: str, a: int, b: int) -> CorpusCurve:
    """t -> (t^a, t^b) with implicit equation y^a - x^b."""
    return CorpusCurve(
        id=curve_id,
        form="monomial",
        implicit=PlanePolynomial.from_dict({(0, a): 1, (b, 0): -1}),
        parametrization=Parametrization.monomial(a, b),
        base_point=ChartPoint.origin(2),
        true_multiplicity=a,
        exponents=(a, b),
    )


def builtin_corpus() -> list[CorpusCurve]:
    """The built-in curves, all based at the origin of C^2."""
    return [
        CorpusCurve(
            id="smooth",
            form="implicit",
            implicit=PlanePolynomial.from_dict({(0, 1): 1}),
            parametrization=Parametrization.from_coefficients((0, 1), (0,)),
            base_point=ChartPoint.origin(2),
            true_multiplicity=1,
        ),
        monomial_curve("cusp", 2, 3),
        CorpusCurve(
            id="node",
            form="implicit",
            implicit=PlanePolynomial.from_dict({(0, 2): 1, (2, 0): -1, (3, 0): -1}),
            parametrization=Parametrization.from_coefficients((-1, 0, 1), (0, -1, 0, 1)),
            base_point=ChartPoint.origin(2),
            true_multiplicity=2,
        ),
        monomial_curve("triple", 3, 4),
        monomial_curve("quadruple", 4, 5),
    ]


def corpus_curve(curve_id: str) -> CorpusCurve:
    curves = {curve.id: curve for curve in builtin_corpus()}
    if curve_id not in curves:
        raise ValidationError(f"Unknown curve {curve_id!r}", [f"known curves: {', '.join(curves)}"])
    return curves[curve_id]


@dataclass(frozen=True)
class SampleSet:
    """Points of C' (rows of an (m, 2n+2) array) with their provenance."""

    points: np.ndarray = field(compare=False)
    seed: int | None
    curve_id: str | None
    annulus: AnnulusSpec
    parameters: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float, copy=True)
        if points.ndim != 2 or points.shape[1] != len(self.annulus.center.coords):
            raise ValidationError(f"Sample points must be an (m, {len(self.annulus.center.coords)}) array")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def chart_points(self) -> list[ChartPoint]:
        return [ChartPoint(tuple(row)) for row in self.points]


@dataclass(frozen=True)
class _ProposalBox:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float
    jmax: float


def _search_radius(phi: Parametrization, base: np.ndarray, outer: float) -> float:
    """Cauchy bound on |t| for |P_j(t) - p_j| <= outer, minimized over the moving components."""
    radii = []
    for comp, p in zip(phi.components, base, strict=True):
        if comp.degree < 1:
            continue
        coeffs = np.abs(np.asarray(comp.coefficients, dtype=complex))
        coeffs[0] = abs(comp.coefficients[0] - p) + outer
        radii.append(1.0 + float(np.max(coeffs[:-1]) / coeffs[-1]))
    return min(radii)


def _ball_mask(phi: Parametrization, base: np.ndarray, outer: float, t: np.ndarray) -> np.ndarray:
    return np.linalg.norm(phi(t) - base, axis=-1) <= outer


def _grid(re_lo: float, re_hi: float, im_lo: float, im_hi: float) -> np.ndarray:
    re, im = np.meshgrid(np.linspace(re_lo, re_hi, SAMPLER_GRID), np.linspace(im_lo, im_hi, SAMPLER_GRID))
    return re + 1j * im


def _proposal_box(phi: Parametrization, annulus: AnnulusSpec) -> _ProposalBox:
    """Parameter box covering phi^-1(B_outer(p)) and the maximum of |phi'|^2 on it."""
    base = annulus.center.complex_coords
    radius = _search_radius(phi, base, annulus.outer)
    box = (-radius, radius, -radius, radius)
    for _ in range(2):
        t = _grid(*box)
        inside = _ball_mask(phi, base, annulus.outer, t)
        if not inside.any():
            raise SamplingError("The annulus does not meet the curve on the parameter search grid")
        h_re = (box[1] - box[0]) / (SAMPLER_GRID - 1)
        h_im = (box[3] - box[2]) / (SAMPLER_GRID - 1)
        pad_re, pad_im = SAMPLER_PAD_CELLS * h_re, SAMPLER_PAD_CELLS * h_im
        box = (
            float(t.real[inside].min() - pad_re),
            float(t.real[inside].max() + pad_re),
            float(t.imag[inside].min() - pad_im),
            float(t.imag[inside].max() + pad_im),
        )

    t = _grid(*box)
    area = phi.area_element(t)
    start = t.flat[int(np.argmax(area))]
    refined = minimize(
        lambda v: -float(phi.area_element(complex(v[0], v[1]))),
        x0=[start.real, start.imag],
        bounds=[(box[0], box[1]), (box[2], box[3])],
        method="L-BFGS-B",
    )
    jmax = max(float(area.max()), -float(refined.fun)) * (1.0 + JMAX_MARGIN)
    return _ProposalBox(*box, jmax=jmax)


def sample_uniform(curve: CorpusCurve, annulus: AnnulusSpec, count: int, seed: int) -> SampleSet:
    """
    Draw count i.i.d. points from the uniform area measure on C'.

    Proposals are uniform on a parameter box and accepted with probability
    |phi'(t)|^2 / max |phi'|^2 when phi(t) lies in the annulus.

    Args:
        curve: Parametrized corpus curve
        annulus: The annulus around the base point
        count: Number of points, >= 1
        seed: Seed of the numpy generator

    Returns:
        SampleSet reproducible from seed
    """
    if count < 1:
        raise ValidationError(f"Sample count must be >= 1, got {count}")
    phi = curve.require_parametrization()
    base = annulus.center.complex_coords
    box = _proposal_box(phi, annulus)
    rng = np.random.default_rng(seed)

    accepted: list[np.ndarray] = []
    n_accepted = 0
    proposals = 0
    budget = max(SAMPLER_MIN_PROPOSALS, SAMPLER_PROPOSALS_PER_POINT * count)
    while n_accepted < count:
        if proposals >= budget:
            logger.error("Rejection sampler exhausted", curve_id=curve.id, proposals=proposals, accepted=n_accepted)
            raise SamplingError(f"Rejection sampling accepted {n_accepted}/{count} points in {proposals} proposals")
        t = rng.uniform(box.re_lo, box.re_hi, SAMPLER_BATCH) + 1j * rng.uniform(box.im_lo, box.im_hi, SAMPLER_BATCH)
        u = rng.uniform(size=SAMPLER_BATCH)
        proposals += SAMPLER_BATCH

        radii = np.linalg.norm(phi(t) - base, axis=-1)
        area = phi.area_element(t)
        in_shell = (radii >= annulus.inner) & (radii <= annulus.outer)
        if np.any(area[in_shell] > box.jmax):
            raise SamplingError("Area element exceeded its bound; the acceptance ratio would not be uniform")
        keep = in_shell & (u * box.jmax <= area)
        accepted.append(t[keep])
        n_accepted += int(keep.sum())
        logger.debug("Proposal batch", curve_id=curve.id, accepted=n_accepted, proposals=proposals)

    t_all = np.concatenate(accepted)[:count]
    points = to_real(phi(t_all))
    logger.info("Sample drawn", curve_id=curve.id, count=count, seed=seed, proposals=proposals)
    return SampleSet(points=points, seed=seed, curve_id=curve.id, annulus=annulus, parameters=t_all)


@dataclass(frozen=True)
class RegularityData:
    """
    Regularity of C': reach, reach of the boundary, injectivity radius bound and area.
    delta_M is always the minimum of the first three.
    """

    tau_M: float
    tau_boundary: float
    rho_M: float
    volume: float
    intrinsic_dim: int = 2
    delta_M: float = field(init=False)
    probe_density: int | None = None
    probe_count: int | None = None
    safety_factor: float = SAFETY_FACTOR

    def __post_init__(self) -> None:
        values = {"tau_M": self.tau_M, "tau_boundary": self.tau_boundary, "rho_M": self.rho_M, "volume": self.volume}
        bad = [f"{name}={value}" for name, value in values.items() if not value > 0.0]
        if bad:
            raise ValidationError("Regularity data must be positive", bad)
        object.__setattr__(self, "delta_M", min(self.tau_M, self.tau_boundary, self.rho_M))


def tangent_frames(points: np.ndarray, intrinsic_dim: int, neighbors: int = PROBE_NEIGHBORS) -> np.ndarray:
    """Orthonormal tangent bases from PCA over each point's nearest neighbors; shape (m, dim, D)."""
    tree = cKDTree(points)
    _, idx = tree.query(points, k=neighbors + 1)
    frames = np.empty((points.shape[0], intrinsic_dim, points.shape[1]))
    for i, nbrs in enumerate(idx):
        frames[i] = PCA(n_components=intrinsic_dim).fit(points[nbrs]).components_
    return frames


def reach_from_probes(
    points: np.ndarray,
    intrinsic_dim: int,
    neighbors: int = PROBE_NEIGHBORS,
    safety_factor: float = SAFETY_FACTOR,
) -> float:
    """
    Pointwise reach estimator min ||q - q'||^2 / (2 dist(q' - q, T_q)), scaled by safety_factor.

    Pairs inside the PCA neighborhood of q are skipped; pairs whose offset lies
    in T_q (flat directions) do not constrain the reach. Returns inf for flat sets.
    """
    points = np.asarray(points, dtype=float)
    frames = tangent_frames(points, intrinsic_dim, neighbors)
    dists, _ = cKDTree(points).query(points, k=neighbors + 1)
    local_sq = dists[:, -1] ** 2

    best = math.inf
    for i in range(points.shape[0]):
        offsets = points - points[i]
        sq = np.einsum("ij,ij->i", offsets, offsets)
        along = offsets @ frames[i].T @ frames[i]
        normal = np.linalg.norm(offsets - along, axis=1)
        usable = (sq > local_sq[i]) & (normal > TANGENT_TOLERANCE * np.sqrt(sq))
        if usable.any():
            best = min(best, float(np.min(sq[usable] / (2.0 * normal[usable]))))
    return safety_factor * best


def injectivity_from_probes(
    points: np.ndarray,
    sources: np.ndarray,
    neighbors: int = PROBE_NEIGHBORS,
    safety_factor: float = SAFETY_FACTOR,
) -> float:
    """
    Injectivity radius bound from graph geodesics: the smallest ambient distance of a
    pair whose k-NN graph distance exceeds GEODESIC_DISTORTION times it.
    Falls back to the largest finite geodesic distance when no such shortcut exists.
    """
    tree = cKDTree(points)
    dists, idx = tree.query(points, k=neighbors + 1)
    rows = np.repeat(np.arange(points.shape[0]), neighbors)
    graph = csr_matrix((dists[:, 1:].ravel(), (rows, idx[:, 1:].ravel())), shape=(len(points), len(points)))
    geodesic = shortest_path(graph, method="D", directed=False, indices=sources)
    ambient = cdist(points[sources], points)

    finite = np.isfinite(geodesic) & (ambient > 0)
    shortcut = finite & (geodesic > GEODESIC_DISTORTION * ambient)
    if shortcut.any():
        return safety_factor * float(ambient[shortcut].min())
    return safety_factor * float(geodesic[finite].max())


def _ray_radius(phi: Parametrization, base: np.ndarray, t0: complex, theta: float, level: float) -> float:
    """First r > 0 with |phi(t0 + r e^{i theta}) - p| = level."""
    direction = complex(math.cos(theta), math.sin(theta))

    def gap(r: float) -> float:
        return float(np.linalg.norm(phi(t0 + r * direction) - base)) - level

    hi = 1.0e-3
    for _ in range(80):
        if gap(hi) > 0:
            break
        hi *= 2.0
    else:
        raise SamplingError(f"Ray from t0={t0} at angle {theta} never leaves the ball of radius {level}")
    lo = hi / 2.0 if hi > 1.0e-3 else 0.0
    return brentq(gap, lo, hi, xtol=1.0e-14)


@dataclass(frozen=True)
class _Patch:
    """Log-polar probe grid around one preimage t0 of p."""

    t0: complex
    thetas: np.ndarray
    r_in: np.ndarray
    r_out: np.ndarray
    radial_steps: int

    def parameters(self) -> np.ndarray:
        fractions = np.linspace(0.0, 1.0, self.radial_steps)
        radii = self.r_in[:, None] * (self.r_out / self.r_in)[:, None] ** fractions[None, :]
        return self.t0 + radii * np.exp(1j * self.thetas)[:, None]


def _probe_patches(curve: CorpusCurve, annulus: AnnulusSpec, probe_density: int) -> list[_Patch]:
    phi = curve.require_parametrization()
    base = annulus.center.complex_coords
    thetas = 2.0 * math.pi * np.arange(probe_density) / probe_density
    patches = []
    for t0 in phi.preimages(base):
        r_in = np.array([_ray_radius(phi, base, t0, th, annulus.inner) for th in thetas])
        r_out = np.array([_ray_radius(phi, base, t0, th, annulus.outer) for th in thetas])
        steps = max(3, math.ceil(probe_density * float(np.max(np.log(r_out / r_in))) / (2.0 * math.pi)) + 1)
        patches.append(_Patch(t0=t0, thetas=thetas, r_in=r_in, r_out=r_out, radial_steps=steps))
    if not patches:
        raise ValidationError(f"Base point is not on curve {curve.id!r}")
    return patches


def _patch_area(phi: Parametrization, patch: _Patch) -> float:
    """Integral of |phi'|^2 over the patch in polar coordinates; periodic rectangle rule in the angle."""
    per_angle = []
    for theta, lo, hi in zip(patch.thetas, patch.r_in, patch.r_out, strict=True):
        direction = complex(math.cos(theta), math.sin(theta))
        value, _ = quad(lambda r: float(phi.area_element(patch.t0 + r * direction)) * r, lo, hi, epsabs=0.0)
        per_angle.append(value)
    return 2.0 * math.pi * float(np.mean(per_angle))


def ring_spacing(rings: list[np.ndarray]) -> float:
    """Largest gap between consecutive probes over all closed rings, wrap-around included."""
    return max(float(np.max(np.linalg.norm(np.roll(ring, -1, axis=0) - ring, axis=1))) for ring in rings)


def estimate_regularity(curve: CorpusCurve, annulus: AnnulusSpec, probe_density: int = 128) -> RegularityData:
    """
    Numerical RegularityData for C' from a log-polar probe grid in the parameter plane.

    Args:
        curve: Parametrized corpus curve
        annulus: The annulus C' is cut from
        probe_density: Number of angular probe steps per preimage of p

    Returns:
        Reach, boundary reach and injectivity estimates (each times the safety factor) and the area
    """
    if probe_density < 8:
        raise ValidationError(f"probe_density must be >= 8, got {probe_density}")
    phi = curve.require_parametrization()
    patches = _probe_patches(curve, annulus, probe_density)

    interior, boundary, inner_ring = [], [], []
    for patch in patches:
        grid = to_real(phi(patch.parameters()))
        interior.append(grid.reshape(-1, grid.shape[-1]))
        boundary += [grid[:, 0, :], grid[:, -1, :]]
        inner_ring.append(grid[:, 0, :])
    interior_pts = np.concatenate(interior)
    boundary_pts = np.concatenate(boundary)

    spacing = ring_spacing(inner_ring)
    if spacing >= annulus.inner / 10.0:
        logger.warning("Probe spacing on the inner boundary is coarse", spacing=spacing, inner=annulus.inner)

    # geodesic sources: the inner ring, row j * radial_steps of each patch block
    sources, offset = [], 0
    for patch, block in zip(patches, interior, strict=True):
        sources.append(offset + np.arange(probe_density) * patch.radial_steps)
        offset += len(block)
    sources = np.concatenate(sources)

    data = RegularityData(
        tau_M=reach_from_probes(interior_pts, intrinsic_dim=2),
        tau_boundary=reach_from_probes(boundary_pts, intrinsic_dim=1),
        rho_M=injectivity_from_probes(interior_pts, sources),
        volume=sum(_patch_area(phi, patch) for patch in patches),
        probe_density=probe_density,
        probe_count=int(interior_pts.shape[0]),
    )
    logger.info(
        "Regularity estimated",
        curve_id=curve.id,
        tau_M=data.tau_M,
        tau_boundary=data.tau_boundary,
        rho_M=data.rho_M,
        delta_M=data.delta_M,
        volume=data.volume,
    )
    return data
