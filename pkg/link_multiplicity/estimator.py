"""
Multiplicity estimation from a sample: cut the alpha-slab around the offset
hyperplane, single-linkage cluster it at threshold 2 alpha, count the clusters.
"""

import math
from dataclasses import dataclass

import numpy as np
import structlog

from link_multiplicity.corpus import SampleSet
from link_multiplicity.errors import DomainError, ValidationError
from link_multiplicity.geometry import (
    LinkParameters,
    ParameterReport,
    SliceFunctional,
    hyperplane_distance,
    validate_parameters,
)

logger = structlog.get_logger(__name__)


class UnionFind:
    """Disjoint sets over 0..n-1 with union by rank and path compression."""

    def __init__(self, n: int):
        self._leader = np.arange(n)
        self._rank = np.zeros(n, dtype=int)
        self.n_clusters = n

    def __repr__(self) -> str:
        return f"UnionFind: contains {self.n_clusters} clusters."

    def find(self, s: int) -> int:
        path = [s]
        parent = int(self._leader[s])
        while parent != self._leader[parent]:
            path.append(parent)
            parent = int(self._leader[parent])
        self._leader[path] = parent
        return parent

    def find_many(self, items: np.ndarray) -> np.ndarray:
        """Leaders of many elements at once (pointer jumping), compressing their paths."""
        items = np.asarray(items, dtype=int)
        leaders = self._leader[items]
        while True:
            nxt = self._leader[leaders]
            if np.array_equal(nxt, leaders):
                break
            leaders = nxt
        self._leader[items] = leaders
        return leaders

    def union(self, a: int, b: int) -> None:
        s1, s2 = self.find(a), self.find(b)
        if s1 == s2:
            return
        r1, r2 = self._rank[s1], self._rank[s2]
        if r2 > r1:
            s1, s2 = s2, s1
        if r1 == r2:
            self._rank[s1] += 1
        self._leader[s2] = s1
        self.n_clusters -= 1

    def labels(self) -> np.ndarray:
        """Canonical labels 0..k-1 numbered by first appearance."""
        leaders = self.find_many(np.arange(len(self._leader)))
        _, first, inverse = np.unique(leaders, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return rank[inverse]


@dataclass(frozen=True)
class SlabSample:
    """Sample points strictly within alpha of the offset hyperplane, in sample order."""

    points: np.ndarray
    indices: np.ndarray
    thickness: float
    slice: SliceFunctional
    metric: str = "real"

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ClusterReport:
    """Single-linkage partition of a slab; clusters hold indices into the slab points."""

    clusters: tuple[tuple[int, ...], ...]
    count: int
    diameters: tuple[float, ...]
    max_diameter: float
    min_intercluster_gap: float


def extract_slab(sample: SampleSet, slice: SliceFunctional, alpha: float, metric: str = "real") -> SlabSample:
    """Points of the sample at hyperplane distance < alpha (strict), order preserved."""
    if not alpha > 0.0:
        raise DomainError(f"Slab thickness alpha must be positive, got {alpha}")
    if len(sample) == 0:
        empty = np.empty((0, slice.real_dim))
        return SlabSample(empty, np.empty(0, dtype=int), alpha, slice, metric)
    distances = np.atleast_1d(hyperplane_distance(slice, sample.points, metric=metric))
    indices = np.flatnonzero(distances < alpha)
    return SlabSample(sample.points[indices], indices, alpha, slice, metric)


def _row_distances(points: np.ndarray, i: int) -> np.ndarray:
    return np.linalg.norm(points[i + 1 :] - points[i], axis=1)


def single_linkage_clusters(slab: SlabSample, threshold: float) -> ClusterReport:
    """
    Connected components of the graph joining slab points at distance <= threshold.

    One all-pairs pass builds the union-find, a second computes diameters and gaps exactly.
    """
    if not threshold > 0.0:
        raise DomainError(f"Clustering threshold must be positive, got {threshold}")
    points = slab.points
    n = points.shape[0]
    if n == 0:
        return ClusterReport(clusters=(), count=0, diameters=(), max_diameter=0.0, min_intercluster_gap=math.inf)

    forest = UnionFind(n)
    for i in range(n - 1):
        near = np.flatnonzero(_row_distances(points, i) <= threshold) + i + 1
        if near.size == 0:
            continue
        root = forest.find(i)
        for leader in np.unique(forest.find_many(near)):
            if leader != root:
                forest.union(root, int(leader))
                root = forest.find(i)
    labels = forest.labels()
    count = int(labels.max()) + 1

    diameters = np.zeros(count)
    gap = math.inf
    for i in range(n - 1):
        d = _row_distances(points, i)
        same = labels[i + 1 :] == labels[i]
        if same.any():
            diameters[labels[i]] = max(diameters[labels[i]], float(d[same].max()))
        if (~same).any():
            gap = min(gap, float(d[~same].min()))

    clusters = tuple(tuple(int(j) for j in np.flatnonzero(labels == c)) for c in range(count))
    return ClusterReport(
        clusters=clusters,
        count=count,
        diameters=tuple(float(v) for v in diameters),
        max_diameter=float(diameters.max()),
        min_intercluster_gap=gap,
    )


@dataclass(frozen=True)
class ParameterEcho:
    """The parameters an estimate was produced with."""

    epsilon: float
    inner_radius: float
    delta: float
    alpha: float
    base: tuple[float, ...]
    direction: tuple[float, ...]
    metric: str
    mu: float | None = None
    kappa: float | None = None
    regularity: float | None = None
    stretch: tuple[float, ...] | None = None
    slab_radius: float | None = None
    slab_localized: bool | None = None

    @classmethod
    def from_params(cls, params: LinkParameters, metric: str, check: ParameterReport) -> "ParameterEcho":
        return cls(
            epsilon=params.annulus.outer,
            inner_radius=params.annulus.inner,
            delta=params.slice.offset,
            alpha=params.thickness,
            base=params.slice.base.coords,
            direction=tuple(float(v) for v in params.slice.real_direction),
            metric=metric,
            mu=params.link.min_pairwise if params.link else None,
            kappa=params.link.boundary_gap if params.link else None,
            regularity=params.regularity,
            stretch=params.link.stretch if params.link and params.link.stretch else None,
            slab_radius=params.slab_radius,
            slab_localized=check.slab_localized,
        )


@dataclass(frozen=True)
class EstimateReport:
    """
    Outcome of one estimate: the count, cluster diagnostics and the separation flags.

    well_separated measures the clusters against alpha; separated_at_slab_radius measures
    them against the slab radius R of the parameters (diameters <= 2R, gaps > mu - 2R) and
    is None unless both mu and a finite R are known.
    """

    curve_id: str | None
    seed: int | None
    parameters: ParameterEcho
    sample_size: int
    slab_size: int
    estimate: int
    cluster_sizes: tuple[int, ...]
    cluster_diameters: tuple[float, ...]
    max_diameter: float
    min_intercluster_gap: float
    well_separated: bool
    separation_checked: str
    link_hits: tuple[int, ...] | None = None
    separated_at_slab_radius: bool | None = None


@dataclass(frozen=True)
class Estimate:
    report: EstimateReport
    slab: SlabSample
    clusters: ClusterReport


def _link_hits(slab: SlabSample, clusters: ClusterReport, params: LinkParameters) -> tuple[int, ...]:
    """Per cluster, how many link points lie within alpha of one of its points."""
    link = np.stack([pt.array for pt in params.link.points])
    hits = []
    for members in clusters.clusters:
        pts = slab.points[list(members)]
        nearest = np.min(np.linalg.norm(pts[:, None, :] - link[None, :, :], axis=-1), axis=0)
        hits.append(int(np.sum(nearest < params.thickness)))
    return tuple(hits)


def _separated_at(clusters: ClusterReport, radius: float, mu: float | None) -> bool:
    """Every cluster has diameter <= 2 radius and, when mu is known, clusters are more than mu - 2 radius apart."""
    if clusters.count == 0 or clusters.max_diameter > 2.0 * radius:
        return False
    # one cluster has no gap to check, which also covers mu = inf
    return mu is None or clusters.count == 1 or clusters.min_intercluster_gap > mu - 2.0 * radius


def estimate_detailed(sample: SampleSet, params: LinkParameters, metric: str = "real") -> Estimate:
    """estimate_multiplicity, also returning the slab and the partition."""
    check = validate_parameters(params)
    if not check.ok:
        raise ValidationError("Parameters violate the alpha bound", check.describe())

    alpha = params.thickness
    slab = extract_slab(sample, params.slice, alpha, metric=metric)
    clusters = single_linkage_clusters(slab, 2.0 * alpha)

    if params.link is not None:
        mu = params.link.min_pairwise
        separation_checked = "full"
        link_hits = _link_hits(slab, clusters, params)
    else:
        mu = None
        separation_checked = "diameter-only"
        link_hits = None
    well_separated = _separated_at(clusters, alpha, mu)
    radius = params.slab_radius
    at_slab_radius = None
    if mu is not None and radius is not None and math.isfinite(radius):
        at_slab_radius = _separated_at(clusters, radius, mu)

    report = EstimateReport(
        curve_id=sample.curve_id,
        seed=sample.seed,
        parameters=ParameterEcho.from_params(params, metric, check),
        sample_size=len(sample),
        slab_size=len(slab),
        estimate=clusters.count,
        cluster_sizes=tuple(len(c) for c in clusters.clusters),
        cluster_diameters=clusters.diameters,
        max_diameter=clusters.max_diameter,
        min_intercluster_gap=clusters.min_intercluster_gap,
        well_separated=well_separated,
        separation_checked=separation_checked,
        link_hits=link_hits,
        separated_at_slab_radius=at_slab_radius,
    )
    if not well_separated:
        logger.info(
            "Clusters are not well separated",
            estimate=report.estimate,
            max_diameter=report.max_diameter,
            gap=report.min_intercluster_gap,
            slab_size=report.slab_size,
        )
    logger.debug("Multiplicity estimated", estimate=report.estimate, slab_size=report.slab_size, seed=sample.seed)
    return Estimate(report=report, slab=slab, clusters=clusters)


def estimate_multiplicity(sample: SampleSet, params: LinkParameters, metric: str = "real") -> EstimateReport:
    """
    Count the clusters of the alpha-slab at threshold 2 alpha.

    Args:
        sample: Uniform sample of the annulus of params
        params: Validated link parameters (mu, kappa, Delta may be unknown in blind mode)
        metric: "real" or "complex" slab distance

    Returns:
        The report; well_separated holds iff every cluster has diameter <= 2 alpha and,
        when mu is known, distinct clusters are more than mu - 2 alpha apart
    """
    return estimate_detailed(sample, params, metric).report
