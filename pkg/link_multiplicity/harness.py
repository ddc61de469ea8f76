"""
Seeded Monte Carlo driver: certify a slice once per plan, then sample,
estimate and score trial_count independent samples.
"""

import asyncio
import functools
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import structlog

from link_multiplicity.bound import BoundReport, bound_report
from link_multiplicity.corpus import CorpusCurve, RegularityData, corpus_curve, estimate_regularity, sample_uniform
from link_multiplicity.errors import ValidationError
from link_multiplicity.estimator import EstimateReport, estimate_multiplicity
from link_multiplicity.geometry import (
    SLAB_METRICS,
    AnnulusSpec,
    LinkParameters,
    alpha_from_fraction,
    validate_parameters,
)
from link_multiplicity.oracle import MultiplicityCertificate, draw_generic_slice, slab_radius
from link_multiplicity.reports import PLOT_COLUMNS, TRIAL_COLUMNS, csv_table, dumps, loads

logger = structlog.get_logger(__name__)

SIZE_POLICIES = ("bound", "multiplier", "fixed")
DEFAULT_MAX_SAMPLE_SIZE = 2_000_000
REPORT_FORMATS = ("json", "csv", "plot")
SUMMARY_KIND = "trial_summary"


@dataclass(frozen=True)
class SampleSizePolicy:
    """
    How many points each trial draws, given the bound N:
    bound -> N + 1, multiplier -> ceil(multiplier * N) (at least 1), fixed -> count.
    """

    kind: str = "bound"
    multiplier: float = 1.0
    count: int | None = None
    max_sample_size: int = DEFAULT_MAX_SAMPLE_SIZE

    def __post_init__(self) -> None:
        violations = []
        if self.kind not in SIZE_POLICIES:
            violations.append(f"kind={self.kind!r} must be one of {SIZE_POLICIES}")
        if self.kind == "multiplier" and not self.multiplier > 0.0:
            violations.append(f"multiplier={self.multiplier} must be positive")
        if self.kind == "fixed" and (self.count is None or self.count < 1):
            violations.append(f"fixed policy needs count >= 1, got {self.count}")
        if self.max_sample_size < 1:
            violations.append(f"max_sample_size={self.max_sample_size} must be >= 1")
        if violations:
            raise ValidationError("Invalid sample-size policy", violations)

    def resolve(self, bound: int) -> int:
        if self.kind == "bound":
            size = bound + 1
        elif self.kind == "multiplier":
            size = max(1, math.ceil(self.multiplier * bound))
        else:
            size = self.count
        if size > self.max_sample_size:
            raise ValidationError(
                "Sample size exceeds max_sample_size",
                [f"policy {self.kind} gives {size} points from N={bound}; cap is {self.max_sample_size}"],
            )
        return size

    def nominal_multiplier(self, bound: int) -> float:
        return self.multiplier if self.kind == "multiplier" else self.resolve(bound) / bound


@dataclass(frozen=True)
class TrialPlan:
    """One Monte Carlo experiment on a corpus curve."""

    curve_id: str
    annulus: AnnulusSpec
    gamma: float = 0.1
    alpha: float | None = None
    alpha_fraction: float = 0.9
    trial_count: int = 100
    base_seed: int = 0
    sample_size_policy: SampleSizePolicy = SampleSizePolicy()
    delta: float | None = None
    slab_metric: str = "real"
    probe_density: int = 128

    def __post_init__(self) -> None:
        violations = []
        if self.trial_count < 1:
            violations.append(f"trial_count={self.trial_count} must be >= 1")
        if not 0.0 < self.alpha_fraction < 1.0:
            violations.append(f"alpha_fraction={self.alpha_fraction} must lie in (0, 1)")
        if self.alpha is not None and not self.alpha > 0.0:
            violations.append(f"alpha={self.alpha} must be positive")
        if not 0.0 < self.gamma < 1.0:
            violations.append(f"gamma={self.gamma} must lie in (0, 1)")
        if self.slab_metric not in SLAB_METRICS:
            violations.append(f"slab_metric={self.slab_metric!r} must be one of {SLAB_METRICS}")
        if violations:
            raise ValidationError("Invalid trial plan", violations)

    @classmethod
    def for_curve(cls, curve_id: str, epsilon: float = 0.5, inner_radius: float = 0.05, **kwargs) -> "TrialPlan":
        """Plan on the annulus around the curve's own base point."""
        annulus = AnnulusSpec(center=corpus_curve(curve_id).base_point, outer=epsilon, inner=inner_radius)
        return cls(curve_id=curve_id, annulus=annulus, **kwargs)

    @property
    def resolved_delta(self) -> float:
        return self.delta if self.delta is not None else self.annulus.outer / 4.0


@dataclass(frozen=True)
class PreparedPlan:
    """Everything the trials of a plan share: certificate, regularity, parameters, bound and size."""

    plan: TrialPlan
    curve: CorpusCurve
    certificate: MultiplicityCertificate
    regularity: RegularityData
    params: LinkParameters
    bound: BoundReport
    sample_size: int | None
    within_hypotheses: bool = False


@dataclass(frozen=True)
class TrialSummary:
    """
    Aggregate of a plan's trials, ordered by trial index.

    success_rate scores the clusters against alpha, radius_success_rate against the
    slab radius (None under the real metric, where that radius is infinite). within_hypotheses tells whether
    the N guarantee applies to the run at all.
    """

    curve_id: str
    plan: TrialPlan
    successes: int
    failures: int
    success_rate: float
    count_success_rate: float
    N_used: int
    N_bound: int
    alpha: float
    certificate: MultiplicityCertificate
    regularity: RegularityData
    reports: tuple[EstimateReport, ...]
    slab_radius: float | None = None
    within_hypotheses: bool = False
    radius_success_rate: float | None = None

    def outcomes(self) -> list[bool]:
        return [trial_succeeded(r, self.certificate) for r in self.reports]


def trial_succeeded(report: EstimateReport, certificate: MultiplicityCertificate) -> bool:
    """Correct count and the well-separation flag both hold."""
    return report.estimate == certificate.value and report.well_separated


@functools.lru_cache(maxsize=32)
def _certified_geometry(
    curve_id: str, annulus: AnnulusSpec, delta: float, base_seed: int, probe_density: int
) -> tuple[CorpusCurve, MultiplicityCertificate, RegularityData]:
    curve = corpus_curve(curve_id)
    if annulus.center != curve.base_point:
        raise ValidationError(f"Annulus must be centred at the base point of {curve_id!r}")
    _, certificate = draw_generic_slice(curve, annulus, np.random.default_rng(base_seed), delta)
    regularity = estimate_regularity(curve, annulus, probe_density)
    return curve, certificate, regularity


def prepare_plan(plan: TrialPlan, resolve_size: bool = True) -> PreparedPlan:
    """
    Certify a generic slice (drawn from base_seed), estimate regularity, choose alpha,
    validate the parameters and resolve the sample size.

    With resolve_size=False the size policy and its cap are skipped (sample_size is None).
    The certified geometry is cached, so plans differing only in the size policy or
    trial count share it.
    """
    curve, certificate, regularity = _certified_geometry(
        plan.curve_id, plan.annulus, plan.resolved_delta, plan.base_seed, plan.probe_density
    )
    slice, link = certificate.slice, certificate.link_points
    alpha = plan.alpha
    if alpha is None:
        alpha = alpha_from_fraction(slice, plan.annulus, plan.alpha_fraction, regularity.delta_M, link)
    params = LinkParameters(
        slice=slice,
        annulus=plan.annulus,
        thickness=alpha,
        regularity=regularity.delta_M,
        link=link,
        slab_radius=slab_radius(curve, slice, link, alpha, plan.slab_metric),
    )
    check = validate_parameters(params)
    if not check.ok:
        raise ValidationError("Trial parameters violate the alpha bound", check.describe())
    if not check.within_hypotheses:
        logger.info(
            "Run is outside the sample-size guarantee",
            curve_id=plan.curve_id,
            metric=plan.slab_metric,
            alpha=alpha,
            slab_radius=params.slab_radius,
            stretch=link.max_stretch,
        )
    bound = bound_report(regularity, alpha, plan.gamma)
    sample_size = plan.sample_size_policy.resolve(bound.sample_size) if resolve_size else None
    logger.info(
        "Plan prepared",
        curve_id=plan.curve_id,
        multiplicity=certificate.value,
        alpha=alpha,
        N=bound.sample_size,
        sample_size=sample_size,
    )
    return PreparedPlan(
        plan=plan,
        curve=curve,
        certificate=certificate,
        regularity=regularity,
        params=params,
        bound=bound,
        sample_size=sample_size,
        within_hypotheses=check.within_hypotheses,
    )


def run_single_trial(prepared: PreparedPlan, index: int) -> tuple[int, EstimateReport]:
    """Sample with seed base_seed + index and estimate."""
    plan = prepared.plan
    sample = sample_uniform(prepared.curve, plan.annulus, prepared.sample_size, plan.base_seed + index)
    report = estimate_multiplicity(sample, prepared.params, metric=plan.slab_metric)
    logger.debug("Trial finished", trial=index, estimate=report.estimate, well_separated=report.well_separated)
    return index, report


async def _run_concurrently(prepared: PreparedPlan, threads: int) -> list[tuple[int, EstimateReport]]:
    semaphore = asyncio.Semaphore(threads)

    async def one(index: int) -> tuple[int, EstimateReport]:
        async with semaphore:
            return await asyncio.to_thread(run_single_trial, prepared, index)

    return await asyncio.gather(*(one(i) for i in range(prepared.plan.trial_count)))


def run_trials(plan: TrialPlan, threads: int = 1) -> TrialSummary:
    """
    Run every trial of the plan; trial i samples with seed base_seed + i.

    Args:
        plan: The experiment
        threads: Worker threads; the summary does not depend on this value

    Returns:
        TrialSummary with per-trial reports sorted by trial index
    """
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    prepared = prepare_plan(plan)
    if threads == 1:
        results = [run_single_trial(prepared, i) for i in range(plan.trial_count)]
    else:
        results = asyncio.run(_run_concurrently(prepared, threads))
    reports = tuple(report for _, report in sorted(results, key=lambda item: item[0]))

    expected = prepared.certificate.value
    successes = sum(trial_succeeded(r, prepared.certificate) for r in reports)
    correct_counts = sum(r.estimate == expected for r in reports)
    radius_rate = None
    if math.isfinite(prepared.params.slab_radius):
        at_radius = sum(r.estimate == expected and bool(r.separated_at_slab_radius) for r in reports)
        radius_rate = at_radius / plan.trial_count
    summary = TrialSummary(
        curve_id=plan.curve_id,
        plan=plan,
        successes=successes,
        failures=plan.trial_count - successes,
        success_rate=successes / plan.trial_count,
        count_success_rate=correct_counts / plan.trial_count,
        N_used=prepared.sample_size,
        N_bound=prepared.bound.sample_size,
        alpha=prepared.params.thickness,
        certificate=prepared.certificate,
        regularity=prepared.regularity,
        reports=reports,
        slab_radius=prepared.params.slab_radius,
        within_hypotheses=prepared.within_hypotheses,
        radius_success_rate=radius_rate,
    )
    logger.info(
        "Trials finished",
        curve_id=plan.curve_id,
        trials=plan.trial_count,
        success_rate=summary.success_rate,
        count_success_rate=summary.count_success_rate,
        radius_success_rate=summary.radius_success_rate,
    )
    return summary


def sweep_multipliers(plan: TrialPlan, multipliers: Sequence[float], threads: int = 1) -> list[TrialSummary]:
    """run_trials once per sample-size multiplier, in the order given."""
    summaries = []
    for multiplier in multipliers:
        policy = replace(plan.sample_size_policy, kind="multiplier", multiplier=multiplier, count=None)
        summaries.append(run_trials(replace(plan, sample_size_policy=policy), threads=threads))
    return summaries


def trial_rows(summary: TrialSummary) -> list[tuple]:
    expected = summary.certificate.value
    return [
        (
            index,
            report.seed,
            report.sample_size,
            report.slab_size,
            report.estimate,
            expected,
            report.max_diameter,
            report.min_intercluster_gap,
            report.well_separated,
            trial_succeeded(report, summary.certificate),
            report.separated_at_slab_radius,
        )
        for index, report in enumerate(summary.reports)
    ]


def plot_rows(summaries: Sequence[TrialSummary]) -> list[tuple]:
    return [
        (
            s.plan.sample_size_policy.nominal_multiplier(s.N_bound),
            s.success_rate,
            s.plan.trial_count,
            s.curve_id,
        )
        for s in summaries
    ]


def emit_report(summary: TrialSummary | Sequence[TrialSummary], format: str = "json") -> str:
    """
    Serialize a summary.

    json: the full summary document. csv: one row per trial (TRIAL_COLUMNS).
    plot: one row per summary (PLOT_COLUMNS); pass a sweep's summaries for a full curve.
    """
    summaries = [summary] if isinstance(summary, TrialSummary) else list(summary)
    if format == "plot":
        return csv_table(PLOT_COLUMNS, plot_rows(summaries))
    if len(summaries) != 1:
        raise ValidationError(f"Format {format!r} takes exactly one summary, got {len(summaries)}")
    if format == "json":
        return dumps(summaries[0], SUMMARY_KIND)
    if format == "csv":
        return csv_table(TRIAL_COLUMNS, trial_rows(summaries[0]))
    raise ValidationError(f"Unknown report format {format!r}", [f"expected one of {REPORT_FORMATS}"])


def parse_summary(text: str) -> TrialSummary:
    return loads(text, TrialSummary, SUMMARY_KIND)
