"""
link-multiplicity command line.

Subcommands: bound, estimate, trials, certify, sample. Reports go to stdout
(or --output / LINK_MULTIPLICITY_OUTPUT_DIR); logs go to stderr.
Exit codes: 0 success, 2 usage or validation, 3 numerical failure, 4 I/O.
"""

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from link_multiplicity.bound import BoundReport
from link_multiplicity.config import DEFAULT_SAMPLE_COUNT, FORMATS, LOG_LEVELS, RunConfig, load_config
from link_multiplicity.corpus import corpus_curve, sample_uniform
from link_multiplicity.errors import LinkMultiplicityError, ValidationError
from link_multiplicity.estimator import EstimateReport, estimate_multiplicity
from link_multiplicity.geometry import SLAB_METRICS, AnnulusSpec, ChartPoint, LinkParameters, SliceFunctional
from link_multiplicity.harness import (
    TrialPlan,
    emit_report,
    prepare_plan,
    run_single_trial,
    run_trials,
    sweep_multipliers,
)
from link_multiplicity.oracle import MultiplicityCertificate, certify, draw_generic_slice
from link_multiplicity.pointcloud import (
    PointCloud,
    annulus_from_metadata,
    as_sample,
    read_point_cloud,
    write_point_cloud,
)
from link_multiplicity.reports import dumps, write_text

logger = structlog.get_logger(__name__)


def configure_logging(level: str = "warning") -> None:
    """Console-rendered structlog events on stderr, filtered at level."""
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(logging.getLevelNamesMapping()[level.upper()]),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


@dataclass(frozen=True)
class BoundEcho:
    """N with the parameters it was computed for."""

    curve_id: str
    seed: int
    epsilon: float
    inner_radius: float
    delta: float
    alpha: float
    direction: tuple[complex, ...]
    bound: BoundReport
    slab_metric: str = "real"
    slab_radius: float | None = None
    within_hypotheses: bool = False


def _emit(config: RunConfig, text: str) -> str:
    path = config.output_path()
    if path is None:
        sys.stdout.write(text)
    else:
        write_text(text, path)
    return text


def _plan(config: RunConfig, trial_count: int) -> TrialPlan:
    return TrialPlan.for_curve(
        config.curve_id,
        epsilon=config.resolved_epsilon,
        inner_radius=config.resolved_inner_radius,
        gamma=config.gamma,
        alpha=config.alpha,
        alpha_fraction=config.alpha_fraction,
        trial_count=trial_count,
        base_seed=config.seed,
        sample_size_policy=config.sample_size_policy(),
        delta=config.delta,
        slab_metric=config.slab_metric,
        probe_density=config.probe_density,
    )


def _bound_text(echo: BoundEcho) -> str:
    b, reg = echo.bound, echo.bound.regularity
    lines = [
        f"curve: {echo.curve_id}",
        f"N: {b.sample_size}",
        f"N (unrounded): {b.value!r}",
        f"radius r = alpha: {b.radius!r}",
        f"gamma: {b.gamma!r}",
        f"beta_M(r): {b.beta_r!r}",
        f"beta_M(r/2): {b.beta_half_r!r}",
        f"theta: {b.theta!r}",
        f"y: {b.y!r}",
        f"epsilon: {echo.epsilon!r}",
        f"inner_radius: {echo.inner_radius!r}",
        f"delta: {echo.delta!r}",
        f"direction: {', '.join(repr(c) for c in echo.direction)}",
        f"seed: {echo.seed}",
        f"slab_metric: {echo.slab_metric}",
        f"slab_radius: {echo.slab_radius!r}",
        f"within_hypotheses: {str(echo.within_hypotheses).lower()}",
        f"tau_M: {reg.tau_M!r}",
        f"tau_boundary: {reg.tau_boundary!r}",
        f"rho_M: {reg.rho_M!r}",
        f"Delta_M: {reg.delta_M!r}",
        f"volume: {reg.volume!r}",
        f"intrinsic_dim: {reg.intrinsic_dim}",
        f"probe_density: {reg.probe_density}",
        f"probe_count: {reg.probe_count}",
        f"safety_factor: {reg.safety_factor!r}",
    ]
    return "\n".join(lines) + "\n"


def cmd_bound(config: RunConfig) -> str:
    """N for the certified slice and alpha of the curve, with the regularity provenance."""
    prepared = prepare_plan(_plan(config, trial_count=1), resolve_size=False)
    echo = BoundEcho(
        curve_id=config.curve_id,
        seed=config.seed,
        epsilon=config.resolved_epsilon,
        inner_radius=config.resolved_inner_radius,
        delta=prepared.params.slice.offset,
        alpha=prepared.params.thickness,
        direction=prepared.params.slice.direction,
        bound=prepared.bound,
        slab_metric=config.slab_metric,
        slab_radius=prepared.params.slab_radius,
        within_hypotheses=prepared.within_hypotheses,
    )
    text = _bound_text(echo) if config.resolved_format == "text" else dumps(echo, "bound")
    return _emit(config, text)


def _blind_annulus(config: RunConfig, base: ChartPoint, cloud: PointCloud) -> AnnulusSpec:
    """Radii from the flags, else from the sidecar the cloud was written with, else the defaults."""
    if cloud.metadata is None or "annulus" not in cloud.metadata:
        return AnnulusSpec(center=base, outer=config.resolved_epsilon, inner=config.resolved_inner_radius)
    recorded = annulus_from_metadata(cloud.metadata)
    if recorded.center != base:
        logger.warning("Sidecar annulus has another center; using --base", sidecar=recorded.center.coords)
    return AnnulusSpec(
        center=base,
        outer=config.epsilon if config.epsilon is not None else recorded.outer,
        inner=config.inner_radius if config.inner_radius is not None else recorded.inner,
    )


def _blind_estimate(config: RunConfig) -> EstimateReport:
    base = ChartPoint.from_complex(config.base)
    cloud = read_point_cloud(config.input)
    annulus = _blind_annulus(config, base, cloud)
    slice = SliceFunctional(base=base, direction=config.direction, offset=config.delta)
    params = LinkParameters(slice=slice, annulus=annulus, thickness=config.alpha)
    return estimate_multiplicity(as_sample(cloud, annulus), params, metric=config.slab_metric)


def cmd_estimate(config: RunConfig) -> str:
    """
    Corpus mode: certify a slice from the seed, sample with the same seed, estimate.
    Blind mode: estimate on a point-cloud CSV with explicit alpha, delta, direction and base.
    """
    if config.blind:
        report = _blind_estimate(config)
    else:
        _, report = run_single_trial(prepare_plan(_plan(config, trial_count=1)), 0)
    logger.info("Estimate finished", estimate=report.estimate, well_separated=report.well_separated)
    return _emit(config, dumps(report, "estimate"))


def cmd_trials(config: RunConfig) -> str:
    """Monte Carlo success rate of the estimator, or a multiplier sweep as plot data."""
    plan = _plan(config, trial_count=config.trials)
    if config.multipliers is not None:
        if config.resolved_format != "plot":
            raise ValidationError("A multiplier sweep is reported as plot data", ["use --format plot"])
        summaries = sweep_multipliers(plan, config.multipliers, threads=config.threads)
        return _emit(config, emit_report(summaries, "plot"))
    summary = run_trials(plan, threads=config.threads)
    return _emit(config, emit_report(summary, config.resolved_format))


def _certificate_text(cert: MultiplicityCertificate) -> str:
    agree = cert.order_of_vanishing == cert.lambda0 == cert.link_cardinality
    return (
        f"curve: {cert.curve_id}\n"
        f"order_of_vanishing: {cert.order_of_vanishing}\n"
        f"lambda0: {cert.lambda0}\n"
        f"link_cardinality: {cert.link_cardinality}\n"
        f"agree: {'yes' if agree else 'no'}\n"
    )


def cmd_certify(config: RunConfig) -> str:
    """Order of vanishing, lambda0 and link cardinality for a corpus curve, with agreement status."""
    curve = corpus_curve(config.curve_id)
    base = ChartPoint.from_complex(config.base) if config.base is not None else curve.base_point
    annulus = AnnulusSpec(center=base, outer=config.resolved_epsilon, inner=config.resolved_inner_radius)
    if config.direction is not None:
        slice = SliceFunctional(base=base, direction=config.direction, offset=config.resolved_delta)
        cert = certify(curve, slice, annulus, seed=config.seed)
    else:
        _, cert = draw_generic_slice(curve, annulus, np.random.default_rng(config.seed), config.resolved_delta)
    text = _certificate_text(cert) if config.resolved_format == "text" else dumps(cert, "certificate")
    return _emit(config, text)


def cmd_sample(config: RunConfig) -> str:
    """Export a corpus sample as point-cloud CSV plus JSON sidecar; prints the CSV path."""
    path = config.output_path()
    if path is None:
        raise ValidationError("sample needs a destination", ["pass --output or set LINK_MULTIPLICITY_OUTPUT_DIR"])
    count = config.sample_size or DEFAULT_SAMPLE_COUNT
    if count > config.max_sample_size:
        raise ValidationError("Sample size exceeds max_sample_size", [f"{count} > {config.max_sample_size}"])
    curve = corpus_curve(config.curve_id)
    annulus = AnnulusSpec(center=curve.base_point, outer=config.resolved_epsilon, inner=config.resolved_inner_radius)
    sample = sample_uniform(curve, annulus, count, config.seed)
    written = write_point_cloud(sample, path)
    text = f"{written}\n"
    sys.stdout.write(text)
    return text


COMMANDS = {
    "bound": cmd_bound,
    "estimate": cmd_estimate,
    "trials": cmd_trials,
    "certify": cmd_certify,
    "sample": cmd_sample,
}


def parse_complex_vector(text: str) -> tuple[complex, ...]:
    """'0.6,0.8j' or '0.6+0.1j, 0' -> complex tuple."""
    try:
        return tuple(complex(token.strip().replace(" ", "")) for token in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of complex numbers: {text!r}") from None


def parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(token) for token in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_argument_group("curve or point cloud")
    source.add_argument("--curve", dest="curve_id", help="Built-in corpus curve id")
    source.add_argument("--input", type=Path, help="Point-cloud CSV (estimate only, blind mode)")
    geometry = common.add_argument_group("geometry")
    geometry.add_argument("--epsilon", type=float, help="Outer radius (default 0.5)")
    geometry.add_argument("--inner-radius", type=float, help="Inner radius epsilon_0 (default 0.05)")
    geometry.add_argument("--delta", type=float, help="Hyperplane offset (default epsilon/4)")
    geometry.add_argument("--direction", type=parse_complex_vector, help="Unit direction xi, e.g. '0.6,0.8j'")
    geometry.add_argument("--base", type=parse_complex_vector, help="Base point p, e.g. '0,0'")
    geometry.add_argument("--alpha", type=float, help="Slab thickness")
    geometry.add_argument("--alpha-fraction", type=float, help="alpha as a fraction of its upper bound (default 0.9)")
    geometry.add_argument("--slab-metric", choices=SLAB_METRICS, help="Slab distance (default real)")
    geometry.add_argument("--probe-density", type=int, help="Angular probes per preimage (default 128)")
    sampling = common.add_argument_group("sampling")
    sampling.add_argument("--gamma", type=float, help="Confidence gap (default 0.1)")
    sampling.add_argument("--seed", type=int, help="Base seed (default 0)")
    sampling.add_argument("--trials", type=int, help="Number of trials (default 100)")
    sampling.add_argument("--sample-size", type=int, help="Fixed sample size")
    sampling.add_argument("--multiplier", dest="sample_multiplier", type=float, help="Sample size as a multiple of N")
    sampling.add_argument("--multipliers", type=parse_float_list, help="Sweep multipliers, e.g. '0.1,0.5,1'")
    sampling.add_argument("--max-sample-size", type=int, help="Refuse larger samples (default 2000000)")
    sampling.add_argument("--threads", type=int, help="Worker threads; output does not depend on it")
    output = common.add_argument_group("output")
    output.add_argument("--output", type=Path, help="Write the report here instead of stdout")
    formats = "; ".join(f"{k}: {'/'.join(v)}" for k, v in FORMATS.items())
    output.add_argument("--format", help=f"Report format ({formats})")
    output.add_argument("--config", type=Path, help="Config file (JSON config document or TOML [run] table)")
    output.add_argument("--log-level", choices=LOG_LEVELS, help="Log level on stderr (default warning)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="link-multiplicity", description=__doc__.strip().splitlines()[0])
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    common = _common_arguments()
    for name, command in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=(command.__doc__ or name).strip().splitlines()[0])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    flags = vars(args).copy()
    subcommand = flags.pop("subcommand")
    config_path = flags.pop("config")
    configure_logging(flags.get("log_level") or "warning")
    try:
        config = load_config(subcommand, flags, config_path)
        configure_logging(config.log_level)
        COMMANDS[subcommand](config)
    except LinkMultiplicityError as e:
        logger.error("Command failed", subcommand=subcommand, error=str(e), exit_code=e.exit_code)
        sys.stderr.write(f"link-multiplicity {subcommand}: {e}\n")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
