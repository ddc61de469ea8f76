"""
Point-cloud CSV files and their JSON metadata sidecars.

CSV layout: header re0,im0,re1,im1,... then one row per point with the
interleaved real/imaginary coordinates. The sidecar shares the CSV path with
a .json suffix and records curve id, seed, annulus and count.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from link_multiplicity.corpus import SampleSet
from link_multiplicity.errors import ReportIOError, ValidationError
from link_multiplicity.geometry import AnnulusSpec, ChartPoint

logger = structlog.get_logger(__name__)


def column_names(ambient_complex_dim: int) -> list[str]:
    names = []
    for j in range(ambient_complex_dim):
        names += [f"re{j}", f"im{j}"]
    return names


def sidecar_path(path: Path) -> Path:
    return Path(path).with_suffix(".json")


@dataclass(frozen=True)
class PointCloud:
    """Points read back from CSV, with the sidecar metadata when one exists."""

    points: np.ndarray
    metadata: dict | None


def write_point_cloud(sample: SampleSet, path: Path | str) -> Path:
    """
    Write a sample as CSV plus JSON sidecar.

    Args:
        sample: Points to export
        path: CSV destination; parent directories are created

    Returns:
        The CSV path
    """
    path = Path(path)
    dim = sample.annulus.center.ambient_complex_dim
    metadata = {
        "curve_id": sample.curve_id,
        "seed": sample.seed,
        "count": len(sample),
        "annulus": {
            "center": list(sample.annulus.center.coords),
            "outer": sample.annulus.outer,
            "inner": sample.annulus.inner,
        },
        "columns": column_names(dim),
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, sample.points, fmt="%.17g", delimiter=",", header=",".join(column_names(dim)), comments="")
        with open(sidecar_path(path), "w", encoding="utf-8") as f:
            json.dump(metadata, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        logger.error("Could not write point cloud", error=str(e), path=str(path))
        raise ReportIOError(f"Could not write point cloud: {e}", path) from e

    logger.info("Point cloud saved", output_file=str(path), count=len(sample))
    return path


def _first_bad_cell(lines: list[tuple[int, str]], width: int) -> str:
    for row_index, line in lines:
        cells = line.rstrip("\r\n").split(",")
        if len(cells) != width:
            return f"row {row_index}: expected {width} columns, found {len(cells)}"
        for col_index, cell in enumerate(cells):
            try:
                float(cell)
            except ValueError:
                return f"row {row_index}, column {col_index}: {cell.strip()!r} is not a number"
    return "rows could not be parsed"


def _parse_rows(lines: list[tuple[int, str]], width: int) -> np.ndarray:
    """Numbered non-blank data lines -> (n, width) array; row numbers in messages count from 1 below the header."""
    if not lines:
        return np.empty((0, width))
    try:
        points = np.loadtxt([line for _, line in lines], delimiter=",", dtype=float, ndmin=2)
    except ValueError:
        raise ValidationError("Malformed point-cloud CSV", [_first_bad_cell(lines, width)]) from None
    if points.shape[1] != width:
        raise ValidationError("Malformed point-cloud CSV", [_first_bad_cell(lines, width)])
    bad = np.argwhere(~np.isfinite(points))
    if len(bad):
        row, col = bad[0]
        message = f"row {lines[row][0]}, column {col}: value is not finite"
        raise ValidationError("Malformed point-cloud CSV", [message])
    return points


def read_point_cloud(path: Path | str) -> PointCloud:
    """
    Read a point-cloud CSV and its optional sidecar.

    Raises:
        ValidationError: header or rows violate the schema (row index is 1-based, header excluded)
        ReportIOError: the file cannot be read
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            first = f.readline()
            if not first.strip():
                raise ValidationError("Malformed point-cloud CSV", ["file is empty"])
            header = [h.strip() for h in first.split(",")]
            if len(header) < 2 or len(header) % 2 or header != column_names(len(header) // 2):
                raise ValidationError(
                    "Malformed point-cloud CSV", [f"header must be re0,im0,re1,im1,...; got {','.join(header)}"]
                )
            lines = [(index, line) for index, line in enumerate(f, start=1) if line.strip()]
        metadata = None
        if sidecar_path(path).exists():
            with open(sidecar_path(path), encoding="utf-8") as f:
                metadata = json.load(f)
    except OSError as e:
        logger.error("Could not read point cloud", error=str(e), path=str(path))
        raise ReportIOError(f"Could not read point cloud: {e}", path) from e
    except json.JSONDecodeError as e:
        raise ValidationError("Malformed point-cloud sidecar", [f"{sidecar_path(path)}: {e}"]) from e

    points = _parse_rows(lines, len(header))
    logger.debug("Point cloud read", path=str(path), count=points.shape[0])
    return PointCloud(points=points, metadata=metadata)


def as_sample(cloud: PointCloud, annulus: AnnulusSpec) -> SampleSet:
    """Wrap a point cloud as a SampleSet for blind-mode estimation."""
    metadata = cloud.metadata or {}
    return SampleSet(
        points=cloud.points,
        seed=metadata.get("seed"),
        curve_id=metadata.get("curve_id"),
        annulus=annulus,
    )


def annulus_from_metadata(metadata: dict) -> AnnulusSpec:
    spec = metadata["annulus"]
    return AnnulusSpec(center=ChartPoint(tuple(spec["center"])), outer=spec["outer"], inner=spec["inner"])
