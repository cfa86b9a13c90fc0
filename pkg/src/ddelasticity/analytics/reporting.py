"""
Result files and the parallel-time estimate.

Writes iteration tables, residual histories, time estimates, optimisation logs
and displacement/density fields (CSV plus legacy-VTK structured points).
"""
import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..core.solver import CSV_COLUMNS, SolveReport
from ..linalg.krylov import KrylovStats
from ..mesh.dofs import InterfaceTopology
from ..mesh.structured import StructuredMesh
from ..optimization.topopt import TopOptReport
from ..utils.exceptions import DimensionMismatchError, PreconditionerError, ReportingError
from ..utils.logging import get_logger

logger = get_logger(__name__)

FIELD_COLUMNS = ("node", "x", "y", "ux", "uy", "x_deformed", "y_deformed")
DENSITY_COLUMNS = ("element", "cx", "cy", "density")
ESTIMATE_COLUMNS = (
    "outer_iterations",
    "subdomain_seconds",
    "pcg_iterations",
    "apply_seconds",
    "face_count",
    "per_iteration_seconds",
    "total_seconds",
)
TOPOPT_COLUMNS = (
    "iteration",
    "compliance",
    "gmres_iterations",
    "tolerance",
    "volume",
    "change",
    "avg_inner_pcg",
)


@dataclass(frozen=True)
class TimeEstimate:
    """
    Estimated parallel run time built from measured component times.

    ``total = outer × (subdomain + pcg × apply / faces)``
    """
    outer_iterations: int
    subdomain_seconds: float
    pcg_iterations: float
    apply_seconds: float
    face_count: int

    @property
    def per_iteration_seconds(self) -> float:
        return self.subdomain_seconds + self.pcg_iterations * self.apply_seconds / self.face_count

    @property
    def total_seconds(self) -> float:
        return self.outer_iterations * self.per_iteration_seconds

    def to_csv_row(self) -> Dict[str, Any]:
        row = asdict(self)
        row["per_iteration_seconds"] = self.per_iteration_seconds
        row["total_seconds"] = self.total_seconds
        return row


def estimate_parallel_time(report: SolveReport, topology: InterfaceTopology) -> TimeEstimate:
    """
    Parallel time of a solve from its report.

    The subdomain time is the critical path of the interior solves; the
    interface term spreads the face-preconditioned PCG work over the faces.

    Raises:
        PreconditionerError: If the topology has no faces
    """
    if topology.n_faces == 0:
        raise PreconditionerError("Parallel time estimate needs at least one interface face")
    return TimeEstimate(
        outer_iterations=report.outer_iterations,
        subdomain_seconds=report.subdomain_seconds,
        pcg_iterations=report.pcg_per_application,
        apply_seconds=report.face_apply_seconds,
        face_count=topology.n_faces,
    )


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """
    Write rows as CSV with a fixed column order.

    Raises:
        ReportingError: If the file cannot be written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    except OSError as e:
        raise ReportingError(path, str(e)) from e
    logger.debug(f"Wrote {path}")
    return path


def write_iterations(path: Path, reports: Sequence[SolveReport]) -> Path:
    return write_csv(path, CSV_COLUMNS, (r.to_csv_row() for r in reports))


def write_residuals(path: Path, stats: KrylovStats) -> Path:
    rows = ({"iteration": k, "residual": r} for k, r in stats.residual_rows())
    return write_csv(path, ("iteration", "residual"), rows)


def write_estimate(path: Path, estimate: TimeEstimate) -> Path:
    return write_csv(path, ESTIMATE_COLUMNS, [estimate.to_csv_row()])


def write_topopt(path: Path, report: TopOptReport) -> Path:
    return write_csv(path, TOPOPT_COLUMNS, report.rows())


def _write_vtk(path: Path, mesh: StructuredMesh, u: np.ndarray, density: Optional[np.ndarray]) -> Path:
    lines = [
        "# vtk DataFile Version 3.0",
        "ddelasticity displacement and density",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {mesh.h!r} {mesh.h!r} 1",
        f"POINT_DATA {mesh.n_nodes}",
        "VECTORS displacement double",
    ]
    lines += [f"{float(ux)!r} {float(uy)!r} 0" for ux, uy in u.reshape(-1, 2)]
    if density is not None:
        lines += [f"CELL_DATA {mesh.n_elements}", "SCALARS density double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(d)) for d in density]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise ReportingError(path, str(e)) from e
    return path


def emit_fields(
    mesh: StructuredMesh,
    u: np.ndarray,
    directory: Path,
    density: Optional[np.ndarray] = None,
    write_vtk: bool = True,
    stem: str = "fields",
    density_stem: str = "density",
) -> List[Path]:
    """
    Write nodal displacements (and element densities) under ``directory``.

    Args:
        mesh: Mesh the fields live on
        u: Displacements over all ``2*n_nodes`` dofs
        directory: Output directory
        density: Optional per-element density
        write_vtk: Also write ``<stem>.vtk``
        stem: File name stem of the displacement CSV and the VTK file
        density_stem: File name stem of the density CSV

    Returns:
        Paths written
    """
    u = np.asarray(u, dtype=float)
    if u.shape[0] != mesh.n_dofs:
        raise DimensionMismatchError("displacement field", mesh.n_dofs, u.shape[0])
    directory = Path(directory)
    coords = mesh.node_coordinates()
    disp = u.reshape(-1, 2)
    deformed = coords + disp

    rows = (
        {
            "node": k,
            "x": coords[k, 0],
            "y": coords[k, 1],
            "ux": disp[k, 0],
            "uy": disp[k, 1],
            "x_deformed": deformed[k, 0],
            "y_deformed": deformed[k, 1],
        }
        for k in range(mesh.n_nodes)
    )
    paths = [write_csv(directory / f"{stem}.csv", FIELD_COLUMNS, rows)]

    if density is not None:
        density = np.asarray(density, dtype=float)
        if density.shape[0] != mesh.n_elements:
            raise DimensionMismatchError("density field", mesh.n_elements, density.shape[0])
        centroids = mesh.element_centroids()
        density_rows = (
            {"element": e, "cx": centroids[e, 0], "cy": centroids[e, 1], "density": density[e]}
            for e in range(mesh.n_elements)
        )
        paths.append(write_csv(directory / f"{density_stem}.csv", DENSITY_COLUMNS, density_rows))

    if write_vtk:
        paths.append(_write_vtk(directory / f"{stem}.vtk", mesh, u, density))
    return paths


def read_fields_csv(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """
    Parse a fields CSV back into node coordinates and the dof-ordered displacement vector.

    Raises:
        ReportingError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        with open(path, newline="") as f:
            reader = csv.DictReader(f)
            rows = list(reader)
    except OSError as e:
        raise ReportingError(path, str(e)) from e
    try:
        coords = np.array([[float(r["x"]), float(r["y"])] for r in rows])
        disp = np.array([[float(r["ux"]), float(r["uy"])] for r in rows])
    except (KeyError, ValueError) as e:
        raise ReportingError(path, f"malformed fields file: {e}") from e
    return coords, disp.ravel()
