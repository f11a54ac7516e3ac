"""Result files: sweep/energy/integrand/geometry CSVs, matrix dumps, run manifest."""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from .defaults import CSV_COLUMNS, GEOMETRY_COLUMNS, INTEGRAND_COLUMNS
from .errors import CasimirError
from .models import CouplingMatrix, EnergyResult, Scene, SweepParameter, SweepRow

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MATRIX_HEADER = np.dtype("<u8")
MATRIX_DATA = np.dtype("<f8")

PathLike = Union[str, Path]


def _write_frame(frame: pd.DataFrame, handle: TextIO, header: bool) -> None:
    frame.to_csv(handle, header=header, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")


class SweepWriter:
    """Streams sweep rows to CSV, flushing after every row.

    Use as a context manager; ``footer`` appends the power-law fit line.
    """

    def __init__(self, path: PathLike, parameter: SweepParameter):
        self.path = Path(path)
        self.columns = CSV_COLUMNS[parameter.value]
        self.rows_written = 0
        self._handle: Optional[TextIO] = None

    def __enter__(self) -> "SweepWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "w", encoding="utf-8", newline="")
        _write_frame(pd.DataFrame(columns=self.columns), self._handle, header=True)
        self._handle.flush()
        return self

    def __exit__(self, *exc_info) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write_row(self, row: SweepRow) -> None:
        frame = pd.DataFrame([(row.param, row.energy, row.derivative, row.quad_error)], columns=self.columns)
        _write_frame(frame, self._handle, header=False)
        self._handle.flush()
        self.rows_written += 1

    def footer(self, exponent: float, stderr: float) -> None:
        self._handle.write(f"# exponent={exponent!r} stderr={stderr!r}\n")
        self._handle.flush()


def read_sweep_csv(path: PathLike) -> pd.DataFrame:
    """Read a sweep CSV back, skipping the fit footer."""
    return pd.read_csv(path, comment="#", float_precision="round_trip")


def write_energy_csv(path: PathLike, result: EnergyResult) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [(result.energy, result.quad_error_estimate, result.node_count)],
        columns=["energy_eV", "quad_error_eV", "node_count"],
    )
    with open(path, "w", encoding="utf-8", newline="") as handle:
        _write_frame(frame, handle, header=True)
    return path


def write_integrand_csv(path: PathLike, result: EnergyResult) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(sorted(result.integrand_samples), columns=INTEGRAND_COLUMNS)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        _write_frame(frame, handle, header=True)
    return path


def geometry_frame(scene: Scene) -> pd.DataFrame:
    """Lab-frame particle positions and bounding radii."""
    positions = scene.lab_positions()
    data = np.column_stack([positions, scene.radii()])
    return pd.DataFrame(data, columns=GEOMETRY_COLUMNS)


def write_geometry_csv(path: PathLike, scene: Scene) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        _write_frame(geometry_frame(scene), handle, header=True)
    return path


def write_matrix_dump(path: PathLike, coupled: CouplingMatrix, mode_flag: int) -> Path:
    """16-byte header (dim, mode flag as little-endian u64) then row-major little-endian f64."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([coupled.dim, mode_flag], dtype=MATRIX_HEADER)
    with open(path, "wb") as handle:
        handle.write(header.tobytes())
        handle.write(np.ascontiguousarray(coupled.matrix, dtype=MATRIX_DATA).tobytes())
    logger.info(f"Wrote {coupled.dim}x{coupled.dim} matrix to {path}")
    return path


def read_matrix_dump(path: PathLike) -> Tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    dim, flag = np.frombuffer(raw[:16], dtype=MATRIX_HEADER)
    matrix = np.frombuffer(raw[16:], dtype=MATRIX_DATA).reshape(int(dim), int(dim))
    return matrix, int(flag)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    """Record of one run; written at start and rewritten when the run ends."""
    config: Dict[str, Any]
    version: str
    command: str
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None
    wall_time_s: Optional[float] = None
    status: str = "running"
    node_count: int = 0
    threads: int = 1
    scene_digest: Optional[str] = None
    artifacts: List[str] = field(default_factory=list)
    rows_written: int = 0
    error: Optional[Dict[str, Any]] = None
    _clock: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self, status: str, error: Optional[CasimirError] = None) -> None:
        self.status = status
        self.finished_at = _now()
        self.wall_time_s = time.perf_counter() - self._clock
        if error is not None:
            self.error = error.to_record()

    def fail_with(self, exc: BaseException) -> None:
        """Record a failure raised outside the solver's error hierarchy."""
        self.finish("failed")
        self.error = {"type": type(exc).__name__, "message": str(exc), "context": {}}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("_clock")
        return data

    def write(self, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, default=str), encoding="utf-8")
        return path


def read_manifest(path: PathLike) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
