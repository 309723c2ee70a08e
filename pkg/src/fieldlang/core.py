"""Canonical 2D field data model, validation, and file I/O.

Arrays are row-major with row 0 at y_min and column 0 at x_min, so
``u[i, j]`` samples the node at ``(x_min + j*dx, y_min + i*dy)``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

COUNTERCLOCKWISE = "counterclockwise"
CLOCKWISE = "clockwise"

FLOW_CLASSES = (
    "lid-driven-cavity",
    "bluff-body-wake",
    "channel",
    "vortex-array",
    "uniform",
    "unknown",
)

_FLD_MAGIC = b"FLD1"
_FLD_HEADER = struct.Struct("<4sIII")  # magic, width, height, reserved


class FieldLangError(Exception):
    """Base class for all fieldlang errors."""


class BadMagicError(FieldLangError):
    """File does not start with the FLD1 magic bytes."""


class TruncatedPayloadError(FieldLangError):
    """File ends before the payload implied by its header."""


class NonFiniteValueError(FieldLangError):
    """A channel contains NaN or infinite values."""


class DimensionMismatchError(FieldLangError):
    """Grid dimensions are invalid or inconsistent with the payload."""


class CsvFormatError(FieldLangError):
    """A CSV channel file is ragged or contains a non-numeric cell."""


@dataclass(frozen=True)
class GridSpec:
    """Node-centered grid: ``width`` x ``height`` nodes spanning the physical domain."""

    width: int
    height: int
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if not (self.x_max > self.x_min):
            raise ValueError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        if not (self.y_max > self.y_min):
            raise ValueError(f"y_max ({self.y_max}) must exceed y_min ({self.y_min})")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.width - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.height - 1)

    @property
    def extent_x(self) -> float:
        return self.x_max - self.x_min

    @property
    def extent_y(self) -> float:
        return self.y_max - self.y_min

    def x_coords(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.width)

    def y_coords(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.height)

    def node_position(self, row: int, col: int) -> tuple[float, float]:
        return (self.x_min + col * self.dx, self.y_min + row * self.dy)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            width=int(d["width"]),
            height=int(d["height"]),
            x_min=float(d.get("x_min", 0.0)),
            x_max=float(d.get("x_max", 1.0)),
            y_min=float(d.get("y_min", 0.0)),
            y_max=float(d.get("y_max", 1.0)),
        )


@dataclass(frozen=True)
class FieldSnapshot:
    """One 2D velocity-pressure field: u, v, p sampled on ``grid``.

    Construction does not enforce the shape/finiteness invariants so that
    :func:`validate` can report violations as data; I/O enforces them.
    """

    grid: GridSpec
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=np.float64))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.float64))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.float64))

    def channels(self) -> dict[str, np.ndarray]:
        return {"u": self.u, "v": self.v, "p": self.p}

    def speed(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


@dataclass(frozen=True)
class FluidProperties:
    """Fluid constants used for Reynolds-number evaluation.

    rho: density [kg/m^3], mu: dynamic viscosity [Pa s],
    U: characteristic velocity [m/s], L: characteristic length [m].
    """

    rho: float
    mu: float
    U: float
    L: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.U < 0:
            raise ValueError(f"U must be non-negative, got {self.U}")

    def to_dict(self) -> dict:
        return {"rho": self.rho, "mu": self.mu, "U": self.U, "L": self.L}

    @classmethod
    def from_dict(cls, d: dict) -> "FluidProperties":
        return cls(rho=float(d["rho"]), mu=float(d["mu"]), U=float(d["U"]), L=float(d["L"]))


@dataclass(frozen=True)
class VortexDescriptor:
    """One detected or annotated vortex.

    ``center`` is in physical domain units; ``length``/``height`` are the
    bounding-box extents; circulation sign encodes rotation (positive =
    counterclockwise with x rightward and y upward).
    """

    center: tuple[float, float]
    length: float
    height: float
    equivalent_radius: float
    circulation: float
    direction: str
    peak_vorticity: float

    def __post_init__(self):
        if self.direction not in (COUNTERCLOCKWISE, CLOCKWISE):
            raise ValueError(f"bad direction {self.direction!r}")

    def to_dict(self) -> dict:
        return {
            "center": [self.center[0], self.center[1]],
            "length": self.length,
            "height": self.height,
            "equivalent_radius": self.equivalent_radius,
            "circulation": self.circulation,
            "direction": self.direction,
            "peak_vorticity": self.peak_vorticity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VortexDescriptor":
        cx, cy = d["center"]
        return cls(
            center=(float(cx), float(cy)),
            length=float(d["length"]),
            height=float(d["height"]),
            equivalent_radius=float(d["equivalent_radius"]),
            circulation=float(d["circulation"]),
            direction=str(d["direction"]),
            peak_vorticity=float(d["peak_vorticity"]),
        )


@dataclass(frozen=True)
class GroundTruth:
    """Per-sample annotations used by the benchmark."""

    flow_class: str
    reynolds: float
    vortices: tuple[VortexDescriptor, ...]
    u_max_value: float
    u_max_location: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "flow_class": self.flow_class,
            "reynolds": self.reynolds,
            "vortices": [v.to_dict() for v in self.vortices],
            "u_max_value": self.u_max_value,
            "u_max_location": [self.u_max_location[0], self.u_max_location[1]],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        lx, ly = d["u_max_location"]
        return cls(
            flow_class=str(d["flow_class"]),
            reynolds=float(d["reynolds"]),
            vortices=tuple(VortexDescriptor.from_dict(v) for v in d.get("vortices", [])),
            u_max_value=float(d["u_max_value"]),
            u_max_location=(float(lx), float(ly)),
        )


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by :func:`validate`."""

    kind: str
    channel: Optional[str]
    cell: Optional[tuple[int, int]]
    message: str


def validate(snapshot: FieldSnapshot) -> list[Violation]:
    """Check snapshot invariants; returns an empty list iff the snapshot is well-formed."""
    violations: list[Violation] = []
    expected = (snapshot.grid.height, snapshot.grid.width)
    for name, arr in snapshot.channels().items():
        if arr.shape != expected:
            violations.append(
                Violation(
                    kind="dimension",
                    channel=name,
                    cell=None,
                    message=f"channel {name} has shape {arr.shape}, grid expects {expected}",
                )
            )
            continue
        bad = np.argwhere(~np.isfinite(arr))
        for row, col in bad:
            violations.append(
                Violation(
                    kind="non-finite",
                    channel=name,
                    cell=(int(row), int(col)),
                    message=f"channel {name} has non-finite value at cell ({row}, {col})",
                )
            )
    return violations


def save_field(snapshot: FieldSnapshot, path: Path | str) -> None:
    """Write a snapshot in the FLD1 binary format.

    Layout: magic ``FLD1``, u32 width, u32 height, u32 reserved=0 (all
    little-endian), then u, v, p as row-major float64 little-endian.
    """
    violations = validate(snapshot)
    if violations:
        first = violations[0]
        if first.kind == "dimension":
            raise DimensionMismatchError(first.message)
        raise NonFiniteValueError(first.message)
    path = Path(path)
    header = _FLD_HEADER.pack(_FLD_MAGIC, snapshot.grid.width, snapshot.grid.height, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (snapshot.u, snapshot.v, snapshot.p):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_field(path: Path | str, grid: Optional[GridSpec] = None) -> FieldSnapshot:
    """Read an FLD1 file.

    The binary format stores node counts only; physical extents come from
    ``grid`` (width/height must match) or default to the unit square.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _FLD_MAGIC:
        raise BadMagicError(f"{path}: expected magic {_FLD_MAGIC!r}, found {data[:4]!r}")
    if len(data) < _FLD_HEADER.size:
        raise TruncatedPayloadError(f"{path}: file too short to hold the FLD1 header")
    _magic, width, height, _reserved = _FLD_HEADER.unpack_from(data)
    if width < 2 or height < 2:
        raise DimensionMismatchError(f"{path}: header declares degenerate grid {width}x{height}")
    expected = _FLD_HEADER.size + 3 * width * height * 8
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"{path}: expected {expected} bytes for a {width}x{height} field, found {len(data)}"
        )
    if len(data) > expected:
        raise DimensionMismatchError(
            f"{path}: payload size {len(data)} does not match {width}x{height} header ({expected})"
        )
    if grid is None:
        grid = GridSpec(width=width, height=height)
    elif grid.width != width or grid.height != height:
        raise DimensionMismatchError(
            f"{path}: file is {width}x{height} but grid expects {grid.width}x{grid.height}"
        )
    plane = width * height * 8
    offset = _FLD_HEADER.size
    arrays = []
    for name in ("u", "v", "p"):
        arr = np.frombuffer(data, dtype="<f8", count=width * height, offset=offset)
        arr = arr.reshape(height, width).astype(np.float64)
        if not np.all(np.isfinite(arr)):
            row, col = np.argwhere(~np.isfinite(arr))[0]
            raise NonFiniteValueError(
                f"{path}: channel {name} has non-finite value at cell ({row}, {col})"
            )
        arrays.append(arr)
        offset += plane
    return FieldSnapshot(grid=grid, u=arrays[0], v=arrays[1], p=arrays[2])


def _parse_csv_channel(path: Path, grid: GridSpec, name: str) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip() != ""]
    if len(lines) != grid.height:
        raise CsvFormatError(
            f"{path}: channel {name} has {len(lines)} rows, grid expects {grid.height}"
        )
    for i, line in enumerate(lines):
        cells = line.split(",")
        if len(cells) != grid.width:
            raise CsvFormatError(
                f"{path}: channel {name} row {i} has {len(cells)} columns, grid expects {grid.width}"
            )
        row = []
        for j, cell in enumerate(cells):
            try:
                row.append(float(cell))
            except ValueError:
                raise CsvFormatError(
                    f"{path}: channel {name} row {i}, column {j}: not a number: {cell.strip()!r}"
                ) from None
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def import_csv(
    u_path: Path | str, v_path: Path | str, p_path: Path | str, grid: GridSpec
) -> FieldSnapshot:
    """Build a snapshot from three CSV files (row 0 at y_min, column 0 at x_min)."""
    u = _parse_csv_channel(Path(u_path), grid, "u")
    v = _parse_csv_channel(Path(v_path), grid, "v")
    p = _parse_csv_channel(Path(p_path), grid, "p")
    return FieldSnapshot(grid=grid, u=u, v=v, p=p)


def export_csv(
    snapshot: FieldSnapshot, u_path: Path | str, v_path: Path | str, p_path: Path | str
) -> None:
    """Write channels as CSV at 17 significant digits (lossless for float64)."""
    for arr, path in ((snapshot.u, u_path), (snapshot.v, v_path), (snapshot.p, p_path)):
        np.savetxt(path, arr, fmt="%.17g", delimiter=",")


def sidecar_path(field_path: Path | str) -> Path:
    """JSON sidecar path for a field file: ``case.fld`` -> ``case.props.json``."""
    return Path(field_path).with_suffix(".props.json")


def save_sidecar(
    path: Path | str,
    props: FluidProperties,
    truth: Optional[GroundTruth] = None,
    grid: Optional[GridSpec] = None,
) -> None:
    doc = props.to_dict()
    if grid is not None:
        doc["domain"] = {
            "x_min": grid.x_min,
            "x_max": grid.x_max,
            "y_min": grid.y_min,
            "y_max": grid.y_max,
        }
    if truth is not None:
        doc["ground_truth"] = truth.to_dict()
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_sidecar(path: Path | str) -> tuple[FluidProperties, Optional[GroundTruth], Optional[dict]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    props = FluidProperties.from_dict(doc)
    truth = GroundTruth.from_dict(doc["ground_truth"]) if "ground_truth" in doc else None
    domain = doc.get("domain")
    return props, truth, domain


def save_case(
    field_path: Path | str,
    snapshot: FieldSnapshot,
    props: FluidProperties,
    truth: Optional[GroundTruth] = None,
) -> None:
    """Write an FLD1 file together with its ``.props.json`` sidecar."""
    save_field(snapshot, field_path)
    save_sidecar(sidecar_path(field_path), props, truth=truth, grid=snapshot.grid)


def load_case(
    field_path: Path | str,
) -> tuple[FieldSnapshot, FluidProperties, Optional[GroundTruth]]:
    """Read an FLD1 file plus sidecar, applying the sidecar's physical domain if present."""
    field_path = Path(field_path)
    props, truth, domain = load_sidecar(sidecar_path(field_path))
    snapshot = load_field(field_path)
    if domain is not None:
        grid = GridSpec(
            width=snapshot.grid.width,
            height=snapshot.grid.height,
            x_min=float(domain["x_min"]),
            x_max=float(domain["x_max"]),
            y_min=float(domain["y_min"]),
            y_max=float(domain["y_max"]),
        )
        snapshot = FieldSnapshot(grid=grid, u=snapshot.u, v=snapshot.v, p=snapshot.p)
    return snapshot, props, truth
