"""Deterministic physical-feature extractors for 2D velocity-pressure fields.

Vorticity and Q-criterion use central differences in the interior and
first-order one-sided stencils on the boundary, so both are exact on
affine velocity fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .core import (
    CLOCKWISE,
    COUNTERCLOCKWISE,
    FieldSnapshot,
    FluidProperties,
    GridSpec,
    VortexDescriptor,
)

# Components whose bounding box spans at least this fraction of the domain
# are treated as boundary-attached shear bands, not coherent vortices.
COMPACT_SPAN_FRACTION = 0.9

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class DetectionParams:
    """Vortex-detector tuning: relative vorticity threshold and minimum component area.

    alpha is the fraction of the global max |vorticity| a cell must reach;
    min_area is the minimum component size in cells.
    """

    alpha: float = 0.05
    min_area: int = 16

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.min_area < 1:
            raise ValueError(f"min_area must be >= 1, got {self.min_area}")


@dataclass(frozen=True)
class Evidence:
    """One measured quantity recorded while the classification cascade ran."""

    feature: str
    value: float
    rule: str

    def to_dict(self) -> dict:
        return {"feature": self.feature, "value": self.value, "rule": self.rule}

    @classmethod
    def from_dict(cls, d: dict) -> "Evidence":
        return cls(feature=str(d["feature"]), value=float(d["value"]), rule=str(d["rule"]))


@dataclass(frozen=True)
class FlowClassResult:
    label: str
    evidence: tuple[Evidence, ...]

    def to_dict(self) -> dict:
        return {"label": self.label, "evidence": [e.to_dict() for e in self.evidence]}

    @classmethod
    def from_dict(cls, d: dict) -> "FlowClassResult":
        return cls(
            label=str(d["label"]),
            evidence=tuple(Evidence.from_dict(e) for e in d.get("evidence", [])),
        )


@dataclass(frozen=True)
class KeyPoint:
    """A scalar extremum and the grid node (in domain units) where it occurs."""

    value: float
    location: tuple[float, float]

    def to_dict(self) -> dict:
        return {"value": self.value, "location": [self.location[0], self.location[1]]}

    @classmethod
    def from_dict(cls, d: dict) -> "KeyPoint":
        x, y = d["location"]
        return cls(value=float(d["value"]), location=(float(x), float(y)))


@dataclass(frozen=True)
class AnalysisReport:
    """Structured summary of one field: class, Reynolds number, vortices, key values."""

    flow: FlowClassResult
    reynolds: float
    vortices: tuple[VortexDescriptor, ...]
    u_max: KeyPoint
    p_min: KeyPoint
    p_max: KeyPoint
    max_abs_vorticity: KeyPoint

    def to_dict(self) -> dict:
        return {
            "flow": self.flow.to_dict(),
            "reynolds": self.reynolds,
            "vortices": [v.to_dict() for v in self.vortices],
            "u_max": self.u_max.to_dict(),
            "p_min": self.p_min.to_dict(),
            "p_max": self.p_max.to_dict(),
            "max_abs_vorticity": self.max_abs_vorticity.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        return cls(
            flow=FlowClassResult.from_dict(d["flow"]),
            reynolds=float(d["reynolds"]),
            vortices=tuple(VortexDescriptor.from_dict(v) for v in d.get("vortices", [])),
            u_max=KeyPoint.from_dict(d["u_max"]),
            p_min=KeyPoint.from_dict(d["p_min"]),
            p_max=KeyPoint.from_dict(d["p_max"]),
            max_abs_vorticity=KeyPoint.from_dict(d["max_abs_vorticity"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))


def _ddx(f: np.ndarray, dx: float) -> np.ndarray:
    g = np.empty_like(f)
    g[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2.0 * dx)
    g[:, 0] = (f[:, 1] - f[:, 0]) / dx
    g[:, -1] = (f[:, -1] - f[:, -2]) / dx
    return g


def _ddy(f: np.ndarray, dy: float) -> np.ndarray:
    g = np.empty_like(f)
    g[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2.0 * dy)
    g[0, :] = (f[1, :] - f[0, :]) / dy
    g[-1, :] = (f[-1, :] - f[-2, :]) / dy
    return g


def vorticity(snapshot: FieldSnapshot) -> np.ndarray:
    """Out-of-plane vorticity dv/dx - du/dy [1/s]."""
    grid = snapshot.grid
    return _ddx(snapshot.v, grid.dx) - _ddy(snapshot.u, grid.dy)


def q_criterion(snapshot: FieldSnapshot) -> np.ndarray:
    """Q = (|rotation|^2 - |strain|^2) / 2; positive where rotation dominates."""
    grid = snapshot.grid
    dudx = _ddx(snapshot.u, grid.dx)
    dudy = _ddy(snapshot.u, grid.dy)
    dvdx = _ddx(snapshot.v, grid.dx)
    dvdy = _ddy(snapshot.v, grid.dy)
    s12 = 0.5 * (dudy + dvdx)
    w12 = 0.5 * (dvdx - dudy)
    omega_sq = 2.0 * w12 * w12
    strain_sq = dudx * dudx + dvdy * dvdy + 2.0 * s12 * s12
    return 0.5 * (omega_sq - strain_sq)


def detect_vortices(
    snapshot: FieldSnapshot, params: Optional[DetectionParams] = None
) -> list[VortexDescriptor]:
    """Threshold-and-label vortex detection on the vorticity field.

    Cells with |omega| >= alpha * max|omega| are grouped into 8-connected
    components of uniform sign. Each surviving component (area >= min_area
    cells) yields one descriptor: |omega|-weighted centroid, bounding-box
    extents, equivalent radius sqrt(area/pi), and circulation. The summed
    circulation misses the tail the threshold cut off; assuming a Gaussian
    core the captured fraction is 1 - threshold/peak, so the sum is divided
    by that factor. Output is sorted by |circulation| descending, ties by
    row-major centroid.
    """
    if params is None:
        params = DetectionParams()
    grid = snapshot.grid
    omega = vorticity(snapshot)
    abs_omega = np.abs(omega)
    global_max = float(abs_omega.max())
    if global_max == 0.0:
        return []
    threshold = params.alpha * global_max
    cell_area = grid.dx * grid.dy
    xs = grid.x_coords()
    ys = grid.y_coords()

    found = []
    for sign_mask in (omega >= threshold, omega <= -threshold):
        labels, count = ndimage.label(sign_mask, structure=_EIGHT_CONNECTED)
        for comp in range(1, count + 1):
            rows, cols = np.nonzero(labels == comp)
            if rows.size < params.min_area:
                continue
            w = omega[rows, cols]
            abs_w = np.abs(w)
            weight_sum = abs_w.sum()
            cx = float((abs_w * xs[cols]).sum() / weight_sum)
            cy = float((abs_w * ys[rows]).sum() / weight_sum)
            peak_idx = int(np.argmax(abs_w))
            peak = float(w[peak_idx])
            raw_circulation = float(w.sum() * cell_area)
            # Gaussian-core truncation correction, capped for ragged components.
            captured = max(1.0 - threshold / abs(peak), 0.1)
            circulation = raw_circulation / captured
            length = float((cols.max() - cols.min() + 1) * grid.dx)
            height = float((rows.max() - rows.min() + 1) * grid.dy)
            radius = float(np.sqrt(rows.size * cell_area / np.pi))
            found.append(
                VortexDescriptor(
                    center=(cx, cy),
                    length=length,
                    height=height,
                    equivalent_radius=radius,
                    circulation=circulation,
                    direction=COUNTERCLOCKWISE if circulation > 0 else CLOCKWISE,
                    peak_vorticity=peak,
                )
            )
    found.sort(key=lambda v: (-abs(v.circulation), v.center[1], v.center[0]))
    return found


def is_compact(vortex: VortexDescriptor, grid: GridSpec) -> bool:
    """True unless the component's bounding box spans (almost) the whole domain."""
    return (
        vortex.length < COMPACT_SPAN_FRACTION * grid.extent_x
        and vortex.height < COMPACT_SPAN_FRACTION * grid.extent_y
    )


def compact_vortices(
    vortices: list[VortexDescriptor], grid: GridSpec
) -> list[VortexDescriptor]:
    return [v for v in vortices if is_compact(v, grid)]


def alternating_by_x(vortices: list[VortexDescriptor], grid: GridSpec) -> bool:
    """True when >= 3 vortices, ordered by x, strictly alternate rotation sign.

    Consecutive centers must be separated by more than 2% of the domain
    width; a shed street has real streamwise spacing, and the guard keeps
    stacked vortex pairs (equal x up to centroid jitter) out of this rule.
    """
    if len(vortices) < 3:
        return False
    ordered = sorted(vortices, key=lambda v: (v.center[0], v.center[1]))
    min_gap = 0.02 * grid.extent_x
    for a, b in zip(ordered, ordered[1:]):
        if b.center[0] - a.center[0] <= min_gap:
            return False
        if b.direction == a.direction:
            return False
    return True


def _cluster_1d(values: np.ndarray, tol: float) -> np.ndarray:
    """Assign cluster indices to sorted-by-value groups separated by more than tol."""
    order = np.argsort(values, kind="stable")
    idx = np.empty(len(values), dtype=int)
    cluster = 0
    prev = None
    for k in order:
        if prev is not None and values[k] - prev > tol:
            cluster += 1
        idx[k] = cluster
        prev = values[k]
    return idx


def checkerboard_pattern(vortices: list[VortexDescriptor], grid: GridSpec) -> bool:
    """True when >= 4 vortices sit on a >= 2x2 row/column lattice with alternating signs."""
    if len(vortices) < 4:
        return False
    xs = np.array([v.center[0] for v in vortices])
    ys = np.array([v.center[1] for v in vortices])
    cols = _cluster_1d(xs, 0.05 * grid.extent_x)
    rows = _cluster_1d(ys, 0.05 * grid.extent_y)
    if len(set(cols)) < 2 or len(set(rows)) < 2:
        return False
    signs = [1 if v.direction == COUNTERCLOCKWISE else -1 for v in vortices]
    base = signs[0] * (-1) ** (rows[0] + cols[0])
    return all(s * (-1) ** (r + c) == base for s, r, c in zip(signs, rows, cols))


def reynolds_number(props: FluidProperties) -> float:
    """Re = rho * U * L / mu."""
    return props.rho * props.U * props.L / props.mu


def _argmax_keypoint(values: np.ndarray, grid: GridSpec, minimum: bool = False) -> KeyPoint:
    flat = np.argmin(values) if minimum else np.argmax(values)
    row, col = np.unravel_index(int(flat), values.shape)
    return KeyPoint(value=float(values[row, col]), location=grid.node_position(row, col))


def key_points(snapshot: FieldSnapshot) -> tuple[KeyPoint, KeyPoint, KeyPoint, KeyPoint]:
    """(u_max over speed, p_min, p_max, max |vorticity|); ties go to the lowest row-major node."""
    grid = snapshot.grid
    u_max = _argmax_keypoint(snapshot.speed(), grid)
    p_min = _argmax_keypoint(snapshot.p, grid, minimum=True)
    p_max = _argmax_keypoint(snapshot.p, grid)
    w_max = _argmax_keypoint(np.abs(vorticity(snapshot)), grid)
    return u_max, p_min, p_max, w_max


def _band_speeds(snapshot: FieldSnapshot) -> dict[str, float]:
    """Mean tangential speed in a 5% band along each boundary."""
    h, w = snapshot.u.shape
    nb = max(1, round(0.05 * h))
    ncols = max(1, round(0.05 * w))
    return {
        "bottom": float(np.abs(snapshot.u[:nb, :]).mean()),
        "top": float(np.abs(snapshot.u[-nb:, :]).mean()),
        "left": float(np.abs(snapshot.v[:, :ncols]).mean()),
        "right": float(np.abs(snapshot.v[:, -ncols:]).mean()),
    }


def classify_flow(
    snapshot: FieldSnapshot, vortices: list[VortexDescriptor]
) -> FlowClassResult:
    """Fixed-order rule cascade over field statistics and the detected vortices.

    Boundary-spanning components are excluded before the vortex-pattern
    rules; they are shear bands (channel walls, a moving lid), and rule 3
    explicitly asks for an interior vortex.
    """
    grid = snapshot.grid
    evidence: list[Evidence] = []
    speed = snapshot.speed()
    speed_max = float(speed.max())
    omega_max = float(np.abs(vorticity(snapshot)).max())
    domain_scale = max(grid.extent_x, grid.extent_y)

    # Rule 1: uniform -- speed spread and vorticity both at rounding level.
    if speed_max == 0.0:
        evidence.append(Evidence("speed_max", 0.0, "uniform"))
        return FlowClassResult(label="uniform", evidence=tuple(evidence))
    speed_spread = (speed_max - float(speed.min())) / speed_max
    omega_rel = omega_max * domain_scale / speed_max
    evidence.append(Evidence("relative_speed_spread", speed_spread, "uniform"))
    evidence.append(Evidence("relative_max_vorticity", omega_rel, "uniform"))
    if speed_spread <= 1e-9 and omega_rel <= 1e-9:
        return FlowClassResult(label="uniform", evidence=tuple(evidence))

    interior = compact_vortices(vortices, grid)

    # Rule 2: channel -- negligible v everywhere and no interior vortices.
    u_mag = float(np.abs(snapshot.u).max())
    v_mag = float(np.abs(snapshot.v).max())
    v_to_u = v_mag / u_mag if u_mag > 0 else float("inf")
    evidence.append(Evidence("v_to_u_magnitude_ratio", v_to_u, "channel"))
    evidence.append(Evidence("interior_vortex_count", float(len(interior)), "channel"))
    if u_mag > 0 and v_mag <= 0.05 * u_mag and len(interior) == 0:
        return FlowClassResult(label="channel", evidence=tuple(evidence))

    # Rule 3: lid-driven cavity -- one boundary band dominates and an interior vortex exists.
    bands = _band_speeds(snapshot)
    ratios = {}
    for name, value in bands.items():
        others = max(v for k, v in bands.items() if k != name)
        ratios[name] = value / others if others > 0 else (float("inf") if value > 0 else 0.0)
    dominant = max(ratios, key=lambda k: ratios[k])
    evidence.append(Evidence(f"{dominant}_band_dominance", ratios[dominant], "lid-driven-cavity"))
    if ratios[dominant] >= 10.0 and len(interior) >= 1:
        return FlowClassResult(label="lid-driven-cavity", evidence=tuple(evidence))

    # Rule 4: bluff-body wake -- >= 3 vortices alternating in sign along x.
    is_wake = alternating_by_x(interior, grid)
    evidence.append(Evidence("alternating_by_x", float(is_wake), "bluff-body-wake"))
    if is_wake:
        return FlowClassResult(label="bluff-body-wake", evidence=tuple(evidence))

    # Rule 5: vortex array -- >= 4 vortices in a sign checkerboard.
    is_checker = checkerboard_pattern(interior, grid)
    evidence.append(Evidence("sign_checkerboard", float(is_checker), "vortex-array"))
    if is_checker:
        return FlowClassResult(label="vortex-array", evidence=tuple(evidence))

    return FlowClassResult(label="unknown", evidence=tuple(evidence))


def analyze(
    snapshot: FieldSnapshot,
    props: FluidProperties,
    params: Optional[DetectionParams] = None,
) -> AnalysisReport:
    """Run the full extractor pipeline and assemble one report.

    The report's vortex list keeps only compact (interior) structures;
    boundary-spanning shear bands still participate in classification
    evidence but are not reported as vortices.
    """
    detections = detect_vortices(snapshot, params)
    flow = classify_flow(snapshot, detections)
    u_max, p_min, p_max, w_max = key_points(snapshot)
    return AnalysisReport(
        flow=flow,
        reynolds=reynolds_number(props),
        vortices=tuple(compact_vortices(detections, snapshot.grid)),
        u_max=u_max,
        p_min=p_min,
        p_max=p_max,
        max_abs_vorticity=w_max,
    )
