"""Analytic flow generators with exact ground truth.

These cases stand in for external datasets: every generator is a closed
form evaluated on the grid, so annotations (class, Reynolds number,
vortices, velocity peak) are known by construction. All generators are
deterministic: identical arguments produce bit-identical snapshots.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import (
    CLOCKWISE,
    COUNTERCLOCKWISE,
    FieldSnapshot,
    FluidProperties,
    GridSpec,
    GroundTruth,
    VortexDescriptor,
    save_case,
)
from .features import alternating_by_x, checkerboard_pattern

# Fixed shape of the lid-driven-cavity proxy: one dominant Lamb-Oseen core
# plus a lid band u=1 over the top 5% of rows, blended smoothly below so the
# lid shear sheet does not drown the core in the vorticity field.
_CAVITY_CORE_CIRCULATION = -0.15
_CAVITY_CORE_RADIUS = 0.1
_CAVITY_CORE_CENTER = (0.5, 0.55)
_CAVITY_LID_START = 0.95
_CAVITY_BLEND_WIDTH = 0.08


@dataclass(frozen=True)
class LambOseenSpec:
    """One Lamb-Oseen vortex: center (domain units), signed circulation, core radius."""

    center: tuple[float, float]
    circulation: float
    core_radius: float

    def __post_init__(self):
        if self.core_radius <= 0:
            raise ValueError(f"core_radius must be positive, got {self.core_radius}")

    @property
    def peak_vorticity(self) -> float:
        return self.circulation / (np.pi * self.core_radius**2)


@dataclass(frozen=True)
class SynthCase:
    """A generated snapshot with its exact annotations and fluid constants."""

    name: str
    snapshot: FieldSnapshot
    truth: GroundTruth
    props: FluidProperties


def _unit_grid(n: int) -> GridSpec:
    return GridSpec(width=n, height=n)


def _mesh(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    return np.meshgrid(grid.x_coords(), grid.y_coords(), indexing="xy")


def _grid_speed_peak(grid: GridSpec, u: np.ndarray, v: np.ndarray) -> tuple[float, tuple[float, float]]:
    """Grid maximum of sqrt(u^2+v^2); ties resolve to the lowest row-major node."""
    speed = np.hypot(u, v)
    row, col = np.unravel_index(int(np.argmax(speed)), speed.shape)
    return float(speed[row, col]), grid.node_position(row, col)


def _require_min_side(n: int, minimum: int) -> None:
    if n < minimum:
        raise ValueError(f"grid side must be >= {minimum}, got {n}")


def _lamb_oseen_velocity(
    grid_x: np.ndarray, grid_y: np.ndarray, spec: LambOseenSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Velocity induced by one Lamb-Oseen vortex; finite (zero) at the center."""
    dx = grid_x - spec.center[0]
    dy = grid_y - spec.center[1]
    r_sq = dx * dx + dy * dy
    z = r_sq / spec.core_radius**2
    with np.errstate(divide="ignore", invalid="ignore"):
        coeff = spec.circulation * (-np.expm1(-z)) / (2.0 * np.pi * r_sq)
    coeff = np.where(r_sq < 1e-24, spec.circulation / (2.0 * np.pi * spec.core_radius**2), coeff)
    return -coeff * dy, coeff * dx


def _descriptor_from_spec(spec: LambOseenSpec) -> VortexDescriptor:
    return VortexDescriptor(
        center=spec.center,
        length=2.0 * spec.core_radius,
        height=2.0 * spec.core_radius,
        equivalent_radius=spec.core_radius,
        circulation=spec.circulation,
        direction=COUNTERCLOCKWISE if spec.circulation > 0 else CLOCKWISE,
        peak_vorticity=spec.peak_vorticity,
    )


def gen_taylor_green(n: int) -> SynthCase:
    """Periodic 2x2 array of counter-rotating vortices on the unit square.

    u = sin(2 pi x) cos(2 pi y), v = -cos(2 pi x) sin(2 pi y),
    p = -(cos(4 pi x) + cos(4 pi y)) / 4, so the analytic vorticity is
    4 pi sin(2 pi x) sin(2 pi y).
    """
    _require_min_side(n, 16)
    grid = _unit_grid(n)
    x, y = _mesh(grid)
    u = np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
    v = -np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)
    p = -0.25 * (np.cos(4 * np.pi * x) + np.cos(4 * np.pi * y))
    snapshot = FieldSnapshot(grid=grid, u=u, v=v, p=p)

    cell_gamma = 4.0 / np.pi  # integral of vorticity over one quarter-domain cell
    vortices = []
    for cy in (0.25, 0.75):
        for cx in (0.25, 0.75):
            sign = 1.0 if np.sin(2 * np.pi * cx) * np.sin(2 * np.pi * cy) > 0 else -1.0
            vortices.append(
                VortexDescriptor(
                    center=(cx, cy),
                    length=0.5,
                    height=0.5,
                    equivalent_radius=float(np.sqrt(0.25 / np.pi)),
                    circulation=sign * cell_gamma,
                    direction=COUNTERCLOCKWISE if sign > 0 else CLOCKWISE,
                    peak_vorticity=sign * 4.0 * np.pi,
                )
            )
    props = FluidProperties(rho=1.0, mu=0.01, U=1.0, L=1.0)
    truth = GroundTruth(
        flow_class="vortex-array",
        reynolds=100.0,
        vortices=tuple(vortices),
        u_max_value=1.0,
        u_max_location=(0.25, 0.0),
    )
    return SynthCase(name="taylor-green", snapshot=snapshot, truth=truth, props=props)


def gen_lamb_oseen(n: int, vortices: list[LambOseenSpec]) -> SynthCase:
    """Superposition of Lamb-Oseen vortices on the unit square with p = 0."""
    _require_min_side(n, 16)
    if not vortices:
        raise ValueError("at least one vortex spec is required")
    grid = _unit_grid(n)
    for spec in vortices:
        if not grid.contains(*spec.center):
            raise ValueError(f"vortex center {spec.center} lies outside the domain")
    for i in range(len(vortices)):
        for j in range(i + 1, len(vortices)):
            a, b = vortices[i], vortices[j]
            dist = float(np.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]))
            min_sep = 4.0 * max(a.core_radius, b.core_radius)
            if dist < min_sep:
                warnings.warn(
                    f"vortex centers {a.center} and {b.center} are {dist:.3f} apart; "
                    f"cores may overlap below {min_sep:.3f}",
                    stacklevel=2,
                )
    x, y = _mesh(grid)
    u = np.zeros_like(x)
    v = np.zeros_like(x)
    for spec in vortices:
        du, dv = _lamb_oseen_velocity(x, y, spec)
        u += du
        v += dv
    snapshot = FieldSnapshot(grid=grid, u=u, v=v, p=np.zeros_like(x))

    descriptors = sorted(
        (_descriptor_from_spec(s) for s in vortices),
        key=lambda d: (-abs(d.circulation), d.center[1], d.center[0]),
    )
    if alternating_by_x(descriptors, grid):
        label = "bluff-body-wake"
    elif checkerboard_pattern(descriptors, grid):
        label = "vortex-array"
    else:
        label = "unknown"
    u_max_value, u_max_location = _grid_speed_peak(grid, u, v)
    props = FluidProperties(rho=1.0, mu=0.001, U=u_max_value, L=1.0)
    truth = GroundTruth(
        flow_class=label,
        reynolds=u_max_value * 1000.0,
        vortices=tuple(descriptors),
        u_max_value=u_max_value,
        u_max_location=u_max_location,
    )
    return SynthCase(name="lamb-oseen", snapshot=snapshot, truth=truth, props=props)


def gen_channel(n: int, u_max: float) -> SynthCase:
    """Plane channel profile u = 4 u_max y (1 - y), v = 0, pressure falling in x."""
    _require_min_side(n, 16)
    if u_max <= 0:
        raise ValueError(f"u_max must be positive, got {u_max}")
    grid = _unit_grid(n)
    x, y = _mesh(grid)
    u = 4.0 * u_max * y * (1.0 - y)
    snapshot = FieldSnapshot(grid=grid, u=u, v=np.zeros_like(x), p=1.0 - x)
    props = FluidProperties(rho=1.0, mu=0.02, U=u_max, L=1.0)
    truth = GroundTruth(
        flow_class="channel",
        reynolds=u_max * 50.0,
        vortices=(),
        u_max_value=u_max,
        u_max_location=(0.0, 0.5),
    )
    return SynthCase(name="channel", snapshot=snapshot, truth=truth, props=props)


def gen_cavity_proxy(n: int, re_target: float) -> SynthCase:
    """Analytic lid-driven-cavity stand-in: moving-lid band plus one central vortex.

    The lid band (u = 1 on the top 5% of rows) blends smoothly into a
    single clockwise Lamb-Oseen core; fluid constants are chosen so
    rho*U*L/mu equals ``re_target``.
    """
    _require_min_side(n, 32)
    if re_target <= 0:
        raise ValueError(f"re_target must be positive, got {re_target}")
    grid = _unit_grid(n)
    x, y = _mesh(grid)
    core = LambOseenSpec(
        center=_CAVITY_CORE_CENTER,
        circulation=_CAVITY_CORE_CIRCULATION,
        core_radius=_CAVITY_CORE_RADIUS,
    )
    u_core, v_core = _lamb_oseen_velocity(x, y, core)
    lid = np.where(
        y >= _CAVITY_LID_START,
        1.0,
        np.exp(-(((_CAVITY_LID_START - y) / _CAVITY_BLEND_WIDTH) ** 2)),
    )
    u = lid + (1.0 - lid) * u_core
    v = (1.0 - lid) * v_core
    snapshot = FieldSnapshot(grid=grid, u=u, v=v, p=np.zeros_like(x))
    u_max_value, u_max_location = _grid_speed_peak(grid, u, v)
    props = FluidProperties(rho=1.0, mu=1.0 / re_target, U=1.0, L=1.0)
    truth = GroundTruth(
        flow_class="lid-driven-cavity",
        reynolds=float(re_target),
        vortices=(_descriptor_from_spec(core),),
        u_max_value=u_max_value,
        u_max_location=u_max_location,
    )
    return SynthCase(name="cavity", snapshot=snapshot, truth=truth, props=props)


def gen_uniform(n: int, u0: float, v0: float) -> SynthCase:
    """Constant velocity (u0, v0) with zero pressure; the degenerate no-structure case."""
    _require_min_side(n, 2)
    grid = _unit_grid(n)
    shape = (n, n)
    speed = float(np.hypot(u0, v0))
    snapshot = FieldSnapshot(
        grid=grid,
        u=np.full(shape, float(u0)),
        v=np.full(shape, float(v0)),
        p=np.zeros(shape),
    )
    props = FluidProperties(rho=1.0, mu=0.01, U=speed, L=1.0)
    truth = GroundTruth(
        flow_class="uniform",
        reynolds=speed * 100.0,
        vortices=(),
        u_max_value=speed,
        u_max_location=(grid.x_min, grid.y_min),
    )
    return SynthCase(name="uniform", snapshot=snapshot, truth=truth, props=props)


_UNIFORM_VELOCITIES = [
    (0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0),
    (1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (2.0, 0.0),
    (0.5, 0.0), (0.0, 2.0), (3.0, 1.0), (-2.0, 0.5), (0.1, 0.1),
    (5.0, 0.0), (0.0, 0.3), (-0.7, -0.2), (1.5, 2.5), (4.0, -3.0),
]


def random_lamb_specs(rng: np.random.Generator) -> list[LambOseenSpec]:
    """Draw 1-4 well-separated vortices: r_c in [0.03, 0.08], |circulation| in [0.5, 2].

    Centers stay in [0.15, 0.85]^2 with pairwise separation >= 4 * max core
    radius; an extra 0.03 gap in x keeps the left-to-right ordering (and
    hence the wake/array pattern rules) stable under detection jitter.
    """
    count = int(rng.integers(1, 5))
    specs: list[LambOseenSpec] = []
    while len(specs) < count:
        r_c = float(rng.uniform(0.03, 0.08))
        gamma = float(rng.uniform(0.5, 2.0)) * (1.0 if rng.uniform() < 0.5 else -1.0)
        for _ in range(200):
            cx = float(rng.uniform(0.15, 0.85))
            cy = float(rng.uniform(0.15, 0.85))
            ok = all(
                np.hypot(cx - s.center[0], cy - s.center[1])
                >= 4.0 * max(r_c, s.core_radius)
                and abs(cx - s.center[0]) >= 0.03
                for s in specs
            )
            if ok:
                specs.append(LambOseenSpec(center=(cx, cy), circulation=gamma, core_radius=r_c))
                break
        else:
            # Could not place this vortex; settle for the ones placed so far.
            break
    return specs if specs else [LambOseenSpec(center=(0.5, 0.5), circulation=1.0, core_radius=0.05)]


def iter_suite(n: int = 256, seed: int = 42) -> Iterator[SynthCase]:
    """Yield the fixed 200-case oracle suite (deterministic for given n, seed).

    Composition: 20 uniform, 30 channel, 10 Taylor-Green (growing grids),
    40 cavity proxies over Re in [10, 1e4], and 100 randomized Lamb-Oseen
    cases drawn from the seeded generator.
    """
    for i, (u0, v0) in enumerate(_UNIFORM_VELOCITIES):
        case = gen_uniform(n, u0, v0)
        yield SynthCase(f"uniform_{i:03d}", case.snapshot, case.truth, case.props)
    for i, u_max in enumerate(np.linspace(0.5, 3.0, 30)):
        case = gen_channel(n, float(u_max))
        yield SynthCase(f"channel_{i:03d}", case.snapshot, case.truth, case.props)
    for i in range(10):
        case = gen_taylor_green(n + 16 * i)
        yield SynthCase(f"taylor_green_{i:03d}", case.snapshot, case.truth, case.props)
    for i, re_target in enumerate(np.logspace(1.0, 4.0, 40)):
        case = gen_cavity_proxy(n, float(re_target))
        yield SynthCase(f"cavity_{i:03d}", case.snapshot, case.truth, case.props)
    rng = np.random.default_rng(seed)
    for i in range(100):
        specs = random_lamb_specs(rng)
        case = gen_lamb_oseen(n, specs)
        yield SynthCase(f"lamb_{i:03d}", case.snapshot, case.truth, case.props)


def iter_lamb_oracle(n: int = 256, seed: int = 42, count: int = 100) -> Iterator[SynthCase]:
    """Yield only the randomized Lamb-Oseen cases of the suite (same stream)."""
    rng = np.random.default_rng(seed)
    for i in range(count):
        specs = random_lamb_specs(rng)
        case = gen_lamb_oseen(n, specs)
        yield SynthCase(f"lamb_{i:03d}", case.snapshot, case.truth, case.props)


def write_case(case: SynthCase, out_dir: Path | str) -> dict:
    """Write one case as FLD1 + sidecar; returns its manifest entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    field_name = f"{case.name}.fld"
    save_case(out_dir / field_name, case.snapshot, case.props, truth=case.truth)
    return {
        "id": case.name,
        "field": field_name,
        "sidecar": f"{case.name}.props.json",
    }


def write_suite(out_dir: Path | str, n: int = 256, seed: int = 42) -> Path:
    """Write the full suite plus a JSON-lines manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for case in iter_suite(n=n, seed=seed):
            entry = write_case(case, out_dir)
            fh.write(json.dumps(entry) + "\n")
    return manifest
