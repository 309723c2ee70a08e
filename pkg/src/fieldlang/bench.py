"""Manifest-driven scoring of the four benchmark tasks.

Pass rules: exact label match (categorize); <= 10% relative error
(Reynolds number, zero truth demands zero prediction); vortex center
within 25% of the domain size with matching rotation direction (vortex
identification, greedy matching by descending |circulation|); and <= 10%
error on both the velocity-peak value and its location (field analysis).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    FieldLangError,
    GridSpec,
    GroundTruth,
    VortexDescriptor,
    load_case,
)
from .features import AnalysisReport, DetectionParams, Evidence, FlowClassResult, KeyPoint, analyze

CAPABILITY_ROWS = (
    "Vortex detection count",
    "Core position error",
    "Circulation quantification",
    "Rotation direction accuracy",
)


class ManifestError(FieldLangError):
    """A manifest or predictions file is malformed or references missing files."""


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    field_path: Path
    sidecar_path: Path
    truth: Optional[GroundTruth] = None


@dataclass(frozen=True)
class VortexMatch:
    """Outcome of matching one annotated vortex against the predictions."""

    truth_index: int
    pred_index: Optional[int]
    distance: Optional[float]
    position_ok: bool
    direction_ok: bool

    @property
    def passed(self) -> bool:
        return self.position_ok and self.direction_ok


@dataclass(frozen=True)
class VortexEvalResult:
    matches: tuple[VortexMatch, ...]
    false_positives: int

    @property
    def passes(self) -> int:
        return sum(1 for m in self.matches if m.passed)

    @property
    def truth_count(self) -> int:
        return len(self.matches)


@dataclass
class TaskScore:
    """Counter for one task: samples seen, passes, and unscoreable (NA) samples."""

    samples: int = 0
    passes: int = 0
    na: int = 0

    @property
    def accuracy(self) -> Optional[float]:
        scoreable = self.samples - self.na
        if scoreable <= 0:
            return None
        return 100.0 * self.passes / scoreable

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "passes": self.passes,
            "na": self.na,
            "accuracy": self.accuracy,
        }


@dataclass
class VortexTaskScore:
    """Vortex-task counters: per-vortex passes plus per-sample sub-metrics."""

    samples: int = 0
    na: int = 0
    truth_vortices: int = 0
    passes: int = 0
    position_passes: int = 0
    direction_passes: int = 0
    count_matches: int = 0
    false_positives: int = 0
    per_sample_sum: float = 0.0
    per_sample_count: int = 0
    matched_pairs: int = 0
    matched_distance_sum: float = 0.0
    circulation_within_10pct: int = 0
    direction_matched: int = 0

    @property
    def accuracy(self) -> Optional[float]:
        if self.truth_vortices == 0:
            return None
        return 100.0 * self.passes / self.truth_vortices

    @property
    def per_sample_mean(self) -> Optional[float]:
        if self.per_sample_count == 0:
            return None
        return 100.0 * self.per_sample_sum / self.per_sample_count

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "na": self.na,
            "truth_vortices": self.truth_vortices,
            "passes": self.passes,
            "accuracy": self.accuracy,
            "per_sample_mean": self.per_sample_mean,
            "position_passes": self.position_passes,
            "direction_passes": self.direction_passes,
            "count_matches": self.count_matches,
            "false_positives": self.false_positives,
        }


@dataclass
class BenchReport:
    samples: int
    categorize: TaskScore
    reynolds: TaskScore
    vortex: VortexTaskScore
    field_analysis: TaskScore

    def capability_grid(self) -> dict[str, str]:
        """Rows mirroring the qualitative vortex-capability comparison."""
        v = self.vortex
        scoreable = v.samples - v.na
        count_cell = (
            f"{v.count_matches}/{scoreable} samples with exact vortex count"
            if scoreable > 0
            else "NA"
        )
        if v.matched_pairs > 0:
            pos_cell = f"{v.matched_distance_sum / v.matched_pairs * 100.0:.2f}% of domain (mean)"
            circ_cell = f"{100.0 * v.circulation_within_10pct / v.matched_pairs:.2f}% within 10%"
            rot_cell = f"{100.0 * v.direction_matched / v.matched_pairs:.2f}%"
        else:
            pos_cell = circ_cell = rot_cell = "NA"
        return {
            "Vortex detection count": count_cell,
            "Core position error": pos_cell,
            "Circulation quantification": circ_cell,
            "Rotation direction accuracy": rot_cell,
        }

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "categorize": self.categorize.to_dict(),
            "reynolds": self.reynolds.to_dict(),
            "vortex": self.vortex.to_dict(),
            "field_analysis": self.field_analysis.to_dict(),
            "capability": self.capability_grid(),
        }


def eval_categorize(pred_label: str, truth_label: str) -> bool:
    """Pass iff the labels are exactly equal."""
    return pred_label == truth_label


def eval_reynolds(pred: float, truth: float) -> bool:
    """Pass iff |pred - truth| <= 10% of truth; zero truth requires exactly zero."""
    if truth < 0:
        raise ValueError(f"truth Reynolds number must be >= 0, got {truth}")
    if truth == 0.0:
        return pred == 0.0
    return abs(pred - truth) <= 0.10 * truth


def eval_vortices(
    pred: list[VortexDescriptor] | tuple[VortexDescriptor, ...],
    truth: list[VortexDescriptor] | tuple[VortexDescriptor, ...],
    domain: GridSpec,
) -> VortexEvalResult:
    """Greedy per-vortex scoring.

    Truth vortices, in descending |circulation| order, each claim the
    nearest unclaimed prediction. A pair passes when the center distance is
    within 25% of the domain size (max of width/height) and rotation
    directions agree. Leftover predictions are false positives: reported,
    never scored.
    """
    tol = 0.25 * max(domain.extent_x, domain.extent_y)
    order = sorted(
        range(len(truth)),
        key=lambda i: (-abs(truth[i].circulation), truth[i].center[1], truth[i].center[0]),
    )
    claimed: set[int] = set()
    matches: list[VortexMatch] = []
    for ti in order:
        t = truth[ti]
        best_j = None
        best_d = None
        for j, p in enumerate(pred):
            if j in claimed:
                continue
            d = float(np.hypot(p.center[0] - t.center[0], p.center[1] - t.center[1]))
            if best_d is None or d < best_d:
                best_j, best_d = j, d
        if best_j is None:
            matches.append(
                VortexMatch(
                    truth_index=ti, pred_index=None, distance=None,
                    position_ok=False, direction_ok=False,
                )
            )
            continue
        claimed.add(best_j)
        matches.append(
            VortexMatch(
                truth_index=ti,
                pred_index=best_j,
                distance=best_d,
                position_ok=best_d <= tol,
                direction_ok=pred[best_j].direction == t.direction,
            )
        )
    matches.sort(key=lambda m: m.truth_index)
    return VortexEvalResult(
        matches=tuple(matches), false_positives=len(pred) - len(claimed)
    )


def eval_field_analysis(
    pred_value: float,
    pred_location: tuple[float, float],
    truth_value: float,
    truth_location: tuple[float, float],
    domain: GridSpec,
) -> bool:
    """Pass iff the peak-velocity value is within 10% (zero rule as for Reynolds)
    and its location is within 10% of the domain size."""
    if truth_value == 0.0:
        value_ok = pred_value == 0.0
    else:
        value_ok = abs(pred_value - truth_value) <= 0.10 * abs(truth_value)
    distance = float(
        np.hypot(pred_location[0] - truth_location[0], pred_location[1] - truth_location[1])
    )
    return value_ok and distance <= 0.10 * max(domain.extent_x, domain.extent_y)


def report_from_truth(truth: GroundTruth) -> AnalysisReport:
    """An oracle prediction that echoes the annotations (scores 100% by construction)."""
    return AnalysisReport(
        flow=FlowClassResult(
            label=truth.flow_class,
            evidence=(Evidence("ground-truth-echo", 1.0, "echo"),),
        ),
        reynolds=truth.reynolds,
        vortices=tuple(truth.vortices),
        u_max=KeyPoint(value=truth.u_max_value, location=truth.u_max_location),
        p_min=KeyPoint(value=0.0, location=(0.0, 0.0)),
        p_max=KeyPoint(value=0.0, location=(0.0, 0.0)),
        max_abs_vorticity=KeyPoint(value=0.0, location=(0.0, 0.0)),
    )


def load_manifest(path: Path | str) -> list[ManifestEntry]:
    """Read a JSON-lines manifest; paths resolve relative to the manifest file."""
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                entry_id = str(doc["id"])
                field_path = base / doc["field"]
                sidecar_path = base / doc["sidecar"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ManifestError(f"{path}:{lineno}: bad manifest line: {exc}") from exc
            if not field_path.exists():
                raise ManifestError(f"{path}:{lineno}: field file not found: {field_path}")
            if not sidecar_path.exists():
                raise ManifestError(f"{path}:{lineno}: sidecar not found: {sidecar_path}")
            truth = None
            if "ground_truth" in doc:
                truth = GroundTruth.from_dict(doc["ground_truth"])
            entries.append(
                ManifestEntry(
                    id=entry_id, field_path=field_path, sidecar_path=sidecar_path, truth=truth
                )
            )
    return entries


def load_predictions(path: Path | str) -> dict[str, Optional[AnalysisReport]]:
    """Read a JSON-lines predictions file ({"id", "report"} per line).

    Lines whose report cannot be parsed map to None and are scored NA;
    lines without a recoverable id raise.
    """
    path = Path(path)
    predictions: dict[str, Optional[AnalysisReport]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                entry_id = str(doc["id"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ManifestError(f"{path}:{lineno}: bad predictions line: {exc}") from exc
            try:
                predictions[entry_id] = AnalysisReport.from_dict(doc["report"])
            except (KeyError, TypeError, ValueError):
                predictions[entry_id] = None
    return predictions


def _entry_truth(entry: ManifestEntry, sidecar_truth: Optional[GroundTruth]) -> GroundTruth:
    truth = entry.truth if entry.truth is not None else sidecar_truth
    if truth is None:
        raise ManifestError(f"entry {entry.id}: no ground truth in manifest or sidecar")
    return truth


def run_benchmark(
    manifest_path: Path | str,
    mode: str = "builtin",
    predictions_path: Optional[Path | str] = None,
    detection: Optional[DetectionParams] = None,
) -> BenchReport:
    """Score every manifest entry on the four tasks.

    ``mode="builtin"`` runs the analysis pipeline on each field;
    ``mode="predictions"`` scores an external predictions file. Entries
    without a prediction fail every task; predictions that fail to parse
    score NA.
    """
    if mode not in ("builtin", "predictions"):
        raise ValueError(f"unknown mode {mode!r}")
    predictions: dict[str, Optional[AnalysisReport]] = {}
    if mode == "predictions":
        if predictions_path is None:
            raise ValueError("predictions mode requires a predictions file")
        predictions = load_predictions(predictions_path)

    entries = load_manifest(manifest_path)
    report = BenchReport(
        samples=len(entries),
        categorize=TaskScore(),
        reynolds=TaskScore(),
        vortex=VortexTaskScore(),
        field_analysis=TaskScore(),
    )
    for entry in entries:
        snapshot, props, sidecar_truth = load_case(entry.field_path)
        truth = _entry_truth(entry, sidecar_truth)
        if mode == "builtin":
            pred: Optional[AnalysisReport] = analyze(snapshot, props, detection)
            missing = False
        else:
            missing = entry.id not in predictions
            pred = predictions.get(entry.id)
        _score_entry(report, snapshot.grid, truth, pred, missing)
    return report


def _score_entry(
    report: BenchReport,
    grid: GridSpec,
    truth: GroundTruth,
    pred: Optional[AnalysisReport],
    missing: bool,
) -> None:
    for score in (report.categorize, report.reynolds, report.field_analysis):
        score.samples += 1
    report.vortex.samples += 1
    if pred is None and not missing:
        # Prediction present but unparseable: not scoreable.
        for score in (report.categorize, report.reynolds, report.field_analysis):
            score.na += 1
        report.vortex.na += 1
        return
    if pred is None:
        # Missing prediction: counts as a failure on every task.
        report.vortex.truth_vortices += len(truth.vortices)
        if truth.vortices:
            report.vortex.per_sample_count += 1
        return

    if eval_categorize(pred.flow.label, truth.flow_class):
        report.categorize.passes += 1
    if eval_reynolds(pred.reynolds, truth.reynolds):
        report.reynolds.passes += 1
    if eval_field_analysis(
        pred.u_max.value, pred.u_max.location, truth.u_max_value, truth.u_max_location, grid
    ):
        report.field_analysis.passes += 1

    result = eval_vortices(list(pred.vortices), list(truth.vortices), grid)
    v = report.vortex
    v.truth_vortices += result.truth_count
    v.passes += result.passes
    v.false_positives += result.false_positives
    if len(pred.vortices) == len(truth.vortices):
        v.count_matches += 1
    if result.truth_count > 0:
        v.per_sample_sum += result.passes / result.truth_count
        v.per_sample_count += 1
    for m in result.matches:
        if m.position_ok:
            v.position_passes += 1
        if m.direction_ok:
            v.direction_passes += 1
        if m.pred_index is not None:
            v.matched_pairs += 1
            v.matched_distance_sum += (m.distance or 0.0) / max(grid.extent_x, grid.extent_y)
            if m.direction_ok:
                v.direction_matched += 1
            t = truth.vortices[m.truth_index]
            p = pred.vortices[m.pred_index]
            if abs(t.circulation) > 0 and abs(
                p.circulation - t.circulation
            ) <= 0.10 * abs(t.circulation):
                v.circulation_within_10pct += 1


def _accuracy_cell(accuracy: Optional[float]) -> str:
    return "NA" if accuracy is None else f"{accuracy:.2f}"


def render_markdown(report: BenchReport) -> str:
    lines = [
        "# Field benchmark report",
        "",
        f"Samples: {report.samples}",
        "",
        "| Task | Samples | Passes | Accuracy (%) |",
        "| --- | --- | --- | --- |",
        f"| Categorize Task | {report.categorize.samples} | {report.categorize.passes} "
        f"| {_accuracy_cell(report.categorize.accuracy)} |",
        f"| Reynolds Number | {report.reynolds.samples} | {report.reynolds.passes} "
        f"| {_accuracy_cell(report.reynolds.accuracy)} |",
        f"| Vortex Identification | {report.vortex.truth_vortices} | {report.vortex.passes} "
        f"| {_accuracy_cell(report.vortex.accuracy)} |",
        f"| Field Data Analysis | {report.field_analysis.samples} | {report.field_analysis.passes} "
        f"| {_accuracy_cell(report.field_analysis.accuracy)} |",
        "",
        "## Vortex detection capabilities",
        "",
        "| Capability | Value |",
        "| --- | --- |",
    ]
    grid = report.capability_grid()
    for row in CAPABILITY_ROWS:
        lines.append(f"| {row} | {grid[row]} |")
    lines.append("")
    return "\n".join(lines)


def render_csv(report: BenchReport) -> str:
    rows = [
        "task,samples,passes,na,accuracy",
        f"categorize,{report.categorize.samples},{report.categorize.passes},"
        f"{report.categorize.na},{_accuracy_cell(report.categorize.accuracy)}",
        f"reynolds,{report.reynolds.samples},{report.reynolds.passes},"
        f"{report.reynolds.na},{_accuracy_cell(report.reynolds.accuracy)}",
        f"vortex,{report.vortex.truth_vortices},{report.vortex.passes},"
        f"{report.vortex.na},{_accuracy_cell(report.vortex.accuracy)}",
        f"field_analysis,{report.field_analysis.samples},{report.field_analysis.passes},"
        f"{report.field_analysis.na},{_accuracy_cell(report.field_analysis.accuracy)}",
    ]
    return "\n".join(rows) + "\n"


def emit_report(report: BenchReport, fmt: str, path: Path | str) -> None:
    """Serialize the report; identical reports always produce identical bytes."""
    path = Path(path)
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    elif fmt == "csv":
        text = render_csv(report)
    elif fmt in ("markdown", "markdown-table", "md"):
        text = render_markdown(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.write_text(text, encoding="utf-8")
