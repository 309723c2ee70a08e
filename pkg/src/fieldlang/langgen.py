"""Structured text generation over analysis reports.

Answers are deterministic templates (2-decimal numbers, fixed field
order), training records follow the ``Human: X, X_q <STOP> Assistant: X_l``
line grammar, and an optional remote polisher can rewrite a draft as long
as it preserves every numeral.
"""

from __future__ import annotations

import json
import logging
import re
import urllib.request
from dataclasses import dataclass
from typing import Callable

from .features import AnalysisReport

logger = logging.getLogger(__name__)

STOP_TOKEN = "<STOP>"

TASKS = ("categorize", "reynolds", "vortex", "field-analysis")

QUESTION_BANK_VERSION = "1"

_COUNT_WORDS = {
    2: "Two", 3: "Three", 4: "Four", 5: "Five", 6: "Six", 7: "Seven",
    8: "Eight", 9: "Nine", 10: "Ten", 11: "Eleven", 12: "Twelve",
    13: "Thirteen", 14: "Fourteen", 15: "Fifteen", 16: "Sixteen",
    17: "Seventeen", 18: "Eighteen", 19: "Nineteen", 20: "Twenty",
}

_LABEL_TITLES = {
    "lid-driven-cavity": "Lid-Driven Cavity Flow.",
    "bluff-body-wake": "Bluff Body Wake Flow.",
    "channel": "Channel Flow.",
    "vortex-array": "Vortex Array Flow.",
    "uniform": "Uniform Flow.",
    "unknown": "Unclassified Flow.",
}

_CAVITY_CLAUSE = (
    "The velocity vector matrix reveals characteristic structures: "
    "a strong shear layer at the top and recirculation zones at the bottom."
)

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


@dataclass(frozen=True)
class Question:
    id: str
    task: str
    text: str

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not self.text:
            raise ValueError("question text must be non-empty")


_QUESTION_BANK: dict[str, tuple[Question, ...]] = {
    "categorize": (
        Question(
            "categorize-1",
            "categorize",
            "Judge the type of flow field based on the coupled effect of "
            "velocity field and pressure field.",
        ),
        Question(
            "categorize-2",
            "categorize",
            "What type of flow field do the velocity and pressure data describe?",
        ),
    ),
    "reynolds": (
        Question("reynolds-1", "reynolds", "Calculate the Reynolds number of this flow field."),
        Question(
            "reynolds-2",
            "reynolds",
            "What is the Reynolds number of this field, and which flow regime does it imply?",
        ),
    ),
    "vortex": (
        Question(
            "vortex-1",
            "vortex",
            "Please analyze the detailed parameters of all vortex structures.",
        ),
        Question(
            "vortex-2",
            "vortex",
            "How many vortices are present, and what are their positions and rotation directions?",
        ),
    ),
    "field-analysis": (
        Question(
            "field-analysis-1",
            "field-analysis",
            "Analyze the velocity and pressure distribution of this flow field.",
        ),
        Question(
            "field-analysis-2",
            "field-analysis",
            "Where does the flow reach its peak velocity, and where are the pressure extrema?",
        ),
    ),
}


def question_bank(task: str) -> list[Question]:
    """The fixed, versioned question set for one task."""
    if task not in _QUESTION_BANK:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    return list(_QUESTION_BANK[task])


def _count_phrase(n: int) -> str:
    if n == 0:
        return "0 vortices were detected"
    if n == 1:
        return "One vortex was detected"
    word = _COUNT_WORDS.get(n, str(n))
    return f"{word} vortices were detected"


def render_vortex_answer(report: AnalysisReport) -> str:
    """Counted vortex blocks: length, height, circulation, coordinates, rotation direction."""
    head = _count_phrase(len(report.vortices))
    if not report.vortices:
        return head
    blocks = []
    for i, v in enumerate(report.vortices, start=1):
        blocks.append(
            f"vortex {i}: [length {v.length:.2f}, height {v.height:.2f}, "
            f"circulation {v.circulation:.2f}, "
            f"coordinates ({v.center[0]:.2f},{v.center[1]:.2f}), "
            f"rotation direction: {v.direction}]"
        )
    return f"{head}, " + " ".join(blocks)


def render_classification_answer(report: AnalysisReport) -> str:
    """Label headline, the canonical label token, and the fired-rule evidence."""
    label = report.flow.label
    parts = [_LABEL_TITLES.get(label, "Unclassified Flow.")]
    parts.append(f"The flow field is classified as {label}.")
    if label == "lid-driven-cavity":
        parts.append(_CAVITY_CLAUSE)
    if report.flow.evidence:
        measured = "; ".join(
            f"{e.feature} = {e.value:.6g} (rule: {e.rule})" for e in report.flow.evidence
        )
        parts.append(f"Supporting evidence includes: {measured}.")
    return " ".join(parts)


def render_field_analysis_answer(report: AnalysisReport) -> str:
    """Peak velocity, pressure extrema, and vorticity peak, each with its location."""
    u = report.u_max
    pmin = report.p_min
    pmax = report.p_max
    w = report.max_abs_vorticity
    return (
        f"The peak velocity value is {u.value:.2f} m/s at "
        f"X={u.location[0]:.2f}, Y={u.location[1]:.2f}. "
        f"The minimum pressure is {pmin.value:.2f} at "
        f"X={pmin.location[0]:.2f}, Y={pmin.location[1]:.2f} and the maximum pressure is "
        f"{pmax.value:.2f} at X={pmax.location[0]:.2f}, Y={pmax.location[1]:.2f}. "
        f"The maximum absolute vorticity is {w.value:.2f} 1/s at "
        f"X={w.location[0]:.2f}, Y={w.location[1]:.2f}."
    )


def render_reynolds_answer(report: AnalysisReport) -> str:
    """Reynolds number at 2 decimals plus a laminar/turbulent regime note."""
    re_value = report.reynolds
    if re_value < 2000.0:
        regime = "The flow is laminar (Re < 2000)."
    else:
        regime = "The flow is transitional or turbulent (Re >= 2000)."
    return f"The Reynolds number of this flow field is {re_value:.2f}. {regime}"


_RENDERERS: dict[str, Callable[[AnalysisReport], str]] = {
    "categorize": render_classification_answer,
    "reynolds": render_reynolds_answer,
    "vortex": render_vortex_answer,
    "field-analysis": render_field_analysis_answer,
}


def render_answer(report: AnalysisReport, task: str) -> str:
    if task not in _RENDERERS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    return _RENDERERS[task](report)


def tokens_field_ref(tokens) -> str:
    """Render a token sequence as the bracketed X reference used in records."""
    return "[" + " ".join(str(int(t)) for t in tokens) + "]"


def emit_training_record(field_ref: str, question: Question | str, answer: str) -> str:
    """One dataset line: ``Human: <X>, <X_q> <STOP> Assistant: <X_l>``.

    Newlines are rejected everywhere; the field reference must not contain
    the ``", "`` separator and no part may contain the stop token, so the
    record re-parses unambiguously.
    """
    q_text = question.text if isinstance(question, Question) else question
    for name, part in (("field_ref", field_ref), ("question", q_text), ("answer", answer)):
        if not part:
            raise ValueError(f"{name} must be non-empty")
        if "\n" in part or "\r" in part:
            raise ValueError(f"{name} must not contain newlines")
        if STOP_TOKEN in part:
            raise ValueError(f"{name} must not contain the stop token")
    if ", " in field_ref:
        raise ValueError('field_ref must not contain the ", " separator')
    return f"Human: {field_ref}, {q_text} {STOP_TOKEN} Assistant: {answer}"


def parse_training_record(line: str) -> tuple[str, str, str]:
    """Invert :func:`emit_training_record`; returns (field_ref, question, answer)."""
    prefix = "Human: "
    if not line.startswith(prefix):
        raise ValueError("record does not start with 'Human: '")
    rest = line[len(prefix):]
    separator = f" {STOP_TOKEN} Assistant: "
    if separator not in rest:
        raise ValueError("record is missing the '<STOP> Assistant:' separator")
    human, answer = rest.split(separator, 1)
    if ", " not in human:
        raise ValueError("record is missing the field/question separator")
    field_ref, question = human.split(", ", 1)
    if not field_ref or not question or not answer:
        raise ValueError("record has an empty part")
    return field_ref, question, answer


def _http_transport(endpoint: str, payload: dict, timeout: float) -> dict:
    body = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(
        endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return json.loads(response.read().decode("utf-8"))


@dataclass(frozen=True)
class PolisherClient:
    """Remote rewrite endpoint: request {draft, report}, response {text}.

    ``transport`` may be replaced (tests, alternative protocols); it takes
    (endpoint, payload, timeout) and returns the decoded response dict.
    """

    endpoint: str
    timeout: float = 10.0
    retries: int = 1
    transport: Callable[[str, dict, float], dict] = _http_transport


def polish(client: PolisherClient, draft: str, report: AnalysisReport) -> str:
    """Ask the polisher to rewrite ``draft``; fall back to it on any failure.

    The rewrite is accepted only if every numeral of the draft appears
    verbatim in it, so polished text can never change a measured value.
    """
    payload = {"draft": draft, "report": report.to_dict()}
    response = None
    for attempt in range(client.retries + 1):
        try:
            response = client.transport(client.endpoint, payload, client.timeout)
            break
        except Exception as exc:
            logger.warning(
                "polisher call %d/%d to %s failed: %s",
                attempt + 1,
                client.retries + 1,
                client.endpoint,
                exc,
            )
    if not isinstance(response, dict) or not isinstance(response.get("text"), str):
        logger.warning("polisher unavailable or malformed response; keeping draft")
        return draft
    polished = response["text"]
    missing = [n for n in _NUMBER_RE.findall(draft) if n not in polished]
    if missing:
        logger.warning("polisher dropped numeric values %s; keeping draft", missing)
        return draft
    return polished
