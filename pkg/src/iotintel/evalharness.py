"""Pairwise judge evaluation: assistant answer vs plain-LLM answer.

Both answers for a question go to the judge in one exchange so they are
scored under the same model state. The judge returns a Markdown table of
scores per metric; aggregation turns many such runs into per-role deltas
and an overall relative improvement figure.
"""

from __future__ import annotations

import json
import logging
import re
import statistics
from dataclasses import dataclass
from math import copysign, inf
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from iotintel.llmgateway import ChatProvider, ask

logger = logging.getLogger(__name__)

METRICS = ("Reliability", "Relevance", "Technical", "Friendliness")

METRIC_DESCRIPTIONS = {
    "Reliability": (
        "the trustworthiness and reliability of each answer, ensuring it is "
        "plausible and aligns with known IoT best practices and standards"),
    "Relevance": (
        "how well the answer addresses the specific question and meets the "
        "user's needs, considering their role and context in the IoT "
        "ecosystem"),
    "Technical": (
        "the appropriateness and precision of technical language, including "
        "IoT research, standards, protocols, and relevant technical aspects; "
        "the answer should demonstrate a solid understanding of IoT "
        "technologies"),
    "Friendliness": (
        "how easy the answer is to comprehend, focusing on clarity for the "
        "user's role, and how well the answer provides actionable steps or "
        "solutions tailored to the user's IoT security needs"),
}

ASSISTANT_LABEL = "Assistant_answer"
BASELINE_LABEL = "LLM_alone_answer"

SCORE_MIN = 0.0
SCORE_MAX = 5.0


class ScoreParseError(Exception):
    pass


@dataclass(frozen=True)
class ScoreCard:
    """Scores per answer label, all four metrics each, bounded [0, 5]."""

    scores: Mapping[str, Mapping[str, float]]

    def __post_init__(self) -> None:
        for label, per_metric in self.scores.items():
            missing = [m for m in METRICS if m not in per_metric]
            if missing:
                raise ValueError(f"label {label!r} missing metrics: {missing}")
            for metric, value in per_metric.items():
                if not (SCORE_MIN <= value <= SCORE_MAX):
                    raise ValueError(
                        f"score {value} for {label}/{metric} outside "
                        f"[{SCORE_MIN:g}, {SCORE_MAX:g}]")

    def labels(self) -> tuple[str, ...]:
        return tuple(self.scores)

    def score(self, label: str, metric: str) -> float:
        return self.scores[label][metric]


@dataclass(frozen=True)
class ComparisonRun:
    """One judged question: both answers and the scorecard from one exchange."""

    role: str
    question: str
    answer_a: str
    answer_b: str
    scorecard: ScoreCard
    judge_model: str = ""


@dataclass(frozen=True)
class CellStats:
    mean_assistant: float
    mean_baseline: float
    delta: float
    relative_improvement: float


@dataclass(frozen=True)
class AggregateReport:
    """Per (role, metric) means and deltas; overall = mean of cell ratios."""

    cells: Mapping[tuple[str, str], CellStats]
    overall_relative_improvement: float

    def roles(self) -> tuple[str, ...]:
        seen: list[str] = []
        for role, _ in self.cells:
            if role not in seen:
                seen.append(role)
        return tuple(seen)

    def to_csv(self) -> str:
        lines = ["role,metric,mean_assistant,mean_baseline,delta,"
                 "relative_improvement"]
        for role in self.roles():
            for metric in METRICS:
                cell = self.cells.get((role, metric))
                if cell is None:
                    continue
                lines.append(
                    f"{role},{metric},{cell.mean_assistant:.4f},"
                    f"{cell.mean_baseline:.4f},{cell.delta:+.4f},"
                    f"{cell.relative_improvement:+.4f}")
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        header = "| Role | " + " | ".join(METRICS) + " |"
        rule = "| --- |" + " --- |" * len(METRICS)
        rows = []
        for role in self.roles():
            cells = []
            for metric in METRICS:
                cell = self.cells.get((role, metric))
                cells.append("" if cell is None else
                             f"{cell.mean_assistant:.2f} ({cell.delta:+.2f})")
            rows.append(f"| {role} | " + " | ".join(cells) + " |")
        overall = (f"\nOverall mean relative improvement: "
                   f"{self.overall_relative_improvement:+.1%} "
                   f"(delta over baseline mean, averaged across cells)")
        return "\n".join([header, rule, *rows]) + overall + "\n"


def render_eval_prompt(role: str, question: str, assistant_answer: str,
                       baseline_answer: str) -> str:
    """Judge prompt holding both answers, the criteria, and the 0-5 scale."""
    if not assistant_answer.strip() or not baseline_answer.strip():
        raise ValueError("both answers must be non-empty")
    criteria = "\n".join(f"- {name}: {METRIC_DESCRIPTIONS[name]}."
                         for name in METRICS)
    return (
        f"You are an expert IoT security assistant. Your task is to evaluate "
        f"the answers to a question posed by a {role} user.\n\n"
        f"Question: {question}\n\n"
        f"Answers:\n"
        f"### {ASSISTANT_LABEL}\n{assistant_answer}\n\n"
        f"### {BASELINE_LABEL}\n{baseline_answer}\n\n"
        f"Criteria:\n{criteria}\n\n"
        f"Score: provide a score for each answer on each criterion. Scores "
        f"should range from 0 to 5, with 5 being the highest and 0 being the "
        f"lowest. Scores should reflect how well each answer meets the "
        f"criteria, particularly in alignment with the user role's "
        f"background and needs.\n\n"
        f"Output format: Present a table that includes the names of all "
        f"answers and their scores for each metric. Give brief explanations "
        f"for the scores. Respond in Markdown."
    )


_SEPARATOR_CELL = re.compile(r"^:?-{2,}:?$")


def _table_blocks(text: str) -> list[list[list[str]]]:
    """Contiguous runs of Markdown table rows, as lists of cell lists."""
    blocks: list[list[list[str]]] = []
    current: list[list[str]] = []
    for line in text.splitlines():
        stripped = line.strip()
        cells = [c.strip() for c in stripped.strip("|").split("|")] \
            if "|" in stripped else []
        if len(cells) >= 2:
            if all(_SEPARATOR_CELL.match(c) for c in cells if c):
                continue
            current.append(cells)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


def _clean_score(cell: str) -> float:
    text = cell.strip().strip("*`").strip()
    # tolerate "4.5 / 5" style cells
    if "/" in text:
        text = text.split("/", 1)[0].strip()
    try:
        return float(text)
    except ValueError:
        raise ScoreParseError(f"cell {cell!r} is not a number") from None


def _metric_for(cell: str) -> str | None:
    lowered = cell.lower()
    for metric in METRICS:
        if metric.lower() in lowered:
            return metric
    return None


def _card_from_rows(header: list[str],
                    rows: list[list[str]], transposed: bool) -> ScoreCard:
    scores: dict[str, dict[str, float]] = {}
    if not transposed:
        columns = {}
        for idx, cell in enumerate(header):
            metric = _metric_for(cell)
            if metric is not None and metric not in columns:
                columns[metric] = idx
        for row in rows:
            label = row[0]
            scores[label] = {}
            for metric, idx in columns.items():
                if idx >= len(row):
                    raise ScoreParseError(
                        f"row for {label!r} missing column {metric}")
                scores[label][metric] = _clean_score(row[idx])
    else:
        labels = header[1:]
        for row in rows:
            metric = _metric_for(row[0])
            if metric is None:
                continue
            for offset, label in enumerate(labels, start=1):
                if offset >= len(row):
                    raise ScoreParseError(
                        f"row for {metric} missing column {label!r}")
                scores.setdefault(label, {})[metric] = _clean_score(row[offset])
    problems = []
    for label, per_metric in scores.items():
        missing = [m for m in METRICS if m not in per_metric]
        if missing:
            problems.append(f"{label!r} missing {missing}")
        for metric, value in per_metric.items():
            if not (SCORE_MIN <= value <= SCORE_MAX):
                problems.append(f"{label!r} {metric} score {value:g} outside "
                                f"[0, 5]")
    if problems:
        raise ScoreParseError("; ".join(problems))
    if not scores:
        raise ScoreParseError("no answer rows found in table")
    return ScoreCard(scores)


def parse_scorecards(judge_output: str) -> ScoreCard:
    """Pull the score table out of judge prose, either orientation."""
    blocks = _table_blocks(judge_output)
    if not blocks:
        raise ScoreParseError("no Markdown table found in judge output")
    last_error: ScoreParseError | None = None
    for block in blocks:
        if len(block) < 2:
            continue
        header, rows = block[0], block[1:]
        in_header = sum(_metric_for(c) is not None for c in header)
        in_first_col = sum(_metric_for(r[0]) is not None for r in rows)
        if in_header == 0 and in_first_col == 0:
            continue
        try:
            # commit to whichever orientation shows more metric names, so a
            # table lacking one metric still errors naming the absent one
            return _card_from_rows(header, rows,
                                   transposed=in_first_col > in_header)
        except ScoreParseError as exc:
            last_error = exc
    if last_error is not None:
        raise last_error
    raise ScoreParseError("no table with all four metrics found")


def render_scorecard_table(card: ScoreCard) -> str:
    """Canonical Markdown table; parse_scorecards inverts this."""
    lines = ["| Answer | " + " | ".join(METRICS) + " |",
             "| --- |" + " --- |" * len(METRICS)]
    for label in card.labels():
        cells = " | ".join(format(card.score(label, m), "g") for m in METRICS)
        lines.append(f"| {label} | {cells} |")
    return "\n".join(lines)


def run_comparison(role: str, question: str, assistant_answer: str,
                   baseline_answer: str, judge: ChatProvider) -> ComparisonRun:
    """Judge both answers in one exchange and return the scored run."""
    prompt = render_eval_prompt(role, question, assistant_answer,
                                baseline_answer)
    raw = ask(judge, prompt)
    card = parse_scorecards(raw)
    absent = [label for label in (ASSISTANT_LABEL, BASELINE_LABEL)
              if label not in card.scores]
    if absent:
        raise ScoreParseError(f"judge table missing labels: {absent}")
    return ComparisonRun(role, question, assistant_answer, baseline_answer,
                         card, judge_model=getattr(judge, "default_model", ""))


def _relative(delta: float, mean_b: float) -> float:
    if mean_b == 0:
        return 0.0 if delta == 0 else copysign(inf, delta)
    return delta / mean_b


def aggregate(runs: Sequence[ComparisonRun]) -> AggregateReport:
    """Mean scores per (role, metric) cell, deltas, and the overall ratio."""
    if not runs:
        raise ValueError("runs must be non-empty")
    grouped: dict[tuple[str, str], tuple[list[float], list[float]]] = {}
    for run in runs:
        for metric in METRICS:
            a_list, b_list = grouped.setdefault((run.role, metric), ([], []))
            a_list.append(run.scorecard.score(ASSISTANT_LABEL, metric))
            b_list.append(run.scorecard.score(BASELINE_LABEL, metric))
    cells = {}
    for key, (a_list, b_list) in grouped.items():
        mean_a = statistics.fmean(a_list)
        mean_b = statistics.fmean(b_list)
        delta = mean_a - mean_b
        cells[key] = CellStats(mean_a, mean_b, delta, _relative(delta, mean_b))
    overall = statistics.fmean(c.relative_improvement for c in cells.values())
    return AggregateReport(cells, overall)


@dataclass(frozen=True)
class QuestionItem:
    role: str
    question: str


def load_question_bank(path: str | Path) -> list[QuestionItem]:
    """Newline-delimited JSON of {role, question} records."""
    items = []
    for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON: {exc}") from exc
        role = obj.get("role")
        question = obj.get("question")
        if not isinstance(role, str) or not role.strip():
            raise ValueError(f"line {lineno}: missing role")
        if not isinstance(question, str) or not question.strip():
            raise ValueError(f"line {lineno}: missing question")
        items.append(QuestionItem(role, question))
    return items


AnswerFn = Callable[[str, str], str]


def run_bank(items: Iterable[QuestionItem], assistant_fn: AnswerFn,
             baseline_fn: AnswerFn, judge: ChatProvider) -> list[ComparisonRun]:
    """Judge every bank question: assistant answer vs baseline answer."""
    runs = []
    for item in items:
        assistant = assistant_fn(item.role, item.question)
        baseline = baseline_fn(item.role, item.question)
        runs.append(run_comparison(item.role, item.question, assistant,
                                   baseline, judge))
    return runs
