"""Selector-then-generate pipeline over a registry of self-querying retrievers.

One request flows through two LLM calls: a selector prompt (SPT) that picks
which retrievers to activate, then a generation prompt (UPT) that answers the
query from the retrieved evidence, tailored to the requesting role.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

from iotintel.corpus import RoleProfile
from iotintel.index import Hit
from iotintel.llmgateway import ChatProvider, GatewayError, ask, extract_json_object
from iotintel.selfquery import RetrievalTrace, RetrieverError, SelfQueryRetriever

logger = logging.getLogger(__name__)

SELECTOR_TASK = (
    "You route an IoT security question to data sources. Given the user's "
    "role and question, decide for each numbered source whether searching it "
    "could contribute useful evidence."
)

GENERATION_TASK = (
    "You are an IoT security assistant. Answer the user's question for the "
    "role described below, grounding every claim in the evidence sections. "
    "If the evidence does not cover the question, say so plainly."
)


class OrchestratorError(Exception):
    pass


@dataclass(frozen=True)
class SelectorConfig:
    """Activation decisions, aligned to retriever registration order."""

    decisions: tuple[bool, ...]
    raw_output: str
    warning: bool = False

    def to_dict(self) -> dict:
        return {
            "decisions": list(self.decisions),
            "raw_output": self.raw_output,
            "warning": self.warning,
        }


@dataclass(frozen=True)
class RetrievalSlot:
    """Outcome for one registered retriever.

    Exactly one shape per slot: hits when activated and successful, the null
    marker (activated false, hits None) when the selector skipped it, or a
    failure record (activated true, hits None, error set).
    """

    dataset_id: str
    display_name: str
    activated: bool
    hits: tuple[Hit, ...] | None = None
    trace: RetrievalTrace | None = None
    error: str | None = None

    @property
    def is_null(self) -> bool:
        return not self.activated

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "display_name": self.display_name,
            "activated": self.activated,
            "hits": None if self.hits is None else [
                {"chunk": h.chunk.to_dict(), "score": h.score} for h in self.hits
            ],
            "trace": None if self.trace is None else self.trace.to_dict(),
            "error": self.error,
        }


@dataclass(frozen=True)
class Answer:
    text: str
    selector: SelectorConfig
    evidence: tuple[RetrievalSlot, ...]
    role: RoleProfile
    query: str

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "role": self.role.role,
            "query": self.query,
            "selector": self.selector.to_dict(),
            "evidence": [slot.to_dict() for slot in self.evidence],
        }


def _background_block(role: RoleProfile) -> str:
    bg = role.background
    return (
        f"Role: {role.role}\n"
        f"Knowledge: {bg.knowledge}\n"
        f"Goals: {bg.goals}\n"
        f"Requirements: {bg.requirements}"
    )


def render_spt(task: str, role: RoleProfile, query: str,
               descriptions: Sequence[str]) -> str:
    """Build the selector prompt: task, role background, sources, query."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    if not descriptions:
        raise ValueError("at least one retriever description is required")
    sources = "\n".join(
        f"R{i}. {text}" for i, text in enumerate(descriptions, start=1)
    )
    shape = ", ".join(f'"S{i}": true|false'
                      for i in range(1, len(descriptions) + 1))
    return (
        f"{task}\n\n"
        f"{_background_block(role)}\n\n"
        f"Data sources:\n{sources}\n\n"
        f"User query: {query}\n\n"
        f"Respond with only a JSON object: {{{shape}}}\n"
        f"Use true when the source is likely to hold relevant evidence."
    )


def parse_selector(llm_output: str, n: int) -> SelectorConfig:
    """Parse {"S1": bool, ...}; anything unusable becomes all-true + warning."""
    if n < 1:
        raise ValueError("n must be at least 1")
    fallback = SelectorConfig(tuple([True] * n), llm_output, warning=True)
    try:
        obj = extract_json_object(llm_output)
    except ValueError:
        logger.warning("selector output unparseable, activating all retrievers")
        return fallback
    decisions = []
    for i in range(1, n + 1):
        value = obj.get(f"S{i}")
        if not isinstance(value, bool):
            logger.warning("selector key S%d missing or non-boolean", i)
            return fallback
        decisions.append(value)
    return SelectorConfig(tuple(decisions), llm_output)


def render_upt(task: str, role: RoleProfile, query: str,
               retrieved: Sequence[RetrievalSlot]) -> str:
    """Build the generation prompt with one evidence section per slot with hits."""
    sections = []
    for slot in retrieved:
        if not slot.hits:
            continue
        entries = "\n".join(
            f"[{j}] {hit.chunk.text}\n"
            f"metadata: {json.dumps(hit.chunk.metadata, sort_keys=True)}"
            for j, hit in enumerate(slot.hits, start=1)
        )
        sections.append(f"## Evidence: {slot.display_name}\n{entries}")
    evidence = "\n\n".join(sections) if sections else \
        "No retrieved evidence is available."
    return (
        f"{task}\n\n"
        f"{_background_block(role)}\n\n"
        f"User query: {query}\n\n"
        f"{evidence}\n\n"
        f"Answer the query in the style the requirements describe."
    )


def answer(role: RoleProfile, query: str,
           registry: Sequence[SelfQueryRetriever],
           llm: ChatProvider) -> Answer:
    """Run select, retrieve, generate; returns the answer with full traces."""
    if not registry:
        raise ValueError("registry must contain at least one retriever")
    if not query.strip():
        raise ValueError("query must be non-empty")

    spt = render_spt(SELECTOR_TASK, role, query,
                     [r.description for r in registry])
    try:
        raw = ask(llm, spt)
        selector = parse_selector(raw, len(registry))
    except GatewayError as exc:
        # no selector verdict is recoverable: retrieve everywhere
        logger.warning("selector call failed (%s), activating all retrievers", exc)
        selector = SelectorConfig(tuple([True] * len(registry)), "", warning=True)

    slots = []
    for decision, retriever in zip(selector.decisions, registry):
        name = retriever.descriptor.display_name
        if not decision:
            slots.append(RetrievalSlot(retriever.dataset_id, name, False))
            continue
        try:
            hits, trace = retriever.retrieve(query)
            slots.append(RetrievalSlot(retriever.dataset_id, name, True,
                                       hits=tuple(hits), trace=trace))
        except RetrieverError as exc:
            slots.append(RetrievalSlot(retriever.dataset_id, name, True,
                                       error=str(exc)))

    upt = render_upt(GENERATION_TASK, role, query, slots)
    try:
        text = ask(llm, upt)
    except GatewayError as exc:
        raise OrchestratorError(f"generation failed: {exc}") from exc
    return Answer(text, selector, tuple(slots), role, query)
