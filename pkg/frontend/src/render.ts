/**
 * View layer: turns an AppState into an HTML string.
 *
 * Rendering is a pure function with no DOM access, which keeps it trivially
 * testable. main.ts swaps the result into the page and wires events.
 */

import type { AppState, Badge, ChatTurn, EvidenceCard } from "./state.js";
import { canSubmit, currentPlaceholder } from "./state.js";
import { escapeHtml, renderMarkdown } from "./markdown.js";

export function renderApp(state: AppState): string {
  if (!state.booted) {
    return renderBoot(state);
  }
  const parts = [
    "<main class=\"app\">",
    renderHeader(state),
    renderHistory(state),
    state.error ? `<div class="banner error" role="alert">${escapeHtml(state.error)}</div>` : "",
    renderComposer(state),
    "</main>",
  ];
  return parts.filter((p) => p !== "").join("\n");
}

function renderBoot(state: AppState): string {
  if (state.bootError) {
    return `<main class="app"><div class="banner error" role="alert">${escapeHtml(
      state.bootError,
    )}</div></main>`;
  }
  return "<main class=\"app\"><p class=\"loading\">Connecting to the assistant&hellip;</p></main>";
}

function renderHeader(state: AppState): string {
  const options = state.roles
    .map((r) => {
      const selected = r.role === state.currentRole ? " selected" : "";
      return `<option value="${escapeHtml(r.role)}"${selected}>${escapeHtml(r.role)}</option>`;
    })
    .join("");
  return [
    "<header class=\"topbar\">",
    "<h1>IoT Threat Intelligence Assistant</h1>",
    `<label class="role-picker">Role <select id="role-select">${options}</select></label>`,
    "</header>",
  ].join("");
}

function renderHistory(state: AppState): string {
  if (state.history.length === 0) {
    return "<section class=\"chat\" id=\"chat\"><p class=\"empty\">No questions yet. Ask one below.</p></section>";
  }
  const turns = state.history.map((turn) => renderTurn(turn, state.revealed)).join("\n");
  return `<section class="chat" id="chat">${turns}</section>`;
}

function renderTurn(turn: ChatTurn, revealed: Record<string, boolean>): string {
  const parts = [
    `<article class="turn" data-turn-id="${turn.id}">`,
    `<div class="query"><span class="who">${escapeHtml(turn.role)}</span> ${escapeHtml(turn.query)}</div>`,
    `<div class="badges">${turn.badges.map(renderBadge).join("")}</div>`,
  ];
  if (turn.warning) {
    parts.push(
      "<p class=\"selector-warning\">Source selection could not be parsed, so every source was searched.</p>",
    );
  }
  parts.push(`<div class="answer">${renderMarkdown(turn.answer)}</div>`);
  for (const failure of turn.failures) {
    parts.push(
      `<p class="slot-error">${escapeHtml(failure.display_name)}: ${escapeHtml(failure.error)}</p>`,
    );
  }
  if (turn.cards.length > 0) {
    const cards = turn.cards.map((card) => renderCard(card, Boolean(revealed[card.key]))).join("");
    parts.push(`<div class="evidence">${cards}</div>`);
  }
  parts.push("</article>");
  return parts.join("\n");
}

function renderBadge(badge: Badge): string {
  const cls = badge.activated ? "badge on" : "badge off";
  const flag = badge.fallback
    ? "<span class=\"fallback-flag\" title=\"this source fell back to an unfiltered search\">&#9888;</span>"
    : "";
  return `<span class="${cls}">${escapeHtml(badge.display_name)}${flag}</span>`;
}

function renderCard(card: EvidenceCard, isRevealed: boolean): string {
  const parts = [
    `<div class="evidence-card${isRevealed ? " revealed" : ""}" data-card-key="${escapeHtml(card.key)}">`,
    `<div class="card-head"><span class="dataset">${escapeHtml(card.display_name)}</span> <span class="doc-id">${escapeHtml(card.doc_id)}</span>${formatScore(card.score)}</div>`,
  ];
  if (card.fallback) {
    parts.push(
      "<p class=\"fallback-warning\">Filtered search failed; these results come from an unfiltered search.</p>",
    );
  }
  parts.push(renderMetadataTable(card.metadata));
  if (isRevealed) {
    const filter = card.filter_text === null ? "(none)" : card.filter_text;
    parts.push(`<p class="filter-used">Filter: <code>${escapeHtml(filter)}</code></p>`);
    parts.push(`<blockquote class="chunk-text">${escapeHtml(card.text)}</blockquote>`);
  }
  parts.push("</div>");
  return parts.join("");
}

function formatScore(score: number | null): string {
  if (score === null) {
    return "";
  }
  return ` <span class="score">score ${score.toFixed(3)}</span>`;
}

function renderMetadataTable(metadata: Record<string, unknown>): string {
  const keys = Object.keys(metadata).sort();
  if (keys.length === 0) {
    return "";
  }
  const rows = keys
    .map(
      (key) =>
        `<tr><th>${escapeHtml(key)}</th><td>${escapeHtml(formatMetadataValue(metadata[key]))}</td></tr>`,
    )
    .join("");
  return `<table class="metadata">${rows}</table>`;
}

function formatMetadataValue(value: unknown): string {
  if (value === null || value === undefined) {
    return "";
  }
  if (typeof value === "string") {
    return value;
  }
  if (Array.isArray(value)) {
    return value.map((item) => formatMetadataValue(item)).join(", ");
  }
  if (typeof value === "object") {
    return JSON.stringify(value);
  }
  return String(value);
}

function renderComposer(state: AppState): string {
  const disabled = canSubmit(state) ? "" : " disabled";
  const pending = state.pending ? " disabled" : "";
  return [
    "<form id=\"query-form\" class=\"composer\" autocomplete=\"off\">",
    `<input id="query-input" name="query" value="${escapeHtml(state.draft)}" placeholder="${escapeHtml(
      currentPlaceholder(state),
    )}"${pending}>`,
    `<button id="submit-btn" type="submit"${disabled}>${state.pending ? "Asking&hellip;" : "Ask"}</button>`,
    "</form>",
  ].join("");
}
