/**
 * Browser entry point. Renders into #app and delegates all events from the
 * root element, so handlers survive innerHTML swaps.
 */

import { ApiClient } from "./api.js";
import { Controller } from "./controller.js";
import { renderApp } from "./render.js";

export function start(root: HTMLElement, api: ApiClient = new ApiClient()): Controller {
  const controller = new Controller(api, (state) => {
    const active = document.activeElement;
    const hadFocus = active instanceof HTMLInputElement && active.id === "query-input";
    const caret = hadFocus ? active.selectionStart : null;
    root.innerHTML = renderApp(state);
    if (hadFocus) {
      const input = root.querySelector<HTMLInputElement>("#query-input");
      if (input) {
        input.focus();
        if (caret !== null) {
          input.setSelectionRange(caret, caret);
        }
      }
    }
    const chat = root.querySelector("#chat");
    chat?.scrollTo(0, chat.scrollHeight);
  });

  root.addEventListener("input", (event) => {
    const target = event.target;
    if (target instanceof HTMLInputElement && target.id === "query-input") {
      controller.setDraft(target.value);
    }
  });

  root.addEventListener("change", (event) => {
    const target = event.target;
    if (target instanceof HTMLSelectElement && target.id === "role-select") {
      controller.switchRole(target.value);
    }
  });

  root.addEventListener("submit", (event) => {
    const target = event.target;
    if (target instanceof HTMLFormElement && target.id === "query-form") {
      event.preventDefault();
      void controller.submit();
    }
  });

  root.addEventListener("click", (event) => {
    const target = event.target;
    if (!(target instanceof Element)) {
      return;
    }
    const card = target.closest<HTMLElement>(".evidence-card");
    if (card?.dataset.cardKey) {
      controller.toggleCard(card.dataset.cardKey);
    }
  });

  void controller.boot();
  return controller;
}

const rootEl = typeof document === "undefined" ? null : document.getElementById("app");
if (rootEl) {
  start(rootEl);
}
