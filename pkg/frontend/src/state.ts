/**
 * Application state and the pure reducer that advances it.
 *
 * Everything shown on screen is a function of this state, which is itself
 * a function of API responses plus the local draft. No view or controller
 * code computes retrieval results or scores.
 */

import type { EvidenceSlot, QueryResponse, RetrieverInfo, RoleInfo } from "./api.js";

export interface Badge {
  dataset_id: string;
  display_name: string;
  activated: boolean;
  fallback: boolean;
}

export interface EvidenceCard {
  key: string;
  dataset_id: string;
  display_name: string;
  doc_id: string;
  chunk_id: string;
  score: number | null;
  metadata: Record<string, unknown>;
  filter_text: string | null;
  fallback: boolean;
  text: string;
}

export interface TurnFailure {
  display_name: string;
  error: string;
}

export interface ChatTurn {
  id: number;
  role: string;
  query: string;
  answer: string;
  badges: Badge[];
  warning: boolean;
  cards: EvidenceCard[];
  failures: TurnFailure[];
}

export interface AppState {
  booted: boolean;
  bootError: string | null;
  roles: RoleInfo[];
  retrievers: RetrieverInfo[];
  currentRole: string;
  draft: string;
  pending: boolean;
  error: string | null;
  history: ChatTurn[];
  revealed: Record<string, boolean>;
  nextTurnId: number;
}

export type AppEvent =
  | { kind: "boot-data"; roles: RoleInfo[]; retrievers: RetrieverInfo[] }
  | { kind: "boot-failed"; message: string }
  | { kind: "draft-changed"; draft: string }
  | { kind: "role-switched"; role: string }
  | { kind: "submit-started" }
  | { kind: "query-succeeded"; response: QueryResponse }
  | { kind: "query-failed"; message: string }
  | { kind: "card-toggled"; key: string };

export function initialState(): AppState {
  return {
    booted: false,
    bootError: null,
    roles: [],
    retrievers: [],
    currentRole: "",
    draft: "",
    pending: false,
    error: null,
    history: [],
    revealed: {},
    nextTurnId: 1,
  };
}

export function canSubmit(state: AppState): boolean {
  return state.booted && !state.pending && state.draft.trim().length > 0;
}

export function currentPlaceholder(state: AppState): string {
  const role = state.roles.find((r) => r.role === state.currentRole);
  return role?.example_queries[0] ?? "Ask a question";
}

export function reduce(state: AppState, event: AppEvent): AppState {
  switch (event.kind) {
    case "boot-data":
      return {
        ...state,
        booted: true,
        bootError: null,
        roles: event.roles,
        retrievers: event.retrievers,
        currentRole: event.roles[0]?.role ?? "",
      };
    case "boot-failed":
      return { ...state, bootError: event.message };
    case "draft-changed":
      return { ...state, draft: event.draft };
    case "role-switched":
      // only roles the API advertised can be selected
      if (!state.roles.some((r) => r.role === event.role)) {
        return state;
      }
      return { ...state, currentRole: event.role };
    case "submit-started":
      return { ...state, pending: true, error: null };
    case "query-succeeded": {
      const turn = makeTurn(state.nextTurnId, state.retrievers, event.response);
      return {
        ...state,
        pending: false,
        draft: "",
        error: null,
        history: [...state.history, turn],
        nextTurnId: state.nextTurnId + 1,
      };
    }
    case "query-failed":
      return { ...state, pending: false, error: event.message };
    case "card-toggled":
      return {
        ...state,
        revealed: { ...state.revealed, [event.key]: !state.revealed[event.key] },
      };
  }
}

function makeTurn(id: number, retrievers: RetrieverInfo[], response: QueryResponse): ChatTurn {
  const slots = new Map<string, EvidenceSlot>();
  for (const slot of response.evidence) {
    slots.set(slot.dataset_id, slot);
  }
  // one badge per configured retriever, whether or not a slot came back
  const badges: Badge[] = retrievers.map((info) => {
    const slot = slots.get(info.dataset_id);
    return {
      dataset_id: info.dataset_id,
      display_name: info.display_name,
      activated: slot?.activated ?? false,
      fallback: slot?.trace?.fallback ?? false,
    };
  });
  const cards: EvidenceCard[] = [];
  const failures: TurnFailure[] = [];
  for (const slot of response.evidence) {
    if (slot.error !== null) {
      failures.push({ display_name: slot.display_name, error: slot.error });
      continue;
    }
    if (!slot.activated || slot.hits === null) {
      continue;
    }
    const filterText =
      slot.trace?.structured_query?.filter_text ?? slot.trace?.internal_query?.filter_text ?? null;
    for (const hit of slot.hits) {
      cards.push({
        key: `${id}:${hit.chunk.chunk_id}`,
        dataset_id: slot.dataset_id,
        display_name: slot.display_name,
        doc_id: hit.chunk.doc_id,
        chunk_id: hit.chunk.chunk_id,
        score: hit.score,
        metadata: hit.chunk.metadata,
        filter_text: filterText,
        fallback: slot.trace?.fallback ?? false,
        text: hit.chunk.text,
      });
    }
  }
  return {
    id,
    role: response.role,
    query: response.query,
    answer: response.text,
    badges,
    warning: response.selector.warning,
    cards,
    failures,
  };
}
