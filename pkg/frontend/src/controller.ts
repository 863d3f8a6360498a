/**
 * Glue between the API client and the reducer. Owns the single AppState
 * instance and re-renders after every event. At most one query is in
 * flight: submit() refuses while a previous one is pending.
 */

import { ApiClient, ApiError } from "./api.js";
import type { AppEvent, AppState } from "./state.js";
import { canSubmit, initialState, reduce } from "./state.js";

export class Controller {
  private state: AppState = initialState();

  constructor(
    private api: ApiClient,
    private onChange: (state: AppState) => void,
  ) {}

  get current(): AppState {
    return this.state;
  }

  dispatch(event: AppEvent): void {
    this.state = reduce(this.state, event);
    this.onChange(this.state);
  }

  async boot(): Promise<void> {
    try {
      const [roles, retrievers] = await Promise.all([this.api.roles(), this.api.retrievers()]);
      this.dispatch({ kind: "boot-data", roles, retrievers });
    } catch (err) {
      this.dispatch({ kind: "boot-failed", message: describeError(err) });
    }
  }

  setDraft(draft: string): void {
    this.dispatch({ kind: "draft-changed", draft });
  }

  switchRole(role: string): void {
    this.dispatch({ kind: "role-switched", role });
  }

  toggleCard(key: string): void {
    this.dispatch({ kind: "card-toggled", key });
  }

  async submit(): Promise<void> {
    if (!canSubmit(this.state)) {
      return;
    }
    const role = this.state.currentRole;
    const query = this.state.draft.trim();
    this.dispatch({ kind: "submit-started" });
    try {
      const response = await this.api.query(role, query);
      this.dispatch({ kind: "query-succeeded", response });
    } catch (err) {
      this.dispatch({ kind: "query-failed", message: describeError(err) });
    }
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return `Request failed (${err.status}): ${err.message}`;
  }
  if (err instanceof Error) {
    return err.message;
  }
  return String(err);
}
