/**
 * Controller: owns the session state, serializes mutating requests (one
 * in flight at a time), and re-renders strictly from server responses.
 * Nothing about the text is persisted in the browser.
 */

import { ApiError, Client } from "./api.js";
import type { CandidateEntry, ImportanceEntry, MetaInfo, SessionState } from "./api.js";
import {
  renderBanner,
  renderCandidates,
  renderGeneratorSelect,
  renderHistory,
  renderPrediction,
  renderTokenStrip,
  type ViewHandlers,
} from "./view.js";

const TOP_K = 10;

export class App {
  session: SessionState | null = null;
  importance: ImportanceEntry[] = [];
  candidates: CandidateEntry[] = [];
  selected: number | null = null;
  generator = "synonym";
  meta: MetaInfo | null = null;
  private mutationInFlight = false;

  private readonly handlers: ViewHandlers = {
    onTokenClick: (index) => void this.inspectToken(index),
    onApply: (token) => void this.applyCandidate(token),
    onUndo: () => void this.undo(),
    onGeneratorChange: (generator) => {
      this.generator = generator;
      if (this.selected !== null) void this.inspectToken(this.selected);
    },
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly client: Client = new Client(),
  ) {}

  async loadMeta(): Promise<void> {
    try {
      this.meta = await this.client.meta();
      const labelSelect = this.root.querySelector<HTMLSelectElement>(".label-select");
      if (labelSelect && this.meta) {
        labelSelect.replaceChildren();
        for (const label of this.meta.labels) {
          const option = document.createElement("option");
          option.value = label;
          option.textContent = label;
          labelSelect.appendChild(option);
        }
      }
      this.render();
    } catch (err) {
      this.showError(err);
    }
  }

  async startSession(text: string, y: string): Promise<void> {
    try {
      const session = await this.client.createSession(text, y);
      const ranking = await this.client.importance(session.session_id);
      // Only commit once both calls succeeded: a failure leaves the
      // previous view untouched.
      this.session = session;
      this.importance = ranking.scores;
      this.selected = null;
      this.candidates = [];
      renderBanner(this.root, null);
      this.render();
    } catch (err) {
      this.showError(err);
    }
  }

  async inspectToken(index: number): Promise<void> {
    if (!this.session) return;
    try {
      const response = await this.client.candidates(
        this.session.session_id,
        index,
        this.generator,
        TOP_K,
      );
      this.selected = index;
      this.candidates = response.candidates;
      renderBanner(this.root, null);
      this.render();
    } catch (err) {
      this.showError(err);
    }
  }

  async applyCandidate(token: string): Promise<void> {
    if (!this.session || this.selected === null) return;
    if (this.mutationInFlight) return; // double-click guard
    this.mutationInFlight = true;
    this.render();
    try {
      const state = await this.client.apply(
        this.session.session_id,
        this.selected,
        token,
      );
      await this.refreshAfterMutation(state);
    } catch (err) {
      this.showError(err);
    } finally {
      this.mutationInFlight = false;
      this.render();
    }
  }

  async undo(): Promise<void> {
    if (!this.session) return;
    if (this.mutationInFlight) return;
    this.mutationInFlight = true;
    this.render();
    try {
      const state = await this.client.revert(this.session.session_id);
      await this.refreshAfterMutation(state);
    } catch (err) {
      this.showError(err);
    } finally {
      this.mutationInFlight = false;
      this.render();
    }
  }

  private async refreshAfterMutation(state: SessionState): Promise<void> {
    this.session = state;
    const ranking = await this.client.importance(state.session_id);
    this.importance = ranking.scores;
    this.candidates = [];
    this.selected = null;
    renderBanner(this.root, null);
  }

  private showError(err: unknown): void {
    const message =
      err instanceof ApiError ? `${err.status || "network"}: ${err.message}` : String(err);
    renderBanner(this.root, message);
  }

  render(): void {
    const busy = this.mutationInFlight;
    const tokenStrip = this.root.querySelector<HTMLElement>(".token-strip");
    const prediction = this.root.querySelector<HTMLElement>(".prediction");
    const history = this.root.querySelector<HTMLElement>(".history");
    const candidates = this.root.querySelector<HTMLElement>(".candidates");
    const generatorSelect = this.root.querySelector<HTMLSelectElement>(".generator-select");

    if (generatorSelect && this.meta) {
      renderGeneratorSelect(generatorSelect, this.meta.generators, this.generator,
                            this.handlers);
    }
    if (!this.session) return;
    if (tokenStrip) {
      renderTokenStrip(tokenStrip, this.session, this.importance, this.selected,
                       this.handlers);
    }
    if (prediction) renderPrediction(prediction, this.session);
    if (history) renderHistory(history, this.session, busy, this.handlers);
    if (candidates) {
      renderCandidates(candidates, this.session, this.candidates, busy, this.handlers);
    }
  }
}
