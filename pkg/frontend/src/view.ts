/**
 * DOM rendering. Every rendered number carries its exact server value in
 * a data attribute so the display stays traceable to a response field.
 */

import type { CandidateEntry, ImportanceEntry, SessionState } from "./api.js";
import {
  deltaDirection,
  formatProbability,
  normalizeImportance,
  sortCandidates,
  tintFor,
} from "./state.js";

export interface ViewHandlers {
  onTokenClick(index: number): void;
  onApply(token: string): void;
  onUndo(): void;
  onGeneratorChange(generator: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderBanner(root: HTMLElement, message: string | null): void {
  const banner = root.querySelector<HTMLElement>(".banner");
  if (!banner) return;
  if (message === null) {
    banner.hidden = true;
    banner.textContent = "";
    return;
  }
  banner.hidden = false;
  banner.textContent = message;
}

export function renderTokenStrip(
  container: HTMLElement,
  session: SessionState,
  importance: ImportanceEntry[],
  selected: number | null,
  handlers: ViewHandlers,
): void {
  const tint = normalizeImportance(importance);
  container.replaceChildren();
  session.tokens.forEach((token, index) => {
    const normalized = tint.get(index) ?? 0;
    const span = el("span", "token", token);
    span.dataset.index = String(index);
    span.dataset.importance = String(normalized);
    span.style.backgroundColor = tintFor(normalized);
    if (index === selected) span.classList.add("selected");
    span.addEventListener("click", () => handlers.onTokenClick(index));
    container.appendChild(span);
  });
}

export function renderPrediction(container: HTMLElement, session: SessionState): void {
  const previous = container.querySelector<HTMLElement>(".prediction-badge");
  const flipped = previous !== null && previous.dataset.label !== session.prediction;
  container.replaceChildren();

  const badge = el("span", "prediction-badge", session.prediction);
  badge.dataset.label = session.prediction;
  if (flipped) badge.classList.add("flipped");
  container.appendChild(badge);

  const probability = session.probabilities[session.y];
  const readout = el(
    "span",
    "probability-readout",
    `p(${session.y}) = ${formatProbability(probability)}`,
  );
  readout.dataset.prob = String(probability);
  container.appendChild(readout);

  const bar = el("div", "probability-bar");
  for (const [label, value] of Object.entries(session.probabilities)) {
    const segment = el("div", "probability-segment", label);
    segment.style.width = `${(value * 100).toFixed(2)}%`;
    segment.dataset.label = label;
    segment.dataset.prob = String(value);
    bar.appendChild(segment);
  }
  container.appendChild(bar);
}

export function renderHistory(
  container: HTMLElement,
  session: SessionState,
  busy: boolean,
  handlers: ViewHandlers,
): void {
  container.replaceChildren();
  const list = el("ul", "history-list");
  for (const entry of session.history) {
    list.appendChild(
      el("li", "history-entry", `#${entry.index}: ${entry.old} → ${entry.new}`),
    );
  }
  container.appendChild(list);

  const undo = el("button", "undo-button", "Undo");
  undo.disabled = busy || session.history_len === 0;
  undo.addEventListener("click", () => handlers.onUndo());
  container.appendChild(undo);
}

export function renderCandidates(
  container: HTMLElement,
  session: SessionState,
  rows: CandidateEntry[],
  busy: boolean,
  handlers: ViewHandlers,
): void {
  container.replaceChildren();
  if (rows.length === 0) {
    container.appendChild(el("p", "empty-state", "No candidates for this token."));
    return;
  }
  const current = session.probabilities[session.y];
  const table = el("table", "candidate-table");
  for (const row of sortCandidates(rows)) {
    const tr = el("tr", "candidate-row");
    tr.dataset.oYAfter = String(row.o_y_after);

    tr.appendChild(el("td", "candidate-token", row.token));

    const direction = deltaDirection(current, row.probability_after);
    const arrow = direction === "down" ? "↓" : direction === "up" ? "↑" : "→";
    const delta = el("td", `candidate-delta ${direction}`, arrow);
    tr.appendChild(delta);

    const projected = el("td", "candidate-prob", formatProbability(row.probability_after));
    projected.dataset.prob = String(row.probability_after);
    tr.appendChild(projected);

    tr.appendChild(el("td", "candidate-generator", row.generator));

    const actionCell = el("td");
    const apply = el("button", "apply-button", "Apply");
    apply.disabled = busy;
    apply.addEventListener("click", () => handlers.onApply(row.token));
    actionCell.appendChild(apply);
    tr.appendChild(actionCell);

    table.appendChild(tr);
  }
  container.appendChild(table);
}

export function renderGeneratorSelect(
  select: HTMLSelectElement,
  generators: Record<string, { available: boolean; reason: string | null }>,
  active: string,
  handlers: ViewHandlers,
): void {
  select.replaceChildren();
  for (const [name, info] of Object.entries(generators)) {
    const option = document.createElement("option");
    option.value = name;
    option.textContent = name;
    option.disabled = !info.available;
    if (info.reason) option.title = info.reason;
    if (name === active) option.selected = true;
    select.appendChild(option);
  }
  select.onchange = () => handlers.onGeneratorChange(select.value);
}
