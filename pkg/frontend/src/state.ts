// Client-side session state: a mirror of the server after every commit,
// plus the in-flight draft and its uncommitted preview.

import type {
  Diagnostic,
  PreviewResponse,
  ProvenanceDoc,
  TableSummary,
} from "./types.js";
import type { Draft } from "./forms.js";

export interface UiSessionState {
  session: string | null;
  tables: TableSummary[];
  selected: string | null;
  draft: Draft | null;
  /** last preview result; always visually marked uncommitted */
  preview: PreviewResponse | null;
  diagnosticsFeed: Diagnostic[];
  provenance: ProvenanceDoc | null;
}

export function initialState(): UiSessionState {
  return {
    session: null,
    tables: [],
    selected: null,
    draft: null,
    preview: null,
    diagnosticsFeed: [],
    provenance: null,
  };
}

export function withSession(state: UiSessionState, session: string): UiSessionState {
  return { ...initialState(), session };
}

export function withTables(
  state: UiSessionState,
  tables: TableSummary[],
): UiSessionState {
  const selected =
    state.selected && tables.some((t) => t.handle === state.selected)
      ? state.selected
      : (tables[0]?.handle ?? null);
  return { ...state, tables, selected };
}

export function selectTable(state: UiSessionState, handle: string): UiSessionState {
  return { ...state, selected: handle };
}

export function withDraft(state: UiSessionState, draft: Draft | null): UiSessionState {
  // A new draft invalidates any preview of the old one.
  return { ...state, draft, preview: null };
}

export function withPreview(
  state: UiSessionState,
  preview: PreviewResponse,
): UiSessionState {
  return { ...state, preview };
}

export function cancelPreview(state: UiSessionState): UiSessionState {
  return { ...state, preview: null };
}

/** After a commit the server is re-queried; preview and draft are spent. */
export function committed(
  state: UiSessionState,
  tables: TableSummary[],
  provenance: ProvenanceDoc,
  diagnostics: Diagnostic[],
): UiSessionState {
  return {
    ...withTables(state, tables),
    draft: null,
    preview: null,
    provenance,
    diagnosticsFeed: [...state.diagnosticsFeed, ...diagnostics],
  };
}

export function withProvenance(
  state: UiSessionState,
  provenance: ProvenanceDoc,
): UiSessionState {
  return { ...state, provenance };
}

/** Keys highlighted in previews: dropped or unmatched join keys. */
export function highlightedKeys(diagnostics: Diagnostic[]): string[] {
  const keys: string[] = [];
  for (const d of diagnostics) {
    const payload = d.payload as { dropped_keys?: unknown[]; keys?: unknown[] };
    const list =
      d.kind === "LossyJoin"
        ? payload.dropped_keys
        : d.kind === "UnmatchedLeftKeys"
          ? payload.keys
          : undefined;
    for (const key of list ?? []) {
      keys.push(String(key));
    }
  }
  return keys;
}
