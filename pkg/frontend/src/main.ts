// Wiring: one in-flight mutation at a time, server refreshed after every
// commit so the rendered list always equals GET /tables.

import { ApiError, Client } from "./api.js";
import {
  Draft,
  OpForm,
  buildRequest,
  formFor,
  formsByGroup,
  keyPickerColumns,
  outputLabels,
} from "./forms.js";
import {
  UiSessionState,
  cancelPreview,
  committed,
  initialState,
  selectTable,
  withDraft,
  withPreview,
  withSession,
} from "./state.js";
import { el, renderDiagnostics, renderPage, renderPreview, renderProvenance, renderTableList } from "./render.js";

const client = new Client("");
let state: UiSessionState = initialState();
let busy = false;

const root = document.getElementById("app")!;

function setState(next: UiSessionState): void {
  state = next;
  render();
}

function flash(message: string, kind: "error" | "info" = "error"): void {
  const banner = document.getElementById("banner")!;
  banner.textContent = message;
  banner.className = `banner ${kind} visible`;
  setTimeout(() => banner.classList.remove("visible"), 6000);
}

async function guard<T>(action: () => Promise<T>): Promise<T | undefined> {
  if (busy) return undefined;
  busy = true;
  try {
    return await action();
  } catch (error) {
    flash(error instanceof ApiError ? error.message : String(error));
    return undefined;
  } finally {
    busy = false;
  }
}

async function refresh(diagnostics = [] as UiSessionState["diagnosticsFeed"]): Promise<void> {
  if (!state.session) return;
  const [tables, provenance] = await Promise.all([
    client.listTables(state.session),
    client.provenance(state.session),
  ]);
  setState(committed(state, tables, provenance, diagnostics));
}

// ---------------------------------------------------------------------------
// operation builder

function draftFor(form: OpForm): Draft {
  const values: Draft["values"] = {};
  for (const field of form.fields) {
    if (field.kind === "table" && state.selected) values[field.name] = state.selected;
    if (field.kind === "choice" && field.choices) values[field.name] = field.choices[0];
  }
  const outputs = outputLabels(form).map((label, i) =>
    form.outputs === "prefix" ? "parts" : form.outputs === 1 ? "result" : label,
  );
  return { op: form.op, values, outputs };
}

function renderBuilder(): HTMLElement {
  const pane = el("div", "builder");
  pane.append(el("h2", "", "operation builder"));
  const picker = el("select", "op-picker") as HTMLSelectElement;
  picker.append(el("option", "", "choose an operation…"));
  for (const [group, forms] of formsByGroup()) {
    const optgroup = document.createElement("optgroup");
    optgroup.label = group;
    for (const form of forms) {
      const option = el("option", "", `${form.op} — ${form.summary}`);
      option.setAttribute("value", form.op);
      optgroup.append(option);
    }
    picker.append(optgroup);
  }
  if (state.draft) picker.value = state.draft.op;
  picker.addEventListener("change", () => {
    const form = formFor(picker.value);
    setState(withDraft(state, form ? draftFor(form) : null));
  });
  pane.append(picker);

  const draft = state.draft;
  if (!draft) return pane;
  const form = formFor(draft.op);
  if (!form) return pane;

  const update = (mutate: (d: Draft) => void) => {
    const next: Draft = { ...draft, values: { ...draft.values }, outputs: [...draft.outputs] };
    mutate(next);
    setState({ ...withDraft(state, next) });
  };

  const fieldBox = el("div", "fields");
  for (const field of form.fields) {
    const row = el("label", "field");
    row.append(el("span", "field-label", field.label + (field.required ? " *" : "")));
    const current = draft.values[field.name];
    if (field.kind === "table" || field.kind === "tables") {
      const select = el("select") as HTMLSelectElement;
      if (field.kind === "tables") select.multiple = true;
      select.append(...state.tables.map((t) => {
        const option = el("option", "", t.handle);
        option.setAttribute("value", t.handle);
        return option;
      }));
      if (typeof current === "string") select.value = current;
      select.addEventListener("change", () =>
        update((d) => {
          d.values[field.name] =
            field.kind === "tables"
              ? [...select.selectedOptions].map((o) => o.value)
              : select.value;
        }),
      );
      row.append(select);
    } else if (field.kind === "column" || field.kind === "columns" || field.kind === "right-column") {
      const select = el("select") as HTMLSelectElement;
      if (field.kind === "columns") select.multiple = true;
      const source =
        field.kind === "right-column" && form.joinSides
          ? draft.values[form.joinSides[1]]
          : (draft.values["table"] ?? state.selected);
      const sourceTable = state.tables.find((t) => t.handle === source);
      let names = sourceTable?.schema.map((c) => c.name) ?? [];
      if (field.kind === "right-column" && form.joinSides) {
        const left = state.tables.find((t) => t.handle === draft.values[form.joinSides![0]]);
        if (left && sourceTable) {
          names = keyPickerColumns(left.schema, sourceTable.schema);
        }
      }
      select.append(...names.map((n) => {
        const option = el("option", "", n);
        option.setAttribute("value", n);
        return option;
      }));
      if (typeof current === "string") select.value = current;
      select.addEventListener("change", () =>
        update((d) => {
          d.values[field.name] =
            field.kind === "columns"
              ? [...select.selectedOptions].map((o) => o.value)
              : select.value;
        }),
      );
      row.append(select);
    } else if (field.kind === "choice") {
      const select = el("select") as HTMLSelectElement;
      select.append(...(field.choices ?? []).map((c) => {
        const option = el("option", "", c);
        option.setAttribute("value", c);
        return option;
      }));
      if (typeof current === "string") select.value = current;
      select.addEventListener("change", () =>
        update((d) => {
          d.values[field.name] = select.value;
        }),
      );
      row.append(select);
    } else if (field.kind === "edits" || field.kind === "gen-map" || field.kind === "aggs") {
      const area = el("textarea") as HTMLTextAreaElement;
      area.rows = 3;
      area.placeholder =
        field.kind === "aggs"
          ? "sum(amount) as total"
          : field.kind === "gen-map"
            ? "year from \"2013\""
            : "column = 5";
      if (typeof current === "string") area.value = current;
      area.addEventListener("input", () =>
        update((d) => {
          d.values[field.name] = area.value;
        }),
      );
      row.append(area);
    } else {
      const input = el("input") as HTMLInputElement;
      input.type = "text";
      if (field.placeholder) input.placeholder = field.placeholder;
      if (typeof current === "string") input.value = current;
      input.addEventListener("input", () =>
        update((d) => {
          d.values[field.name] = input.value;
        }),
      );
      row.append(input);
    }
    fieldBox.append(row);
  }
  pane.append(fieldBox);

  const outBox = el("div", "outputs");
  outputLabels(form).forEach((label, i) => {
    const row = el("label", "field");
    row.append(el("span", "field-label", `output: ${label}`));
    const input = el("input") as HTMLInputElement;
    input.type = "text";
    input.value = draft.outputs[i] ?? "";
    input.addEventListener("input", () =>
      update((d) => {
        d.outputs[i] = input.value;
      }),
    );
    row.append(input);
    outBox.append(row);
  });
  pane.append(outBox);

  const { request, errors } = buildRequest(form, draft);
  if (errors.length) {
    const problems = el("ul", "problems");
    errors.forEach((e) => problems.append(el("li", "", e)));
    pane.append(problems);
  }
  const previewButton = el("button", "preview-btn", "preview") as HTMLButtonElement;
  previewButton.disabled = errors.length > 0;
  previewButton.addEventListener("click", () =>
    guard(async () => {
      const preview = await client.preview(state.session!, request, 8);
      setState(withPreview(state, preview));
    }),
  );
  pane.append(previewButton);
  return pane;
}

// ---------------------------------------------------------------------------
// top-level render

async function showTable(handle: string): Promise<void> {
  setState(selectTable(state, handle));
  await guard(async () => {
    const page = await client.getTablePage(state.session!, handle, 0, 50);
    const detail = document.getElementById("table-detail")!;
    detail.replaceChildren(renderPage(page));
  });
}

function render(): void {
  root.replaceChildren();

  const left = el("div", "pane side");
  left.append(el("h2", "", "tables"));
  const upload = el("input") as HTMLInputElement;
  upload.type = "file";
  upload.accept = ".csv,text/csv";
  upload.addEventListener("change", () =>
    guard(async () => {
      const file = upload.files?.[0];
      if (!file) return;
      await client.uploadCsv(state.session!, file);
      await refresh();
    }),
  );
  left.append(upload);
  left.append(
    renderTableList(state.tables, state.selected, (handle) => void showTable(handle)),
  );
  const detail = el("div", "");
  detail.id = "table-detail";
  left.append(detail);

  const middle = el("div", "pane main");
  middle.append(renderBuilder());
  if (state.preview) {
    middle.append(
      renderPreview(
        state.preview,
        () =>
          void guard(async () => {
            const form = formFor(state.draft!.op)!;
            const { request, errors } = buildRequest(form, state.draft!);
            if (errors.length) return;
            const outcome = await client.apply(state.session!, request);
            await refresh(outcome.diagnostics);
          }),
        () => setState(cancelPreview(state)),
      ),
    );
  }
  middle.append(el("h2", "", "diagnostics feed"));
  middle.append(renderDiagnostics(state.diagnosticsFeed));

  const right = el("div", "pane side");
  right.append(el("h2", "", "provenance"));
  right.append(renderProvenance(state.provenance, (handle) => void showTable(handle)));

  root.append(left, middle, right);
}

async function boot(): Promise<void> {
  const session = await client.createSession();
  setState(withSession(state, session));
  await refresh();
}

void guard(boot);
