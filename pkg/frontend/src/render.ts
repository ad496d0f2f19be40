// DOM rendering: table list, table pages, preview pane, diagnostics,
// and the provenance SVG. No data ever gets transformed here.

import type {
  Cell,
  ColumnSchema,
  Diagnostic,
  PreviewResponse,
  ProvenanceDoc,
  TablePage,
  TableSummary,
} from "./types.js";
import { NODE_HEIGHT, NODE_WIDTH, layout } from "./layout.js";
import { highlightedKeys } from "./state.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function cellText(cell: Cell): string {
  if (cell === null) return "∅";
  if (cell === true) return "true";
  if (cell === false) return "false";
  return String(cell);
}

export function renderTableList(
  tables: TableSummary[],
  selected: string | null,
  onSelect: (handle: string) => void,
): HTMLElement {
  const list = el("ul", "table-list");
  for (const table of tables) {
    const item = el("li", table.handle === selected ? "selected" : "");
    const button = el("button", "table-pick", "");
    button.append(
      el("span", "handle", table.handle),
      el("span", "shape", `${table.rows}×${table.schema.length}`),
    );
    button.addEventListener("click", () => onSelect(table.handle));
    item.append(button);
    list.append(item);
  }
  if (!tables.length) {
    list.append(el("li", "hint", "no tables yet — upload a CSV"));
  }
  return list;
}

export function renderGrid(
  schema: ColumnSchema[],
  rows: Cell[][],
  highlight: Set<string> = new Set(),
): HTMLTableElement {
  const table = el("table", "grid");
  const head = el("tr");
  for (const column of schema) {
    const th = el("th", "", column.name);
    th.title = column.dtype + (column.nullable ? "?" : "");
    head.append(th);
  }
  table.append(head);
  for (const row of rows) {
    const tr = el("tr");
    for (const cell of row) {
      const td = el("td", cell === null ? "null-cell" : "", cellText(cell));
      if (cell !== null && highlight.has(String(cell))) {
        td.classList.add("highlight");
      }
      tr.append(td);
    }
    table.append(tr);
  }
  return table;
}

export function renderPage(page: TablePage): HTMLElement {
  const pane = el("div", "table-page");
  pane.append(
    el("h3", "", `${page.handle}`),
    el(
      "p",
      "meta",
      `rows ${page.offset}–${page.offset + page.rows.length} of ${page.total}`,
    ),
    renderGrid(page.schema, page.rows),
  );
  return pane;
}

export function renderDiagnostics(diagnostics: Diagnostic[]): HTMLElement {
  const pane = el("div", "diagnostics");
  if (!diagnostics.length) {
    pane.append(el("p", "hint", "no findings"));
    return pane;
  }
  for (const d of diagnostics) {
    const entry = el("div", `finding ${d.severity}`);
    entry.append(el("span", "kind", d.kind), el("span", "sev", d.severity));
    entry.append(el("pre", "payload", JSON.stringify(d.payload, null, 1)));
    pane.append(entry);
  }
  return pane;
}

export function renderPreview(
  preview: PreviewResponse,
  onCommit: () => void,
  onCancel: () => void,
): HTMLElement {
  const pane = el("div", "preview");
  pane.append(el("h3", "", `preview: ${preview.op} (uncommitted)`));
  const highlight = new Set(highlightedKeys(preview.diagnostics));
  for (const output of preview.outputs) {
    const block = el("div", "preview-output");
    block.append(
      el("h4", "", `${output.handle} — ${output.rows}×${output.schema.length}`),
      renderGrid(output.schema, output.preview_rows, highlight),
    );
    pane.append(block);
  }
  pane.append(renderDiagnostics(preview.diagnostics));
  const actions = el("div", "actions");
  const commit = el("button", "commit", "commit");
  commit.addEventListener("click", onCommit);
  const cancel = el("button", "cancel", "cancel");
  cancel.addEventListener("click", onCancel);
  actions.append(commit, cancel);
  pane.append(actions);
  return pane;
}

export function renderProvenance(
  doc: ProvenanceDoc | null,
  onNodeClick: (handle: string) => void,
): HTMLElement {
  const pane = el("div", "provenance");
  if (!doc || doc.format !== "tabletide-provenance") {
    pane.append(
      el("p", "error", doc ? "malformed provenance document" : "no provenance yet"),
    );
    return pane;
  }
  if (!doc.nodes.length) {
    pane.append(el("p", "hint", "empty graph — apply an operation to grow it"));
    return pane;
  }
  const plan = layout(doc);
  const svgNS = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNS, "svg");
  const pad = 12;
  svg.setAttribute("width", String(plan.width + pad * 2));
  svg.setAttribute("height", String(plan.height + pad * 2));
  svg.setAttribute("class", "dag");
  for (const line of plan.lines) {
    const from = plan.positions.get(line.from);
    const to = plan.positions.get(line.to);
    if (!from || !to) continue;
    const path = document.createElementNS(svgNS, "line");
    path.setAttribute("x1", String(from.x + NODE_WIDTH + pad));
    path.setAttribute("y1", String(from.y + NODE_HEIGHT / 2 + pad));
    path.setAttribute("x2", String(to.x + pad));
    path.setAttribute("y2", String(to.y + NODE_HEIGHT / 2 + pad));
    path.setAttribute("class", "edge");
    const title = document.createElementNS(svgNS, "title");
    title.textContent = line.op;
    path.append(title);
    svg.append(path);
  }
  for (const node of doc.nodes) {
    const pos = plan.positions.get(node.id);
    if (!pos) continue;
    const group = document.createElementNS(svgNS, "g");
    group.setAttribute(
      "class",
      `node role-${node.role}${node.tombstone ? " tombstone" : ""}`,
    );
    group.setAttribute("transform", `translate(${pos.x + pad}, ${pos.y + pad})`);
    const rect = document.createElementNS(svgNS, "rect");
    rect.setAttribute("width", String(NODE_WIDTH));
    rect.setAttribute("height", String(NODE_HEIGHT));
    rect.setAttribute("rx", "6");
    const label = document.createElementNS(svgNS, "text");
    label.setAttribute("x", String(NODE_WIDTH / 2));
    label.setAttribute("y", "18");
    label.setAttribute("text-anchor", "middle");
    label.textContent = `${node.handle} v${node.version}`;
    const shape = document.createElementNS(svgNS, "text");
    shape.setAttribute("x", String(NODE_WIDTH / 2));
    shape.setAttribute("y", "34");
    shape.setAttribute("text-anchor", "middle");
    shape.setAttribute("class", "shape");
    shape.textContent = `${node.rows}×${node.schema.length}`;
    group.append(rect, label, shape);
    if (!node.tombstone) {
      group.addEventListener("click", () => onNodeClick(node.handle));
      group.setAttribute("cursor", "pointer");
    }
    svg.append(group);
  }
  pane.append(svg);
  return pane;
}
