// Declarative operation forms: one per engine operation, mirroring the
// server registry. The builder turns filled-in field values into an
// OpRequest; validation runs client-side before anything is sent.

import type { ColumnSchema, OpRequest, TableSummary } from "./types.js";

export type FieldKind =
  | "table" // pick one handle
  | "tables" // pick >= 2 handles
  | "column" // pick one column of the primary table
  | "right-column" // pick one column of the secondary table
  | "columns" // pick >= 1 columns
  | "text" // free text (delimiter, name, ...)
  | "expr" // expression / predicate source text
  | "choice"
  | "edits" // "col = literal" lines
  | "gen-map" // "col from expr" lines
  | "aggs"; // "fn(col) as name" lines

export interface FieldSpec {
  name: string;
  label: string;
  kind: FieldKind;
  required: boolean;
  choices?: string[];
  placeholder?: string;
}

export interface OpForm {
  op: string;
  group: "create" | "delete" | "transform" | "separate" | "combine" | "composite";
  summary: string;
  fields: FieldSpec[];
  /** number of output handle fields; "prefix" = one prefix, data-dependent fan-out */
  outputs: number | "prefix";
  /** names of the two handle fields for join-style key pickers */
  joinSides?: [string, string];
}

const f = (
  name: string,
  label: string,
  kind: FieldKind,
  required = true,
  extra: Partial<FieldSpec> = {},
): FieldSpec => ({ name, label, kind, required, ...extra });

export const OP_FORMS: OpForm[] = [
  {
    op: "create_column",
    group: "create",
    summary: "add a column from a constant or expression",
    fields: [
      f("table", "table", "table"),
      f("name", "new column name", "text"),
      f("dtype", "dtype", "choice", true, { choices: ["int", "float", "text", "bool", "date"] }),
      f("generator", "value or expression", "expr", true, { placeholder: "2013 or a * 10" }),
    ],
    outputs: 1,
  },
  {
    op: "create_row",
    group: "create",
    summary: "append one row (comma-separated literals)",
    fields: [f("table", "table", "table"), f("values", "values", "text")],
    outputs: 1,
  },
  {
    op: "delete_table",
    group: "delete",
    summary: "remove a table from the environment",
    fields: [f("table", "table", "table")],
    outputs: 0,
  },
  {
    op: "delete_column",
    group: "delete",
    summary: "drop one column",
    fields: [f("table", "table", "table"), f("column", "column", "column")],
    outputs: 1,
  },
  {
    op: "delete_row",
    group: "delete",
    summary: "remove rows matching a predicate",
    fields: [
      f("table", "table", "table"),
      f("selector", "predicate", "expr", true, { placeholder: "amount is null" }),
    ],
    outputs: 1,
  },
  {
    op: "rearrange",
    group: "transform",
    summary: "sort rows / reorder columns",
    fields: [
      f("table", "table", "table"),
      f("sort_keys", "sort keys (col asc|desc, ...)", "text", false),
      f("column_order", "column order", "columns", false),
    ],
    outputs: 1,
  },
  {
    op: "fold",
    group: "transform",
    summary: "collapse value columns into key-value rows",
    fields: [
      f("table", "table", "table"),
      f("value_columns", "value columns", "columns"),
      f("key_name", "key column name", "text"),
      f("value_name", "value column name", "text"),
    ],
    outputs: 1,
  },
  {
    op: "unfold",
    group: "transform",
    summary: "cast key levels out into columns",
    fields: [
      f("table", "table", "table"),
      f("key_column", "key column", "column"),
      f("value_column", "value column", "column"),
    ],
    outputs: 1,
  },
  {
    op: "transform_column",
    group: "transform",
    summary: "replace a column cell-wise",
    fields: [
      f("table", "table", "table"),
      f("column", "column", "column"),
      f("mapping", "expression", "expr", true, { placeholder: "amount * 10" }),
    ],
    outputs: 1,
  },
  {
    op: "transform_row",
    group: "transform",
    summary: "patch cells of selected rows",
    fields: [
      f("table", "table", "table"),
      f("selector", "predicate", "expr"),
      f("edits", "edits (col = literal per line)", "edits"),
    ],
    outputs: 1,
  },
  {
    op: "subset",
    group: "separate",
    summary: "divide rows into matching and rest",
    fields: [
      f("table", "table", "table"),
      f("predicate", "predicate", "expr", true, { placeholder: "year == 2013" }),
    ],
    outputs: 2,
  },
  {
    op: "decompose",
    group: "separate",
    summary: "one table per value of a column",
    fields: [f("table", "table", "table"), f("column", "column", "column")],
    outputs: "prefix",
  },
  {
    op: "split",
    group: "separate",
    summary: "divide columns; the key stays in both halves",
    fields: [
      f("table", "table", "table"),
      f("key", "key column", "column"),
      f("right_columns", "columns to split off", "columns"),
    ],
    outputs: 2,
  },
  {
    op: "separate_column",
    group: "separate",
    summary: "split a composite column by delimiter",
    fields: [
      f("table", "table", "table"),
      f("column", "column", "column"),
      f("splitter", "delimiter", "text"),
      f("new_names", "component names (comma-separated)", "text"),
    ],
    outputs: 1,
  },
  {
    op: "separate_row",
    group: "separate",
    summary: "explode delimited cells into rows",
    fields: [
      f("table", "table", "table"),
      f("column", "column", "column"),
      f("delimiter", "delimiter", "text"),
    ],
    outputs: 1,
  },
  {
    op: "extend",
    group: "combine",
    summary: "concatenate tables row-wise",
    fields: [
      f("tables", "tables", "tables"),
      f("policy", "schema policy", "choice", false, { choices: ["strict", "union"] }),
    ],
    outputs: 1,
  },
  {
    op: "supplement",
    group: "combine",
    summary: "left-preserving merge on a key",
    fields: [
      f("left", "left table", "table"),
      f("right", "right table", "table"),
      f("key", "key column", "right-column"),
    ],
    outputs: 1,
    joinSides: ["left", "right"],
  },
  {
    op: "match",
    group: "combine",
    summary: "inner/semi/anti join (drops are reported)",
    fields: [
      f("left", "left table", "table"),
      f("right", "right table", "table"),
      f("key", "key column", "right-column"),
      f("mode", "mode", "choice", false, { choices: ["inner", "semi", "anti"] }),
    ],
    outputs: 1,
    joinSides: ["left", "right"],
  },
  {
    op: "combine_columns",
    group: "combine",
    summary: "join many columns into one",
    fields: [
      f("table", "table", "table"),
      f("columns", "input columns", "columns"),
      f("combiner", "separator", "text"),
      f("new_name", "combined column name", "text"),
    ],
    outputs: 1,
  },
  {
    op: "summarize",
    group: "combine",
    summary: "group rows and aggregate",
    fields: [
      f("table", "table", "table"),
      f("group_columns", "group by", "columns", false),
      f("aggs", "aggregates (fn(col) as name per line)", "aggs"),
    ],
    outputs: 1,
  },
  {
    op: "interpolate",
    group: "combine",
    summary: "fill null cells from neighbors or groups",
    fields: [
      f("table", "table", "table"),
      f("target", "target column", "column"),
      f("method", "method", "choice", true, {
        choices: ["linear", "forward_fill", "group_mean"],
      }),
      f("order", "order column", "column", false),
      f("group_columns", "group by", "columns", false),
    ],
    outputs: 1,
  },
  {
    op: "filter",
    group: "composite",
    summary: "keep matching rows, discard the rest",
    fields: [
      f("table", "table", "table"),
      f("predicate", "predicate", "expr", true, { placeholder: "pop > 10" }),
    ],
    outputs: 1,
  },
  {
    op: "group_aggregate",
    group: "composite",
    summary: "decompose, summarize each part, extend",
    fields: [
      f("table", "table", "table"),
      f("group", "group column", "column"),
      f("aggs", "aggregates (fn(col) as name per line)", "aggs"),
    ],
    outputs: 1,
  },
  {
    op: "lookup_transform",
    group: "composite",
    summary: "map codes to values via a lookup table",
    fields: [
      f("table", "table", "table"),
      f("lookup", "lookup table", "table"),
      f("key", "key column", "right-column"),
      f("value_column", "value column", "text"),
    ],
    outputs: 1,
    joinSides: ["table", "lookup"],
  },
  {
    op: "divide_and_conquer",
    group: "composite",
    summary: "facet, rewrite one part, split conflicts, extend tidy",
    fields: [
      f("table", "table", "table"),
      f("facet", "facet predicate", "expr"),
      f("edits", "edits (col from expr per line)", "gen-map"),
      f("key", "split key column", "column"),
    ],
    outputs: 1,
  },
];

export function formFor(op: string): OpForm | undefined {
  return OP_FORMS.find((form) => form.op === op);
}

export function formsByGroup(): Map<string, OpForm[]> {
  const grouped = new Map<string, OpForm[]>();
  for (const form of OP_FORMS) {
    const list = grouped.get(form.group) ?? [];
    list.push(form);
    grouped.set(form.group, list);
  }
  return grouped;
}

/** Key-picker ordering: columns present on both sides come first. */
export function keyPickerColumns(
  left: ColumnSchema[],
  right: ColumnSchema[],
): string[] {
  const leftNames = new Set(left.map((c) => c.name));
  const shared = right.filter((c) => leftNames.has(c.name)).map((c) => c.name);
  const rest = right.filter((c) => !leftNames.has(c.name)).map((c) => c.name);
  return [...shared, ...rest];
}

export interface DraftValues {
  [field: string]: string | string[];
}

export interface Draft {
  op: string;
  values: DraftValues;
  outputs: string[];
}

export interface BuiltRequest {
  request: OpRequest;
  errors: string[];
}

const HANDLE_RE = /^[A-Za-z_]\w*$/;

function parseLines(raw: string): string[] {
  return raw
    .split(/\n|,(?![^()]*\))/)
    .map((piece) => piece.trim())
    .filter(Boolean);
}

function parseLiteral(raw: string): unknown {
  const text = raw.trim();
  if (/^-?\d+$/.test(text)) return parseInt(text, 10);
  if (/^-?\d*\.\d+$/.test(text) || /^-?\d+\.\d*$/.test(text)) return parseFloat(text);
  if (text === "true") return true;
  if (text === "false") return false;
  if (text === "null") return null;
  return text.replace(/^"(.*)"$/, "$1");
}

/** Turn a filled-in draft into an OpRequest, collecting validation errors. */
export function buildRequest(form: OpForm, draft: Draft): BuiltRequest {
  const errors: string[] = [];
  const params: Record<string, unknown> = {};
  for (const field of form.fields) {
    const raw = draft.values[field.name];
    const blank =
      raw === undefined ||
      raw === "" ||
      (Array.isArray(raw) && raw.length === 0);
    if (blank) {
      if (field.required) errors.push(`${field.label} is required`);
      continue;
    }
    switch (field.kind) {
      case "table":
        params[field.name] = raw;
        break;
      case "tables": {
        const handles = Array.isArray(raw) ? raw : parseLines(raw);
        if (handles.length < 2) errors.push(`${field.label} needs at least two tables`);
        params[field.name] = handles;
        break;
      }
      case "column":
      case "right-column":
      case "text":
      case "expr":
      case "choice":
        if (field.kind === "choice" && field.choices && !field.choices.includes(raw as string)) {
          errors.push(`${field.label} must be one of ${field.choices.join(", ")}`);
        }
        params[field.name] = raw;
        break;
      case "columns":
        params[field.name] = Array.isArray(raw) ? raw : parseLines(raw);
        break;
      case "edits": {
        const edits: Record<string, unknown> = {};
        for (const line of parseLines(raw as string)) {
          const match = line.match(/^(\w+)\s*=\s*(.+)$/);
          if (!match) {
            errors.push(`edit ${JSON.stringify(line)} is not "column = literal"`);
            continue;
          }
          edits[match[1]] = parseLiteral(match[2]);
        }
        params[field.name] = edits;
        break;
      }
      case "gen-map": {
        const map: Record<string, string> = {};
        for (const line of parseLines(raw as string)) {
          const match = line.match(/^(\w+)\s+from\s+(.+)$/);
          if (!match) {
            errors.push(`edit ${JSON.stringify(line)} is not "column from expr"`);
            continue;
          }
          map[match[1]] = match[2];
        }
        params[field.name] = map;
        break;
      }
      case "aggs": {
        const aggs: { fn: string; target: string | null; as: string }[] = [];
        for (const line of parseLines(raw as string)) {
          const match = line.match(/^(\w+)\s*(?:\(\s*(\w+)\s*\))?\s+as\s+(\w+)$/);
          if (!match) {
            errors.push(`${JSON.stringify(line)} is not "fn(col) as name"`);
            continue;
          }
          const [, fn, target, out] = match;
          if (fn !== "count" && !target) {
            errors.push(`${fn} needs a target column`);
            continue;
          }
          aggs.push({ fn, target: target ?? null, as: out });
        }
        if (aggs.length === 0) errors.push(`${field.label} needs at least one aggregate`);
        params[field.name] = aggs;
        break;
      }
    }
  }
  // create_row: comma-separated literals.
  if (form.op === "create_row" && typeof params["values"] === "string") {
    params["values"] = parseLines(params["values"] as string).map(parseLiteral);
  }
  if (form.op === "separate_column" && typeof params["new_names"] === "string") {
    params["new_names"] = parseLines(params["new_names"] as string);
  }
  if (form.op === "rearrange" && typeof params["sort_keys"] === "string") {
    const keys: [string, string][] = [];
    for (const piece of parseLines(params["sort_keys"] as string)) {
      const match = piece.match(/^(\w+)\s+(asc|desc)$/);
      if (!match) errors.push(`sort key ${JSON.stringify(piece)} is not "col asc|desc"`);
      else keys.push([match[1], match[2]]);
    }
    params["sort_keys"] = keys;
  }

  const expected = form.outputs === "prefix" ? 1 : form.outputs;
  const outputs = draft.outputs.map((o) => o.trim()).filter(Boolean);
  if (outputs.length !== expected) {
    errors.push(
      form.outputs === "prefix"
        ? "decompose takes one output prefix"
        : `${form.op} binds ${expected} output name(s), got ${outputs.length}`,
    );
  }
  for (const handle of outputs) {
    if (!HANDLE_RE.test(handle)) errors.push(`invalid handle ${JSON.stringify(handle)}`);
  }
  return { request: { op: form.op, params, outputs }, errors };
}

/** Output-name hints per slot, mirroring the engine's output labels. */
export function outputLabels(form: OpForm): string[] {
  if (form.op === "subset") return ["matching", "rest"];
  if (form.op === "split") return ["left", "right"];
  if (form.outputs === "prefix") return ["prefix"];
  return Array.from({ length: form.outputs as number }, (_, i) =>
    form.outputs === 1 ? "result" : `output ${i + 1}`,
  );
}

/** Handles usable for a field, given the current table list. */
export function tableChoices(tables: TableSummary[]): string[] {
  return tables.map((t) => t.handle);
}
