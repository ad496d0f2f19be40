import { describe, expect, it } from "vitest";

import {
  OP_FORMS,
  buildRequest,
  formFor,
  keyPickerColumns,
  outputLabels,
} from "../src/forms.js";
import type { ColumnSchema } from "../src/types.js";

const col = (name: string): ColumnSchema => ({ name, dtype: "text", nullable: true });

describe("operation forms", () => {
  it("covers every engine operation incl. composites", () => {
    const ops = OP_FORMS.map((f) => f.op);
    for (const expected of [
      "create_column", "create_row", "delete_table", "delete_column", "delete_row",
      "rearrange", "fold", "unfold", "transform_column", "transform_row",
      "subset", "decompose", "split", "separate_column", "separate_row",
      "extend", "supplement", "match", "combine_columns", "summarize", "interpolate",
      "filter", "group_aggregate", "lookup_transform", "divide_and_conquer",
    ]) {
      expect(ops).toContain(expected);
    }
  });

  it("multi-output operations expose multiple output fields", () => {
    expect(outputLabels(formFor("subset")!)).toEqual(["matching", "rest"]);
    expect(outputLabels(formFor("split")!)).toEqual(["left", "right"]);
    expect(outputLabels(formFor("decompose")!)).toEqual(["prefix"]);
    expect(outputLabels(formFor("filter")!)).toEqual(["result"]);
  });

  it("builds a subset request", () => {
    const form = formFor("subset")!;
    const { request, errors } = buildRequest(form, {
      op: "subset",
      values: { table: "usage", predicate: "year == 2013" },
      outputs: ["m", "r"],
    });
    expect(errors).toEqual([]);
    expect(request).toEqual({
      op: "subset",
      params: { table: "usage", predicate: "year == 2013" },
      outputs: ["m", "r"],
    });
  });

  it("blocks when a required field is missing", () => {
    const form = formFor("subset")!;
    const { errors } = buildRequest(form, {
      op: "subset",
      values: { table: "usage" },
      outputs: ["m", "r"],
    });
    expect(errors.some((e) => e.includes("predicate"))).toBe(true);
  });

  it("blocks wrong output arity", () => {
    const form = formFor("subset")!;
    const { errors } = buildRequest(form, {
      op: "subset",
      values: { table: "t", predicate: "a == 1" },
      outputs: ["only"],
    });
    expect(errors.some((e) => e.includes("binds 2"))).toBe(true);
  });

  it("rejects malformed output handles", () => {
    const form = formFor("filter")!;
    const { errors } = buildRequest(form, {
      op: "filter",
      values: { table: "t", predicate: "a == 1" },
      outputs: ["9bad"],
    });
    expect(errors.some((e) => e.includes("invalid handle"))).toBe(true);
  });

  it("parses aggregate lines", () => {
    const form = formFor("summarize")!;
    const { request, errors } = buildRequest(form, {
      op: "summarize",
      values: {
        table: "t",
        group_columns: ["g"],
        aggs: "sum(v) as total\ncount as n",
      },
      outputs: ["out"],
    });
    expect(errors).toEqual([]);
    expect(request.params["aggs"]).toEqual([
      { fn: "sum", target: "v", as: "total" },
      { fn: "count", target: null, as: "n" },
    ]);
  });

  it("rejects bad aggregate lines", () => {
    const form = formFor("summarize")!;
    const { errors } = buildRequest(form, {
      op: "summarize",
      values: { table: "t", aggs: "sum as broken" },
      outputs: ["out"],
    });
    expect(errors.length).toBeGreaterThan(0);
  });

  it("parses divide-and-conquer edit lines", () => {
    const form = formFor("divide_and_conquer")!;
    const { request, errors } = buildRequest(form, {
      op: "divide_and_conquer",
      values: {
        table: "wide",
        facet: 'year == "2015"',
        edits: 'year from "2013"\namount from amount_2013',
        key: "supplier",
      },
      outputs: ["tidy"],
    });
    expect(errors).toEqual([]);
    expect(request.params["edits"]).toEqual({
      year: '"2013"',
      amount: "amount_2013",
    });
  });

  it("extend needs at least two tables", () => {
    const form = formFor("extend")!;
    const { errors } = buildRequest(form, {
      op: "extend",
      values: { tables: ["only"] },
      outputs: ["out"],
    });
    expect(errors.some((e) => e.includes("two tables"))).toBe(true);
  });

  it("parses row literals for create_row", () => {
    const form = formFor("create_row")!;
    const { request } = buildRequest(form, {
      op: "create_row",
      values: { table: "t", values: '7, "manual", true, null, 1.5' },
      outputs: ["out"],
    });
    expect(request.params["values"]).toEqual([7, "manual", true, null, 1.5]);
  });
});

describe("join key picker", () => {
  it("lists shared columns first", () => {
    const left = [col("state"), col("pop")];
    const right = [col("arrivals"), col("state")];
    expect(keyPickerColumns(left, right)).toEqual(["state", "arrivals"]);
  });

  it("keeps right-only columns available", () => {
    const left = [col("a")];
    const right = [col("x"), col("y")];
    expect(keyPickerColumns(left, right)).toEqual(["x", "y"]);
  });
});
