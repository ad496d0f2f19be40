// Wire types for the tabletide HTTP API.

export interface ColumnSchema {
  name: string;
  dtype: string;
  nullable: boolean;
}

export interface TableSummary {
  handle: string;
  rows: number;
  schema: ColumnSchema[];
}

export type Cell = string | number | boolean | null;

export interface TablePage {
  handle: string;
  schema: ColumnSchema[];
  rows: Cell[][];
  offset: number;
  total: number;
}

export interface Diagnostic {
  id: number | null;
  kind: string;
  severity: "info" | "warning";
  payload: Record<string, unknown>;
  source: number | null;
}

export interface OpRequest {
  op: string;
  params: Record<string, unknown>;
  outputs: string[];
}

export interface PreviewOutput extends TableSummary {
  preview_rows: Cell[][];
}

export interface PreviewResponse {
  op: string;
  outputs: PreviewOutput[];
  diagnostics: Diagnostic[];
}

export interface ApplyResponse {
  op: string;
  outputs: TableSummary[];
  diagnostics: Diagnostic[];
  edges: number[];
}

export interface ProvNode {
  id: number;
  handle: string;
  version: number;
  schema: [string, string][];
  rows: number;
  tombstone: boolean;
  role: "source" | "interior" | "sink";
}

export interface ProvEdge {
  id: number;
  op: string;
  params: Record<string, string>;
  inputs: number[];
  outputs: number[];
  group: string | null;
  diagnostics: number[];
}

export interface ProvenanceDoc {
  format: string;
  version: number;
  nodes: ProvNode[];
  edges: ProvEdge[];
  diagnostics: Diagnostic[];
}

export interface PipelineStatement {
  index: number;
  line: number;
  text: string;
  status: string;
  detail: string;
  diagnostics: number[];
}

export interface PipelineResponse {
  ok: boolean;
  failed_statement: number | null;
  statements: PipelineStatement[];
}
