// Layered left-to-right layout for the provenance DAG: sources on the
// left, sinks on the right, one column per longest-path layer, rows
// ordered by predecessor barycenter to keep edges short.

import type { ProvenanceDoc } from "./types.js";

export interface NodePosition {
  id: number;
  x: number;
  y: number;
  layer: number;
}

export interface EdgeLine {
  from: number;
  to: number;
  op: string;
  edgeId: number;
}

export interface Layout {
  positions: Map<number, NodePosition>;
  lines: EdgeLine[];
  width: number;
  height: number;
}

export const NODE_WIDTH = 148;
export const NODE_HEIGHT = 44;
export const H_GAP = 72;
export const V_GAP = 18;

export function layerGraph(doc: ProvenanceDoc): Map<number, number> {
  const successors = new Map<number, number[]>();
  const indegree = new Map<number, number>();
  for (const node of doc.nodes) {
    successors.set(node.id, []);
    indegree.set(node.id, 0);
  }
  const pairs: [number, number][] = [];
  for (const edge of doc.edges) {
    for (const a of edge.inputs) {
      for (const b of edge.outputs) {
        pairs.push([a, b]);
        successors.get(a)?.push(b);
        indegree.set(b, (indegree.get(b) ?? 0) + 1);
      }
    }
  }
  // Longest path from any source, via a topological sweep.
  const layer = new Map<number, number>();
  const queue: number[] = [];
  for (const [id, degree] of indegree) {
    if (degree === 0) {
      layer.set(id, 0);
      queue.push(id);
    }
  }
  const pending = new Map(indegree);
  while (queue.length) {
    const id = queue.shift()!;
    for (const next of successors.get(id) ?? []) {
      layer.set(next, Math.max(layer.get(next) ?? 0, (layer.get(id) ?? 0) + 1));
      pending.set(next, (pending.get(next) ?? 1) - 1);
      if (pending.get(next) === 0) queue.push(next);
    }
  }
  return layer;
}

export function layout(doc: ProvenanceDoc): Layout {
  const layers = layerGraph(doc);
  const byLayer = new Map<number, number[]>();
  for (const node of doc.nodes) {
    const l = layers.get(node.id) ?? 0;
    const list = byLayer.get(l) ?? [];
    list.push(node.id);
    byLayer.set(l, list);
  }
  const predecessors = new Map<number, number[]>();
  for (const edge of doc.edges) {
    for (const b of edge.outputs) {
      const list = predecessors.get(b) ?? [];
      list.push(...edge.inputs);
      predecessors.set(b, list);
    }
  }
  const positions = new Map<number, NodePosition>();
  const layerIndices = [...byLayer.keys()].sort((a, b) => a - b);
  const rowOf = new Map<number, number>();
  let maxRows = 0;
  for (const l of layerIndices) {
    const members = byLayer.get(l)!;
    // Barycenter of already-placed predecessors; stable fallback to id.
    const keyed = members.map((id) => {
      const preds = (predecessors.get(id) ?? []).filter((p) => rowOf.has(p));
      const center = preds.length
        ? preds.reduce((sum, p) => sum + rowOf.get(p)!, 0) / preds.length
        : Number.MAX_SAFE_INTEGER;
      return { id, center };
    });
    keyed.sort((a, b) => a.center - b.center || a.id - b.id);
    keyed.forEach((entry, row) => {
      rowOf.set(entry.id, row);
      positions.set(entry.id, {
        id: entry.id,
        layer: l,
        x: l * (NODE_WIDTH + H_GAP),
        y: row * (NODE_HEIGHT + V_GAP),
      });
    });
    maxRows = Math.max(maxRows, members.length);
  }
  const lines: EdgeLine[] = [];
  for (const edge of doc.edges) {
    for (const a of edge.inputs) {
      for (const b of edge.outputs) {
        lines.push({ from: a, to: b, op: edge.op, edgeId: edge.id });
      }
    }
  }
  const nLayers = layerIndices.length;
  return {
    positions,
    lines,
    width: Math.max(1, nLayers) * (NODE_WIDTH + H_GAP),
    height: Math.max(1, maxRows) * (NODE_HEIGHT + V_GAP),
  };
}

/** True when no two node boxes overlap (label legibility check). */
export function hasNoOverlaps(result: Layout): boolean {
  const boxes = [...result.positions.values()];
  for (let i = 0; i < boxes.length; i++) {
    for (let j = i + 1; j < boxes.length; j++) {
      const a = boxes[i];
      const b = boxes[j];
      const apart =
        Math.abs(a.x - b.x) >= NODE_WIDTH || Math.abs(a.y - b.y) >= NODE_HEIGHT;
      if (!apart) return false;
    }
  }
  return true;
}
