/** Tree layout for the history graph: depth -> column, branches -> rows.
 * Pure geometry over the API payload; rendering happens elsewhere. */

import type { GraphPayload } from './types.js';
import { childrenByParent } from './state.js';

export interface PlacedNode {
  uri: string;
  depth: number;
  row: number;
  parentUri: string | null;
  onHeadPath: boolean;
}

export function layoutGraph(graph: GraphPayload): PlacedNode[] {
  const children = childrenByParent(graph);
  const byUri = new Map(graph.nodes.map((n) => [n.uri, n]));
  const root = graph.nodes.find((n) => n.parent_uri === null);
  if (!root) {
    return [];
  }
  const headPath = new Set<string>();
  let cursor: string | null = graph.head_uri;
  while (cursor) {
    headPath.add(cursor);
    cursor = byUri.get(cursor)?.parent_uri ?? null;
  }

  const placed: PlacedNode[] = [];
  let nextRow = 0;
  const visit = (uri: string, depth: number, row: number): void => {
    const node = byUri.get(uri);
    if (!node) {
      return;
    }
    placed.push({
      uri,
      depth,
      row,
      parentUri: node.parent_uri,
      onHeadPath: headPath.has(uri),
    });
    const kids = [...(children.get(uri) ?? [])];
    // Keep the head path on its parent's row so the main line stays straight.
    kids.sort((a, b) => Number(headPath.has(b)) - Number(headPath.has(a)));
    kids.forEach((kid, index) => {
      const kidRow = index === 0 ? row : ++nextRow;
      visit(kid, depth + 1, kidRow);
    });
  };
  visit(root.uri, 0, 0);
  return placed;
}

export function rowCount(placed: PlacedNode[]): number {
  return placed.length === 0 ? 0 : Math.max(...placed.map((p) => p.row)) + 1;
}

export function depthCount(placed: PlacedNode[]): number {
  return placed.length === 0 ? 0 : Math.max(...placed.map((p) => p.depth)) + 1;
}
