import assert from 'node:assert/strict';
import { test } from 'node:test';

import { depthCount, layoutGraph, rowCount } from '../src/graphview.js';
import type { GraphPayload } from '../src/types.js';
import { fixture } from './helpers.js';

const graph = fixture<GraphPayload>('graph');

test('every node is placed exactly once', () => {
  const placed = layoutGraph(graph);
  assert.equal(placed.length, graph.nodes.length);
  assert.equal(new Set(placed.map((p) => p.uri)).size, graph.nodes.length);
});

test('depth equals distance from the root', () => {
  const placed = layoutGraph(graph);
  const byUri = new Map(placed.map((p) => [p.uri, p]));
  for (const node of placed) {
    if (node.parentUri === null) {
      assert.equal(node.depth, 0);
    } else {
      assert.equal(node.depth, byUri.get(node.parentUri)!.depth + 1);
    }
  }
});

test('branches occupy separate rows; the head path keeps one row', () => {
  const placed = layoutGraph(graph);
  assert.ok(rowCount(placed) >= 2, 'fixture has a branch, so at least 2 rows');
  const headPath = placed.filter((p) => p.onHeadPath);
  const headRows = new Set(headPath.map((p) => p.row));
  assert.equal(headRows.size, 1, 'head lineage renders as a straight line');
  // Siblings sharing a parent must not share a row.
  const byParent = new Map<string, number[]>();
  for (const p of placed) {
    if (p.parentUri) {
      byParent.set(p.parentUri, [...(byParent.get(p.parentUri) ?? []), p.row]);
    }
  }
  for (const rows of byParent.values()) {
    assert.equal(new Set(rows).size, rows.length);
  }
});

test('empty graphs lay out to nothing', () => {
  const placed = layoutGraph({ head_uri: '', nodes: [], actions: [] });
  assert.deepEqual(placed, []);
  assert.equal(rowCount(placed), 0);
  assert.equal(depthCount(placed), 0);
});
