/** Pure view-state: everything on screen derives from API payloads alone,
 * so reloading and replaying the GET endpoints reconstructs the identical
 * view. No scene math, no metric math happens here. */

import type {
  GraphPayload,
  MetricsPayload,
  TurnOutcome,
  TurnScore,
} from './types.js';

export interface TranscriptEntry {
  instruction: string;
  status: string;
  attempts: number | null;
  finalUri: string;
  failing: [string, string][];
  error: string | null;
}

export interface SessionView {
  sessionId: string;
  headUri: string;
  selectedUri: string;
  graph: GraphPayload | null;
  transcript: TranscriptEntry[];
  metrics: TurnScore[];
  busy: boolean;
  notice: string | null;
  draftInstruction: string;
}

export function initialView(sessionId: string, headUri: string): SessionView {
  return {
    sessionId,
    headUri,
    selectedUri: headUri,
    graph: null,
    transcript: [],
    metrics: [],
    busy: false,
    notice: null,
    draftInstruction: '',
  };
}

export function applyGraph(view: SessionView, graph: GraphPayload): SessionView {
  const selected = graph.nodes.some((n) => n.uri === view.selectedUri)
    ? view.selectedUri
    : graph.head_uri;
  return { ...view, graph, headUri: graph.head_uri, selectedUri: selected };
}

/** Rebuild the transcript from the graph's folded actions (page reload). */
export function transcriptFromActions(graph: GraphPayload): TranscriptEntry[] {
  return graph.actions.map((action) => ({
    instruction: action.intent,
    status: 'committed',
    attempts: null, // attempt counts are transient; only live turns know them
    finalUri: action.key_image_uris[action.key_image_uris.length - 1] ?? '',
    failing: [],
    error: null,
  }));
}

export function applyTurnOutcome(
  view: SessionView,
  instruction: string,
  outcome: TurnOutcome,
): SessionView {
  const entry: TranscriptEntry = {
    instruction,
    status: outcome.status,
    attempts: outcome.attempts,
    finalUri: outcome.final_uri,
    failing: outcome.failing,
    error: outcome.error,
  };
  return {
    ...view,
    headUri: outcome.final_uri,
    selectedUri: outcome.final_uri,
    transcript: [...view.transcript, entry],
    busy: false,
    // A failed or rolled-back turn keeps the draft so nothing typed is lost.
    draftInstruction: outcome.status === 'committed' ? '' : view.draftInstruction,
    notice:
      outcome.status === 'committed'
        ? null
        : outcome.error ?? formatFailures(outcome.failing),
  };
}

function formatFailures(failing: [string, string][]): string {
  if (failing.length === 0) {
    return 'turn did not commit';
  }
  const parts = failing.map(([objectId, attribute]) => `${objectId}.${attribute}`);
  return `quality check failed on: ${parts.join(', ')}`;
}

export function beginTurn(view: SessionView, draft: string): SessionView {
  return { ...view, busy: true, notice: null, draftInstruction: draft };
}

export function applyBusyRefusal(view: SessionView): SessionView {
  return {
    ...view,
    busy: false,
    notice: 'a turn is already in flight; queued input refused',
  };
}

export function applyUndo(view: SessionView, headUri: string): SessionView {
  return { ...view, headUri, selectedUri: headUri, notice: null };
}

export function selectNode(view: SessionView, uri: string): SessionView {
  if (!view.graph || !view.graph.nodes.some((n) => n.uri === uri)) {
    return view;
  }
  return { ...view, selectedUri: uri };
}

export function applyMetrics(view: SessionView, payload: MetricsPayload): SessionView {
  return { ...view, metrics: payload.turns };
}

/** Children grouped by parent: branch points render multiple rows. */
export function childrenByParent(graph: GraphPayload): Map<string, string[]> {
  const children = new Map<string, string[]>();
  for (const node of graph.nodes) {
    if (node.parent_uri === null) {
      continue;
    }
    const siblings = children.get(node.parent_uri) ?? [];
    siblings.push(node.uri);
    children.set(node.parent_uri, siblings);
  }
  return children;
}
