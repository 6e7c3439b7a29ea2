/** Bootstrap and event wiring. The view is a pure function of API
 * responses (state.ts); this file only shuttles events to the API and
 * re-renders. Reloading the page rebuilds the same view from GET calls. */

import { ApiError, SessionApi } from './api.js';
import {
  renderGraph,
  renderImagePane,
  renderMetrics,
  renderNotice,
  renderTranscript,
} from './dom.js';
import {
  applyBusyRefusal,
  applyGraph,
  applyMetrics,
  applyTurnOutcome,
  applyUndo,
  beginTurn,
  initialView,
  selectNode,
  transcriptFromActions,
  type SessionView,
} from './state.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const params = new URLSearchParams(window.location.search);
const apiBase = params.get('api') ?? 'http://127.0.0.1:8750';
const api = new SessionApi(apiBase);

let view: SessionView | null = null;

function redraw(): void {
  if (!view) {
    return;
  }
  renderImagePane(el('image-pane'), api, view);
  renderTranscript(el('transcript'), view);
  renderGraph(el('graph'), view, onSelectNode);
  renderMetrics(el('metrics'), view);
  renderNotice(el('notice'), view);
  el<HTMLButtonElement>('send').toggleAttribute('disabled', view.busy);
  el<HTMLTextAreaElement>('instruction').toggleAttribute('disabled', view.busy);
  el('head-label').textContent = `head ${view.headUri.slice(0, 16)}…  ·  selected ${view.selectedUri.slice(0, 16)}…`;
}

async function refreshFromServer(sessionId: string): Promise<void> {
  const graph = await api.getGraph(sessionId);
  view = applyGraph(view ?? initialView(sessionId, graph.head_uri), graph);
  if (view.transcript.length === 0) {
    view = { ...view, transcript: transcriptFromActions(graph) };
  }
  try {
    view = applyMetrics(view, await api.getMetrics(sessionId));
  } catch {
    // metrics are advisory; editing continues without them
  }
  redraw();
}

function onSelectNode(uri: string): void {
  if (!view) {
    return;
  }
  view = selectNode(view, uri);
  redraw();
}

async function onSend(): Promise<void> {
  if (!view) {
    return;
  }
  if (view.busy) {
    view = applyBusyRefusal(view);
    redraw();
    return;
  }
  const text = el<HTMLTextAreaElement>('instruction').value.trim();
  if (!text) {
    return;
  }
  const useDsl = el<HTMLInputElement>('mode-dsl').checked;
  view = beginTurn(view, text);
  redraw();
  try {
    const outcome = await api.runTurn(
      view.sessionId,
      text,
      useDsl ? text : undefined,
    );
    view = applyTurnOutcome(view, text, outcome);
    if (outcome.status === 'committed') {
      el<HTMLTextAreaElement>('instruction').value = '';
    }
    await refreshFromServer(view.sessionId);
  } catch (error) {
    view = { ...view, busy: false };
    if (error instanceof ApiError && error.isBusy) {
      view = applyBusyRefusal(view);
    } else {
      view = { ...view, notice: String(error) };
    }
    redraw();
  }
}

async function onUndo(): Promise<void> {
  if (!view || view.busy) {
    return;
  }
  try {
    const target = view.selectedUri !== view.headUri ? view.selectedUri : undefined;
    const result = await api.undo(view.sessionId, target);
    view = applyUndo(view, result.head_uri);
    await refreshFromServer(view.sessionId);
  } catch (error) {
    view = { ...view, notice: String(error) };
    redraw();
  }
}

async function boot(): Promise<void> {
  const existing = params.get('session');
  let sessionId: string;
  if (existing) {
    sessionId = existing;
  } else {
    const seed = Number(params.get('seed') ?? '7');
    const created = await api.createSession({
      config: { backend: 'symbolic', feather_sigma: 0.0 },
      seed,
      canvas: [512, 512],
    });
    sessionId = created.session_id;
    const url = new URL(window.location.href);
    url.searchParams.set('session', sessionId);
    window.history.replaceState(null, '', url.toString());
  }
  view = initialView(sessionId, '');
  await refreshFromServer(sessionId);
}

el('send').addEventListener('click', () => void onSend());
el('undo').addEventListener('click', () => void onUndo());
el<HTMLTextAreaElement>('instruction').addEventListener('keydown', (event) => {
  if (event.key === 'Enter' && (event.ctrlKey || event.metaKey)) {
    void onSend();
  }
});

// Metrics refresh by polling (no push channel); skipped while a turn runs.
window.setInterval(() => {
  if (view && !view.busy) {
    api
      .getMetrics(view.sessionId)
      .then((payload) => {
        if (view) {
          view = applyMetricsSafe(view, payload);
          redraw();
        }
      })
      .catch(() => undefined);
  }
}, 15000);

function applyMetricsSafe(
  current: SessionView,
  payload: Parameters<typeof applyMetrics>[1],
): SessionView {
  return applyMetrics(current, payload);
}

void boot();
