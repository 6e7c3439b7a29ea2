/** DOM rendering for the session view. Browser-only; all logic it draws
 * from lives in state.ts / graphview.ts / metricsview.ts. */

import { SessionApi } from './api.js';
import { layoutGraph, rowCount } from './graphview.js';
import { buildSeries, driftFlag, polylinePoints } from './metricsview.js';
import type { SessionView } from './state.js';

const SERIES_COLORS: Record<string, string> = {
  if_score: '#2d7dd2',
  ic_score: '#34a853',
  psnr_om: '#d2642d',
  ssim_om: '#8648b8',
};

export function renderImagePane(
  container: HTMLElement,
  api: SessionApi,
  view: SessionView,
): void {
  let img = container.querySelector<HTMLImageElement>('img.stage');
  if (!img) {
    img = document.createElement('img');
    img.className = 'stage';
    container.appendChild(img);
    attachPanZoom(container, img);
  }
  const url = api.imageUrl(view.selectedUri);
  if (img.src !== url) {
    img.src = url; // immutable URL: revisits are cache hits
  }
  container.classList.toggle('busy', view.busy);
}

/** Client-side zoom over the single full-resolution immutable image. */
function attachPanZoom(container: HTMLElement, img: HTMLImageElement): void {
  let scale = 1;
  let tx = 0;
  let ty = 0;
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  const apply = () => {
    img.style.transform = `translate(${tx}px, ${ty}px) scale(${scale})`;
  };
  container.addEventListener('wheel', (event) => {
    event.preventDefault();
    const factor = event.deltaY < 0 ? 1.15 : 1 / 1.15;
    scale = Math.min(Math.max(scale * factor, 0.2), 32);
    apply();
  });
  container.addEventListener('pointerdown', (event) => {
    dragging = true;
    lastX = event.clientX;
    lastY = event.clientY;
    container.setPointerCapture(event.pointerId);
  });
  container.addEventListener('pointermove', (event) => {
    if (!dragging) {
      return;
    }
    tx += event.clientX - lastX;
    ty += event.clientY - lastY;
    lastX = event.clientX;
    lastY = event.clientY;
    apply();
  });
  container.addEventListener('pointerup', () => {
    dragging = false;
  });
  container.addEventListener('dblclick', () => {
    scale = 1;
    tx = 0;
    ty = 0;
    apply();
  });
}

export function renderTranscript(container: HTMLElement, view: SessionView): void {
  container.replaceChildren();
  view.transcript.forEach((entry, index) => {
    const item = document.createElement('div');
    item.className = `turn turn-${entry.status}`;
    const headline = document.createElement('div');
    headline.className = 'turn-head';
    const attempts = entry.attempts === null ? '' : ` · ${entry.attempts} attempt(s)`;
    headline.textContent = `#${index + 1} ${entry.status}${attempts}`;
    const text = document.createElement('div');
    text.className = 'turn-text';
    text.textContent = entry.instruction;
    item.append(headline, text);
    if (entry.failing.length > 0) {
      const fails = document.createElement('div');
      fails.className = 'turn-failing';
      fails.textContent =
        'failed checks: ' + entry.failing.map(([o, a]) => `${o}.${a}`).join(', ');
      item.appendChild(fails);
    }
    if (entry.error) {
      const err = document.createElement('div');
      err.className = 'turn-error';
      err.textContent = entry.error;
      item.appendChild(err);
    }
    container.appendChild(item);
  });
  container.scrollTop = container.scrollHeight;
}

const CELL_W = 56;
const CELL_H = 40;

export function renderGraph(
  container: HTMLElement,
  view: SessionView,
  onSelect: (uri: string) => void,
): void {
  container.replaceChildren();
  if (!view.graph) {
    return;
  }
  const placed = layoutGraph(view.graph);
  const byUri = new Map(placed.map((p) => [p.uri, p]));
  const svgNs = 'http://www.w3.org/2000/svg';
  const svg = document.createElementNS(svgNs, 'svg');
  const width = Math.max(...placed.map((p) => p.depth + 1)) * CELL_W + 24;
  const height = rowCount(placed) * CELL_H + 24;
  svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
  svg.setAttribute('width', String(width));
  svg.setAttribute('height', String(height));

  for (const node of placed) {
    if (!node.parentUri) {
      continue;
    }
    const parent = byUri.get(node.parentUri);
    if (!parent) {
      continue;
    }
    const line = document.createElementNS(svgNs, 'line');
    line.setAttribute('x1', String(parent.depth * CELL_W + 24));
    line.setAttribute('y1', String(parent.row * CELL_H + 24));
    line.setAttribute('x2', String(node.depth * CELL_W + 24));
    line.setAttribute('y2', String(node.row * CELL_H + 24));
    line.setAttribute('class', 'graph-edge');
    svg.appendChild(line);
  }
  for (const node of placed) {
    const circle = document.createElementNS(svgNs, 'circle');
    circle.setAttribute('cx', String(node.depth * CELL_W + 24));
    circle.setAttribute('cy', String(node.row * CELL_H + 24));
    circle.setAttribute('r', '9');
    const classes = ['graph-node'];
    if (node.uri === view.headUri) {
      classes.push('head');
    }
    if (node.uri === view.selectedUri) {
      classes.push('selected');
    }
    if (node.onHeadPath) {
      classes.push('on-path');
    }
    circle.setAttribute('class', classes.join(' '));
    const title = document.createElementNS(svgNs, 'title');
    const info = view.graph.nodes.find((n) => n.uri === node.uri);
    title.textContent = info ? `${info.transformation_type}: ${info.description}` : node.uri;
    circle.appendChild(title);
    circle.addEventListener('click', () => onSelect(node.uri));
    svg.appendChild(circle);
  }
  container.appendChild(svg);
}

export function renderMetrics(container: HTMLElement, view: SessionView): void {
  container.replaceChildren();
  if (view.metrics.length === 0) {
    const empty = document.createElement('div');
    empty.className = 'metrics-empty';
    empty.textContent = 'no committed turns yet — metrics will appear here';
    container.appendChild(empty);
    return;
  }
  if (driftFlag(view.metrics)) {
    const flag = document.createElement('div');
    flag.className = 'drift-flag';
    flag.textContent =
      'drift flag: background PSNR rises every turn (re-synthesis suspected)';
    container.appendChild(flag);
  }
  const width = 220;
  const height = 48;
  for (const series of buildSeries(view.metrics)) {
    const row = document.createElement('div');
    row.className = 'metric-row';
    const label = document.createElement('span');
    label.className = 'metric-label';
    label.textContent = series.metric;
    const svgNs = 'http://www.w3.org/2000/svg';
    const svg = document.createElementNS(svgNs, 'svg');
    svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
    svg.setAttribute('width', String(width));
    svg.setAttribute('height', String(height));
    const line = document.createElementNS(svgNs, 'polyline');
    line.setAttribute('points', polylinePoints(series.values, width, height));
    line.setAttribute('fill', 'none');
    line.setAttribute('stroke', SERIES_COLORS[series.metric] ?? '#444');
    line.setAttribute('stroke-width', '2');
    svg.appendChild(line);
    const values = document.createElement('span');
    values.className = 'metric-values';
    values.textContent = series.display.join('  ');
    row.append(label, svg, values);
    container.appendChild(row);
  }
}

export function renderNotice(container: HTMLElement, view: SessionView): void {
  container.textContent = view.notice ?? '';
  container.classList.toggle('visible', view.notice !== null);
}
