/** Metric chart preparation. Values pass through verbatim from the API;
 * the only client-side logic is presentation geometry and the drift flag,
 * which mirrors the evaluator's rule: a per-turn background-PSNR series
 * that rises at every step is suspicious, not impressive. */

import type { TurnScore } from './types.js';

export const CHART_METRICS = ['if_score', 'ic_score', 'psnr_om', 'ssim_om'] as const;
export type ChartMetric = (typeof CHART_METRICS)[number];

export interface MetricSeries {
  metric: ChartMetric;
  turns: number[];
  values: number[];
  display: string[]; // exact JSON rendering of each payload value
}

export function buildSeries(scores: TurnScore[]): MetricSeries[] {
  return CHART_METRICS.map((metric) => ({
    metric,
    turns: scores.map((s) => s.turn_index),
    values: scores.map((s) => s[metric]),
    display: scores.map((s) => JSON.stringify(s[metric])),
  }));
}

/** True iff psnr_om strictly increases turn over turn (needs >= 2 turns). */
export function driftFlag(scores: TurnScore[]): boolean {
  if (scores.length < 2) {
    return false;
  }
  for (let i = 1; i < scores.length; i += 1) {
    const prev = scores[i - 1];
    const here = scores[i];
    if (prev === undefined || here === undefined || here.psnr_om <= prev.psnr_om) {
      return false;
    }
  }
  return true;
}

/** Polyline points for an SVG chart, y-scaled into [0, height]. */
export function polylinePoints(
  values: number[],
  width: number,
  height: number,
): string {
  if (values.length === 0) {
    return '';
  }
  const low = Math.min(...values);
  const high = Math.max(...values);
  const span = high - low || 1;
  const step = values.length > 1 ? width / (values.length - 1) : 0;
  return values
    .map((v, i) => {
      const x = i * step;
      const y = height - ((v - low) / span) * height;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(' ');
}
