/**
 * Final-window summary statistics behind each figure.
 *
 * For every policy the table reports the mean of the final window
 * (last tenth of its evaluation points, at least one) and, when a
 * reference policy is present, the percentage gap
 * (reference - policy) / |policy| — positive when the reference
 * improves on the policy for reward-like metrics, and the analogous
 * reduction (policy - reference) / policy for latency-like metrics.
 */

import { MetricRow, distinct } from "./csv.js";
import { mean } from "./smooth.js";

export type Metric = "meanReward" | "meanLatency" | "fbr" | "br";

export interface SummaryRow {
  policy: string;
  finalWindowMean: number;
  gapVsReference: number | null;
}

export const REFERENCE_POLICY = "mappo";

function finalWindow(values: number[]): number[] {
  const n = Math.max(1, Math.floor(values.length / 10));
  return values.slice(values.length - n);
}

export function policySeries(
  rows: MetricRow[], policy: string, metric: Metric,
): { episodes: number[]; values: number[] } {
  const mine = rows.filter((r) => r.policy === policy);
  const episodes = distinct(mine.map((r) => r.episode)).sort((a, b) => a - b);
  const values = episodes.map((ep) =>
    mean(mine.filter((r) => r.episode === ep).map((r) => r[metric] as number)),
  );
  return { episodes, values };
}

export function summarize(
  rows: MetricRow[], metric: Metric, lowerIsBetter: boolean,
): SummaryRow[] {
  const policies = distinct(rows.map((r) => r.policy));
  const finals = new Map<string, number>();
  for (const policy of policies) {
    const { values } = policySeries(rows, policy, metric);
    finals.set(policy, mean(finalWindow(values)));
  }
  const reference = finals.get(REFERENCE_POLICY);
  return policies.map((policy) => {
    const value = finals.get(policy)!;
    let gap: number | null = null;
    if (reference !== undefined && policy !== REFERENCE_POLICY) {
      gap = lowerIsBetter
        ? (value - reference) / value
        : (reference - value) / Math.abs(value);
    }
    return { policy, finalWindowMean: value, gapVsReference: gap };
  });
}

export function renderSummaryTable(
  rows: SummaryRow[], metricLabel: string,
): string {
  const lines = [
    `final-window mean ${metricLabel} per policy`,
    "policy              mean           gap vs reference",
  ];
  for (const row of rows) {
    const gap = row.gapVsReference === null
      ? "-"
      : `${(100 * row.gapVsReference).toFixed(1)}%`;
    lines.push(
      `${row.policy.padEnd(19)} ${row.finalWindowMean.toPrecision(9).padEnd(14)} ${gap}`,
    );
  }
  return lines.join("\n") + "\n";
}
