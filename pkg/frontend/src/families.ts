/**
 * The six figure families rendered from metrics CSVs.
 *
 * Every family produces one SVG image plus a plain-text summary table
 * with the final-window means and percentage gaps the headline claims
 * are computed from.  Rendering is read-only over its inputs.
 */

import { MetricRow, distinct } from "./csv.js";
import { movingAverage, mean } from "./smooth.js";
import { BarGroup, Series, barChart, lineChart } from "./svg.js";
import { Metric, policySeries, renderSummaryTable, summarize } from "./summary.js";

export const FAMILIES = [
  "rewards",
  "latency",
  "task_size_sweep",
  "attack_type_sweep",
  "per_attack_rewards",
  "trust_rates",
] as const;

export type Family = (typeof FAMILIES)[number];

export interface Rendered {
  svg: string;
  summary: string;
}

function curvesFamily(
  rows: MetricRow[], metric: Metric, window: number,
  title: string, yLabel: string, lowerIsBetter: boolean,
): Rendered {
  const series: Series[] = distinct(rows.map((r) => r.policy)).map((policy) => {
    const { episodes, values } = policySeries(rows, policy, metric);
    return { label: policy, x: episodes, y: movingAverage(values, window) };
  });
  const svg = lineChart(title, "episode", yLabel, series);
  const summary = renderSummaryTable(summarize(rows, metric, lowerIsBetter), yLabel);
  return { svg, summary };
}

function sizeOf(runId: string): number {
  const match = /-size(\d+)$/.exec(runId);
  if (!match) throw new Error(`run id ${runId} carries no task size suffix`);
  return Number(match[1]);
}

function sweepFamily(
  rows: MetricRow[],
  category: (r: MetricRow) => string,
  order: string[],
  title: string, xLabel: string,
): Rendered {
  const policies = distinct(rows.map((r) => r.policy));
  const groups: BarGroup[] = order.map((cat) => ({
    label: cat,
    values: policies.map((policy) => ({
      label: policy,
      value: mean(rows.filter((r) => r.policy === policy && category(r) === cat)
        .map((r) => r.meanLatency)),
    })),
  }));
  const svg = barChart(title, xLabel, "mean total latency (s)", groups);
  const lines = [
    `mean total latency (s) by ${xLabel} and policy`,
    ["category", ...policies].join("\t"),
  ];
  for (const g of groups) {
    lines.push([g.label, ...g.values.map((v) => v.value.toPrecision(6))].join("\t"));
  }
  return { svg, summary: lines.join("\n") + "\n" };
}

function trustFamily(rows: MetricRow[], window: number): Rendered {
  const episodes = distinct(rows.map((r) => r.episode)).sort((a, b) => a - b);
  const series: Series[] = (["fbr", "br"] as const).map((metric) => ({
    label: metric,
    x: episodes,
    y: movingAverage(
      episodes.map((ep) =>
        mean(rows.filter((r) => r.episode === ep).map((r) => r[metric] ?? 0))),
      window,
    ),
  }));
  const svg = lineChart("banning outcomes over episodes", "episode", "rate", series);
  const tail = Math.max(1, Math.floor(episodes.length / 5));
  const lines = ["final-fifth banning rates"];
  for (const s of series) {
    lines.push(`${s.label}\t${mean(s.y.slice(s.y.length - tail)).toPrecision(6)}`);
  }
  return { svg, summary: lines.join("\n") + "\n" };
}

function perAttackFamily(rows: MetricRow[], window: number): Rendered {
  const kinds = distinct(rows.map((r) => r.attack));
  const parts: string[] = [];
  const summaries: string[] = [];
  for (const kind of kinds) {
    const subset = rows.filter((r) => r.attack === kind);
    const { svg, summary } = curvesFamily(
      subset, "meanReward", window,
      `test rewards under ${kind} attacks`, "mean reward", false,
    );
    parts.push(svg);
    summaries.push(`== ${kind} ==\n${summary}`);
  }
  // stack the per-kind charts vertically in one document
  const height = 520 * kinds.length;
  const stacked = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="860" height="${height}">`,
    ...parts.map((svg, i) =>
      `<g transform="translate(0 ${i * 520})">` +
      svg.replace(/^<svg[^>]*>/, "").replace(/<\/svg>\s*$/, "") +
      "</g>"),
    "</svg>",
    "",
  ];
  return { svg: stacked.join("\n"), summary: summaries.join("\n") };
}

export function renderFamily(
  family: Family, rows: MetricRow[], window: number,
): Rendered {
  switch (family) {
    case "rewards":
      return curvesFamily(rows, "meanReward", window,
        "average test rewards", "mean reward", false);
    case "latency":
      return curvesFamily(rows, "meanLatency", window,
        "average total migration latency", "mean total latency (s)", true);
    case "task_size_sweep":
      return sweepFamily(
        rows, (r) => `${sizeOf(r.runId)} MB`,
        distinct(rows.map((r) => sizeOf(r.runId))).sort((a, b) => a - b)
          .map((s) => `${s} MB`),
        "latency by task size", "task size");
    case "attack_type_sweep":
      return sweepFamily(
        rows, (r) => r.attack, distinct(rows.map((r) => r.attack)),
        "latency by attack type", "attack type");
    case "per_attack_rewards":
      return perAttackFamily(rows, window);
    case "trust_rates":
      return trustFamily(rows, window);
  }
}
