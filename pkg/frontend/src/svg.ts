/**
 * Dependency-free SVG chart rendering: line charts for curves, grouped
 * bar charts for sweeps.  Output is a deterministic string for a given
 * input.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface BarGroup {
  label: string; // x-axis category
  values: { label: string; value: number }[];
}

const WIDTH = 860;
const HEIGHT = 520;
const MARGIN = { left: 70, right: 170, top: 40, bottom: 55 };

export const POLICY_STYLES: Record<string, string> = {
  mappo: "#d62728",
  random: "#7f7f7f",
  greedy: "#2ca02c",
  full_premigration: "#1f77b4",
  no_premigration: "#9467bd",
  fbr: "#d62728",
  br: "#1f77b4",
};

function color(label: string, index: number): string {
  const fallback = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#7f7f7f", "#ff7f0e"];
  return POLICY_STYLES[label] ?? fallback[index % fallback.length];
}

function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const candidates = [step, 2 * step, 2.5 * step, 5 * step, 10 * step];
  const chosen = candidates.find((s) => span / s <= count) ?? 10 * step;
  const start = Math.ceil(lo / chosen) * chosen;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += chosen) ticks.push(Number(v.toPrecision(12)));
  return ticks;
}

function fmt(value: number): string {
  return Math.abs(value) >= 1000 || (value !== 0 && Math.abs(value) < 0.01)
    ? value.toExponential(1)
    : Number(value.toPrecision(4)).toString();
}

function frame(title: string, xLabel: string, yLabel: string, body: string,
               legend: { label: string; color: string }[]): string {
  const legendItems = legend
    .map((item, i) => {
      const y = MARGIN.top + 14 + i * 20;
      const x = WIDTH - MARGIN.right + 16;
      return `<rect x="${x}" y="${y - 9}" width="12" height="12" fill="${item.color}"/>` +
        `<text x="${x + 18}" y="${y + 1}" font-size="12">${item.label}</text>`;
    })
    .join("\n");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" font-family="Helvetica, Arial, sans-serif">
<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>
<text x="${WIDTH / 2}" y="24" font-size="16" text-anchor="middle">${title}</text>
<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 12}" font-size="13" text-anchor="middle">${xLabel}</text>
<text x="18" y="${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 ${(MARGIN.top + HEIGHT - MARGIN.bottom) / 2})">${yLabel}</text>
${body}
${legendItems}
</svg>
`;
}

export function lineChart(
  title: string, xLabel: string, yLabel: string, series: Series[],
): string {
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (yLo === yHi) {
    yLo -= 1;
    yHi += 1;
  }
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) => MARGIN.left + ((x - xLo) / Math.max(xHi - xLo, 1e-12)) * plotW;
  const py = (y: number) => MARGIN.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const axes: string[] = [
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${MARGIN.left + plotW}" y2="${MARGIN.top + plotH}" stroke="black"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${MARGIN.top + plotH}" stroke="black"/>`,
  ];
  for (const t of niceTicks(xLo, xHi)) {
    axes.push(`<line x1="${px(t)}" y1="${MARGIN.top + plotH}" x2="${px(t)}" y2="${MARGIN.top + plotH + 5}" stroke="black"/>`);
    axes.push(`<text x="${px(t)}" y="${MARGIN.top + plotH + 20}" font-size="11" text-anchor="middle">${fmt(t)}</text>`);
  }
  for (const t of niceTicks(yLo, yHi)) {
    axes.push(`<line x1="${MARGIN.left - 5}" y1="${py(t)}" x2="${MARGIN.left}" y2="${py(t)}" stroke="black"/>`);
    axes.push(`<text x="${MARGIN.left - 9}" y="${py(t) + 4}" font-size="11" text-anchor="end">${fmt(t)}</text>`);
    axes.push(`<line x1="${MARGIN.left}" y1="${py(t)}" x2="${MARGIN.left + plotW}" y2="${py(t)}" stroke="#e0e0e0"/>`);
  }

  const paths = series.map((s, i) => {
    const points = s.x.map((x, j) => `${px(x).toFixed(2)},${py(s.y[j]).toFixed(2)}`).join(" ");
    return `<polyline points="${points}" fill="none" stroke="${color(s.label, i)}" stroke-width="1.8"/>`;
  });

  const legend = series.map((s, i) => ({ label: s.label, color: color(s.label, i) }));
  return frame(title, xLabel, yLabel, [...axes, ...paths].join("\n"), legend);
}

export function barChart(
  title: string, xLabel: string, yLabel: string, groups: BarGroup[],
): string {
  const labels = groups[0]?.values.map((v) => v.label) ?? [];
  const all = groups.flatMap((g) => g.values.map((v) => v.value));
  const yHi = Math.max(...all, 0) * 1.08;
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const py = (y: number) => MARGIN.top + plotH - (y / Math.max(yHi, 1e-12)) * plotH;

  const axes: string[] = [
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${MARGIN.left + plotW}" y2="${MARGIN.top + plotH}" stroke="black"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${MARGIN.top + plotH}" stroke="black"/>`,
  ];
  for (const t of niceTicks(0, yHi)) {
    axes.push(`<text x="${MARGIN.left - 9}" y="${py(t) + 4}" font-size="11" text-anchor="end">${fmt(t)}</text>`);
    axes.push(`<line x1="${MARGIN.left}" y1="${py(t)}" x2="${MARGIN.left + plotW}" y2="${py(t)}" stroke="#e0e0e0"/>`);
  }

  const groupW = plotW / Math.max(groups.length, 1);
  const barW = (groupW * 0.8) / Math.max(labels.length, 1);
  const bars: string[] = [];
  groups.forEach((group, gi) => {
    const x0 = MARGIN.left + gi * groupW + groupW * 0.1;
    group.values.forEach((v, vi) => {
      const x = x0 + vi * barW;
      bars.push(
        `<rect x="${x.toFixed(2)}" y="${py(v.value).toFixed(2)}" width="${(barW * 0.92).toFixed(2)}" height="${(MARGIN.top + plotH - py(v.value)).toFixed(2)}" fill="${color(v.label, vi)}"/>`,
      );
    });
    bars.push(
      `<text x="${(x0 + groupW * 0.4).toFixed(2)}" y="${MARGIN.top + plotH + 20}" font-size="12" text-anchor="middle">${group.label}</text>`,
    );
  });

  const legend = labels.map((label, i) => ({ label, color: color(label, i) }));
  return frame(title, xLabel, yLabel, [...axes, ...bars].join("\n"), legend);
}
