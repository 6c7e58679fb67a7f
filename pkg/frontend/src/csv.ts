/**
 * Reader for the simulator's metrics CSV interchange format.
 *
 * The schema is fixed: run_id, episode, policy, attack, mean_reward,
 * mean_latency, fbr, br.  Parsing is strict — a missing or reordered
 * column fails with the column named, so a schema drift upstream never
 * produces a silently wrong figure.
 */

export const METRIC_COLUMNS = [
  "run_id",
  "episode",
  "policy",
  "attack",
  "mean_reward",
  "mean_latency",
  "fbr",
  "br",
] as const;

export interface MetricRow {
  runId: string;
  episode: number;
  policy: string;
  attack: string;
  meanReward: number;
  meanLatency: number;
  fbr: number | null;
  br: number | null;
}

export class SchemaError extends Error {}

function parseNumber(cell: string, column: string, line: number): number {
  const value = Number(cell);
  if (cell === "" || Number.isNaN(value)) {
    throw new SchemaError(`line ${line}: column ${column} is not numeric: ${JSON.stringify(cell)}`);
  }
  return value;
}

function parseOptional(cell: string, column: string, line: number): number | null {
  return cell === "" ? null : parseNumber(cell, column, line);
}

export function parseMetricsCsv(text: string): MetricRow[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length === 0 || lines[0] === "") {
    throw new SchemaError("empty metrics file");
  }
  const header = lines[0].split(",");
  for (let i = 0; i < METRIC_COLUMNS.length; i++) {
    if (header[i] !== METRIC_COLUMNS[i]) {
      throw new SchemaError(
        `header mismatch at column ${i}: expected ${METRIC_COLUMNS[i]}, got ${header[i] ?? "<missing>"}`,
      );
    }
  }
  if (header.length !== METRIC_COLUMNS.length) {
    throw new SchemaError(`unexpected extra column ${header[METRIC_COLUMNS.length]}`);
  }
  const rows: MetricRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    if (lines[i] === "") continue;
    const cells = lines[i].split(",");
    if (cells.length !== METRIC_COLUMNS.length) {
      throw new SchemaError(`line ${i + 1}: expected ${METRIC_COLUMNS.length} cells, got ${cells.length}`);
    }
    rows.push({
      runId: cells[0],
      episode: Math.trunc(parseNumber(cells[1], "episode", i + 1)),
      policy: cells[2],
      attack: cells[3],
      meanReward: parseNumber(cells[4], "mean_reward", i + 1),
      meanLatency: parseNumber(cells[5], "mean_latency", i + 1),
      fbr: parseOptional(cells[6], "fbr", i + 1),
      br: parseOptional(cells[7], "br", i + 1),
    });
  }
  return rows;
}

/** Distinct values in first-appearance order. */
export function distinct<T>(values: T[]): T[] {
  const seen = new Set<T>();
  const out: T[] = [];
  for (const v of values) {
    if (!seen.has(v)) {
      seen.add(v);
      out.push(v);
    }
  }
  return out;
}
