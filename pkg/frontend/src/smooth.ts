/**
 * Centered moving-average smoothing for learning curves.
 *
 * The window shrinks symmetrically at the series boundaries, so the
 * output has exactly the input's length and window 1 is the identity.
 */

export function movingAverage(series: number[], window: number): number[] {
  if (window < 1 || !Number.isInteger(window)) {
    throw new Error(`smoothing window must be a positive integer, got ${window}`);
  }
  if (window === 1) return series.slice();
  const half = Math.floor(window / 2);
  const out = new Array<number>(series.length);
  for (let i = 0; i < series.length; i++) {
    const reach = Math.min(half, i, series.length - 1 - i);
    let sum = 0;
    for (let j = i - reach; j <= i + reach; j++) sum += series[j];
    out[i] = sum / (2 * reach + 1);
  }
  return out;
}

export function mean(values: number[]): number {
  if (values.length === 0) return NaN;
  return values.reduce((a, b) => a + b, 0) / values.length;
}
