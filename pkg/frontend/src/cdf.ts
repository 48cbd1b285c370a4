/** Geometry for the hand-rolled CDF plot.
 *
 * Pure functions from bootstrap samples to SVG coordinates, so the plot
 * can be unit-tested without a document. The curve is the empirical
 * step function: at the i-th smallest sample the cumulative probability
 * is (i+1)/n. The threshold marker is drawn by these helpers too, but
 * the probability printed next to it always comes from the
 * recommendation endpoint, never from this module.
 */

export interface PlotGeometry {
  width: number;
  height: number;
  marginLeft: number;
  marginRight: number;
  marginTop: number;
  marginBottom: number;
  xMin: number;
  xMax: number;
}

export const DEFAULT_PLOT = {
  width: 640,
  height: 320,
  marginLeft: 48,
  marginRight: 16,
  marginTop: 12,
  marginBottom: 32,
};

/** Plot bounds padded 5% beyond the sample range (1 unit when flat). */
export function plotGeometry(
  samples: number[],
  base: typeof DEFAULT_PLOT = DEFAULT_PLOT,
): PlotGeometry {
  if (samples.length === 0) throw new Error("no samples to plot");
  let lo = samples[0];
  let hi = samples[0];
  for (const s of samples) {
    if (s < lo) lo = s;
    if (s > hi) hi = s;
  }
  const pad = hi > lo ? 0.05 * (hi - lo) : 1.0;
  return { ...base, xMin: lo - pad, xMax: hi + pad };
}

/** Sorted (value, cumulative probability) pairs, one per sample. */
export function cdfPoints(samples: number[]): Array<[number, number]> {
  const sorted = [...samples].sort((a, b) => a - b);
  const n = sorted.length;
  return sorted.map((s, i) => [s, (i + 1) / n]);
}

export function xToPixel(value: number, geom: PlotGeometry): number {
  const inner = geom.width - geom.marginLeft - geom.marginRight;
  const t = (value - geom.xMin) / (geom.xMax - geom.xMin);
  return geom.marginLeft + t * inner;
}

export function pixelToX(px: number, geom: PlotGeometry): number {
  const inner = geom.width - geom.marginLeft - geom.marginRight;
  const t = (px - geom.marginLeft) / inner;
  const clamped = Math.min(Math.max(t, 0), 1);
  return geom.xMin + clamped * (geom.xMax - geom.xMin);
}

export function yToPixel(p: number, geom: PlotGeometry): number {
  const inner = geom.height - geom.marginTop - geom.marginBottom;
  return geom.marginTop + (1 - p) * inner;
}

/** SVG path for the empirical CDF as a right-continuous step curve. */
export function cdfPath(samples: number[], geom: PlotGeometry): string {
  const points = cdfPoints(samples);
  const parts: string[] = [];
  let prevP = 0;
  parts.push(`M ${xToPixel(geom.xMin, geom).toFixed(2)} ${yToPixel(0, geom).toFixed(2)}`);
  for (let i = 0; i < points.length; i++) {
    const [value, p] = points[i];
    // collapse duplicates: jump once per distinct value
    if (i + 1 < points.length && points[i + 1][0] === value) continue;
    parts.push(`H ${xToPixel(value, geom).toFixed(2)}`);
    parts.push(`V ${yToPixel(p, geom).toFixed(2)}`);
    prevP = p;
  }
  if (prevP < 1) parts.push(`V ${yToPixel(1, geom).toFixed(2)}`);
  parts.push(`H ${xToPixel(geom.xMax, geom).toFixed(2)}`);
  return parts.join(" ");
}

/** Horizontal ticks for the probability axis. */
export function yTicks(): number[] {
  return [0, 0.25, 0.5, 0.75, 1];
}

/** A handful of round x ticks inside the sample range. */
export function xTicks(geom: PlotGeometry, count = 6): number[] {
  const span = geom.xMax - geom.xMin;
  const rawStep = span / count;
  const magnitude = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const step = [1, 2, 5, 10]
    .map((m) => m * magnitude)
    .find((s) => span / s <= count) ?? magnitude * 10;
  const first = Math.ceil(geom.xMin / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= geom.xMax + 1e-9; v += step) {
    ticks.push(Number(v.toFixed(10)));
  }
  return ticks;
}
