/**
 * Hand-rolled SVG chart primitives: linear/log axes with nice ticks,
 * polylines that break at NaN gaps, histogram bars, shaded bands, and a
 * simple legend. Figures are one or more panels stacked on a fixed-size
 * canvas; no external plotting dependency.
 */

export interface Series {
  x: ArrayLike<number>;
  y: ArrayLike<number>;
  color: string;
  label?: string;
  width?: number;
  dash?: string;
  opacity?: number;
  /** Draw piecewise-constant (value holds until the next x). */
  step?: boolean;
  /** Optional shaded band, e.g. +-1 SE around the line. */
  band?: { lo: ArrayLike<number>; hi: ArrayLike<number> };
}

export interface Bars {
  /** Bin edges, length = counts.length + 1. */
  edges: ArrayLike<number>;
  counts: ArrayLike<number>;
  color: string;
  label?: string;
}

export interface PanelOpts {
  title?: string;
  xLabel?: string;
  yLabel?: string;
  xMin?: number;
  xMax?: number;
  yMin?: number;
  yMax?: number;
  /** Log10 y-axis; ticks at powers of ten. */
  yLog?: boolean;
  series?: Series[];
  bars?: Bars[];
}

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return String(v);
  if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
    return v.toExponential(0).replace("e+", "e").replace("e-", "e-");
  }
  const s = v.toFixed(3);
  return s.replace(/\.?0+$/, "") || "0";
}

export function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((n) => n >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

function logTicks(min: number, max: number): number[] {
  const lo = Math.ceil(Math.log10(min) - 1e-9);
  const hi = Math.floor(Math.log10(max) + 1e-9);
  const ticks: number[] = [];
  for (let e = lo; e <= hi; e++) ticks.push(Math.pow(10, e));
  return ticks;
}

function finiteRange(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) return [0, 1]; // no data: default axes
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

/** One plotting area within the canvas, with its own axes and scales. */
export function renderPanel(
  x0: number,
  y0: number,
  w: number,
  h: number,
  opts: PanelOpts
): string {
  const ml = 56;
  const mr = 14;
  const mt = opts.title ? 22 : 10;
  const mb = opts.xLabel ? 40 : 26;
  const pw = w - ml - mr;
  const ph = h - mt - mb;
  const series = opts.series ?? [];
  const bars = opts.bars ?? [];

  // Data ranges (NaN-tolerant); explicit bounds win.
  const xs: number[] = [];
  const ys: number[] = [];
  for (const sr of series) {
    for (let i = 0; i < sr.x.length; i++) {
      xs.push(Number(sr.x[i]));
      ys.push(Number(sr.y[i]));
      if (sr.band) {
        ys.push(Number(sr.band.lo[i]), Number(sr.band.hi[i]));
      }
    }
  }
  for (const b of bars) {
    for (let i = 0; i < b.edges.length; i++) xs.push(Number(b.edges[i]));
    for (let i = 0; i < b.counts.length; i++) ys.push(Number(b.counts[i]));
  }
  let [xLo, xHi] = finiteRange(xs);
  xLo = opts.xMin ?? xLo;
  xHi = opts.xMax ?? xHi;
  if (xLo === xHi) [xLo, xHi] = [xLo - 0.5, xHi + 0.5];
  let [yLo, yHi] = finiteRange(ys);
  if (opts.yLog) {
    const pos = ys.filter((v) => Number.isFinite(v) && v > 0);
    [yLo, yHi] = pos.length > 0 ? finiteRange(pos) : [0.1, 10];
    yLo = opts.yMin ?? yLo / 1.5;
    yHi = opts.yMax ?? yHi * 1.5;
  } else {
    const pad = 0.06 * (yHi - yLo);
    yLo = opts.yMin ?? yLo - pad;
    yHi = opts.yMax ?? yHi + pad;
    if (yLo === yHi) [yLo, yHi] = [yLo - 0.5, yHi + 0.5];
  }

  const xOf = (v: number) => x0 + ml + ((v - xLo) / (xHi - xLo)) * pw;
  const yOf = opts.yLog
    ? (v: number) =>
        y0 + mt + ph - ((Math.log10(v) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo))) * ph
    : (v: number) => y0 + mt + ph - ((v - yLo) / (yHi - yLo)) * ph;

  let g = `<g>\n`;
  if (opts.title) {
    g += `<text x="${x0 + ml}" y="${y0 + 14}" font-size="11" font-weight="600" fill="#222">${esc(opts.title)}</text>\n`;
  }

  // Grid + y ticks
  const yTicks = opts.yLog ? logTicks(yLo, yHi) : niceTicks(yLo, yHi, 5);
  for (const v of yTicks) {
    const y = yOf(v);
    g += `<line x1="${x0 + ml}" y1="${y.toFixed(1)}" x2="${x0 + ml + pw}" y2="${y.toFixed(1)}" stroke="#eee" stroke-width="0.6"/>\n`;
    g += `<text x="${x0 + ml - 5}" y="${(y + 2.6).toFixed(1)}" font-size="8" fill="#555" text-anchor="end">${esc(fmt(v))}</text>\n`;
  }

  // X ticks
  for (const v of niceTicks(xLo, xHi, 6)) {
    const x = xOf(v);
    g += `<line x1="${x.toFixed(1)}" y1="${y0 + mt + ph}" x2="${x.toFixed(1)}" y2="${y0 + mt + ph + 3}" stroke="#999" stroke-width="0.8"/>\n`;
    g += `<text x="${x.toFixed(1)}" y="${y0 + mt + ph + 12}" font-size="8" fill="#555" text-anchor="middle">${esc(fmt(v))}</text>\n`;
  }

  // Bars (drawn under lines); log axes clamp at the bottom edge.
  const yBase = y0 + mt + ph;
  for (const b of bars) {
    for (let i = 0; i < b.counts.length; i++) {
      const c = Number(b.counts[i]);
      if (!Number.isFinite(c) || c <= (opts.yLog ? 0 : -Infinity)) continue;
      const xa = xOf(Number(b.edges[i]));
      const xb = xOf(Number(b.edges[i + 1]));
      const yTop = Math.max(y0 + mt, Math.min(yBase, yOf(c)));
      g += `<rect x="${xa.toFixed(1)}" y="${yTop.toFixed(1)}" width="${Math.max(0.5, xb - xa - 0.6).toFixed(1)}" height="${(yBase - yTop).toFixed(1)}" fill="${b.color}" opacity="0.85"/>\n`;
    }
  }

  // Bands, then lines on top.
  for (const sr of series) {
    if (!sr.band) continue;
    const up: string[] = [];
    const dn: string[] = [];
    for (let i = 0; i < sr.x.length; i++) {
      const x = Number(sr.x[i]);
      const lo = Number(sr.band.lo[i]);
      const hi = Number(sr.band.hi[i]);
      if (!Number.isFinite(x) || !Number.isFinite(lo) || !Number.isFinite(hi)) continue;
      up.push(`${xOf(x).toFixed(1)},${yOf(hi).toFixed(1)}`);
      dn.unshift(`${xOf(x).toFixed(1)},${yOf(lo).toFixed(1)}`);
    }
    if (up.length > 1) {
      g += `<polygon points="${up.join(" ")} ${dn.join(" ")}" fill="${sr.color}" opacity="0.15"/>\n`;
    }
  }
  for (const sr of series) {
    const segs: string[][] = [[]];
    let prev: [number, number] | null = null;
    for (let i = 0; i < sr.x.length; i++) {
      const x = Number(sr.x[i]);
      const y = Number(sr.y[i]);
      if (!Number.isFinite(x) || !Number.isFinite(y) || (opts.yLog && y <= 0)) {
        if (segs[segs.length - 1]!.length > 0) segs.push([]);
        prev = null;
        continue;
      }
      const px = xOf(x);
      const py = yOf(y);
      const seg = segs[segs.length - 1]!;
      if (sr.step && prev !== null) {
        seg.push(`${px.toFixed(1)},${prev[1].toFixed(1)}`);
      }
      seg.push(`${px.toFixed(1)},${py.toFixed(1)}`);
      prev = [px, py];
    }
    const style =
      `stroke="${sr.color}" stroke-width="${sr.width ?? 1.3}" fill="none"` +
      (sr.dash ? ` stroke-dasharray="${sr.dash}"` : "") +
      (sr.opacity !== undefined ? ` opacity="${sr.opacity}"` : "");
    for (const seg of segs) {
      if (seg.length === 1) {
        const [x, y] = seg[0]!.split(",");
        g += `<circle cx="${x}" cy="${y}" r="1.6" fill="${sr.color}"/>\n`;
      } else if (seg.length > 1) {
        g += `<polyline points="${seg.join(" ")}" ${style}/>\n`;
      }
    }
  }

  // Panel frame + axis labels
  g += `<rect x="${x0 + ml}" y="${y0 + mt}" width="${pw}" height="${ph}" fill="none" stroke="#999" stroke-width="0.8"/>\n`;
  if (opts.xLabel) {
    g += `<text x="${x0 + ml + pw / 2}" y="${y0 + mt + ph + 26}" font-size="9" fill="#333" text-anchor="middle">${esc(opts.xLabel)}</text>\n`;
  }
  if (opts.yLabel) {
    const cx = x0 + 12;
    const cy = y0 + mt + ph / 2;
    g += `<text x="${cx}" y="${cy}" font-size="9" fill="#333" text-anchor="middle" transform="rotate(-90 ${cx} ${cy})">${esc(opts.yLabel)}</text>\n`;
  }

  // Legend (top-right inside the panel), for labeled series and bars.
  const entries: { color: string; label: string; dash?: string }[] = [];
  for (const b of bars) if (b.label) entries.push({ color: b.color, label: b.label });
  for (const sr of series) if (sr.label) entries.push({ color: sr.color, label: sr.label, dash: sr.dash });
  if (entries.length > 0) {
    const lw = Math.max(...entries.map((e) => e.label.length)) * 5.2 + 26;
    const lx = x0 + ml + pw - lw - 4;
    let ly = y0 + mt + 5;
    g += `<rect x="${lx}" y="${ly}" width="${lw}" height="${entries.length * 12 + 6}" fill="#fff" opacity="0.85" stroke="#ddd" stroke-width="0.5"/>\n`;
    ly += 9;
    for (const e of entries) {
      g += `<line x1="${lx + 4}" y1="${ly - 3}" x2="${lx + 18}" y2="${ly - 3}" stroke="${e.color}" stroke-width="2"${e.dash ? ` stroke-dasharray="${e.dash}"` : ""}/>\n`;
      g += `<text x="${lx + 22}" y="${ly}" font-size="8" fill="#333">${esc(e.label)}</text>\n`;
      ly += 12;
    }
  }

  g += `</g>\n`;
  return g;
}

/** Assemble panels (already positioned) into a complete SVG document. */
export function svgDocument(width: number, height: number, title: string, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="#fff"/>\n` +
    `<text x="${width / 2}" y="16" font-size="12" font-weight="600" fill="#111" text-anchor="middle">${esc(title)}</text>\n` +
    body +
    `</svg>\n`
  );
}
