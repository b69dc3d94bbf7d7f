/**
 * The five figure kinds, each a pure function from parsed CSV tables to
 * one SVG document. Schemas are the frozen column sets written by the
 * experiment runner; a missing column raises SchemaError before any
 * drawing happens.
 */

import { Bars, PanelOpts, Series, fmt, renderPanel, svgDocument } from "./chart.js";
import { Table, col, requireColumns, tableLabel } from "./csv.js";

export const KINDS = [
  "policy-overlay",
  "density",
  "learning-curves",
  "comparison",
  "improvement",
] as const;

export type Kind = (typeof KINDS)[number];

export const TRACE_COLUMNS = [
  "step",
  "theta1",
  "theta2",
  "tau",
  "J",
  "J_se",
  "grad_norm",
  "critic_residual",
] as const;
export const DP_COLUMNS = ["s", "V", "pi"] as const;
export const SNAPSHOT_COLUMNS = ["step", "s", "u0"] as const;
export const PROFILE_COLUMNS = ["tau", "s", "u0", "du0_dtheta1", "du0_dtheta2"] as const;
export const DENSITY_COLUMNS = [
  "tau",
  "step",
  "s",
  "g1",
  "g2",
  "g1_normalized",
  "g2_normalized",
] as const;

/** How many input tables each kind takes: [min, max]. */
export const INPUT_ARITY: Record<Kind, [number, number]> = {
  "policy-overlay": [1, 2],
  density: [1, 1],
  "learning-curves": [1, 1],
  comparison: [2, 2],
  improvement: [1, 1],
};

const W = 760;
const PALETTE = ["#4361ee", "#e63946", "#2d6a4f", "#9d4edd", "#e28413"];

function groupKeys(values: Float64Array): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

function pick(values: Float64Array, keep: (i: number) => boolean): Float64Array {
  const out: number[] = [];
  for (let i = 0; i < values.length; i++) if (keep(i)) out.push(values[i]!);
  return Float64Array.from(out);
}

/** Linear ramp between two hex colors, t in [0, 1]. */
function ramp(t: number, from = [0xbf, 0xd3, 0xff], to = [0x16, 0x31, 0x8f]): string {
  const c = from.map((f, i) => Math.round(f + (to[i]! - f) * t));
  return `#${c.map((v) => v.toString(16).padStart(2, "0")).join("")}`;
}

// ---------------------------------------------------------------------------
// policy-overlay: DP baseline action map, optionally overlaid with the
// smoothed MPC policy at each relaxation level from a profile sweep.

function policyOverlay(tables: Table[]): string {
  const dp = tables[0]!;
  requireColumns(dp, DP_COLUMNS);
  const s = col(dp, "s");
  const pi = col(dp, "pi");
  const inside = (i: number) => s[i]! >= 0 && s[i]! <= 1;
  const series: Series[] = [
    {
      x: pick(s, inside),
      y: pick(pi, inside),
      color: "#111",
      label: "DP baseline",
      width: 1.6,
      step: true,
    },
  ];
  if (tables.length > 1) {
    const prof = tables[1]!;
    requireColumns(prof, PROFILE_COLUMNS);
    const taus = groupKeys(col(prof, "tau"));
    const ps = col(prof, "s");
    const pu = col(prof, "u0");
    const pt = col(prof, "tau");
    taus.forEach((tau, k) => {
      const keep = (i: number) => pt[i] === tau && ps[i]! >= 0 && ps[i]! <= 1;
      series.push({
        x: pick(ps, keep),
        y: pick(pu, keep),
        color: PALETTE[k % PALETTE.length]!,
        label: `MPC tau=${fmt(tau)}`,
        width: 1.2,
      });
    });
  }
  const body = renderPanel(0, 20, W, 320, {
    xLabel: "state s",
    yLabel: "action",
    xMin: 0,
    xMax: 1,
    yMin: -1.08,
    yMax: 1.08,
    series,
  });
  return svgDocument(W, 350, "Policy against the dynamic-programming baseline", body);
}

// ---------------------------------------------------------------------------
// density: per-tau histograms of normalized gradient magnitudes along a
// closed-loop trajectory, with log-scaled counts.

function density(tables: Table[]): string {
  const t = tables[0]!;
  requireColumns(t, DENSITY_COLUMNS);
  const g1 = col(t, "g1_normalized");
  const g2 = col(t, "g2_normalized");
  const tau = col(t, "tau");
  const mag = Float64Array.from(g1, (v, i) => Math.hypot(v, g2[i]!));
  const taus = groupKeys(tau);
  const hi = mag.length > 0 ? Math.max(...mag, 1e-12) : 1;
  const nBins = 40;
  const edges = Array.from({ length: nBins + 1 }, (_, i) => (hi * i) / nBins);

  const panelH = 300;
  const panelW = taus.length > 0 ? W / taus.length : W;
  let body = "";
  if (taus.length === 0) {
    body = renderPanel(0, 20, W, panelH, {
      xLabel: "normalized gradient magnitude",
      yLabel: "count (log scale)",
      yLog: true,
    });
  }
  taus.forEach((tv, k) => {
    const counts = new Array(nBins).fill(0);
    for (let i = 0; i < mag.length; i++) {
      if (tau[i] !== tv) continue;
      const b = Math.min(nBins - 1, Math.floor((mag[i]! / hi) * nBins));
      counts[b] += 1;
    }
    const bars: Bars[] = [{ edges, counts, color: PALETTE[k % PALETTE.length]! }];
    body += renderPanel(k * panelW, 20, panelW, panelH, {
      title: `tau = ${fmt(tv)}`,
      xLabel: "normalized gradient magnitude",
      yLabel: k === 0 ? "count (log scale)" : undefined,
      yLog: true,
      yMin: 0.8,
      bars,
    });
  });
  return svgDocument(W, panelH + 30, "Gradient density along the closed loop", body);
}

// ---------------------------------------------------------------------------
// learning-curves: theta, tau, and J against the step index for one run.

function learningCurves(tables: Table[]): string {
  const t = tables[0]!;
  requireColumns(t, TRACE_COLUMNS);
  const step = col(t, "step");
  const J = col(t, "J");
  const se = col(t, "J_se");
  const panelH = 190;
  const panels: PanelOpts[] = [
    {
      title: `Parameters (${tableLabel(t)})`,
      yLabel: "theta",
      series: [
        { x: step, y: col(t, "theta1"), color: PALETTE[0]!, label: "theta1" },
        { x: step, y: col(t, "theta2"), color: PALETTE[2]!, label: "theta2" },
      ],
    },
    {
      title: "Relaxation schedule",
      yLabel: "tau",
      yLog: true,
      series: [{ x: step, y: col(t, "tau"), color: PALETTE[3]!, label: "tau" }],
    },
    {
      title: "Policy performance",
      xLabel: "step",
      yLabel: "J",
      series: [
        {
          x: step,
          y: J,
          color: PALETTE[1]!,
          label: "J (discounted cost)",
          band: {
            lo: Float64Array.from(J, (v, i) => v - se[i]!),
            hi: Float64Array.from(J, (v, i) => v + se[i]!),
          },
        },
      ],
    },
  ];
  let body = "";
  panels.forEach((p, k) => {
    body += renderPanel(0, 20 + k * panelH, W, panelH, p);
  });
  return svgDocument(W, 20 + panels.length * panelH + 10, "Learning curves", body);
}

// ---------------------------------------------------------------------------
// comparison: two runs overlaid (annealed vs fixed schedule), parameters
// and performance, labeled by file name.

function comparison(tables: Table[]): string {
  const [a, b] = [tables[0]!, tables[1]!];
  requireColumns(a, TRACE_COLUMNS);
  requireColumns(b, TRACE_COLUMNS);
  const la = tableLabel(a);
  const lb = tableLabel(b);
  const colors: [string, string] = [PALETTE[0]!, PALETTE[1]!];
  const panelH = 210;
  const thetaSeries: Series[] = [];
  [a, b].forEach((t, k) => {
    const dash = k === 1 ? "5,3" : undefined;
    thetaSeries.push(
      {
        x: col(t, "step"),
        y: col(t, "theta1"),
        color: colors[k]!,
        label: `theta1 (${k === 0 ? la : lb})`,
        dash,
      },
      {
        x: col(t, "step"),
        y: col(t, "theta2"),
        color: colors[k]!,
        label: `theta2 (${k === 0 ? la : lb})`,
        dash,
        opacity: 0.55,
      }
    );
  });
  const jSeries: Series[] = [a, b].map((t, k) => ({
    x: col(t, "step"),
    y: col(t, "J"),
    color: colors[k]!,
    label: k === 0 ? la : lb,
    dash: k === 1 ? "5,3" : undefined,
  }));
  let body = renderPanel(0, 20, W, panelH, {
    title: "Parameter evolution",
    yLabel: "theta",
    series: thetaSeries,
  });
  body += renderPanel(0, 20 + panelH, W, panelH, {
    title: "Policy performance",
    xLabel: "step",
    yLabel: "J",
    series: jSeries,
  });
  return svgDocument(W, 20 + 2 * panelH + 10, "Schedule comparison", body);
}

// ---------------------------------------------------------------------------
// improvement: the policy sweep u0(s) at each snapshot step, shaded from
// early (light) to late (dark).

function improvement(tables: Table[]): string {
  const t = tables[0]!;
  requireColumns(t, SNAPSHOT_COLUMNS);
  const step = col(t, "step");
  const s = col(t, "s");
  const u0 = col(t, "u0");
  const steps = groupKeys(step);
  const series: Series[] = steps.map((sv, k) => {
    const tt = steps.length > 1 ? k / (steps.length - 1) : 1;
    const labelled = steps.length <= 6 || k === 0 || k === steps.length - 1;
    return {
      x: pick(s, (i) => step[i] === sv),
      y: pick(u0, (i) => step[i] === sv),
      color: ramp(tt),
      label: labelled ? `step ${fmt(sv)}` : undefined,
      width: 1.2,
    };
  });
  const body = renderPanel(0, 20, W, 320, {
    xLabel: "state s",
    yLabel: "action u0",
    yMin: -1.08,
    yMax: 1.08,
    series,
  });
  return svgDocument(W, 350, "Policy improvement across snapshots", body);
}

export function render(kind: Kind, tables: Table[]): string {
  switch (kind) {
    case "policy-overlay":
      return policyOverlay(tables);
    case "density":
      return density(tables);
    case "learning-curves":
      return learningCurves(tables);
    case "comparison":
      return comparison(tables);
    case "improvement":
      return improvement(tables);
  }
}
