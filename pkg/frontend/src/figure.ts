/**
 * Four-panel run figure rendered as standalone SVG: per-inverter active
 * power, reactive power, voltage (with the nominal reference), and system
 * frequency against time, with the scenario's event times marked.
 */

import type { RunLog } from "./csv.js";

export type PanelId = "p" | "q" | "v" | "f";

export interface FigureOptions {
  label?: string;
  panels?: PanelId[];
  width?: number;
  panelHeight?: number;
}

const PANEL_TITLES: Record<PanelId, string> = {
  p: "Active power [kW]",
  q: "Reactive power [kVAr]",
  v: "Voltage [V]",
  f: "Frequency [Hz]",
};

const COLORS = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
  "#bcbd22",
  "#17becf",
];

const MARGIN = { left: 64, right: 132, top: 34, bottom: 34 };

function fmt(x: number): string {
  if (!Number.isFinite(x)) {
    return "0";
  }
  const rounded = Math.round(x * 100) / 100;
  return Object.is(rounded, -0) ? "0" : String(rounded);
}

/** Round-number ticks covering [lo, hi] (1/2/5 ladder). */
export function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) {
    const pad = Math.max(Math.abs(lo) * 0.05, 0.5);
    return niceTicks(lo - pad, hi + pad, count);
  }
  const rawStep = (hi - lo) / Math.max(count - 1, 1);
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = power;
  for (const mult of [1, 2, 5, 10]) {
    if (power * mult >= rawStep) {
      step = power * mult;
      break;
    }
  }
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

interface Scale {
  (x: number): number;
}

function linear(d0: number, d1: number, r0: number, r1: number): Scale {
  const span = d1 - d0 || 1;
  return (x: number) => r0 + ((x - d0) / span) * (r1 - r0);
}

function panelSeries(log: RunLog, panel: PanelId): number[][] {
  switch (panel) {
    case "p":
      return log.ibrs.map((s) => s.activeW.map((w) => w / 1e3));
    case "q":
      return log.ibrs.map((s) => s.reactiveVar.map((q) => q / 1e3));
    case "v":
      return log.ibrs.map((s) => s.voltageV);
    case "f":
      return log.ibrs.map((s) => s.omegaRadS.map((w) => w / (2 * Math.PI)));
  }
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Render the figure; the output is a complete, deterministic SVG document. */
export function renderFigure(log: RunLog, options: FigureOptions = {}): string {
  const panels = options.panels ?? (["p", "q", "v", "f"] as PanelId[]);
  if (panels.length === 0) {
    throw new Error("at least one panel must be selected");
  }
  const width = options.width ?? 960;
  const panelHeight = options.panelHeight ?? 200;
  const innerWidth = width - MARGIN.left - MARGIN.right;
  const height = MARGIN.top + panels.length * (panelHeight + MARGIN.bottom);

  const t0 = log.times[0];
  const t1 = log.times[log.times.length - 1];
  const xScale = linear(t0, t1, MARGIN.left, MARGIN.left + innerWidth);
  const xTicks = niceTicks(t0, t1, 8);

  const markerTimes: { t: number; kind: string }[] = [];
  for (const ev of log.scenario.loadEvents) {
    if (ev.time_s > t0 && ev.time_s <= t1) {
      markerTimes.push({ t: ev.time_s, kind: "load-event" });
    }
  }
  if (
    log.scenario.enableTime !== null &&
    log.scenario.enableTime > t0 &&
    log.scenario.enableTime <= t1
  ) {
    markerTimes.push({ t: log.scenario.enableTime, kind: "secondary-enable" });
  }

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  const title = options.label ? `${options.label} (${log.scenario.name})` : log.scenario.name;
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="15" font-weight="bold">` +
      `${escapeXml(title)}</text>`,
  );

  panels.forEach((panel, row) => {
    const top = MARGIN.top + row * (panelHeight + MARGIN.bottom);
    const bottom = top + panelHeight;
    const series = panelSeries(log, panel);
    let lo = Infinity;
    let hi = -Infinity;
    for (const values of series) {
      for (const v of values) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
    if (panel === "v" && Number.isFinite(log.scenario.nominalVoltage)) {
      lo = Math.min(lo, log.scenario.nominalVoltage);
      hi = Math.max(hi, log.scenario.nominalVoltage);
    }
    const pad = (hi - lo) * 0.08 || Math.max(Math.abs(hi) * 0.02, 0.5);
    const yScale = linear(lo - pad, hi + pad, bottom, top);
    const yTicks = niceTicks(lo - pad, hi + pad, 5);

    parts.push(`<g class="panel panel-${panel}">`);
    parts.push(
      `<rect x="${MARGIN.left}" y="${top}" width="${innerWidth}" height="${panelHeight}" ` +
        `fill="none" stroke="#444" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left}" y="${top - 7}" font-size="12" font-weight="bold">` +
        `${PANEL_TITLES[panel]}</text>`,
    );
    for (const tick of yTicks) {
      const y = yScale(tick);
      if (y < top - 0.5 || y > bottom + 0.5) continue;
      parts.push(
        `<line x1="${MARGIN.left}" y1="${fmt(y)}" x2="${MARGIN.left + innerWidth}" y2="${fmt(y)}" ` +
          `stroke="#ddd" stroke-width="0.5"/>`,
      );
      parts.push(
        `<text x="${MARGIN.left - 6}" y="${fmt(y + 3.5)}" text-anchor="end" font-size="10">` +
          `${fmt(tick)}</text>`,
      );
    }
    for (const tick of xTicks) {
      const x = xScale(tick);
      parts.push(
        `<line x1="${fmt(x)}" y1="${bottom}" x2="${fmt(x)}" y2="${bottom + 4}" stroke="#444"/>`,
      );
      parts.push(
        `<text x="${fmt(x)}" y="${bottom + 16}" text-anchor="middle" font-size="10">${fmt(tick)}</text>`,
      );
    }
    if (row === panels.length - 1) {
      parts.push(
        `<text x="${MARGIN.left + innerWidth / 2}" y="${bottom + 30}" text-anchor="middle" ` +
          `font-size="11">Time [s]</text>`,
      );
    }

    if (panel === "v" && Number.isFinite(log.scenario.nominalVoltage)) {
      const y = yScale(log.scenario.nominalVoltage);
      parts.push(
        `<line class="reference" x1="${MARGIN.left}" y1="${fmt(y)}" ` +
          `x2="${MARGIN.left + innerWidth}" y2="${fmt(y)}" stroke="#000" stroke-width="1" ` +
          `stroke-dasharray="6,3"/>`,
      );
    }

    series.forEach((values, k) => {
      const points = values
        .map((v, i) => `${fmt(xScale(log.times[i]))},${fmt(yScale(v))}`)
        .join(" ");
      parts.push(
        `<polyline fill="none" stroke="${COLORS[k % COLORS.length]}" stroke-width="1.2" ` +
          `points="${points}"/>`,
      );
    });

    for (const marker of markerTimes) {
      const x = xScale(marker.t);
      parts.push(
        `<line class="marker ${marker.kind}" data-t="${marker.t}" x1="${fmt(x)}" y1="${top}" ` +
          `x2="${fmt(x)}" y2="${bottom}" stroke="#888" stroke-width="1" stroke-dasharray="3,3"/>`,
      );
    }
    parts.push("</g>");
  });

  const legendX = MARGIN.left + innerWidth + 12;
  parts.push(`<g class="legend" font-size="10">`);
  log.ibrs.forEach((series, k) => {
    const y = MARGIN.top + 14 + k * 14;
    parts.push(
      `<line x1="${legendX}" y1="${y - 3}" x2="${legendX + 16}" y2="${y - 3}" ` +
        `stroke="${COLORS[k % COLORS.length]}" stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${legendX + 20}" y="${y}">unit ${series.id} (${escapeXml(series.mode)})</text>`,
    );
  });
  const markerLegendY = MARGIN.top + 14 + log.ibrs.length * 14 + 8;
  parts.push(
    `<line x1="${legendX}" y1="${markerLegendY - 3}" x2="${legendX + 16}" y2="${markerLegendY - 3}" ` +
      `stroke="#888" stroke-dasharray="3,3"/>`,
  );
  parts.push(`<text x="${legendX + 20}" y="${markerLegendY}">event</text>`);
  parts.push("</g>");
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
