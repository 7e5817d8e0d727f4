/**
 * Parser for gfmsim run logs.
 *
 * The CSV contract: '#'-prefixed comment lines carry the scenario echo
 * (one of them is `# config: <json>`), then a header row naming every
 * column, then one data row per (tick, inverter).
 */

import { readFileSync } from "node:fs";

export const EXPECTED_COLUMNS = [
  "t",
  "ibr_id",
  "P_w",
  "Q_var",
  "V_volt",
  "omega_rad_s",
  "v_adj_volt",
  "x_est_volt",
  "pcc_v_volt",
  "load_p_w",
  "load_q_var",
  "consensus_rounds",
  "mode",
] as const;

export interface LoadEvent {
  time_s: number;
  active_kw: number;
  reactive_kvar: number;
}

export interface ScenarioEcho {
  name: string;
  nominalVoltage: number;
  nominalFrequencyHz: number;
  enableTime: number | null;
  loadEvents: LoadEvent[];
}

export interface IbrSeries {
  id: number;
  mode: string;
  activeW: number[];
  reactiveVar: number[];
  voltageV: number[];
  omegaRadS: number[];
}

export interface RunLog {
  scenario: ScenarioEcho;
  times: number[];
  ibrs: IbrSeries[];
}

export class CsvFormatError extends Error {}

function parseConfigEcho(comments: string[]): ScenarioEcho {
  const configLine = comments.find((line) => line.startsWith("# config:"));
  if (!configLine) {
    throw new CsvFormatError("missing '# config:' echo line");
  }
  let config: any;
  try {
    config = JSON.parse(configLine.slice("# config:".length).trim());
  } catch (err) {
    throw new CsvFormatError(`config echo is not valid JSON: ${err}`);
  }
  const nominal = config.nominal ?? {};
  const secondary = config.secondary ?? null;
  return {
    name: String(config.name ?? "scenario"),
    nominalVoltage: Number(nominal.voltage_v ?? NaN),
    nominalFrequencyHz: Number(nominal.frequency_hz ?? NaN),
    enableTime:
      secondary && secondary.enable_time_s !== null && secondary.enable_time_s !== undefined
        ? Number(secondary.enable_time_s)
        : null,
    loadEvents: Array.isArray(config.load_events)
      ? config.load_events.map((ev: any) => ({
          time_s: Number(ev.time_s),
          active_kw: Number(ev.active_kw),
          reactive_kvar: Number(ev.reactive_kvar),
        }))
      : [],
  };
}

/** Parse one run log; rejects anything that does not match the schema. */
export function parseRunLog(text: string): RunLog {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  const comments: string[] = [];
  let cursor = 0;
  while (cursor < lines.length && lines[cursor].startsWith("#")) {
    comments.push(lines[cursor]);
    cursor += 1;
  }
  if (cursor >= lines.length) {
    throw new CsvFormatError("no header row found");
  }
  const header = lines[cursor].split(",");
  if (header.length !== EXPECTED_COLUMNS.length || header.some((h, i) => h !== EXPECTED_COLUMNS[i])) {
    throw new CsvFormatError(
      `header mismatch: expected '${EXPECTED_COLUMNS.join(",")}', got '${lines[cursor]}'`,
    );
  }
  const dataLines = lines.slice(cursor + 1);
  if (dataLines.length === 0) {
    throw new CsvFormatError("log contains no data rows");
  }

  const scenario = parseConfigEcho(comments);
  const times: number[] = [];
  const byId = new Map<number, IbrSeries>();
  let lastTime = Number.NEGATIVE_INFINITY;
  for (const line of dataLines) {
    const cells = line.split(",");
    if (cells.length !== EXPECTED_COLUMNS.length) {
      throw new CsvFormatError(`row has ${cells.length} cells, expected ${EXPECTED_COLUMNS.length}`);
    }
    const t = Number(cells[0]);
    const id = Number(cells[1]);
    if (!Number.isFinite(t) || !Number.isFinite(id)) {
      throw new CsvFormatError(`unparseable time or inverter id in row '${line}'`);
    }
    if (t > lastTime) {
      times.push(t);
      lastTime = t;
    } else if (t < lastTime) {
      throw new CsvFormatError("time column must be non-decreasing");
    }
    let series = byId.get(id);
    if (!series) {
      series = { id, mode: cells[12], activeW: [], reactiveVar: [], voltageV: [], omegaRadS: [] };
      byId.set(id, series);
    }
    series.activeW.push(Number(cells[2]));
    series.reactiveVar.push(Number(cells[3]));
    series.voltageV.push(Number(cells[4]));
    series.omegaRadS.push(Number(cells[5]));
  }

  const ibrs = [...byId.values()].sort((a, b) => a.id - b.id);
  for (const series of ibrs) {
    if (series.activeW.length !== times.length) {
      throw new CsvFormatError(
        `inverter ${series.id} has ${series.activeW.length} samples for ${times.length} ticks`,
      );
    }
  }
  return { scenario, times, ibrs };
}

export function readRunLog(path: string): RunLog {
  return parseRunLog(readFileSync(path, "utf-8"));
}

/** Concatenate logs of the same schema into one time-sorted log. */
export function mergeRunLogs(logs: RunLog[]): RunLog {
  if (logs.length === 0) {
    throw new CsvFormatError("at least one input log is required");
  }
  if (logs.length === 1) {
    return logs[0];
  }
  const ids = logs[0].ibrs.map((s) => s.id).join(",");
  for (const log of logs.slice(1)) {
    if (log.ibrs.map((s) => s.id).join(",") !== ids) {
      throw new CsvFormatError("cannot merge logs with different inverter sets");
    }
  }
  const order = logs
    .map((log, index) => ({ index, start: log.times[0] }))
    .sort((a, b) => a.start - b.start)
    .map((entry) => entry.index);
  const merged: RunLog = {
    scenario: logs[order[0]].scenario,
    times: [],
    ibrs: logs[order[0]].ibrs.map((s) => ({ ...s, activeW: [], reactiveVar: [], voltageV: [], omegaRadS: [] })),
  };
  for (const index of order) {
    const log = logs[index];
    merged.times.push(...log.times);
    log.ibrs.forEach((series, k) => {
      merged.ibrs[k].activeW.push(...series.activeW);
      merged.ibrs[k].reactiveVar.push(...series.reactiveVar);
      merged.ibrs[k].voltageV.push(...series.voltageV);
      merged.ibrs[k].omegaRadS.push(...series.omegaRadS);
    });
  }
  return merged;
}
