/**
 * Converter from the public telemetry dataset layout to the engine's CSVs.
 *
 * Expected source layout:
 *   source/train/<chan>.npy           training span, rows x dims
 *   source/test/<chan>.npy            evaluation span (label indices refer here)
 *   source/labeled_anomalies.csv      chan_id, spacecraft, anomaly_sequences,
 *                                     class, num_values
 *
 * Output: out/train/<chan>.csv, out/test/<chan>.csv, out/labels.csv and a
 * manifest recording channel/sequence counts and the aggregation choice.
 * Labels carry t_a = sequence start (the source has no primary time) and
 * tag = spacecraft.
 */

import * as fs from 'fs';
import * as path from 'path';

import { ChannelData, LabelRow, writeChannelCsv, writeLabelsCsv } from './csv';
import { npyRows, readNpy } from './npy';

export interface ConvertOptions {
  /** steps per aggregation window; 1 = no aggregation */
  aggregate: number;
}

export interface ConvertManifest {
  channels: number;
  labelSequences: number;
  skipped: { channelId: string; reason: string }[];
  aggregation: { window: number; values: 'mean'; commands: 'max' };
  perChannel: { channelId: string; spacecraft: string; trainRows: number; testRows: number }[];
}

interface LabeledRow {
  chanId: string;
  spacecraft: string;
  sequences: [number, number][];
  classes: string[];
}

/** Split one CSV line honoring double-quoted cells (the sequence column). */
export function splitCsvLine(line: string): string[] {
  const cells: string[] = [];
  let current = '';
  let quoted = false;
  for (const ch of line) {
    if (ch === '"') {
      quoted = !quoted;
    } else if (ch === ',' && !quoted) {
      cells.push(current);
      current = '';
    } else {
      current += ch;
    }
  }
  cells.push(current);
  return cells;
}

function parseRangeList(text: string): [number, number][] {
  const ranges: [number, number][] = [];
  for (const match of text.matchAll(/\[\s*(\d+)\s*,\s*(\d+)\s*\]/g)) {
    ranges.push([Number(match[1]), Number(match[2])]);
  }
  return ranges;
}

function parseClassList(text: string, count: number): string[] {
  const classes = [...text.matchAll(/'([a-z]+)'/g)].map((m) => m[1]);
  if (classes.length === 0) {
    return new Array(count).fill('point');
  }
  while (classes.length < count) {
    classes.push(classes[classes.length - 1]);
  }
  return classes;
}

export function readLabeledAnomalies(csvPath: string): LabeledRow[] {
  const lines = fs.readFileSync(csvPath, 'utf-8').trim().split('\n');
  const header = splitCsvLine(lines[0]).map((h) => h.trim());
  const col = (name: string) => header.indexOf(name);
  const chanCol = col('chan_id');
  const craftCol = col('spacecraft');
  const seqCol = col('anomaly_sequences');
  const classCol = col('class');
  if (chanCol < 0 || seqCol < 0) {
    throw new Error(`${csvPath}: need chan_id and anomaly_sequences columns`);
  }
  const rows: LabeledRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    if (!lines[i].trim()) continue;
    const cells = splitCsvLine(lines[i]);
    const sequences = parseRangeList(cells[seqCol]);
    rows.push({
      chanId: cells[chanCol].trim(),
      spacecraft: craftCol >= 0 ? cells[craftCol].trim() : '',
      sequences,
      classes: parseClassList(classCol >= 0 ? cells[classCol] : '', sequences.length),
    });
  }
  return rows;
}

/**
 * Aggregate rows into fixed windows: telemetry by mean, command flags by
 * max (a command anywhere in the window marks the window).
 */
export function aggregateRows(rows: number[][], window: number): number[][] {
  if (window <= 1) return rows;
  const out: number[][] = [];
  for (let start = 0; start + window <= rows.length; start += window) {
    const dims = rows[0].length;
    const agg = new Array(dims).fill(0);
    for (let c = 0; c < dims; c++) {
      if (c === 0) {
        let sum = 0;
        for (let r = start; r < start + window; r++) sum += rows[r][0];
        agg[0] = sum / window;
      } else {
        let flag = 0;
        for (let r = start; r < start + window; r++) {
          if (rows[r][c] !== 0) flag = 1;
        }
        agg[c] = flag;
      }
    }
    out.push(agg);
  }
  return out;
}

function sanitizeCommands(rows: number[][]): number[][] {
  return rows.map((row) =>
    row.map((v, c) => (c === 0 ? v : v !== 0 ? 1 : 0)),
  );
}

function toChannel(channelId: string, rows: number[][]): ChannelData {
  return {
    channelId,
    indices: rows.map((_, i) => i),
    values: rows,
  };
}

export function convertDataset(
  sourceDir: string,
  outDir: string,
  options: ConvertOptions = { aggregate: 1 },
): ConvertManifest {
  const labeledPath = path.join(sourceDir, 'labeled_anomalies.csv');
  if (!fs.existsSync(labeledPath)) {
    throw new Error(`no labeled_anomalies.csv under ${sourceDir}`);
  }
  const labeled = readLabeledAnomalies(labeledPath);
  fs.mkdirSync(path.join(outDir, 'train'), { recursive: true });
  fs.mkdirSync(path.join(outDir, 'test'), { recursive: true });

  const manifest: ConvertManifest = {
    channels: 0,
    labelSequences: 0,
    skipped: [],
    aggregation: { window: options.aggregate, values: 'mean', commands: 'max' },
    perChannel: [],
  };
  const labelRows: LabelRow[] = [];
  const seen = new Set<string>();

  for (const entry of labeled) {
    if (seen.has(entry.chanId)) {
      manifest.skipped.push({ channelId: entry.chanId, reason: 'duplicate label row' });
      continue;
    }
    seen.add(entry.chanId);
    const trainNpy = path.join(sourceDir, 'train', `${entry.chanId}.npy`);
    const testNpy = path.join(sourceDir, 'test', `${entry.chanId}.npy`);
    if (!fs.existsSync(trainNpy) || !fs.existsSync(testNpy)) {
      manifest.skipped.push({ channelId: entry.chanId, reason: 'missing npy file' });
      continue;
    }
    if (entry.sequences.length === 0) {
      manifest.skipped.push({ channelId: entry.chanId, reason: 'no labeled sequences' });
      continue;
    }
    const trainRows = aggregateRows(
      sanitizeCommands(npyRows(readNpy(trainNpy))), options.aggregate);
    const testRows = aggregateRows(
      sanitizeCommands(npyRows(readNpy(testNpy))), options.aggregate);
    writeChannelCsv(
      path.join(outDir, 'train', `${entry.chanId}.csv`),
      toChannel(entry.chanId, trainRows),
    );
    writeChannelCsv(
      path.join(outDir, 'test', `${entry.chanId}.csv`),
      toChannel(entry.chanId, testRows),
    );
    for (let k = 0; k < entry.sequences.length; k++) {
      const [rawStart, rawEnd] = entry.sequences[k];
      const start = Math.floor(rawStart / options.aggregate);
      const end = Math.floor(rawEnd / options.aggregate);
      const cls = entry.classes[k] === 'contextual' ? 'contextual' : 'point';
      labelRows.push({
        channelId: entry.chanId,
        start,
        end,
        cls,
        tA: start,
        tag: entry.spacecraft,
      });
      manifest.labelSequences += 1;
    }
    manifest.channels += 1;
    manifest.perChannel.push({
      channelId: entry.chanId,
      spacecraft: entry.spacecraft,
      trainRows: trainRows.length,
      testRows: testRows.length,
    });
  }

  writeLabelsCsv(path.join(outDir, 'labels.csv'), labelRows);
  fs.writeFileSync(
    path.join(outDir, 'manifest.json'),
    JSON.stringify(manifest, null, 2),
    'utf-8',
  );
  return manifest;
}
