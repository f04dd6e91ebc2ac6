/**
 * Engine CSV formats.
 *
 * channel:     header `index,value,cmd_0,...,cmd_{k-1}`, one row per step
 * predictions: header `index,y_hat`, prediction at index t targets the
 *              actual value at step t
 * labels:      header `channel_id,start,end,class,t_a,tag`
 *
 * All indices are 0-based integers; floats carry 12 significant digits so
 * finite decimals survive round-trips through the engine.
 */

import * as fs from 'fs';

export const FLOAT_DIGITS = 12;

export interface ChannelData {
  channelId: string;
  indices: number[];
  /** rows x dims; column 0 is the telemetry value, the rest command flags */
  values: number[][];
}

export interface LabelRow {
  channelId: string;
  start: number;
  end: number;
  cls: 'point' | 'contextual';
  tA: number;
  tag: string;
}

export function formatFloat(v: number): string {
  return Number(v.toPrecision(FLOAT_DIGITS)).toString();
}

export function writeChannelCsv(path: string, data: ChannelData): void {
  const dims = data.values[0]?.length ?? 1;
  const header = ['index', 'value'];
  for (let k = 0; k < dims - 1; k++) {
    header.push(`cmd_${k}`);
  }
  const lines = [header.join(',')];
  for (let i = 0; i < data.indices.length; i++) {
    const row = data.values[i];
    const cells = [String(data.indices[i]), formatFloat(row[0])];
    for (let k = 1; k < dims; k++) {
      // Command flags are written as bare 0/1; the engine rejects anything else.
      cells.push(String(row[k]));
    }
    lines.push(cells.join(','));
  }
  fs.writeFileSync(path, lines.join('\n') + '\n', 'utf-8');
}

export function readChannelCsv(path: string, channelId?: string): ChannelData {
  const content = fs.readFileSync(path, 'utf-8');
  const lines = content.trim().split('\n');
  if (lines.length === 0) {
    throw new Error(`${path}: empty channel file`);
  }
  const header = lines[0].split(',');
  if (header[0] !== 'index' || header[1] !== 'value') {
    throw new Error(`${path}: header must start with 'index,value'`);
  }
  const dims = header.length - 1;
  const indices: number[] = [];
  const values: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(',');
    if (cells.length !== dims + 1) {
      throw new Error(`${path}:${i + 1}: expected ${dims + 1} columns`);
    }
    const idx = Number(cells[0]);
    const row = cells.slice(1).map(Number);
    if (!Number.isInteger(idx) || row.some((v) => !Number.isFinite(v))) {
      throw new Error(`${path}:${i + 1}: unparseable row`);
    }
    indices.push(idx);
    values.push(row);
  }
  const id = channelId ?? path.replace(/^.*\//, '').replace(/\.csv$/, '');
  return { channelId: id, indices, values };
}

export function writePredictionsCsv(
  path: string,
  indices: number[],
  yHat: number[],
): void {
  if (indices.length !== yHat.length) {
    throw new Error('indices and predictions length mismatch');
  }
  const lines = ['index,y_hat'];
  for (let i = 0; i < indices.length; i++) {
    if (!Number.isFinite(yHat[i])) {
      throw new Error(`non-finite prediction at index ${indices[i]}`);
    }
    lines.push(`${indices[i]},${formatFloat(yHat[i])}`);
  }
  fs.writeFileSync(path, lines.join('\n') + '\n', 'utf-8');
}

export function writeLabelsCsv(path: string, rows: LabelRow[]): void {
  const lines = ['channel_id,start,end,class,t_a,tag'];
  for (const row of rows) {
    lines.push(
      `${row.channelId},${row.start},${row.end},${row.cls},${row.tA},${row.tag}`,
    );
  }
  fs.writeFileSync(path, lines.join('\n') + '\n', 'utf-8');
}
