/**
 * Minimal reader for NumPy .npy files (versions 1.x/2.x, C-order arrays).
 * Covers the dtypes the public telemetry dataset uses; everything is
 * widened to float64 on read.
 */

import * as fs from 'fs';

export interface NpyArray {
  shape: number[];
  /** flattened C-order values */
  data: Float64Array;
}

const MAGIC = Buffer.from('\x93NUMPY', 'latin1');

type Reader = (buf: Buffer, offset: number) => number;

const READERS: Record<string, { size: number; read: Reader }> = {
  '<f8': { size: 8, read: (b, o) => b.readDoubleLE(o) },
  '<f4': { size: 4, read: (b, o) => b.readFloatLE(o) },
  '<i8': { size: 8, read: (b, o) => Number(b.readBigInt64LE(o)) },
  '<i4': { size: 4, read: (b, o) => b.readInt32LE(o) },
  '<i2': { size: 2, read: (b, o) => b.readInt16LE(o) },
  '|i1': { size: 1, read: (b, o) => b.readInt8(o) },
  '|u1': { size: 1, read: (b, o) => b.readUInt8(o) },
  '|b1': { size: 1, read: (b, o) => b.readUInt8(o) },
};

export function parseNpy(buf: Buffer): NpyArray {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(MAGIC)) {
    throw new Error('not an .npy file (bad magic)');
  }
  const major = buf.readUInt8(6);
  let headerLen: number;
  let headerStart: number;
  if (major === 1) {
    headerLen = buf.readUInt16LE(8);
    headerStart = 10;
  } else if (major === 2 || major === 3) {
    headerLen = buf.readUInt32LE(8);
    headerStart = 12;
  } else {
    throw new Error(`unsupported .npy version ${major}`);
  }
  const header = buf.subarray(headerStart, headerStart + headerLen).toString('latin1');
  const descr = /'descr'\s*:\s*'([^']+)'/.exec(header)?.[1];
  const fortran = /'fortran_order'\s*:\s*(True|False)/.exec(header)?.[1];
  const shapeText = /'shape'\s*:\s*\(([^)]*)\)/.exec(header)?.[1];
  if (!descr || !fortran || shapeText === undefined) {
    throw new Error(`unparseable .npy header: ${header.trim()}`);
  }
  if (fortran === 'True') {
    throw new Error('fortran-order arrays are not supported');
  }
  const shape = shapeText
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map(Number);
  const reader = READERS[descr];
  if (!reader) {
    throw new Error(`unsupported dtype ${descr}`);
  }
  const count = shape.reduce((a, b) => a * b, 1);
  const dataStart = headerStart + headerLen;
  if (buf.length < dataStart + count * reader.size) {
    throw new Error('.npy payload truncated');
  }
  const data = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = reader.read(buf, dataStart + i * reader.size);
  }
  return { shape, data };
}

export function readNpy(path: string): NpyArray {
  return parseNpy(fs.readFileSync(path));
}

/** Rows of a 1-D or 2-D array; 1-D arrays become single-column rows. */
export function npyRows(array: NpyArray): number[][] {
  if (array.shape.length === 1) {
    return Array.from(array.data, (v) => [v]);
  }
  if (array.shape.length !== 2) {
    throw new Error(`expected 1-D or 2-D array, got shape ${array.shape}`);
  }
  const [rows, cols] = array.shape;
  const out: number[][] = new Array(rows);
  for (let r = 0; r < rows; r++) {
    const row = new Array<number>(cols);
    for (let c = 0; c < cols; c++) {
      row[c] = array.data[r * cols + c];
    }
    out[r] = row;
  }
  return out;
}
