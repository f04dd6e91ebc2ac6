import * as fs from 'fs';

/** Minimal .npy v1.0 writer for test fixtures (C-order little-endian). */
export function writeNpy(
  path: string,
  shape: number[],
  values: number[],
  descr: '<f8' | '<f4' | '<i4' = '<f8',
): void {
  const shapeText =
    shape.length === 1 ? `(${shape[0]},)` : `(${shape.join(', ')})`;
  let header = `{'descr': '${descr}', 'fortran_order': False, 'shape': ${shapeText}, }`;
  const unpadded = 10 + header.length + 1;
  const padding = (64 - (unpadded % 64)) % 64;
  header = header + ' '.repeat(padding) + '\n';

  const itemSize = descr === '<f8' ? 8 : 4;
  const buf = Buffer.alloc(10 + header.length + values.length * itemSize);
  buf.write('\x93NUMPY', 0, 'latin1');
  buf.writeUInt8(1, 6);
  buf.writeUInt8(0, 7);
  buf.writeUInt16LE(header.length, 8);
  buf.write(header, 10, 'latin1');
  let offset = 10 + header.length;
  for (const v of values) {
    if (descr === '<f8') {
      buf.writeDoubleLE(v, offset);
    } else if (descr === '<f4') {
      buf.writeFloatLE(v, offset);
    } else {
      buf.writeInt32LE(v, offset);
    }
    offset += itemSize;
  }
  fs.writeFileSync(path, buf);
}

export function mkTmpDir(prefix: string): string {
  return fs.mkdtempSync(`/tmp/${prefix}-`);
}

/** Sine channel rows with an optional binary command column. */
export function sineRows(
  n: number,
  period = 40,
  noise = 0.01,
  withCommand = false,
  seed = 1,
): number[][] {
  let state = seed >>> 0;
  const rand = () => {
    // xorshift32: deterministic noise without a dependency
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    return state / 0xffffffff - 0.5;
  };
  const rows: number[][] = [];
  for (let t = 0; t < n; t++) {
    const value = Math.sin((2 * Math.PI * t) / period) + noise * rand();
    rows.push(withCommand ? [value, t % 17 === 0 ? 1 : 0] : [value]);
  }
  return rows;
}
