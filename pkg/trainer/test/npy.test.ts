import * as path from 'path';
import { describe, expect, it } from 'vitest';

import { npyRows, readNpy } from '../src/npy';
import { mkTmpDir, writeNpy } from './helpers';

describe('npy reader', () => {
  it('reads 2-D float64 arrays', () => {
    const dir = mkTmpDir('npy');
    const file = path.join(dir, 'a.npy');
    const values = [1.5, -2.25, 0, 3.125, 1e-9, 42];
    writeNpy(file, [3, 2], values);
    const array = readNpy(file);
    expect(array.shape).toEqual([3, 2]);
    expect([...array.data]).toEqual(values);
    expect(npyRows(array)).toEqual([
      [1.5, -2.25],
      [0, 3.125],
      [1e-9, 42],
    ]);
  });

  it('reads 1-D arrays as single-column rows', () => {
    const dir = mkTmpDir('npy');
    const file = path.join(dir, 'b.npy');
    writeNpy(file, [4], [0, 1, 2, 3], '<i4');
    expect(npyRows(readNpy(file))).toEqual([[0], [1], [2], [3]]);
  });

  it('widens float32 within float32 precision', () => {
    const dir = mkTmpDir('npy');
    const file = path.join(dir, 'c.npy');
    writeNpy(file, [2], [0.1, -7.5], '<f4');
    const array = readNpy(file);
    expect(array.data[0]).toBeCloseTo(0.1, 6);
    expect(array.data[1]).toBe(-7.5);
  });

  it('rejects fortran order', () => {
    const dir = mkTmpDir('npy');
    const file = path.join(dir, 'd.npy');
    writeNpy(file, [2, 2], [1, 2, 3, 4]);
    const fs = require('fs');
    const buf = fs.readFileSync(file);
    const patched = Buffer.from(
      buf.toString('latin1').replace('False', 'True '), 'latin1');
    fs.writeFileSync(file, patched);
    expect(() => readNpy(file)).toThrow(/fortran/);
  });

  it('rejects wrong magic', () => {
    const dir = mkTmpDir('npy');
    const file = path.join(dir, 'e.npy');
    require('fs').writeFileSync(file, Buffer.from('not numpy at all'));
    expect(() => readNpy(file)).toThrow(/magic/);
  });
});
