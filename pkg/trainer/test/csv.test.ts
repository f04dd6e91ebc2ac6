import * as fs from 'fs';
import * as path from 'path';
import { describe, expect, it } from 'vitest';

import {
  formatFloat,
  readChannelCsv,
  writeChannelCsv,
  writeLabelsCsv,
  writePredictionsCsv,
} from '../src/csv';
import { mkTmpDir } from './helpers';

describe('channel csv', () => {
  it('round-trips indices and values', () => {
    const dir = mkTmpDir('csv');
    const file = path.join(dir, 'chan.csv');
    const data = {
      channelId: 'chan',
      indices: [0, 1, 2],
      values: [
        [1.25, 0],
        [-3.75e-5, 1],
        [123456.789012, 0],
      ],
    };
    writeChannelCsv(file, data);
    const back = readChannelCsv(file);
    expect(back.indices).toEqual(data.indices);
    expect(back.values).toEqual(data.values);
  });

  it('writes the engine header shape', () => {
    const dir = mkTmpDir('csv');
    const file = path.join(dir, 'chan.csv');
    writeChannelCsv(file, {
      channelId: 'chan',
      indices: [0],
      values: [[0.5, 1, 0]],
    });
    const lines = fs.readFileSync(file, 'utf-8').trim().split('\n');
    expect(lines[0]).toBe('index,value,cmd_0,cmd_1');
    expect(lines[1]).toBe('0,0.5,1,0');
  });

  it('rejects ragged rows on read', () => {
    const dir = mkTmpDir('csv');
    const file = path.join(dir, 'bad.csv');
    fs.writeFileSync(file, 'index,value,cmd_0\n0,1.0\n', 'utf-8');
    expect(() => readChannelCsv(file)).toThrow(/columns/);
  });
});

describe('prediction csv', () => {
  it('writes the engine prediction format', () => {
    const dir = mkTmpDir('csv');
    const file = path.join(dir, 'preds.csv');
    writePredictionsCsv(file, [250, 251], [0.5, 0.52]);
    expect(fs.readFileSync(file, 'utf-8')).toBe('index,y_hat\n250,0.5\n251,0.52\n');
  });

  it('rejects non-finite predictions', () => {
    const dir = mkTmpDir('csv');
    expect(() =>
      writePredictionsCsv(path.join(dir, 'p.csv'), [0], [Number.NaN]),
    ).toThrow(/non-finite/);
  });
});

describe('labels csv', () => {
  it('writes the engine label format with tags', () => {
    const dir = mkTmpDir('csv');
    const file = path.join(dir, 'labels.csv');
    writeLabelsCsv(file, [
      { channelId: 'A-1', start: 100, end: 150, cls: 'point', tA: 100, tag: 'SMAP' },
    ]);
    expect(fs.readFileSync(file, 'utf-8')).toBe(
      'channel_id,start,end,class,t_a,tag\nA-1,100,150,point,100,SMAP\n',
    );
  });
});

describe('formatFloat', () => {
  it('keeps 12 significant digits', () => {
    expect(formatFloat(123456.789012)).toBe('123456.789012');
    expect(Number(formatFloat(1 / 3))).toBeCloseTo(1 / 3, 11);
  });
});
