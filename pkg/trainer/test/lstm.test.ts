import { describe, expect, it } from 'vitest';

import {
  DEFAULT_SPEC,
  TrainSpec,
  buildModel,
  fitScaler,
  predictChannel,
  trainChannel,
} from '../src/lstm';
import { sineRows } from './helpers';

/** Desk-scale spec: the paper-sized network is far too slow for a test run. */
const TINY: TrainSpec = {
  ...DEFAULT_SPEC,
  unitsPerLayer: 8,
  sequenceLength: 12,
  maxIterations: 8,
  dropout: 0.0,
  batchSize: 32,
  patience: 5,
  learningRate: 0.01,
  seed: 7,
};

function normalizedError(rows: number[][], seqLen: number, yHat: number[]): number {
  let sum = 0;
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of rows) {
    lo = Math.min(lo, row[0]);
    hi = Math.max(hi, row[0]);
  }
  for (let i = 0; i < yHat.length; i++) {
    sum += Math.abs(rows[i + seqLen][0] - yHat[i]);
  }
  return sum / yHat.length / (hi - lo);
}

describe('buildModel', () => {
  it('takes the channel input width', () => {
    const model = buildModel(25, { ...TINY, sequenceLength: 30 });
    expect(model.inputs[0].shape).toEqual([null, 30, 25]);
    expect(model.outputs[0].shape).toEqual([null, 1]);
  });

  it('stacks the configured number of recurrent layers', () => {
    const model = buildModel(1, TINY);
    const lstmLayers = model.layers.filter((l) => l.getClassName() === 'LSTM');
    expect(lstmLayers).toHaveLength(2);
  });
});

describe('scaling', () => {
  it('constant channels predict exactly without training', async () => {
    const rows = Array.from({ length: 80 }, () => [3.0]);
    const scaler = fitScaler(rows);
    const model = buildModel(1, TINY);
    const { yHat } = await predictChannel(model, scaler, rows, TINY.sequenceLength);
    expect(yHat.every((v) => v === 3.0)).toBe(true);
  });
});

describe('trainChannel', () => {
  it('rejects channels shorter than the window', async () => {
    await expect(trainChannel(sineRows(10), TINY)).rejects.toThrow(/too short/);
  });

  it(
    'drives validation error down and predicts a sine within 15% range error',
    { timeout: 180_000 },
    async () => {
      const rows = sineRows(700, 40, 0.01);
      const result = await trainChannel(rows, { ...TINY, maxIterations: 10 });
      const val = result.history.val_loss;
      expect(val.length).toBeGreaterThan(1);
      expect(Math.min(...val)).toBeLessThan(val[0]);
      const { yHat } = await predictChannel(
        result.model, result.scaler, rows, TINY.sequenceLength);
      expect(normalizedError(rows, TINY.sequenceLength, yHat)).toBeLessThanOrEqual(0.15);
    },
  );

  it(
    'keeps mean normalized error under 0.15 across synthetic channels',
    { timeout: 300_000 },
    async () => {
      const errors: number[] = [];
      for (const [period, seed] of [[30, 11], [55, 12], [80, 13]] as const) {
        const rows = sineRows(600, period, 0.01, false, seed);
        const result = await trainChannel(rows, { ...TINY, maxIterations: 10 });
        const { yHat } = await predictChannel(
          result.model, result.scaler, rows, TINY.sequenceLength);
        errors.push(normalizedError(rows, TINY.sequenceLength, yHat));
      }
      const mean = errors.reduce((a, b) => a + b, 0) / errors.length;
      expect(mean).toBeLessThanOrEqual(0.15);
    },
  );

  it(
    'is seed-reproducible within 1e-5 mean abs difference',
    { timeout: 180_000 },
    async () => {
      const rows = sineRows(400, 35, 0.02, true, 5);
      const spec = { ...TINY, maxIterations: 4, dropout: 0.3, seed: 99 };
      const first = await trainChannel(rows, spec);
      const second = await trainChannel(rows, spec);
      const a = await predictChannel(first.model, first.scaler, rows, spec.sequenceLength);
      const b = await predictChannel(second.model, second.scaler, rows, spec.sequenceLength);
      let diff = 0;
      for (let i = 0; i < a.yHat.length; i++) {
        diff += Math.abs(a.yHat[i] - b.yHat[i]);
      }
      expect(diff / a.yHat.length).toBeLessThanOrEqual(1e-5);
    },
  );
});
