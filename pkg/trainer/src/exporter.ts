/**
 * Prediction export in the engine's file format.
 *
 * A Predictor maps a channel's rows to one (index, y_hat) pair per step
 * from sequenceLength onward; the LSTM path wraps a trained artifact, and
 * trivial predictors exist for cross-checks against the engine baselines.
 */

import * as tf from '@tensorflow/tfjs';

import { ChannelData, readChannelCsv, writePredictionsCsv } from './csv';
import { Scaler, loadArtifact, predictChannel } from './lstm';

export interface PredictionExport {
  indices: number[];
  yHat: number[];
}

export type Predictor = (data: ChannelData) => Promise<PredictionExport>;

export function lstmPredictor(
  model: tf.LayersModel,
  scaler: Scaler,
  seqLen: number,
): Predictor {
  return async (data) => {
    const { indices, yHat } = await predictChannel(model, scaler, data.values, seqLen);
    // predictChannel yields row positions; map them to step indices.
    return { indices: indices.map((i) => data.indices[i]), yHat };
  };
}

/** Predicts each value as the previous one; used to cross-check alignment. */
export function persistencePredictor(startAt = 1): Predictor {
  return async (data) => {
    const indices: number[] = [];
    const yHat: number[] = [];
    for (let t = startAt; t < data.values.length; t++) {
      indices.push(data.indices[t]);
      yHat.push(data.values[t - 1][0]);
    }
    return { indices, yHat };
  };
}

export async function exportPredictions(
  channelCsv: string,
  outCsv: string,
  predictor: Predictor,
): Promise<number> {
  const data = readChannelCsv(channelCsv);
  const { indices, yHat } = await predictor(data);
  if (indices.some((idx, i) => i > 0 && idx <= indices[i - 1])) {
    throw new Error('prediction indices must be strictly increasing');
  }
  writePredictionsCsv(outCsv, indices, yHat);
  return indices.length;
}

export async function exportFromArtifact(
  modelDir: string,
  channelCsv: string,
  outCsv: string,
): Promise<number> {
  const { model, meta } = await loadArtifact(modelDir);
  const data = readChannelCsv(channelCsv);
  const dims = data.values[0]?.length ?? 0;
  if (dims !== meta.inputDims) {
    throw new Error(
      `channel has ${dims} dims but the model expects ${meta.inputDims}`,
    );
  }
  const predictor = lstmPredictor(model, meta.scaler, meta.spec.sequenceLength);
  const { indices, yHat } = await predictor(data);
  writePredictionsCsv(outCsv, indices, yHat);
  return indices.length;
}
