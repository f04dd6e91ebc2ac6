/**
 * Per-channel LSTM models: two hidden LSTM layers predicting the next
 * telemetry value from a window of prior values and command flags.
 *
 * Inputs are min-max scaled to [-1, 1] per feature on the training rows
 * only; the scaler is stored with the model so exported predictions come
 * back in raw units. Training uses MSE with Adam, a tail validation split,
 * and early stopping on validation loss.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

export interface TrainSpec {
  hiddenLayers: number;
  unitsPerLayer: number;
  sequenceLength: number;
  maxIterations: number;
  dropout: number;
  batchSize: number;
  patience: number;
  validationSplit: number;
  learningRate: number;
  seed: number;
}

export const DEFAULT_SPEC: TrainSpec = {
  hiddenLayers: 2,
  unitsPerLayer: 80,
  sequenceLength: 250,
  maxIterations: 35,
  dropout: 0.3,
  batchSize: 64,
  patience: 5,
  validationSplit: 0.2,
  learningRate: 1e-3,
  seed: 42,
};

export interface Scaler {
  mins: number[];
  maxs: number[];
}

export interface TrainResult {
  model: tf.LayersModel;
  scaler: Scaler;
  /** per-epoch loss (and val_loss when a split is configured) */
  history: Record<string, number[]>;
  epochsRun: number;
}

export function fitScaler(rows: number[][]): Scaler {
  const dims = rows[0].length;
  const mins = new Array(dims).fill(Infinity);
  const maxs = new Array(dims).fill(-Infinity);
  for (const row of rows) {
    for (let c = 0; c < dims; c++) {
      if (row[c] < mins[c]) mins[c] = row[c];
      if (row[c] > maxs[c]) maxs[c] = row[c];
    }
  }
  return { mins, maxs };
}

export function scaleValue(scaler: Scaler, col: number, v: number): number {
  const lo = scaler.mins[col];
  const hi = scaler.maxs[col];
  if (hi === lo) return 0;
  return (2 * (v - lo)) / (hi - lo) - 1;
}

export function unscaleValue(scaler: Scaler, col: number, v: number): number {
  const lo = scaler.mins[col];
  const hi = scaler.maxs[col];
  if (hi === lo) return lo;
  return ((v + 1) / 2) * (hi - lo) + lo;
}

function scaledMatrix(scaler: Scaler, rows: number[][]): number[][] {
  return rows.map((row) => row.map((v, c) => scaleValue(scaler, c, v)));
}

/**
 * Sliding windows: input t-l_s..t-1, target value at t. Returns flattened
 * Float32Arrays ready for tensor3d/tensor2d.
 */
function makeWindows(scaled: number[][], seqLen: number) {
  const dims = scaled[0].length;
  const count = scaled.length - seqLen;
  if (count < 1) {
    throw new Error(
      `need more than sequenceLength=${seqLen} rows, got ${scaled.length}`,
    );
  }
  const inputs = new Float32Array(count * seqLen * dims);
  const targets = new Float32Array(count);
  for (let t = seqLen; t < scaled.length; t++) {
    const w = t - seqLen;
    for (let s = 0; s < seqLen; s++) {
      const row = scaled[t - seqLen + s];
      for (let c = 0; c < dims; c++) {
        inputs[(w * seqLen + s) * dims + c] = row[c];
      }
    }
    targets[w] = scaled[t][0];
  }
  return { inputs, targets, count, dims };
}

export function buildModel(inputDims: number, spec: TrainSpec): tf.LayersModel {
  const model = tf.sequential();
  for (let layer = 0; layer < spec.hiddenLayers; layer++) {
    const seed = spec.seed + layer * 7;
    model.add(
      tf.layers.lstm({
        units: spec.unitsPerLayer,
        returnSequences: layer < spec.hiddenLayers - 1,
        inputShape: layer === 0 ? [spec.sequenceLength, inputDims] : undefined,
        kernelInitializer: tf.initializers.glorotUniform({ seed }),
        recurrentInitializer: tf.initializers.orthogonal({ seed: seed + 1 }),
      }),
    );
    if (spec.dropout > 0) {
      model.add(tf.layers.dropout({ rate: spec.dropout, seed: seed + 2 }));
    }
  }
  model.add(
    tf.layers.dense({
      units: 1,
      kernelInitializer: tf.initializers.glorotUniform({ seed: spec.seed + 101 }),
    }),
  );
  model.compile({
    optimizer: tf.train.adam(spec.learningRate),
    loss: 'meanSquaredError',
  });
  return model;
}

export async function trainChannel(
  rows: number[][],
  spec: TrainSpec = DEFAULT_SPEC,
): Promise<TrainResult> {
  const minRows = Math.ceil(
    (spec.sequenceLength + 1) / Math.max(1e-9, 1 - spec.validationSplit),
  );
  if (rows.length <= minRows) {
    throw new Error(
      `channel too short to train: ${rows.length} rows <= ${minRows} required`,
    );
  }
  const scaler = fitScaler(rows);
  const { inputs, targets, count, dims } = makeWindows(
    scaledMatrix(scaler, rows),
    spec.sequenceLength,
  );
  const x = tf.tensor3d(inputs, [count, spec.sequenceLength, dims]);
  const y = tf.tensor2d(targets, [count, 1]);
  const model = buildModel(dims, spec);
  const monitor = spec.validationSplit > 0 ? 'val_loss' : 'loss';
  try {
    const history = await model.fit(x, y, {
      epochs: spec.maxIterations,
      batchSize: spec.batchSize,
      // validationSplit takes the tail of the window set, keeping the
      // held-out span strictly after the trained one.
      validationSplit: spec.validationSplit,
      shuffle: false,
      verbose: 0,
      callbacks: [
        tf.callbacks.earlyStopping({ monitor, patience: spec.patience }),
      ],
    });
    const losses: Record<string, number[]> = {};
    for (const [key, values] of Object.entries(history.history)) {
      losses[key] = (values as number[]).map(Number);
    }
    return {
      model,
      scaler,
      history: losses,
      epochsRun: (losses.loss ?? []).length,
    };
  } finally {
    x.dispose();
    y.dispose();
  }
}

/**
 * One prediction per step from sequenceLength onward, in raw units.
 * The value returned for step t is the model's estimate of the telemetry
 * value at t, computed from steps t-l_s..t-1.
 */
export async function predictChannel(
  model: tf.LayersModel,
  scaler: Scaler,
  rows: number[][],
  seqLen: number,
  batch = 512,
): Promise<{ indices: number[]; yHat: number[] }> {
  if (rows.length <= seqLen) {
    throw new Error(`channel shorter than sequenceLength=${seqLen}`);
  }
  const scaled = scaledMatrix(scaler, rows);
  const dims = scaled[0].length;
  const indices: number[] = [];
  const yHat: number[] = [];
  for (let start = seqLen; start < scaled.length; start += batch) {
    const stop = Math.min(start + batch, scaled.length);
    const count = stop - start;
    const flat = new Float32Array(count * seqLen * dims);
    for (let t = start; t < stop; t++) {
      const w = t - start;
      for (let s = 0; s < seqLen; s++) {
        const row = scaled[t - seqLen + s];
        for (let c = 0; c < dims; c++) {
          flat[(w * seqLen + s) * dims + c] = row[c];
        }
      }
    }
    const x = tf.tensor3d(flat, [count, seqLen, dims]);
    const out = model.predict(x) as tf.Tensor;
    const raw = await out.data();
    x.dispose();
    out.dispose();
    for (let w = 0; w < count; w++) {
      indices.push(start + w);
      yHat.push(unscaleValue(scaler, 0, raw[w]));
    }
  }
  return { indices, yHat };
}

interface ArtifactMeta {
  spec: TrainSpec;
  scaler: Scaler;
  inputDims: number;
  history: Record<string, number[]>;
}

/** Save model topology/weights plus the spec, seed, and scaler. */
export async function saveArtifact(
  dir: string,
  result: TrainResult,
  spec: TrainSpec,
  inputDims: number,
): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await result.model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      fs.writeFileSync(
        path.join(dir, 'model.json'),
        JSON.stringify({
          modelTopology: artifacts.modelTopology,
          weightSpecs: artifacts.weightSpecs,
        }),
        'utf-8',
      );
      const weights = artifacts.weightData as ArrayBuffer;
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weights));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
    }),
  );
  const meta: ArtifactMeta = {
    spec,
    scaler: result.scaler,
    inputDims,
    history: result.history,
  };
  fs.writeFileSync(path.join(dir, 'artifact.json'), JSON.stringify(meta, null, 2), 'utf-8');
}

export async function loadArtifact(
  dir: string,
): Promise<{ model: tf.LayersModel; meta: ArtifactMeta }> {
  const meta = JSON.parse(
    fs.readFileSync(path.join(dir, 'artifact.json'), 'utf-8'),
  ) as ArtifactMeta;
  const saved = JSON.parse(fs.readFileSync(path.join(dir, 'model.json'), 'utf-8'));
  const weightData = fs.readFileSync(path.join(dir, 'weights.bin'));
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: saved.modelTopology,
      weightSpecs: saved.weightSpecs,
      weightData: weightData.buffer.slice(
        weightData.byteOffset,
        weightData.byteOffset + weightData.byteLength,
      ),
    }),
  );
  return { model, meta };
}
