#!/usr/bin/env node
/**
 * Trainer command line: train per-channel LSTM models, export one-step
 * predictions in the engine's CSV format, and convert the public dataset.
 */

import * as path from 'path';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { convertDataset } from './convert';
import { readChannelCsv } from './csv';
import { exportFromArtifact } from './exporter';
import { DEFAULT_SPEC, TrainSpec, saveArtifact, trainChannel } from './lstm';

function specFromArgs(argv: Record<string, unknown>): TrainSpec {
  return {
    hiddenLayers: Number(argv.layers ?? DEFAULT_SPEC.hiddenLayers),
    unitsPerLayer: Number(argv.units ?? DEFAULT_SPEC.unitsPerLayer),
    sequenceLength: Number(argv.seqLen ?? DEFAULT_SPEC.sequenceLength),
    maxIterations: Number(argv.epochs ?? DEFAULT_SPEC.maxIterations),
    dropout: Number(argv.dropout ?? DEFAULT_SPEC.dropout),
    batchSize: Number(argv.batch ?? DEFAULT_SPEC.batchSize),
    patience: Number(argv.patience ?? DEFAULT_SPEC.patience),
    validationSplit: Number(argv.valSplit ?? DEFAULT_SPEC.validationSplit),
    learningRate: Number(argv.lr ?? DEFAULT_SPEC.learningRate),
    seed: Number(argv.seed ?? DEFAULT_SPEC.seed),
  };
}

async function runTrain(argv: Record<string, unknown>): Promise<void> {
  const spec = specFromArgs(argv);
  const channelCsv = String(argv.channel);
  const outDir = String(argv.out);
  const data = readChannelCsv(channelCsv);
  const result = await trainChannel(data.values, spec);
  await saveArtifact(outDir, result, spec, data.values[0].length);
  const val = result.history.val_loss;
  console.log(
    `trained ${path.basename(channelCsv)}: ${result.epochsRun} epochs, ` +
      `final loss ${result.history.loss.at(-1)?.toExponential(3)}` +
      (val ? `, val ${val.at(-1)?.toExponential(3)}` : ''),
  );
}

async function runExport(argv: Record<string, unknown>): Promise<void> {
  const count = await exportFromArtifact(
    String(argv.model),
    String(argv.channel),
    String(argv.out),
  );
  console.log(`exported ${count} predictions to ${argv.out}`);
}

function runConvert(argv: Record<string, unknown>): void {
  const manifest = convertDataset(String(argv.source), String(argv.out), {
    aggregate: Number(argv.aggregate ?? 1),
  });
  console.log(
    `converted ${manifest.channels} channels, ` +
      `${manifest.labelSequences} labeled sequences` +
      (manifest.skipped.length ? `, skipped ${manifest.skipped.length}` : ''),
  );
}

export async function main(args: string[]): Promise<number> {
  try {
    await yargs(args)
      .scriptName('telemscan-trainer')
      .command(
        'train',
        'train an LSTM on a channel CSV',
        (y) =>
          y
            .option('channel', { type: 'string', demandOption: true })
            .option('out', { type: 'string', demandOption: true })
            .option('layers', { type: 'number', default: DEFAULT_SPEC.hiddenLayers })
            .option('units', { type: 'number', default: DEFAULT_SPEC.unitsPerLayer })
            .option('seq-len', { type: 'number', default: DEFAULT_SPEC.sequenceLength })
            .option('epochs', { type: 'number', default: DEFAULT_SPEC.maxIterations })
            .option('dropout', { type: 'number', default: DEFAULT_SPEC.dropout })
            .option('batch', { type: 'number', default: DEFAULT_SPEC.batchSize })
            .option('patience', { type: 'number', default: DEFAULT_SPEC.patience })
            .option('val-split', { type: 'number', default: DEFAULT_SPEC.validationSplit })
            .option('lr', { type: 'number', default: DEFAULT_SPEC.learningRate })
            .option('seed', { type: 'number', default: DEFAULT_SPEC.seed }),
        async (argv) => runTrain(argv as Record<string, unknown>),
      )
      .command(
        'export',
        'export one-step predictions for a channel',
        (y) =>
          y
            .option('model', { type: 'string', demandOption: true })
            .option('channel', { type: 'string', demandOption: true })
            .option('out', { type: 'string', demandOption: true }),
        async (argv) => runExport(argv as Record<string, unknown>),
      )
      .command(
        'convert',
        'convert the public dataset to engine CSVs',
        (y) =>
          y
            .option('source', { type: 'string', demandOption: true })
            .option('out', { type: 'string', demandOption: true })
            .option('aggregate', { type: 'number', default: 1 }),
        (argv) => runConvert(argv as Record<string, unknown>),
      )
      .demandCommand(1)
      .strict()
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseAsync();
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
