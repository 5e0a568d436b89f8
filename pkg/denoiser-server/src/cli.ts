/**
 * Entry point.
 *
 *   --train --checkpoint model.json [--seed N] [--steps N] [--batch N]
 *       trains the toy net on synthetic textures, writes the checkpoint
 *       and a loss curve next to it, and prints the validation summary.
 *
 *   --serve --endpoint host:port (--checkpoint model.json | --analytic SIGMA)
 *       serves a trained checkpoint (or the closed-form predictor) over
 *       the wire protocol until SIGINT/SIGTERM.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { DEFAULT_SPEC, TrainSpec } from "./dataset.js";
import { Checkpoint, NoisePredictor } from "./model.js";
import {
  analyticPredictor,
  createDenoiserServer,
  installSignalShutdown,
  listen,
  parseEndpoint,
} from "./server.js";
import { lossCsv, trainModel, validateModel } from "./train.js";

interface Args {
  train: boolean;
  serve: boolean;
  endpoint: string;
  checkpoint: string | null;
  analytic: number | null;
  seed: number;
  steps: number | null;
  batch: number | null;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    train: false,
    serve: false,
    endpoint: "127.0.0.1:7465",
    checkpoint: null,
    analytic: null,
    seed: DEFAULT_SPEC.seed,
    steps: null,
    batch: null,
  };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`missing value after ${a}`);
      return argv[i];
    };
    if (a === "--train") args.train = true;
    else if (a === "--serve") args.serve = true;
    else if (a === "--endpoint") args.endpoint = next();
    else if (a === "--checkpoint") args.checkpoint = next();
    else if (a === "--analytic") args.analytic = Number(next());
    else if (a === "--seed") args.seed = Number(next());
    else if (a === "--steps") args.steps = Number(next());
    else if (a === "--batch") args.batch = Number(next());
    else throw new Error(`unknown flag ${a}`);
  }
  if (args.train === args.serve) {
    throw new Error("choose exactly one of --train or --serve");
  }
  return args;
}

function runTrain(args: Args): number {
  if (!args.checkpoint) throw new Error("--train needs --checkpoint PATH");
  const spec: TrainSpec = {
    ...DEFAULT_SPEC,
    seed: args.seed,
    steps: args.steps ?? DEFAULT_SPEC.steps,
    batchSize: args.batch ?? DEFAULT_SPEC.batchSize,
  };
  const t0 = Date.now();
  const { model, losses } = trainModel(spec, (step, loss) => {
    if (step % 200 === 0) {
      process.stderr.write(`step ${step}: loss ${loss.toFixed(4)}\n`);
    }
  });
  const seconds = (Date.now() - t0) / 1000;
  fs.writeFileSync(args.checkpoint, JSON.stringify(model.toCheckpoint()));
  const csvPath = path.join(path.dirname(args.checkpoint),
                            path.basename(args.checkpoint)
                              .replace(/\.json$/, "") + "-loss.csv");
  fs.writeFileSync(csvPath, lossCsv(losses));
  const val = validateModel(model, spec, 1.0);
  process.stdout.write(
    `trained ${spec.steps} steps in ${seconds.toFixed(1)}s; ` +
    `final loss ${losses[losses.length - 1].toFixed(4)}; ` +
    `denoise MSE @ sigma=1: ${val.denoiseMse.toFixed(4)} ` +
    `(analytic optimum ${val.analyticBound.toFixed(4)}, ` +
    `ratio ${val.ratio.toFixed(3)})\n`);
  return 0;
}

async function runServe(args: Args): Promise<number> {
  let predict;
  if (args.analytic !== null) {
    if (!(args.analytic > 0)) throw new Error("--analytic needs a positive sigma");
    predict = analyticPredictor(args.analytic);
  } else {
    if (!args.checkpoint) {
      throw new Error("--serve needs --checkpoint PATH or --analytic SIGMA");
    }
    const ck = JSON.parse(fs.readFileSync(args.checkpoint, "utf8")) as Checkpoint;
    const model = NoisePredictor.fromCheckpoint(ck);
    predict = (pixels: Float64Array, h: number, w: number) =>
      model.predict(pixels, h, w);
  }
  const server = createDenoiserServer(predict);
  const addr = await listen(server, parseEndpoint(args.endpoint));
  installSignalShutdown(server);
  process.stdout.write(`listening on ${addr.address}:${addr.port}\n`);
  return new Promise(() => undefined); // runs until a signal
}

export async function main(argv: string[]): Promise<number> {
  try {
    const args = parseArgs(argv);
    return args.train ? runTrain(args) : await runServe(args);
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 2;
  }
}

const isMain = process.argv[1] &&
  path.resolve(process.argv[1]) === path.resolve(new URL(import.meta.url).pathname);
if (isMain) {
  main(process.argv.slice(2)).then((code) => {
    if (code !== 0) process.exit(code);
  });
}
