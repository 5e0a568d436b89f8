/**
 * Training loop: minimize || eps - eps_hat(x + sigma * eps) ||^2 with the
 * noise level drawn LogUniform per example.  Produces a checkpointable
 * model and a loss curve; aborts on a non-finite loss.
 */

import { GaussianSource } from "./rng.js";
import {
  DEFAULT_SPEC,
  Example,
  TrainSpec,
  analyticMmse,
  makeExample,
  makeKernel,
  sampleTexture,
  validateSpec,
} from "./dataset.js";
import { NoisePredictor } from "./model.js";

export interface TrainResult {
  model: NoisePredictor;
  losses: number[];
  spec: TrainSpec;
}

/** Incremental trainer so callers choose their own pacing. */
export class Trainer {
  readonly spec: TrainSpec;
  readonly model: NoisePredictor;
  readonly losses: number[] = [];
  private readonly kernel;
  private readonly g: GaussianSource;

  constructor(spec: TrainSpec) {
    validateSpec(spec);
    this.spec = spec;
    this.kernel = makeKernel(spec.kernelSigma, spec.kernelRadius);
    this.g = new GaussianSource(spec.seed);
    this.model = new NoisePredictor(12, spec.patchSize, spec.seed);
  }

  get done(): boolean {
    return this.losses.length >= this.spec.steps;
  }

  step(): number {
    const { spec } = this;
    const batch: Example[] = [];
    for (let b = 0; b < spec.batchSize; b++) {
      batch.push(makeExample(spec.patchSize, this.kernel, spec.sigmaLo,
                             spec.sigmaHi, this.g));
    }
    // linear decay to a fifth of the initial rate steadies the tail end
    const lr = spec.learningRate * (1 - 0.8 * (this.losses.length / spec.steps));
    const loss = this.model.trainStep(batch, spec.patchSize, spec.patchSize, lr);
    this.losses.push(loss);
    return loss;
  }

  result(): TrainResult {
    return { model: this.model, losses: this.losses, spec: this.spec };
  }
}

export function trainModel(spec: TrainSpec = DEFAULT_SPEC,
                           onStep?: (step: number, loss: number) => void): TrainResult {
  const trainer = new Trainer(spec);
  while (!trainer.done) {
    const loss = trainer.step();
    if (onStep) onStep(trainer.losses.length - 1, loss);
  }
  return trainer.result();
}

/** Same loop, yielding to the event loop between chunks of steps so a
 *  host process (test runner, server) stays responsive. */
export async function trainModelAsync(spec: TrainSpec = DEFAULT_SPEC,
                                      yieldEvery = 25,
                                      onStep?: (step: number, loss: number) => void):
    Promise<TrainResult> {
  const trainer = new Trainer(spec);
  while (!trainer.done) {
    const loss = trainer.step();
    if (onStep) onStep(trainer.losses.length - 1, loss);
    if (trainer.losses.length % yieldEvery === 0) {
      await new Promise<void>((resolve) => setImmediate(resolve));
    }
  }
  return trainer.result();
}

export interface Validation {
  denoiseMse: number;
  analyticBound: number;
  ratio: number;
}

/** Denoising MSE at a fixed noise level on fresh validation textures. */
export function validateModel(model: NoisePredictor, spec: TrainSpec,
                              sigma: number, samples = 200,
                              seed = 987654): Validation {
  const kernel = makeKernel(spec.kernelSigma, spec.kernelRadius);
  const g = new GaussianSource(seed);
  const p = spec.patchSize;
  let total = 0;
  for (let s = 0; s < samples; s++) {
    const clean = sampleTexture(p, kernel, g);
    const noisy = new Float64Array(p * p);
    for (let i = 0; i < p * p; i++) noisy[i] = clean[i] + sigma * g.next();
    const eps = model.predict(noisy, p, p);
    for (let i = 0; i < p * p; i++) {
      const xhat = noisy[i] - sigma * eps[i];
      total += (xhat - clean[i]) ** 2;
    }
  }
  const mse = total / (samples * p * p);
  const bound = analyticMmse(p, kernel, sigma);
  return { denoiseMse: mse, analyticBound: bound, ratio: mse / bound };
}

export function lossCsv(losses: number[]): string {
  const lines = ["step,loss"];
  losses.forEach((l, i) => lines.push(`${i},${l}`));
  return lines.join("\n") + "\n";
}
