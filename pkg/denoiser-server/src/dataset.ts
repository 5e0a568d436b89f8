/**
 * Toy training data: stationary Gaussian textures (white noise passed
 * through a circular Gaussian filter, unit pixel variance), corrupted by
 * scaled Gaussian noise whose level is drawn LogUniform over
 * [0.03, 30.0].  Because the prior is exactly Gaussian, the best
 * possible denoising error has a closed form the tests compare against.
 */

import { GaussianSource } from "./rng.js";

export interface TrainSpec {
  patchSize: number;
  sigmaLo: number;        // LogUniform noise-level range
  sigmaHi: number;
  batchSize: number;
  steps: number;          // gradient-update budget
  seed: number;
  kernelSigma: number;    // texture correlation scale, pixels
  kernelRadius: number;
  learningRate: number;
}

export const DEFAULT_SPEC: TrainSpec = {
  patchSize: 16,
  sigmaLo: 0.03,
  sigmaHi: 30.0,
  batchSize: 16,
  steps: 2000,
  seed: 7,
  kernelSigma: 0.9,
  kernelRadius: 3,
  learningRate: 3e-3,
};

export function validateSpec(spec: TrainSpec): void {
  if (!(spec.sigmaLo > 0) || !(spec.sigmaHi > spec.sigmaLo)) {
    throw new Error(`noise range must satisfy 0 < lo < hi, got [${spec.sigmaLo}, ${spec.sigmaHi}]`);
  }
  if (spec.steps < 1) throw new Error("step budget must be >= 1");
  if (spec.patchSize < 4) throw new Error("patch size must be >= 4");
  if (spec.batchSize < 1) throw new Error("batch size must be >= 1");
}

export interface TextureKernel {
  taps: Float64Array;
  radius: number;
  size: number;
}

/** Gaussian filter normalized to unit sum-of-squares (unit pixel variance). */
export function makeKernel(sigma: number, radius: number): TextureKernel {
  const size = 2 * radius + 1;
  const taps = new Float64Array(size * size);
  let ss = 0;
  for (let dy = -radius; dy <= radius; dy++) {
    for (let dx = -radius; dx <= radius; dx++) {
      const v = Math.exp((-0.5 * (dy * dy + dx * dx)) / (sigma * sigma));
      taps[(dy + radius) * size + (dx + radius)] = v;
      ss += v * v;
    }
  }
  const scale = 1 / Math.sqrt(ss);
  for (let i = 0; i < taps.length; i++) taps[i] *= scale;
  return { taps, radius, size };
}

/** One clean texture patch: filtered white noise, circular boundary. */
export function sampleTexture(p: number, kernel: TextureKernel,
                              g: GaussianSource): Float64Array {
  const white = new Float64Array(p * p);
  g.fill(white);
  const out = new Float64Array(p * p);
  const { taps, radius, size } = kernel;
  for (let y = 0; y < p; y++) {
    for (let x = 0; x < p; x++) {
      let acc = 0;
      for (let dy = -radius; dy <= radius; dy++) {
        const yy = (y + dy + 4 * p) % p;
        for (let dx = -radius; dx <= radius; dx++) {
          const xx = (x + dx + 4 * p) % p;
          acc += taps[(dy + radius) * size + (dx + radius)] * white[yy * p + xx];
        }
      }
      out[y * p + x] = acc;
    }
  }
  return out;
}

/** Noise level drawn LogUniform over [lo, hi]. */
export function sampleSigma(lo: number, hi: number, uniform: () => number): number {
  return Math.exp(Math.log(lo) + (Math.log(hi) - Math.log(lo)) * uniform());
}

/**
 * Best achievable per-pixel denoising MSE at a given noise level:
 * mean over spatial frequencies of sigma^2 * lambda / (lambda + sigma^2),
 * with lambda the texture power spectrum |kernel_hat|^2.
 */
export function analyticMmse(p: number, kernel: TextureKernel,
                             sigma: number): number {
  const { taps, radius, size } = kernel;
  let acc = 0;
  for (let u = 0; u < p; u++) {
    for (let v = 0; v < p; v++) {
      let re = 0;
      let im = 0;
      for (let dy = -radius; dy <= radius; dy++) {
        for (let dx = -radius; dx <= radius; dx++) {
          const phase = (-2 * Math.PI * (u * dy + v * dx)) / p;
          const t = taps[(dy + radius) * size + (dx + radius)];
          re += t * Math.cos(phase);
          im += t * Math.sin(phase);
        }
      }
      const lambda = re * re + im * im;
      acc += (sigma * sigma * lambda) / (lambda + sigma * sigma);
    }
  }
  return acc / (p * p);
}

export interface Example {
  noisy: Float64Array;   // x0 + sigma * eps
  eps: Float64Array;     // the unscaled noise, the training target
  sigma: number;
  clean: Float64Array;
}

export function makeExample(p: number, kernel: TextureKernel, lo: number,
                            hi: number, g: GaussianSource): Example {
  const clean = sampleTexture(p, kernel, g);
  const sigma = sampleSigma(lo, hi, g.uniform);
  const eps = new Float64Array(p * p);
  const noisy = new Float64Array(p * p);
  for (let i = 0; i < p * p; i++) {
    eps[i] = g.next();
    noisy[i] = clean[i] + sigma * eps[i];
  }
  return { noisy, eps, sigma, clean };
}
