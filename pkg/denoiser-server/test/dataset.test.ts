import { describe, expect, it } from "vitest";
import {
  DEFAULT_SPEC,
  analyticMmse,
  makeExample,
  makeKernel,
  sampleSigma,
  sampleTexture,
  validateSpec,
} from "../src/dataset.js";
import { GaussianSource, mulberry32 } from "../src/rng.js";

describe("texture prior", () => {
  it("has unit pixel variance", () => {
    const kernel = makeKernel(0.9, 3);
    const g = new GaussianSource(1);
    let acc = 0;
    const n = 300;
    for (let i = 0; i < n; i++) {
      const t = sampleTexture(16, kernel, g);
      for (const v of t) acc += v * v;
    }
    expect(acc / (n * 256)).toBeCloseTo(1.0, 1);
  });

  it("is deterministic under a fixed seed", () => {
    const kernel = makeKernel(0.9, 3);
    const a = sampleTexture(8, kernel, new GaussianSource(5));
    const b = sampleTexture(8, kernel, new GaussianSource(5));
    expect(Array.from(a)).toEqual(Array.from(b));
  });
});

describe("analytic denoising bound", () => {
  const kernel = makeKernel(0.9, 3);

  it("vanishes as the noise vanishes", () => {
    expect(analyticMmse(16, kernel, 1e-4)).toBeLessThan(1e-6);
  });

  it("approaches the pixel variance at extreme noise", () => {
    const v = analyticMmse(16, kernel, 1000.0);
    expect(v).toBeGreaterThan(0.95);
    expect(v).toBeLessThan(1.0);
  });

  it("is monotone in the noise level", () => {
    const vals = [0.1, 0.5, 1, 3, 10].map((s) => analyticMmse(16, kernel, s));
    for (let i = 1; i < vals.length; i++) expect(vals[i]).toBeGreaterThan(vals[i - 1]);
  });
});

describe("noise-level sampling", () => {
  it("stays inside the LogUniform range", () => {
    const u = mulberry32(3);
    for (let i = 0; i < 1000; i++) {
      const s = sampleSigma(0.03, 30.0, u);
      expect(s).toBeGreaterThanOrEqual(0.03);
      expect(s).toBeLessThanOrEqual(30.0);
    }
  });

  it("has a roughly uniform log distribution", () => {
    const u = mulberry32(9);
    let below = 0;
    const n = 4000;
    const mid = Math.exp((Math.log(0.03) + Math.log(30)) / 2); // ~0.95
    for (let i = 0; i < n; i++) if (sampleSigma(0.03, 30.0, u) < mid) below += 1;
    expect(below / n).toBeGreaterThan(0.45);
    expect(below / n).toBeLessThan(0.55);
  });
});

describe("spec validation", () => {
  it("accepts the default spec", () => {
    expect(() => validateSpec(DEFAULT_SPEC)).not.toThrow();
  });

  it("rejects inverted ranges and empty budgets", () => {
    expect(() => validateSpec({ ...DEFAULT_SPEC, sigmaLo: 2, sigmaHi: 1 })).toThrow();
    expect(() => validateSpec({ ...DEFAULT_SPEC, sigmaLo: -1 })).toThrow();
    expect(() => validateSpec({ ...DEFAULT_SPEC, steps: 0 })).toThrow();
  });
});

describe("training examples", () => {
  it("composes clean + sigma * eps", () => {
    const kernel = makeKernel(0.9, 3);
    const ex = makeExample(16, kernel, 0.03, 30.0, new GaussianSource(11));
    for (let i = 0; i < ex.noisy.length; i++) {
      expect(ex.noisy[i]).toBeCloseTo(ex.clean[i] + ex.sigma * ex.eps[i], 10);
    }
  });
});
