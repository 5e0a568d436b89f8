import { describe, expect, it } from "vitest";
import { DEFAULT_SPEC, makeExample, makeKernel } from "../src/dataset.js";
import { NoisePredictor } from "../src/model.js";
import { GaussianSource } from "../src/rng.js";
import { trainModel } from "../src/train.js";

const kernel = makeKernel(0.9, 3);

function batch(n: number, seed: number) {
  const g = new GaussianSource(seed);
  return Array.from({ length: n }, () => makeExample(16, kernel, 0.03, 30.0, g));
}

describe("noise predictor", () => {
  it("outputs the input shape on arbitrary sizes", () => {
    const model = new NoisePredictor(12, 16, 1);
    for (const [h, w] of [[16, 16], [8, 24], [5, 7]] as const) {
      const g = new GaussianSource(2);
      const img = new Float64Array(h * w);
      g.fill(img);
      const out = model.predict(img, h, w);
      expect(out.length).toBe(h * w);
      expect(Array.from(out).every(Number.isFinite)).toBe(true);
    }
  });

  it("starts with ~unit loss (near-zero prediction of unit noise)", () => {
    const model = new NoisePredictor(12, 16, 3);
    const loss = model.trainStep(batch(8, 10), 16, 16, 0.0);
    expect(loss).toBeGreaterThan(0.8);
    expect(loss).toBeLessThan(1.3);
  });

  it("one training step runs and the loss is finite", () => {
    const { losses } = trainModel({ ...DEFAULT_SPEC, steps: 1 });
    expect(losses).toHaveLength(1);
    expect(Number.isFinite(losses[0])).toBe(true);
  });

  it("loss decreases over a short run", { timeout: 60_000 }, () => {
    const { losses } = trainModel({ ...DEFAULT_SPEC, steps: 60 });
    const head = losses.slice(0, 5).reduce((a, b) => a + b) / 5;
    const tail = losses.slice(-5).reduce((a, b) => a + b) / 5;
    expect(tail).toBeLessThan(head);
  });

  it("checkpoint round-trips to identical float32 predictions", { timeout: 60_000 }, () => {
    const { model } = trainModel({ ...DEFAULT_SPEC, steps: 15 });
    const restored = NoisePredictor.fromCheckpoint(
      JSON.parse(JSON.stringify(model.toCheckpoint())),
    );
    const g = new GaussianSource(4);
    const img = new Float64Array(256);
    g.fill(img);
    const a = Float32Array.from(model.predict(img, 16, 16));
    const b = Float32Array.from(restored.predict(img, 16, 16));
    // weights travel as float32; predictions agree to float32 resolution
    for (let i = 0; i < a.length; i++) expect(Math.abs(a[i] - b[i])).toBeLessThan(1e-5);
  });

  it("rejects foreign checkpoint formats", () => {
    expect(() =>
      NoisePredictor.fromCheckpoint({ format: "other", channels: 1, patchSize: 8, layers: [] }),
    ).toThrow(/format/);
  });
});

describe("training failure handling", () => {
  it("aborts with diagnostics when the loss turns non-finite", { timeout: 60_000 }, () => {
    expect(() =>
      trainModel({ ...DEFAULT_SPEC, steps: 5, learningRate: Number.NaN }),
    ).toThrow(/non-finite/);
  });
});
