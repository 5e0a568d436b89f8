/**
 * A small fully-convolutional noise predictor with hand-rolled training.
 *
 * Three 3x3 conv layers (relu, relu, linear) over two input channels: the
 * noisy pixels and a broadcast global-RMS channel.  The net is
 * unconditional in the noise level; the RMS channel is what lets one set
 * of weights adapt its output scale across the whole training range.
 * Convolutions use circular padding, so the net runs on any image size,
 * not just the training patch.
 *
 * Checkpoints are a private JSON format (base64 float32 weight blobs);
 * only the wire protocol is a public contract.
 */

import { GaussianSource } from "./rng.js";
import { Example } from "./dataset.js";

const K = 3; // kernel size
const KR = 1;

export interface LayerShape {
  inC: number;
  outC: number;
}

interface Layer extends LayerShape {
  w: Float64Array; // [outC][inC][ky][kx]
  b: Float64Array; // [outC]
}

interface AdamState {
  mw: Float64Array;
  vw: Float64Array;
  mb: Float64Array;
  vb: Float64Array;
}

function convForward(inp: Float64Array, h: number, w: number, layer: Layer,
                     out: Float64Array): void {
  const { inC, outC } = layer;
  const plane = h * w;
  for (let oc = 0; oc < outC; oc++) {
    const base = oc * plane;
    const bias = layer.b[oc];
    for (let i = 0; i < plane; i++) out[base + i] = bias;
    for (let ic = 0; ic < inC; ic++) {
      const wBase = (oc * inC + ic) * K * K;
      const inBase = ic * plane;
      for (let ky = 0; ky < K; ky++) {
        for (let kx = 0; kx < K; kx++) {
          const wv = layer.w[wBase + ky * K + kx];
          if (wv === 0) continue;
          const dy = ky - KR;
          const dx = kx - KR;
          for (let y = 0; y < h; y++) {
            const yy = (y + dy + h) % h;
            const rowOut = base + y * w;
            const rowIn = inBase + yy * w;
            for (let x = 0; x < w; x++) {
              const xx = (x + dx + w) % w;
              out[rowOut + x] += wv * inp[rowIn + xx];
            }
          }
        }
      }
    }
  }
}

function convBackward(inp: Float64Array, gOut: Float64Array, h: number,
                      w: number, layer: Layer, gw: Float64Array,
                      gb: Float64Array, gIn: Float64Array | null): void {
  const { inC, outC } = layer;
  const plane = h * w;
  if (gIn) gIn.fill(0);
  for (let oc = 0; oc < outC; oc++) {
    const base = oc * plane;
    let accB = 0;
    for (let i = 0; i < plane; i++) accB += gOut[base + i];
    gb[oc] += accB;
    for (let ic = 0; ic < inC; ic++) {
      const wBase = (oc * inC + ic) * K * K;
      const inBase = ic * plane;
      for (let ky = 0; ky < K; ky++) {
        for (let kx = 0; kx < K; kx++) {
          const dy = ky - KR;
          const dx = kx - KR;
          let accW = 0;
          const wv = layer.w[wBase + ky * K + kx];
          for (let y = 0; y < h; y++) {
            const yy = (y + dy + h) % h;
            const rowG = base + y * w;
            const rowIn = inBase + yy * w;
            for (let x = 0; x < w; x++) {
              const xx = (x + dx + w) % w;
              const g = gOut[rowG + x];
              accW += g * inp[rowIn + xx];
              if (gIn) gIn[rowIn + xx] += wv * g;
            }
          }
          gw[wBase + ky * K + kx] += accW;
        }
      }
    }
  }
}

export interface Checkpoint {
  format: string;
  channels: number;
  patchSize: number;
  layers: { inC: number; outC: number; w: string; b: string }[];
}

const FORMAT = "toy-noise-predictor-v1";

function encodeF64(a: Float64Array): string {
  return Buffer.from(new Float32Array(a).buffer).toString("base64");
}

function decodeF64(s: string): Float64Array {
  const buf = Buffer.from(s, "base64");
  const f32 = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
  return Float64Array.from(f32);
}

export class NoisePredictor {
  readonly channels: number;
  readonly patchSize: number;
  private layers: Layer[];
  private adam: AdamState[];
  private step = 0;

  constructor(channels: number, patchSize: number, seed: number) {
    this.channels = channels;
    this.patchSize = patchSize;
    const g = new GaussianSource(seed ^ 0x5eed);
    const shapes: LayerShape[] = [
      { inC: 2, outC: channels },
      { inC: channels, outC: channels },
      { inC: channels, outC: 1 },
    ];
    this.layers = shapes.map((s, idx) => {
      const w = new Float64Array(s.outC * s.inC * K * K);
      // He-style init; the output layer starts near zero so the untrained
      // net predicts ~0 noise (loss ~= 1 per pixel on standard normals)
      const std = idx === shapes.length - 1 ? 1e-3
        : Math.sqrt(2 / (s.inC * K * K));
      for (let i = 0; i < w.length; i++) w[i] = std * g.next();
      return { ...s, w, b: new Float64Array(s.outC) };
    });
    this.adam = this.layers.map((l) => ({
      mw: new Float64Array(l.w.length),
      vw: new Float64Array(l.w.length),
      mb: new Float64Array(l.b.length),
      vb: new Float64Array(l.b.length),
    }));
  }

  /**
   * Two scale-normalized channels: pixels divided by their global RMS,
   * and the broadcast log-RMS.  The unscaled-noise target is O(1) at
   * every corruption level, so feeding O(1) features keeps one set of
   * weights useful across the whole LogUniform training range.
   */
  private buildInput(noisy: Float64Array, h: number, w: number): Float64Array {
    const plane = h * w;
    const inp = new Float64Array(2 * plane);
    let ss = 0;
    for (let i = 0; i < plane; i++) ss += noisy[i] * noisy[i];
    const rms = Math.max(Math.sqrt(ss / plane), 1e-9);
    const logRms = Math.log(rms);
    for (let i = 0; i < plane; i++) {
      inp[i] = noisy[i] / rms;
      inp[plane + i] = logRms;
    }
    return inp;
  }

  /** Forward pass keeping activations for backprop. */
  private forwardFull(noisy: Float64Array, h: number, w: number) {
    const plane = h * w;
    const acts: Float64Array[] = [this.buildInput(noisy, h, w)];
    const masks: Uint8Array[] = [];
    for (let li = 0; li < this.layers.length; li++) {
      const layer = this.layers[li];
      const out = new Float64Array(layer.outC * plane);
      convForward(acts[li], h, w, layer, out);
      if (li < this.layers.length - 1) {
        const mask = new Uint8Array(out.length);
        for (let i = 0; i < out.length; i++) {
          if (out[i] > 0) mask[i] = 1;
          else out[i] = 0;
        }
        masks.push(mask);
      }
      acts.push(out);
    }
    return { acts, masks };
  }

  predict(noisy: Float64Array, h: number, w: number): Float64Array {
    return this.forwardFull(noisy, h, w).acts[this.layers.length];
  }

  /** One Adam update on a batch; returns the mean per-pixel loss. */
  trainStep(batch: Example[], h: number, w: number, lr: number): number {
    const plane = h * w;
    const grads = this.layers.map((l) => ({
      gw: new Float64Array(l.w.length),
      gb: new Float64Array(l.b.length),
    }));
    let loss = 0;
    const scale = 2 / (batch.length * plane);
    for (const ex of batch) {
      const { acts, masks } = this.forwardFull(ex.noisy, h, w);
      const out = acts[this.layers.length];
      let g: Float64Array = new Float64Array(plane);
      for (let i = 0; i < plane; i++) {
        const d = out[i] - ex.eps[i];
        loss += d * d;
        g[i] = scale * d;
      }
      for (let li = this.layers.length - 1; li >= 0; li--) {
        const layer = this.layers[li];
        const gIn = li > 0 ? new Float64Array(layer.inC * plane) : null;
        convBackward(acts[li], g, h, w, layer, grads[li].gw, grads[li].gb, gIn);
        if (li > 0) {
          const mask = masks[li - 1];
          for (let i = 0; i < gIn!.length; i++) if (!mask[i]) gIn![i] = 0;
          g = gIn!;
        }
      }
    }
    loss /= batch.length * plane;
    if (!Number.isFinite(loss)) {
      throw new Error(`training loss became non-finite at step ${this.step}`);
    }
    this.step += 1;
    const b1 = 0.9;
    const b2 = 0.999;
    const epsilon = 1e-8;
    const c1 = 1 - Math.pow(b1, this.step);
    const c2 = 1 - Math.pow(b2, this.step);
    for (let li = 0; li < this.layers.length; li++) {
      const layer = this.layers[li];
      const { gw, gb } = grads[li];
      const st = this.adam[li];
      for (let i = 0; i < layer.w.length; i++) {
        st.mw[i] = b1 * st.mw[i] + (1 - b1) * gw[i];
        st.vw[i] = b2 * st.vw[i] + (1 - b2) * gw[i] * gw[i];
        layer.w[i] -= (lr * (st.mw[i] / c1)) / (Math.sqrt(st.vw[i] / c2) + epsilon);
      }
      for (let i = 0; i < layer.b.length; i++) {
        st.mb[i] = b1 * st.mb[i] + (1 - b1) * gb[i];
        st.vb[i] = b2 * st.vb[i] + (1 - b2) * gb[i] * gb[i];
        layer.b[i] -= (lr * (st.mb[i] / c1)) / (Math.sqrt(st.vb[i] / c2) + epsilon);
      }
    }
    return loss;
  }

  toCheckpoint(): Checkpoint {
    return {
      format: FORMAT,
      channels: this.channels,
      patchSize: this.patchSize,
      layers: this.layers.map((l) => ({
        inC: l.inC,
        outC: l.outC,
        w: encodeF64(l.w),
        b: encodeF64(l.b),
      })),
    };
  }

  static fromCheckpoint(ck: Checkpoint): NoisePredictor {
    if (ck.format !== FORMAT) {
      throw new Error(`unsupported checkpoint format ${ck.format}`);
    }
    const model = new NoisePredictor(ck.channels, ck.patchSize, 0);
    model.layers = ck.layers.map((l) => ({
      inC: l.inC,
      outC: l.outC,
      w: decodeF64(l.w),
      b: decodeF64(l.b),
    }));
    model.adam = model.layers.map((l) => ({
      mw: new Float64Array(l.w.length),
      vw: new Float64Array(l.w.length),
      mb: new Float64Array(l.b.length),
      vb: new Float64Array(l.b.length),
    }));
    return model;
  }
}
