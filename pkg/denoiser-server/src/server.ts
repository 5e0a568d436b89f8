/**
 * TCP server speaking the DNZ1/DNZR protocol.  One request is processed
 * at a time per connection; a malformed magic closes the connection
 * (other connections unaffected); an oversized header gets an error
 * frame before the close.  SIGINT/SIGTERM shut the listener down
 * gracefully.
 */

import * as net from "node:net";
import {
  REQUEST_MAGIC,
  encodeErrorFrame,
  encodeResponse,
  takeFrame,
} from "./frames.js";

/** Maps a noisy image (row-major float64) to predicted unscaled noise. */
export type PredictFn = (pixels: Float64Array, height: number,
                         width: number) => Float64Array;

/** The closed-form predictor for an i.i.d. unit-variance Gaussian prior
 *  at a pinned noise level; useful for protocol tests without a trained
 *  checkpoint. */
export function analyticPredictor(sigma: number): PredictFn {
  const gain = sigma / (1 + sigma * sigma);
  return (pixels) => {
    const out = new Float64Array(pixels.length);
    for (let i = 0; i < pixels.length; i++) out[i] = gain * pixels[i];
    return out;
  };
}

export function createDenoiserServer(predict: PredictFn): net.Server {
  return net.createServer((conn) => {
    let pending = Buffer.alloc(0);
    let busy = false;

    const pump = () => {
      if (busy) return;
      const result = takeFrame(pending, REQUEST_MAGIC);
      if ("kind" in result) {
        if (result.kind === "bad-magic") {
          conn.destroy();
        } else if (result.kind === "oversized") {
          conn.write(encodeErrorFrame(), () => conn.destroy());
        }
        return; // need-more: wait for data
      }
      pending = Buffer.from(result.rest);
      busy = true;
      const { height, width, pixels } = result.frame;
      try {
        const eps = predict(Float64Array.from(pixels), height, width);
        const out = new Float32Array(eps.length);
        for (let i = 0; i < eps.length; i++) out[i] = eps[i];
        conn.write(encodeResponse(height, width, out), () => {
          busy = false;
          pump(); // a pipelined request may already be buffered
        });
      } catch (err) {
        conn.destroy();
      }
    };

    conn.on("data", (chunk) => {
      pending = Buffer.concat([pending, chunk]);
      pump();
    });
    conn.on("error", () => conn.destroy());
  });
}

export interface Endpoint {
  host: string;
  port: number;
}

export function parseEndpoint(text: string): Endpoint {
  const stripped = text.startsWith("tcp://") ? text.slice(6) : text;
  const idx = stripped.lastIndexOf(":");
  if (idx < 0) throw new Error(`cannot parse endpoint '${text}'`);
  const host = stripped.slice(0, idx) || "127.0.0.1";
  const port = Number(stripped.slice(idx + 1));
  if (!Number.isInteger(port) || port < 0 || port > 65535) {
    throw new Error(`bad port in endpoint '${text}'`);
  }
  return { host, port };
}

export function listen(server: net.Server, endpoint: Endpoint): Promise<net.AddressInfo> {
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(endpoint.port, endpoint.host, () => {
      resolve(server.address() as net.AddressInfo);
    });
  });
}

export function installSignalShutdown(server: net.Server): void {
  const stop = () => {
    server.close(() => process.exit(0));
    setTimeout(() => process.exit(0), 500).unref();
  };
  process.on("SIGINT", stop);
  process.on("SIGTERM", stop);
}
