import * as net from "node:net";
import { afterEach, describe, expect, it } from "vitest";
import {
  ERROR_MAGIC,
  HEADER_BYTES,
  RESPONSE_MAGIC,
  encodeRequest,
  takeFrame,
} from "../src/frames.js";
import { NoisePredictor } from "../src/model.js";
import {
  analyticPredictor,
  createDenoiserServer,
  listen,
  parseEndpoint,
} from "../src/server.js";
import { GaussianSource } from "../src/rng.js";

const servers: net.Server[] = [];

afterEach(() => {
  for (const s of servers.splice(0)) s.close();
});

async function startServer(predict = analyticPredictor(1.0)): Promise<number> {
  const server = createDenoiserServer(predict);
  servers.push(server);
  const addr = await listen(server, { host: "127.0.0.1", port: 0 });
  return addr.port;
}

function connect(port: number): Promise<net.Socket> {
  return new Promise((resolve, reject) => {
    const sock = net.connect(port, "127.0.0.1", () => resolve(sock));
    sock.on("error", reject);
  });
}

function collect(sock: net.Socket, bytes: number, timeoutMs = 5000): Promise<Buffer> {
  return new Promise((resolve, reject) => {
    let buf = Buffer.alloc(0);
    const timer = setTimeout(
      () => reject(new Error(`timeout waiting for ${bytes} bytes, got ${buf.length}`)),
      timeoutMs,
    );
    sock.on("data", (chunk) => {
      buf = Buffer.concat([buf, chunk]);
      if (buf.length >= bytes) {
        clearTimeout(timer);
        resolve(buf.subarray(0, bytes));
      }
    });
    sock.on("close", () => {
      clearTimeout(timer);
      reject(new Error(`closed after ${buf.length}/${bytes} bytes`));
    });
  });
}

function waitClose(sock: net.Socket, timeoutMs = 5000): Promise<void> {
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("no close")), timeoutMs);
    sock.on("close", () => {
      clearTimeout(timer);
      resolve();
    });
  });
}

describe("wire protocol server", () => {
  it("answers a zero image with a finite frame of equal shape", async () => {
    const port = await startServer();
    const sock = await connect(port);
    sock.write(encodeRequest(4, 6, new Float32Array(24)));
    const raw = await collect(sock, HEADER_BYTES + 24 * 4);
    const parsed = takeFrame(raw, RESPONSE_MAGIC);
    if ("kind" in parsed) throw new Error("bad response");
    expect(parsed.frame.height).toBe(4);
    expect(parsed.frame.width).toBe(6);
    expect(Array.from(parsed.frame.pixels).every(Number.isFinite)).toBe(true);
    sock.destroy();
  });

  it("round-trips a trained model to float32 accuracy", async () => {
    const model = new NoisePredictor(12, 16, 5);
    const port = await startServer((px, h, w) => model.predict(px, h, w));
    const g = new GaussianSource(6);
    const img = new Float32Array(256);
    for (let i = 0; i < img.length; i++) img[i] = g.next();
    const direct = model.predict(Float64Array.from(img), 16, 16);

    const sock = await connect(port);
    sock.write(encodeRequest(16, 16, img));
    const raw = await collect(sock, HEADER_BYTES + 256 * 4);
    const parsed = takeFrame(raw, RESPONSE_MAGIC);
    if ("kind" in parsed) throw new Error("bad response");
    for (let i = 0; i < 256; i++) {
      expect(Math.abs(parsed.frame.pixels[i] - direct[i])).toBeLessThan(1e-6);
    }
    sock.destroy();
  });

  it("implements the pinned-noise closed form", async () => {
    const sigma = 1.0;
    const port = await startServer(analyticPredictor(sigma));
    const sock = await connect(port);
    const img = Float32Array.from({ length: 9 }, (_, i) => i - 4);
    sock.write(encodeRequest(3, 3, img));
    const raw = await collect(sock, HEADER_BYTES + 9 * 4);
    const parsed = takeFrame(raw, RESPONSE_MAGIC);
    if ("kind" in parsed) throw new Error("bad response");
    for (let i = 0; i < 9; i++) {
      expect(parsed.frame.pixels[i]).toBeCloseTo((img[i] * sigma) / (1 + sigma * sigma), 5);
    }
    sock.destroy();
  });

  it("serves several requests over one session, in order", async () => {
    const port = await startServer(analyticPredictor(2.0));
    const sock = await connect(port);
    const one = new Float32Array([1, 2, 3, 4]);
    const two = new Float32Array([5, 6, 7, 8]);
    sock.write(Buffer.concat([encodeRequest(2, 2, one), encodeRequest(2, 2, two)]));
    const raw = await collect(sock, 2 * (HEADER_BYTES + 16));
    const first = takeFrame(raw, RESPONSE_MAGIC);
    if ("kind" in first) throw new Error("bad first response");
    const second = takeFrame(first.rest, RESPONSE_MAGIC);
    if ("kind" in second) throw new Error("bad second response");
    expect(first.frame.pixels[0]).toBeCloseTo((1 * 2) / 5, 5);
    expect(second.frame.pixels[0]).toBeCloseTo((5 * 2) / 5, 5);
    sock.destroy();
  });

  it("closes the connection on bad magic but keeps serving others", async () => {
    const port = await startServer();
    const bad = await connect(port);
    bad.write(Buffer.from("BOGUS_HEADER"));
    await waitClose(bad);
    // the listener survives: a fresh connection still works
    const good = await connect(port);
    good.write(encodeRequest(2, 2, new Float32Array(4)));
    const raw = await collect(good, HEADER_BYTES + 16);
    expect(raw.subarray(0, 4).toString("ascii")).toBe(RESPONSE_MAGIC);
    good.destroy();
  });

  it("answers an oversized header with an error frame, then closes", async () => {
    const port = await startServer();
    const sock = await connect(port);
    const huge = Buffer.alloc(HEADER_BYTES);
    huge.write("DNZ1", 0, 4, "ascii");
    huge.writeUInt32LE(1 << 16, 4);
    huge.writeUInt32LE(1 << 16, 8);
    sock.write(huge);
    const raw = await collect(sock, HEADER_BYTES);
    expect(raw.subarray(0, 4).toString("ascii")).toBe(ERROR_MAGIC);
    await waitClose(sock);
  });
});

describe("endpoint parsing", () => {
  it("accepts host:port and tcp:// forms", () => {
    expect(parseEndpoint("0.0.0.0:7465")).toEqual({ host: "0.0.0.0", port: 7465 });
    expect(parseEndpoint("tcp://10.1.2.3:99")).toEqual({ host: "10.1.2.3", port: 99 });
    expect(parseEndpoint(":8080")).toEqual({ host: "127.0.0.1", port: 8080 });
  });

  it("rejects malformed endpoints", () => {
    expect(() => parseEndpoint("nope")).toThrow();
    expect(() => parseEndpoint("host:notaport")).toThrow();
  });
});
