/**
 * Bit-exact wire frames shared with the reconstruction toolkit:
 *
 *   request : "DNZ1" | u32le height | u32le width | h*w float32le pixels
 *   response: "DNZR" | u32le height | u32le width | h*w float32le pixels
 *
 * Anything else aborts the session.  On an oversized header this server
 * first answers with an error frame ("DNZE", zero dimensions, empty
 * payload) so the peer sees a deliberate rejection rather than a hangup.
 */

export const REQUEST_MAGIC = "DNZ1";
export const RESPONSE_MAGIC = "DNZR";
export const ERROR_MAGIC = "DNZE";
export const HEADER_BYTES = 12;
export const MAX_PIXELS = 1 << 22;

export interface Frame {
  height: number;
  width: number;
  pixels: Float32Array;
}

export function encodeFrame(magic: string, height: number, width: number,
                            pixels: Float32Array): Buffer {
  if (pixels.length !== height * width) {
    throw new Error(`payload length ${pixels.length} != ${height}x${width}`);
  }
  const buf = Buffer.alloc(HEADER_BYTES + pixels.length * 4);
  buf.write(magic, 0, 4, "ascii");
  buf.writeUInt32LE(height >>> 0, 4);
  buf.writeUInt32LE(width >>> 0, 8);
  for (let i = 0; i < pixels.length; i++) {
    buf.writeFloatLE(pixels[i], HEADER_BYTES + 4 * i);
  }
  return buf;
}

export function encodeRequest(height: number, width: number,
                              pixels: Float32Array): Buffer {
  return encodeFrame(REQUEST_MAGIC, height, width, pixels);
}

export function encodeResponse(height: number, width: number,
                               pixels: Float32Array): Buffer {
  return encodeFrame(RESPONSE_MAGIC, height, width, pixels);
}

export function encodeErrorFrame(): Buffer {
  return encodeFrame(ERROR_MAGIC, 0, 0, new Float32Array(0));
}

export type HeaderResult =
  | { kind: "need-more" }
  | { kind: "bad-magic"; got: string }
  | { kind: "oversized"; height: number; width: number }
  | { kind: "ok"; height: number; width: number };

export function parseHeader(buf: Buffer, expectedMagic: string): HeaderResult {
  if (buf.length < HEADER_BYTES) return { kind: "need-more" };
  const magic = buf.toString("ascii", 0, 4);
  if (magic !== expectedMagic) return { kind: "bad-magic", got: magic };
  const height = buf.readUInt32LE(4);
  const width = buf.readUInt32LE(8);
  if (height * width > MAX_PIXELS) return { kind: "oversized", height, width };
  return { kind: "ok", height, width };
}

/** Pull one complete frame off the front of a buffer, if present. */
export function takeFrame(buf: Buffer, expectedMagic: string):
    { frame: Frame; rest: Buffer } | HeaderResult {
  const head = parseHeader(buf, expectedMagic);
  if (head.kind !== "ok") return head;
  const total = HEADER_BYTES + head.height * head.width * 4;
  if (buf.length < total) return { kind: "need-more" };
  const pixels = new Float32Array(head.height * head.width);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = buf.readFloatLE(HEADER_BYTES + 4 * i);
  }
  return {
    frame: { height: head.height, width: head.width, pixels },
    rest: buf.subarray(total),
  };
}
