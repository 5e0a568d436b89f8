"""Wire protocol client for a remote denoiser.

Frames are bit-exact and carried over a byte stream (TCP or unix
socket), one request in flight per session:

    request : b"DNZ1" | u32le height | u32le width | h*w float32le pixels
    response: b"DNZR" | u32le height | u32le width | h*w float32le pixels

Any other magic aborts the session.  The served net is unconditional in
the noise level, so no sigma travels on the wire; the client ignores the
``sigma`` side-channel.
"""

from __future__ import annotations

import socket
import struct

import numpy as np

from .denoisers import Denoiser
from .errors import ConnectivityError, DimensionError, ProtocolError

REQUEST_MAGIC = b"DNZ1"
RESPONSE_MAGIC = b"DNZR"
HEADER = struct.Struct("<4sII")
MAX_PIXELS = 1 << 24  # refuse absurd frame sizes from corrupt headers


def encode_request(values: np.ndarray) -> bytes:
    if values.ndim != 2:
        raise DimensionError(f"can only ship 2D images, got shape {values.shape}")
    h, w = values.shape
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes(order="C")
    return HEADER.pack(REQUEST_MAGIC, h, w) + payload


def encode_response(values: np.ndarray) -> bytes:
    h, w = values.shape
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes(order="C")
    return HEADER.pack(RESPONSE_MAGIC, h, w) + payload


def decode_header(raw: bytes, expected_magic: bytes) -> tuple[int, int]:
    magic, h, w = HEADER.unpack(raw)
    if magic != expected_magic:
        raise ProtocolError(f"bad magic {magic!r}, expected {expected_magic!r}")
    if h * w > MAX_PIXELS:
        raise ProtocolError(f"oversized frame: {h}x{w} pixels")
    return h, w


def parse_endpoint(descriptor: str) -> tuple[str, object]:
    """'host:port', 'tcp://host:port', or 'unix:///path' -> (family, address)."""
    if descriptor.startswith("unix://"):
        return "unix", descriptor[len("unix://"):]
    if descriptor.startswith("tcp://"):
        descriptor = descriptor[len("tcp://"):]
    host, sep, port = descriptor.rpartition(":")
    if not sep or not port.isdigit():
        raise ConnectivityError(f"cannot parse endpoint {descriptor!r}")
    return "tcp", (host or "127.0.0.1", int(port))


class RemoteDenoiser(Denoiser):
    """One image per request over an exclusive-use session."""

    def __init__(self, sock: socket.socket, sigma_lo: float = 0.03,
                 sigma_hi: float = 30.0):
        self._sock = sock
        self.sigma_lo = sigma_lo
        self.sigma_hi = sigma_hi

    def _recv_exact(self, n: int) -> bytes:
        chunks = []
        got = 0
        while got < n:
            try:
                chunk = self._sock.recv(min(65536, n - got))
            except socket.timeout as exc:
                self.close()
                raise ConnectivityError("remote denoiser timed out") from exc
            except OSError as exc:
                self.close()
                raise ConnectivityError(f"remote denoiser transport failed: {exc}") from exc
            if not chunk:
                self.close()
                raise ProtocolError(
                    f"malformed response length: connection closed after {got}/{n} bytes"
                )
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def predict_noise(self, x, sigma=None):
        if self._sock is None:
            raise ConnectivityError("remote denoiser session already closed")
        try:
            self._sock.sendall(encode_request(x))
        except socket.timeout as exc:
            self.close()
            raise ConnectivityError("remote denoiser timed out") from exc
        except OSError as exc:
            self.close()
            raise ConnectivityError(f"remote denoiser transport failed: {exc}") from exc
        try:
            h, w = decode_header(self._recv_exact(HEADER.size), RESPONSE_MAGIC)
        except ProtocolError:
            self.close()
            raise
        if (h, w) != x.shape:
            self.close()
            raise ProtocolError(f"response shape {(h, w)} != request shape {x.shape}")
        payload = self._recv_exact(h * w * 4)
        eps = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(h, w)
        if not np.all(np.isfinite(eps)):
            self.close()
            raise ProtocolError("response contains non-finite values")
        return eps

    def close(self):
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect_denoiser(endpoint: str, timeout: float = 10.0,
                     sigma_lo: float = 0.03, sigma_hi: float = 30.0) -> RemoteDenoiser:
    """Open an exclusive session to a denoiser server."""
    family, address = parse_endpoint(endpoint)
    try:
        if family == "unix":
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.settimeout(timeout)
            sock.connect(address)
        else:
            sock = socket.create_connection(address, timeout=timeout)
    except socket.timeout as exc:
        raise ConnectivityError(f"timed out connecting to {endpoint}") from exc
    except OSError as exc:
        raise ConnectivityError(f"cannot connect to {endpoint}: {exc}") from exc
    sock.settimeout(timeout)
    return RemoteDenoiser(sock, sigma_lo=sigma_lo, sigma_hi=sigma_hi)
