"""Newline-delimited JSON client for remote detector oracles.

One request per line over TCP or a child process's stdin/stdout:

    request:  {"v":1,"id":<uint64>,"width":<int>,"height":<int>,
               "pixels":"<base64 row-major 8-bit intensities>"}
    response: {"v":1,"id":<same>,"detections":[{"box":[x,y,w,h],
               "obj":<float>,"cls":"<string>"}]}
    error:    {"v":1,"id":<uint64>,"error":"<message>"}

Responses arrive in request order and must echo ids exactly. A remote
connection is serial-only: one in-flight request, one owner.
"""

from __future__ import annotations

import base64
import json
import os
import selectors
import shlex
import socket
import subprocess
import time

import numpy as np

from .imaging import BoundingBox, GrayImage
from .oracle import Detection, DetectorOracle, QueryLedger

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0


class OracleError(Exception):
    """Base class for remote oracle failures."""


class OracleTimeoutError(OracleError):
    pass


class OracleConnectionError(OracleError):
    pass


class OracleProtocolError(OracleError):
    """Malformed response, id mismatch, or remote-reported error."""


def encode_request(request_id: int, image: GrayImage) -> str:
    pixels = np.rint(image.pixels * 255.0).astype(np.uint8)
    return json.dumps(
        {
            "v": PROTOCOL_VERSION,
            "id": request_id,
            "width": image.width,
            "height": image.height,
            "pixels": base64.b64encode(pixels.tobytes()).decode("ascii"),
        }
    )


def decode_response(line: str, expected_id: int) -> list[Detection]:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise OracleProtocolError(f"response is not valid JSON: {exc}") from exc
    if not isinstance(msg, dict):
        raise OracleProtocolError("response is not a JSON object")
    if msg.get("v") != PROTOCOL_VERSION:
        raise OracleProtocolError(f"unsupported protocol version: {msg.get('v')!r}")
    if msg.get("id") != expected_id:
        raise OracleProtocolError(
            f"response id {msg.get('id')!r} does not match request id {expected_id}"
        )
    if "error" in msg:
        raise OracleProtocolError(f"remote error: {msg['error']}")
    dets = msg.get("detections")
    if not isinstance(dets, list):
        raise OracleProtocolError("response lacks a detections list")
    out = []
    try:
        for d in dets:
            x, y, w, h = d["box"]
            out.append(
                Detection(
                    BoundingBox(int(x), int(y), int(w), int(h)),
                    float(d["obj"]),
                    str(d["cls"]),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise OracleProtocolError(f"malformed detection entry: {exc}") from exc
    return out


class TcpChannel:
    """Line-oriented TCP transport with reconnect support."""

    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        self.host = host
        self.port = port
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._file = None

    def _ensure_open(self) -> None:
        if self._sock is not None:
            return
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
            self._file = self._sock.makefile("rb")
        except OSError as exc:
            self._sock = None
            raise OracleConnectionError(f"cannot connect to {self.host}:{self.port}: {exc}") from exc

    def reset(self) -> None:
        self.close()

    def close(self) -> None:
        if self._file is not None:
            try:
                self._file.close()
            except OSError:
                pass
            self._file = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def round_trip(self, line: str) -> str:
        self._ensure_open()
        assert self._sock is not None and self._file is not None
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
            reply = self._file.readline()
        except socket.timeout as exc:
            raise OracleTimeoutError(f"no response within {self.timeout}s") from exc
        except OSError as exc:
            raise OracleConnectionError(f"connection failed: {exc}") from exc
        if not reply:
            raise OracleConnectionError("connection closed by server")
        return reply.decode("utf-8")


class ProcessChannel:
    """Line-oriented transport over a child process's stdin/stdout."""

    def __init__(self, command: str | list[str], timeout: float = DEFAULT_TIMEOUT):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._buf = b""

    def _ensure_open(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            self._proc = None
            raise OracleConnectionError(f"cannot start {self.argv[0]}: {exc}") from exc
        self._buf = b""
        os.set_blocking(self._proc.stdout.fileno(), False)

    def reset(self) -> None:
        self.close()

    def close(self) -> None:
        if self._proc is None:
            return
        proc, self._proc = self._proc, None
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def _read_line(self) -> bytes:
        assert self._proc is not None
        deadline = time.monotonic() + self.timeout
        sel = selectors.DefaultSelector()
        sel.register(self._proc.stdout, selectors.EVENT_READ)
        try:
            while b"\n" not in self._buf:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise OracleTimeoutError(f"no response within {self.timeout}s")
                if not sel.select(timeout=remaining):
                    continue
                chunk = self._proc.stdout.read()
                if chunk is None:
                    continue
                if chunk == b"":
                    raise OracleConnectionError("oracle process closed its stdout")
                self._buf += chunk
        finally:
            sel.close()
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def round_trip(self, line: str) -> str:
        self._ensure_open()
        assert self._proc is not None
        try:
            self._proc.stdin.write(line.encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise OracleConnectionError(f"cannot write to oracle process: {exc}") from exc
        return self._read_line().decode("utf-8")


class RemoteOracle(DetectorOracle):
    """Protocol client oracle. Serial-only: callers must not share it."""

    concurrent_safe = False

    def __init__(self, channel, retries: int = 1, ledger: QueryLedger | None = None):
        super().__init__(ledger)
        self.channel = channel
        self.retries = retries
        self._next_id = 0

    def close(self) -> None:
        self.channel.close()

    def detect(self, image: GrayImage) -> list[Detection]:
        """One query; transport failures retry on a fresh connection.

        Failed attempts never increment the ledger and protocol errors are
        not retried (the stream can no longer be trusted to stay in sync).
        """
        last: OracleError | None = None
        for attempt in range(self.retries + 1):
            request_id = self._next_id
            self._next_id += 1
            try:
                reply = self.channel.round_trip(encode_request(request_id, image))
                detections = decode_response(reply, request_id)
            except (OracleTimeoutError, OracleConnectionError) as exc:
                last = exc
                self.channel.reset()
                continue
            except OracleProtocolError:
                self.channel.reset()
                raise
            self.ledger.increment()
            return detections
        assert last is not None
        raise last
