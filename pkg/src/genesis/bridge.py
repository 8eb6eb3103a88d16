"""Framed stdio protocol so other languages can drive the engine on
in-memory arrays, no files involved.

Frame layout (both directions, little-endian):
  bytes 0-3  magic "GBR1"
  bytes 4-7  u32 header length
  header     UTF-8 JSON
  payload    concatenated f32le arrays; shapes listed in the header

Request headers:
  {"op":"transform", "scheme":{...}, "master_seed":u64, "sample_index":u64,
   "arrays":[{"shape":[d,h,w]}]}
  {"op":"generate_pairs", "scheme":{...}, "master_seed":u64, "n":int,
   "size_range":{"min":[...],"max":[...]}|null, "arrays":[{"shape":...},...]}

Responses carry {"ok":true, ...op result..., "arrays":[...]} plus payload,
or {"ok":false, "error":{"category":..., "message":...}} with no payload.
The error category strings are the engine's exception categories.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from .errors import ConfigError, GenesisError, IoError
from .inproc import generate_pairs_inproc, transform_patch
from .patches import SizeRange

BRIDGE_MAGIC = b"GBR1"


def _pack(header: dict, arrays: list[np.ndarray]) -> bytes:
    header = dict(header)
    header["arrays"] = [{"shape": list(a.shape)} for a in arrays]
    body = json.dumps(header, separators=(",", ":")).encode("utf-8")
    chunks = [BRIDGE_MAGIC, len(body).to_bytes(4, "little"), body]
    for a in arrays:
        chunks.append(np.ascontiguousarray(a, dtype="<f4").tobytes())
    return b"".join(chunks)


def _unpack(raw: bytes) -> tuple[dict, list[np.ndarray]]:
    if len(raw) < 8 or raw[:4] != BRIDGE_MAGIC:
        raise IoError("bad bridge frame magic", code="bad_magic")
    header_len = int.from_bytes(raw[4:8], "little")
    if len(raw) < 8 + header_len:
        raise IoError("truncated bridge frame header", code="truncated")
    try:
        header = json.loads(raw[8 : 8 + header_len])
    except ValueError as exc:
        raise ConfigError(f"bridge header is not valid JSON: {exc}") from exc
    arrays = []
    offset = 8 + header_len
    for spec in header.get("arrays", []):
        shape = tuple(int(s) for s in spec["shape"])
        count = int(np.prod(shape)) if shape else 0
        blob = raw[offset : offset + count * 4]
        if len(blob) != count * 4:
            raise IoError("truncated bridge frame payload", code="truncated")
        arrays.append(np.frombuffer(blob, dtype="<f4").reshape(shape).copy())
        offset += count * 4
    if offset != len(raw):
        raise IoError("trailing bytes in bridge frame", code="trailing_data")
    return header, arrays


def handle_request(raw: bytes) -> bytes:
    try:
        header, arrays = _unpack(raw)
        op = header.get("op")
        if op == "transform":
            if len(arrays) != 1:
                raise ConfigError("transform expects exactly one array")
            distorted, record = transform_patch(
                arrays[0],
                header.get("scheme", {}),
                int(header["master_seed"]),
                int(header["sample_index"]),
            )
            return _pack({"ok": True, "record": record}, [distorted])
        if op == "generate_pairs":
            size_range = None
            if header.get("size_range"):
                sr = header["size_range"]
                size_range = SizeRange.of(sr["min"], sr["max"])
            records = []
            out_arrays: list[np.ndarray] = []
            for original, distorted, record in generate_pairs_inproc(
                arrays,
                header.get("scheme", {}),
                int(header["n"]),
                int(header["master_seed"]),
                size_range,
            ):
                records.append(record)
                out_arrays.append(original)
                out_arrays.append(distorted)
            return _pack({"ok": True, "records": records}, out_arrays)
        raise ConfigError(f"unknown bridge op {op!r}")
    except GenesisError as exc:
        return _pack(
            {"ok": False, "error": {"category": exc.category, "message": str(exc)}}, []
        )
    except (KeyError, TypeError, ValueError) as exc:
        return _pack(
            {"ok": False, "error": {"category": "config", "message": f"bad request: {exc}"}},
            [],
        )


def _read_exact(stream, count: int) -> bytes | None:
    chunks = b""
    while len(chunks) < count:
        piece = stream.read(count - len(chunks))
        if not piece:
            return None if not chunks else chunks
        chunks += piece
    return chunks


def serve(stdin=None, stdout=None) -> int:
    """Answer framed requests until EOF; one response per request."""
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    while True:
        prefix = _read_exact(stdin, 8)
        if prefix is None:
            return 0
        if len(prefix) < 8 or prefix[:4] != BRIDGE_MAGIC:
            stdout.write(
                _pack({"ok": False, "error": {"category": "io",
                                              "message": "bad bridge frame magic"}}, [])
            )
            stdout.flush()
            return 3
        header_len = int.from_bytes(prefix[4:8], "little")
        body = _read_exact(stdin, header_len)
        if body is None or len(body) < header_len:
            stdout.write(
                _pack({"ok": False, "error": {"category": "io",
                                              "message": "truncated frame"}}, [])
            )
            stdout.flush()
            return 3
        try:
            header = json.loads(body)
            payload_len = sum(
                int(np.prod([int(s) for s in spec["shape"]])) * 4
                for spec in header.get("arrays", [])
            )
        except (ValueError, KeyError, TypeError):
            payload_len = 0
        payload = _read_exact(stdin, payload_len) if payload_len else b""
        if payload is None:
            payload = b""
        stdout.write(handle_request(prefix + body + payload))
        stdout.flush()
