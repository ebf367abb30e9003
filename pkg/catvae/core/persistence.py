"""Weight file format shared by the encoder/decoder, classifier bank and prior.

Layout (all integers little-endian):

    offset  size  field
    0       8     magic b"CATVAEW\\x00"
    8       2     uint16 format version (currently 1)
    10      32    SHA-256 digest of the dataset schema (raw bytes)
    42      4     uint32 length L of the directory
    46      L     UTF-8 JSON directory:
                  {"kind": str, "meta": {...},
                   "slices": [{"name": str, "shape": [int, ...], "offset": int}, ...]}
    46+L    8*N   float64 little-endian parameter values, N = total size

Slice offsets count float64 elements from the start of the value block.
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
from loguru import logger

from catvae.core.errors import PersistenceError

MAGIC = b"CATVAEW\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sH32sI")


def write_weight_file(
    path: Path,
    kind: str,
    schema_hash: str,
    slices: List[Dict[str, Any]],
    values: np.ndarray,
    meta: Dict[str, Any] | None = None,
) -> None:
    directory = json.dumps(
        {"kind": kind, "meta": meta or {}, "slices": slices}, sort_keys=True
    ).encode("utf-8")
    digest = bytes.fromhex(schema_hash)
    if len(digest) != 32:
        raise PersistenceError(f"Schema hash must be a SHA-256 hex digest, got {schema_hash!r}")
    payload = np.ascontiguousarray(values, dtype="<f8").tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(_HEADER.pack(MAGIC, FORMAT_VERSION, digest, len(directory)))
        handle.write(directory)
        handle.write(payload)
    logger.debug(f"Wrote {kind} weights ({values.size} values) to {path}")


def read_weight_file(
    path: Path, expected_kind: str | None = None, expected_schema_hash: str | None = None
) -> Tuple[Dict[str, Any], np.ndarray]:
    """Return (directory, values). Validates magic, version, kind and schema hash."""
    path = Path(path)
    if not path.is_file():
        raise PersistenceError(f"Weight file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise PersistenceError(f"Truncated weight file: {path}")
    magic, version, digest, dir_len = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise PersistenceError(f"Not a catvae weight file: {path}")
    if version != FORMAT_VERSION:
        raise PersistenceError(f"Unsupported weight file version {version} in {path}")
    start = _HEADER.size
    try:
        directory = json.loads(raw[start : start + dir_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"Corrupt directory in {path}: {exc}") from exc
    if expected_kind is not None and directory.get("kind") != expected_kind:
        raise PersistenceError(f"Expected a '{expected_kind}' weight file, found '{directory.get('kind')}'")
    if expected_schema_hash is not None and digest.hex() != expected_schema_hash:
        raise PersistenceError(f"Schema hash mismatch for {path}")
    body = raw[start + dir_len :]
    if len(body) % 8:
        raise PersistenceError(f"Truncated value block in {path}")
    values = np.frombuffer(body, dtype="<f8").astype(np.float64)
    expected = sum(int(np.prod(s["shape"], dtype=np.int64)) for s in directory["slices"])
    if values.size != expected:
        raise PersistenceError(f"{path}: directory describes {expected} values, file holds {values.size}")
    directory["schema_hash"] = digest.hex()
    return directory, values
