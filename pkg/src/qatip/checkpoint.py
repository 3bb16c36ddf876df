"""Binary model checkpoints.

Layout: magic ``QTIP`` (4 bytes) | format version, u32 little-endian |
header length, u64 little-endian | UTF-8 JSON header | payload.  The header
holds ``{"config": ..., "manifest": [...]}`` with the manifest sorted by
parameter name; the payload is the concatenation of every parameter as
little-endian float32, at the byte offsets the manifest declares.  JSON is
serialized canonically (sorted keys, no whitespace), so save -> load -> save
reproduces the file byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from typing import Mapping

import numpy as np

MAGIC = b"QTIP"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sIQ")


class CheckpointError(ValueError):
    pass


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def model_from_config(config: Mapping):
    """Instantiate an untrained model from a checkpoint config snapshot."""
    from .rnn import QaRnnModel, RnnConfig
    from .transformer import QaTransformerModel, TransformerConfig

    family = config.get("family")
    if family == "transformer":
        cls, cfg_cls = QaTransformerModel, TransformerConfig
    elif family == "rnn":
        cls, cfg_cls = QaRnnModel, RnnConfig
    else:
        raise CheckpointError(f"config field family has unknown value {family!r}")
    kwargs = {}
    for f in dataclasses.fields(cfg_cls):
        if f.name not in config:
            raise CheckpointError(f"config is missing field {f.name}")
        kwargs[f.name] = config[f.name]
    return cls(cfg_cls(**kwargs))


def save_checkpoint(model, config: Mapping, path: str) -> None:
    """Write ``model``'s parameters with ``config`` stored verbatim.

    ``config`` must contain the model-architecture fields ``load_checkpoint``
    needs to rebuild the model (``model.config_dict()`` provides them).
    """
    params = sorted(model.params.parameters(), key=lambda p: p.name)
    manifest = []
    chunks = []
    offset = 0
    for p in params:
        raw = np.ascontiguousarray(p.tensor.data, dtype="<f4").tobytes()
        manifest.append(
            {
                "name": p.name,
                "shape": list(p.tensor.data.shape),
                "offset": offset,
                "len": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    header = _canonical_json({"config": dict(config), "manifest": manifest})
    with open(path, "wb") as fh:
        fh.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)))
        fh.write(header)
        for chunk in chunks:
            fh.write(chunk)


def _parse_header(blob: bytes) -> tuple[dict, bytes]:
    if len(blob) < _PREAMBLE.size:
        raise CheckpointError(
            f"truncated preamble: need {_PREAMBLE.size} bytes, got {len(blob)}"
        )
    magic, version, header_len = _PREAMBLE.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {version}")
    end = _PREAMBLE.size + header_len
    if end > len(blob):
        raise CheckpointError(
            f"header length {header_len} exceeds file size {len(blob)}"
        )
    try:
        header = json.loads(blob[_PREAMBLE.size : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"header is not valid JSON: {exc}") from None
    if not isinstance(header, dict):
        raise CheckpointError("header is not a JSON object")
    for key in ("config", "manifest"):
        if key not in header:
            raise CheckpointError(f"header missing field {key}")
    return header, blob[end:]


def _validate_manifest(manifest, payload_len: int) -> None:
    if not isinstance(manifest, list):
        raise CheckpointError("manifest is not a list")
    total = 0
    for entry in manifest:
        for key in ("name", "shape", "offset", "len"):
            if not isinstance(entry, dict) or key not in entry:
                raise CheckpointError(f"manifest entry missing field {key}")
        name, shape = entry["name"], entry["shape"]
        expect = 4 * int(np.prod(shape, dtype=np.int64)) if shape else 4
        if entry["len"] != expect:
            raise CheckpointError(
                f"manifest entry {name}: len {entry['len']} does not match shape {shape}"
            )
        if entry["offset"] < 0 or entry["offset"] + entry["len"] > payload_len:
            raise CheckpointError(
                f"manifest entry {name}: offset {entry['offset']} len {entry['len']} "
                f"outside payload of {payload_len} bytes"
            )
        total += entry["len"]
    if total != payload_len:
        raise CheckpointError(
            f"payload has {payload_len} bytes but manifest expects {total}"
        )


def load_checkpoint(path: str):
    """Rebuild the saved model; returns ``(model, config)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header, payload = _parse_header(blob)
    manifest = header["manifest"]
    _validate_manifest(manifest, len(payload))
    model = model_from_config(header["config"])
    want = {p.name: p.tensor for p in model.params.parameters()}
    seen = set()
    for entry in manifest:
        name = entry["name"]
        if name not in want:
            raise CheckpointError(f"manifest has unknown parameter {name}")
        tensor = want[name]
        shape = tuple(entry["shape"])
        if shape != tensor.data.shape:
            raise CheckpointError(
                f"parameter {name}: checkpoint shape {list(shape)} does not match "
                f"model shape {list(tensor.data.shape)}"
            )
        raw = payload[entry["offset"] : entry["offset"] + entry["len"]]
        values = np.frombuffer(raw, dtype="<f4").reshape(shape)
        tensor.data = values.astype(tensor.data.dtype)
        seen.add(name)
    missing = sorted(set(want) - seen)
    if missing:
        raise CheckpointError(f"manifest is missing parameter {missing[0]}")
    return model, header["config"]
