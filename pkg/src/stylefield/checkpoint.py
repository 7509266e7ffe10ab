"""Portable named-tensor checkpoint container.

A checkpoint is a directory holding two files:

``manifest.txt``
    Plain text.  Header lines (format version, stage marker, config hash,
    seed) followed by one ``tensor`` record per entry: name, dtype tag,
    shape, byte offset, byte length, and a CRC32 checksum of the entry's
    bytes.  Records are sorted by name.

``blob.bin``
    The concatenated raw tensor data, little-endian float32, row-major.

Loading verifies every record's extent and checksum against the blob;
save(load(x)) is byte-identical to x.
"""

from __future__ import annotations

import os
import zlib

import numpy as np

from .errors import CheckpointError

FORMAT_TAG = "stylefield.ckpt.v1"
MANIFEST_NAME = "manifest.txt"
BLOB_NAME = "blob.bin"
_DTYPE_TAGS = {"f32": np.dtype("<f4")}


class Checkpoint:
    """Named float32 tensors plus stage metadata."""

    def __init__(self, tensors=None, stage: str = "none",
                 config_hash: str = "", seed: int = 0):
        self.tensors: dict[str, np.ndarray] = {}
        self.stage = stage
        self.config_hash = config_hash
        self.seed = int(seed)
        if tensors:
            for name, value in tensors.items():
                self[name] = value

    def __setitem__(self, name: str, value):
        if any(ch.isspace() for ch in name):
            raise CheckpointError(f"tensor name may not contain whitespace: {name!r}")
        # always copy: the source may be live parameter memory
        arr = np.array(value, dtype="<f4", copy=True)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.tensors[name] = np.ascontiguousarray(arr)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self):
        return sorted(self.tensors)

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith(prefix)}

    def save(self, path):
        os.makedirs(path, exist_ok=True)
        records = []
        blob_parts = []
        offset = 0
        for name in self.names():
            arr = self.tensors[name]
            raw = arr.tobytes()
            crc = zlib.crc32(raw) & 0xFFFFFFFF
            shape = ",".join(str(d) for d in arr.shape)
            records.append(f"tensor {name} f32 {shape} {offset} {len(raw)} {crc:08x}")
            blob_parts.append(raw)
            offset += len(raw)
        lines = [
            f"format {FORMAT_TAG}",
            f"stage {self.stage}",
            f"config_hash {self.config_hash}",
            f"seed {self.seed}",
        ] + records
        with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as handle:
            handle.write("\n".join(lines) + "\n")
        with open(os.path.join(path, BLOB_NAME), "wb") as handle:
            handle.write(b"".join(blob_parts))

    @classmethod
    def load(cls, path) -> "Checkpoint":
        manifest_path = os.path.join(path, MANIFEST_NAME)
        blob_path = os.path.join(path, BLOB_NAME)
        if not os.path.exists(manifest_path) or not os.path.exists(blob_path):
            raise CheckpointError(f"not a checkpoint directory: {path}")
        with open(manifest_path, "r", encoding="utf-8") as handle:
            lines = [ln.rstrip("\n") for ln in handle if ln.strip()]
        with open(blob_path, "rb") as handle:
            blob = handle.read()

        header = {}
        records = []
        for line in lines:
            kind, _, rest = line.partition(" ")
            if kind == "tensor":
                records.append(rest)
            else:
                header[kind] = rest
        if header.get("format") != FORMAT_TAG:
            raise CheckpointError(f"unsupported checkpoint format: {header.get('format')!r}")

        ckpt = cls(stage=header.get("stage", "none"),
                   config_hash=header.get("config_hash", ""),
                   seed=int(header.get("seed", "0")))
        end = 0
        for rest in records:
            parts = rest.split(" ")
            if len(parts) != 6:
                raise CheckpointError(f"malformed tensor record: {rest!r}")
            name, tag, shape_text, offset_text, length_text, crc_text = parts
            if tag not in _DTYPE_TAGS:
                raise CheckpointError(f"unknown dtype tag {tag!r} for tensor {name}")
            shape = tuple(int(d) for d in shape_text.split(","))
            offset, length = int(offset_text), int(length_text)
            if offset < 0 or offset + length > len(blob):
                raise CheckpointError(f"tensor {name} extent [{offset}, {offset + length}) "
                                      f"outside blob of {len(blob)} bytes")
            raw = blob[offset:offset + length]
            if (zlib.crc32(raw) & 0xFFFFFFFF) != int(crc_text, 16):
                raise CheckpointError(f"checksum mismatch for tensor {name}")
            arr = np.frombuffer(raw, dtype=_DTYPE_TAGS[tag])
            if int(np.prod(shape)) != arr.size:
                raise CheckpointError(f"shape/length mismatch for tensor {name}")
            ckpt.tensors[name] = arr.reshape(shape).copy()
            end = max(end, offset + length)
        if end != len(blob):
            raise CheckpointError(f"blob has {len(blob) - end} trailing bytes not "
                                  "covered by the manifest")
        return ckpt


def bitwise_equal_group(a: Checkpoint, b: Checkpoint, prefix: str) -> bool:
    """True when both checkpoints hold identical bytes for every tensor under prefix."""
    ga, gb = a.group(prefix), b.group(prefix)
    if ga.keys() != gb.keys():
        return False
    return all(ga[k].tobytes() == gb[k].tobytes() for k in ga)
