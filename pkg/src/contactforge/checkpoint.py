"""Head parameter checkpoints: JSON header + little-endian float32 payload.

Layout: 4-byte magic ``CFCK``, uint32 (LE) header length, UTF-8 JSON header,
raw float32 tensor data in header order. The header carries a mandatory
``version`` field, the architecture config, and the tensor name/shape table.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from .head import HeadConfig, HeadParams

MAGIC = b"CFCK"
FORMAT_VERSION = 1


def save_checkpoint(path, params: HeadParams) -> None:
    tensors = [(name, arr) for name, arr in params.named_arrays()]
    header = {
        "version": FORMAT_VERSION,
        "dtype": "<f4",
        "config": asdict(params.config),
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in tensors],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> HeadParams:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if "version" not in header:
            raise ValueError("checkpoint header is missing the version field")
        if header["version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        config = HeadConfig(**header["config"])
        arrays: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise ValueError(f"checkpoint truncated in tensor {entry['name']!r}")
            arrays[entry["name"]] = (
                np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
            )

    template = _skeleton(config)
    expected = {name for name, _ in template.named_arrays()}
    if expected != set(arrays):
        missing = expected - set(arrays)
        extra = set(arrays) - expected
        raise ValueError(f"checkpoint tensors mismatch (missing {missing}, extra {extra})")
    for name, a in template.named_arrays():
        if arrays[name].shape != a.shape:
            raise ValueError(
                f"tensor {name!r} has shape {arrays[name].shape}, expected {a.shape}")
    return template.replace_arrays(arrays)


def _skeleton(config: HeadConfig) -> HeadParams:
    c = config
    stub_w, stub_b = [], []
    cin = c.in_channels
    for _ in range(c.stub_layers):
        stub_w.append(np.zeros((3, 3, cin, c.channels)))
        stub_b.append(np.zeros(c.channels))
        cin = c.channels
    return HeadParams(
        config=c,
        stub_w=stub_w,
        stub_b=stub_b,
        att_w=np.zeros((3, 3, c.channels, c.att_channels)),
        att_b=np.zeros(c.att_channels),
        att_cls_w=np.zeros((1, 1, c.att_channels, c.num_classes)),
        att_cls_b=np.zeros(c.num_classes),
        part_w=np.zeros((c.num_classes, 3, 3, c.channels, c.part_channels)),
        part_b=np.zeros((c.num_classes, c.part_channels)),
        out_w=np.zeros((1, 1, c.concat_channels, c.num_classes)),
        out_b=np.zeros(c.num_classes),
        norm_gain=np.ones(c.concat_channels) if c.norm == "affine" else None,
        norm_bias=np.zeros(c.concat_channels) if c.norm == "affine" else None,
    )
