"""Binary tensor files, model checkpoints, and dataset manifests.

Tensor file layout ("SSTN"), all integers little-endian:
  magic (4) | version u16 | dtype u8 (0=f32, 1=f64) | rank u8 |
  element count u64 | extents u32 * rank | payload row-major.

Checkpoint layout ("SSCK"):
  magic (4) | version u16 | config JSON length u32 | config JSON |
  tensor count u32 | per tensor: name length u16 | name utf-8 |
  embedded SSTN blob.
"""

from __future__ import annotations

import io as _io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .tensor import Tensor

TENSOR_MAGIC = b"SSTN"
CHECKPOINT_MAGIC = b"SSCK"
FORMAT_VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_TO_CODE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}

FORGERY_TYPES = ("FakeV-FakeA", "FakeV-RealA", "RealV-FakeA", "RealV-RealA")
_TYPE_LABELS = {
    "FakeV-FakeA": (0, 0),
    "FakeV-RealA": (0, 1),
    "RealV-FakeA": (1, 0),
    "RealV-RealA": (1, 1),
}


class FormatError(ValueError):
    """Raised on bad magic, version, dtype code, or truncated payload."""


# -- tensor files ------------------------------------------------------


def tensor_to_bytes(tensor):
    arr = np.ascontiguousarray(tensor.data if isinstance(tensor, Tensor) else tensor)
    code = _DTYPE_TO_CODE.get(arr.dtype.newbyteorder("="))
    if code is None:
        raise FormatError(f"unsupported dtype {arr.dtype}")
    out = _io.BytesIO()
    out.write(TENSOR_MAGIC)
    out.write(struct.pack("<HBBQ", FORMAT_VERSION, code, arr.ndim, arr.size))
    out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    out.write(arr.astype(_DTYPE_CODES[code], copy=False).tobytes())
    return out.getvalue()


def tensor_from_stream(fh):
    header = fh.read(16)
    if len(header) < 16 or header[:4] != TENSOR_MAGIC:
        raise FormatError("bad tensor file magic")
    version, code, rank, count = struct.unpack("<HBBQ", header[4:])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported tensor format version {version}")
    if code not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}")
    ext = fh.read(4 * rank)
    if len(ext) < 4 * rank:
        raise FormatError("truncated extent list")
    shape = struct.unpack(f"<{rank}I", ext)
    if int(np.prod(shape, dtype=np.int64)) != count:
        raise FormatError("element count does not match extents")
    dtype = _DTYPE_CODES[code]
    payload = fh.read(count * dtype.itemsize)
    if len(payload) < count * dtype.itemsize:
        raise FormatError("truncated payload")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_tensor(path, tensor):
    with open(path, "wb") as fh:
        fh.write(tensor_to_bytes(tensor))


def read_tensor(path):
    with open(path, "rb") as fh:
        return tensor_from_stream(fh)


# -- checkpoints -------------------------------------------------------


def checkpoint_to_bytes(model):
    cfg_json = json.dumps(model.cfg.to_dict(), sort_keys=True).encode()
    params = model.named_params()
    out = _io.BytesIO()
    out.write(CHECKPOINT_MAGIC)
    out.write(struct.pack("<HI", FORMAT_VERSION, len(cfg_json)))
    out.write(cfg_json)
    out.write(struct.pack("<I", len(params)))
    for name, p in params.items():
        encoded = name.encode()
        out.write(struct.pack("<H", len(encoded)))
        out.write(encoded)
        out.write(tensor_to_bytes(p))
    return out.getvalue()


def save_checkpoint(path, model):
    data = checkpoint_to_bytes(model)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load_checkpoint(path, expected_cfg=None):
    """Returns (ModelConfig, {name: array}).  Rejects config mismatch."""
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise FormatError("bad checkpoint magic")
        version, cfg_len = struct.unpack("<HI", fh.read(6))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        cfg = ModelConfig.from_dict(json.loads(fh.read(cfg_len).decode()))
        if expected_cfg is not None and cfg.to_dict() != expected_cfg.to_dict():
            raise FormatError("checkpoint config does not match the requested config")
        (count,) = struct.unpack("<I", fh.read(4))
        params = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            params[name] = tensor_from_stream(fh)
    return cfg, params


def restore_model(path, expected_cfg=None):
    from .model import SSAVDModel

    cfg, params = load_checkpoint(path, expected_cfg)
    model = SSAVDModel(cfg, seed=0)
    own = model.named_params()
    if set(own) != set(params):
        raise FormatError("checkpoint parameter names do not match the model")
    for name, arr in params.items():
        if own[name].shape != arr.shape:
            raise FormatError(f"checkpoint tensor {name!r} has shape {arr.shape}")
        own[name].data = arr.astype(own[name].dtype, copy=False)
    return model


# -- manifests ---------------------------------------------------------


@dataclass
class ManifestRecord:
    id: str
    visual_path: str
    audio_path: str
    y_v: int
    y_a: int
    forgery_type: str

    def __post_init__(self):
        if self.forgery_type not in _TYPE_LABELS:
            raise ValueError(f"unknown forgery type {self.forgery_type!r}")
        if (self.y_v, self.y_a) != _TYPE_LABELS[self.forgery_type]:
            raise ValueError(
                f"labels ({self.y_v}, {self.y_a}) inconsistent with type {self.forgery_type}"
            )

    @property
    def y_w(self):
        # derived, never stored: whole video is real only if both are
        return self.y_v & self.y_a

    def to_json(self):
        return json.dumps(
            {
                "id": self.id,
                "visual_path": self.visual_path,
                "audio_path": self.audio_path,
                "y_v": self.y_v,
                "y_a": self.y_a,
                "forgery_type": self.forgery_type,
            },
            sort_keys=True,
        )


def labels_for_type(forgery_type):
    return _TYPE_LABELS[forgery_type]


def write_manifest(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_manifest(path):
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            records.append(ManifestRecord(**d))
    return records
