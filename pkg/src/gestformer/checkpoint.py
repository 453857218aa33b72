"""Binary checkpoint format.

Layout (all integers little-endian u32 unless noted)::

    b"MWPT"  version  config_len  config_bytes(utf-8 key=value lines)
    tensor_count
    repeated: name_len  name_bytes  rank  extents[rank]  float64-le payload
"""

import struct

import numpy as np

from .errors import FormatError, LengthError
from .model import ModelConfig, init_weights

MAGIC = b"MWPT"
VERSION = 1


def save_checkpoint(path, model):
    params = model.parameters()
    config = model.config.to_text().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(config)))
        fh.write(config)
        fh.write(struct.pack("<I", len(params)))
        for name, tensor in params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack(f"<I{tensor.ndim}I", tensor.ndim, *tensor.shape))
            fh.write(tensor.data.astype("<f8", copy=False).tobytes(order="C"))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise LengthError(what, n, len(self.buf) - self.pos, offset=self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)", offset=0)
    version = r.u32("version")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}", offset=4)
    config_len = r.u32("config length")
    config = ModelConfig.from_text(r.take(config_len, "config").decode("utf-8"))
    model = init_weights(config, seed=0)
    params = model.parameters()
    count_at = r.pos
    count = r.u32("tensor count")
    if count != len(params):
        raise FormatError(f"{path}: {count} tensors stored, config implies {len(params)}", offset=count_at)
    for expected_name, tensor in params.items():
        at = r.pos
        name = r.take(r.u32("name length"), "name").decode("utf-8")
        if name != expected_name:
            raise FormatError(f"{path}: expected tensor {expected_name!r}, found {name!r}", offset=at)
        rank = r.u32("rank")
        shape = struct.unpack(f"<{rank}I", r.take(4 * rank, "extents"))
        if shape != tensor.shape:
            raise FormatError(f"{path}: tensor {name!r} has shape {shape}, expected {tensor.shape}", offset=at)
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        payload = r.take(nbytes, f"payload of {name!r}")
        tensor.data = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - r.pos} trailing bytes", offset=r.pos)
    return model
