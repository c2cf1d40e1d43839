"""
Checkpoint container.

Layout (all integers little-endian):
    8 bytes   magic b'FAUDCKPT'
    uint32    format version
    uint32    header length, then a UTF-8 JSON header (sorted keys)
    uint32    array count, then for every array in sorted name order:
              uint16 name length, name, uint8 dtype length, dtype string,
              uint8 ndim, ndim x uint32 shape, uint64 byte count, raw bytes
Arrays are stored under 'raw/<name>' and 'ema/<name>'.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict

import numpy as np

from dit.model import DitConfig, ToyDiT
from utils.errors import CheckpointError

MAGIC = b'FAUDCKPT'
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: DitConfig
    weights: Dict[str, np.ndarray]
    ema_weights: Dict[str, np.ndarray]
    step: int = 0
    metadata: dict = field(default_factory=dict)

    def build_model(self, use_ema: bool = True, logger=None) -> ToyDiT:
        model = ToyDiT(self.config, logger=logger)
        model.load_state_dict(self.ema_weights if use_ema and self.ema_weights else self.weights)
        return model


def _encode_array(name: str, array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array)
    dtype = array.dtype.newbyteorder('<')
    data = array.astype(dtype, copy=False).tobytes()
    name_bytes = name.encode('utf-8')
    dtype_bytes = dtype.str.encode('ascii')
    parts = [struct.pack('<H', len(name_bytes)), name_bytes,
             struct.pack('<B', len(dtype_bytes)), dtype_bytes,
             struct.pack('<B', array.ndim)]
    parts.extend(struct.pack('<I', dim) for dim in array.shape)
    parts.append(struct.pack('<Q', len(data)))
    parts.append(data)
    return b''.join(parts)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise CheckpointError(f"Checkpoint {self.path} is truncated")
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def checkpoint_bytes(checkpoint: Checkpoint) -> bytes:
    header = {
        'config': checkpoint.config.to_dict(),
        'step': int(checkpoint.step),
        'metadata': checkpoint.metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
    arrays = {f'raw/{k}': v for k, v in checkpoint.weights.items()}
    arrays.update({f'ema/{k}': v for k, v in checkpoint.ema_weights.items()})
    parts = [MAGIC, struct.pack('<I', FORMAT_VERSION), struct.pack('<I', len(header_bytes)), header_bytes,
             struct.pack('<I', len(arrays))]
    parts.extend(_encode_array(name, arrays[name]) for name in sorted(arrays))
    return b''.join(parts)


def save_checkpoint(checkpoint: Checkpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(checkpoint))
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    reader = _Reader(path.read_bytes(), path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path} is not a FreeAudio checkpoint")
    version = reader.unpack('<I')
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} has checkpoint version {version}, expected {FORMAT_VERSION}")
    header_length = reader.unpack('<I')
    try:
        header = json.loads(reader.take(header_length).decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Corrupt checkpoint header in {path}: {e}")

    weights, ema_weights = {}, {}
    for _ in range(reader.unpack('<I')):
        name = reader.take(reader.unpack('<H')).decode('utf-8')
        dtype = np.dtype(reader.take(reader.unpack('<B')).decode('ascii'))
        ndim = reader.unpack('<B')
        shape = tuple(reader.unpack('<I') for _ in range(ndim))
        data = reader.take(reader.unpack('<Q'))
        array = np.frombuffer(data, dtype=dtype).reshape(shape).astype(np.float64)
        group, _, key = name.partition('/')
        (weights if group == 'raw' else ema_weights)[key] = array

    return Checkpoint(config=DitConfig.from_dict(header['config']), weights=weights,
                      ema_weights=ema_weights, step=header.get('step', 0),
                      metadata=header.get('metadata', {}))
