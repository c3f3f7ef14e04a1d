"""
trajlet.checkpoint

Encoder checkpoints: an in-memory :class:`Checkpoint` and its versioned
binary file format.

Layout of a ``.trjl`` file, all integers little-endian::

    b'TRJL'                     magic
    u32                         format version (1)
    u32 + bytes                 encoder config, YAML
    u32 + bytes                 metadata, YAML
    u32                         tensor count
    per tensor, in canonical parameter order:
      u16 + bytes               name, UTF-8
      u32                       ndim
      u32 * ndim                shape
      f32 * prod(shape)         values, C order

A ``manifest.yml`` written beside it repeats the config and metadata in
readable form.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import logging
import struct
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path
from typing import Any, BinaryIO, Dict, Union

import numpy as np
from yaml import safe_dump, safe_load

from .encoder import EncoderParams, parameter_shapes
from .exceptions import FormatError
from .models import EncoderConfig, parse_model


__all__ = (
    'CHECKPOINT_FILE',
    'CHECKPOINT_MAGIC',
    'CHECKPOINT_VERSION',
    'MANIFEST_FILE',
    'Checkpoint',

    'load_checkpoint',
    'read_checkpoint',
    'save_checkpoint',
    'write_checkpoint',
)


logger = logging.getLogger(__name__)


CHECKPOINT_MAGIC = b'TRJL'
CHECKPOINT_VERSION = 1
CHECKPOINT_FILE = 'checkpoint.trjl'
MANIFEST_FILE = 'manifest.yml'


@dataclass(eq=False)
class Checkpoint:
    """
    An encoder ready for inference. The parameters are always the float32
    rounding of the trained ones, so a checkpoint in memory embeds exactly
    like the same checkpoint read back from disk.
    """

    params: EncoderParams
    metadata: Dict[str, Any] = field(default_factory=dict)


    def __post_init__(self):
        self.params = self.params.rounded_to_float32()


    @property
    def config(self) -> EncoderConfig:
        return self.params.config


    def get(self, key: str, default: Any = None) -> Any:
        return self.metadata.get(key, default)


def _dump_yaml_bytes(data: Dict[str, Any]) -> bytes:
    return safe_dump(data, sort_keys=True, default_flow_style=False).encode('utf-8')


def _pack_block(data: bytes) -> bytes:
    return struct.pack('<I', len(data)) + data


def write_checkpoint(ckpt: Checkpoint, out: BinaryIO) -> None:
    out.write(CHECKPOINT_MAGIC)
    out.write(struct.pack('<I', CHECKPOINT_VERSION))
    out.write(_pack_block(_dump_yaml_bytes(ckpt.config.model_dump())))
    out.write(_pack_block(_dump_yaml_bytes(ckpt.metadata)))

    shapes = parameter_shapes(ckpt.config)
    out.write(struct.pack('<I', len(shapes)))
    for name, shape in shapes:
        encoded = name.encode('utf-8')
        out.write(struct.pack('<H', len(encoded)))
        out.write(encoded)
        out.write(struct.pack('<I', len(shape)))
        out.write(struct.pack(f'<{len(shape)}I', *shape))
        out.write(ckpt.params[name].astype('<f4').tobytes(order='C'))


class _Reader:

    def __init__(self, data: bytes, filename: str = None):
        self.data = data
        self.offset = 0
        self.filename = filename


    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise FormatError("checkpoint is truncated", filename=self.filename)
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk


    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


    def block(self) -> bytes:
        size, = self.unpack('<I')
        return self.take(size)


def read_checkpoint(source: BinaryIO, filename: str = None) -> Checkpoint:
    """
    :raises FormatError: for a bad magic, an unsupported version, a
      truncated file, or tensors that do not match the stored config
    """

    reader = _Reader(source.read(), filename)

    if reader.take(4) != CHECKPOINT_MAGIC:
        raise FormatError("not a trajlet checkpoint (bad magic)", filename=filename)

    version, = reader.unpack('<I')
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}",
                          filename=filename)

    config = parse_model(EncoderConfig, safe_load(reader.block().decode('utf-8')),
                         what="checkpoint encoder", filename=filename)
    metadata = safe_load(reader.block().decode('utf-8')) or {}

    count, = reader.unpack('<I')
    tensors = {}
    for _ in range(count):
        name_len, = reader.unpack('<H')
        name = reader.take(name_len).decode('utf-8')
        ndim, = reader.unpack('<I')
        shape = reader.unpack(f'<{ndim}I')
        size = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(reader.take(4 * size), dtype='<f4')
        tensors[name] = values.reshape(shape).astype(np.float64)

    if reader.offset != len(reader.data):
        raise FormatError("trailing bytes after checkpoint tensors",
                          filename=filename)

    try:
        params = EncoderParams(config, tensors)
    except ValueError as e:
        raise FormatError(f"checkpoint tensors are inconsistent: {e}",
                          filename=filename, original_exception=e) from e

    return Checkpoint(params, metadata)


def save_checkpoint(
        ckpt: Checkpoint,
        directory: Union[str, Path],
        filename: str = CHECKPOINT_FILE) -> Path:
    """
    Write ``ckpt`` into ``directory`` as ``filename`` and refresh the
    directory's ``manifest.yml``. Returns the checkpoint path.
    """

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    buffer = BytesIO()
    write_checkpoint(ckpt, buffer)

    path = directory / filename
    path.write_bytes(buffer.getvalue())

    manifest = {
        'format': 'trajlet-checkpoint',
        'version': CHECKPOINT_VERSION,
        'file': filename,
        'parameters': ckpt.params.count(),
        'encoder': ckpt.config.model_dump(),
        'metadata': ckpt.metadata,
    }
    (directory / MANIFEST_FILE).write_bytes(_dump_yaml_bytes(manifest))

    logger.info(f"Wrote checkpoint {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint file, or the ``checkpoint.trjl`` inside a directory.
    """

    path = Path(path)
    if path.is_dir():
        path = path / CHECKPOINT_FILE

    logger.debug(f"Loading checkpoint {path}")
    with open(path, 'rb') as fd:
        return read_checkpoint(fd, filename=str(path))


# The end.
