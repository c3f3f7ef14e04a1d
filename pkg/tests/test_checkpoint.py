"""
trajlet - test_checkpoint

Unit tests for trajlet.checkpoint.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import struct
import unittest
from io import BytesIO
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
from yaml import safe_load

from trajlet.checkpoint import (
    CHECKPOINT_FILE, MANIFEST_FILE, Checkpoint, load_checkpoint,
    read_checkpoint, save_checkpoint, write_checkpoint,
)
from trajlet.core import normalize
from trajlet.encoder import EncoderParams, embed
from trajlet.exceptions import FormatError
from trajlet.models import EncoderConfig


def sample_checkpoint(seed=0):
    cfg = EncoderConfig(num_heads=2, num_layers=1, d_model=8, d_emb=4, max_seq_len=8)
    return Checkpoint(EncoderParams.initialize(cfg, seed=seed),
                      {'metric': 'cosine', 'steps_completed': 3})


def to_bytes(ckpt):
    buffer = BytesIO()
    write_checkpoint(ckpt, buffer)
    return buffer.getvalue()


class TestCheckpoint(unittest.TestCase):

    def test_params_rounded(self):
        ckpt = sample_checkpoint()
        for name, arr in ckpt.params.items():
            np.testing.assert_array_equal(arr, arr.astype(np.float32).astype(np.float64))


    def test_round_trip(self):
        ckpt = sample_checkpoint()
        back = read_checkpoint(BytesIO(to_bytes(ckpt)))

        self.assertEqual(back.config, ckpt.config)
        self.assertEqual(back.metadata, ckpt.metadata)
        for name in ckpt.params:
            np.testing.assert_array_equal(back.params[name], ckpt.params[name])


    def test_same_embeddings(self):
        ckpt = sample_checkpoint(seed=5)
        back = read_checkpoint(BytesIO(to_bytes(ckpt)))

        trajs = [normalize([(0, 0), (1, 0.2), (2, 0.1), (3, 0.5)]),
                 normalize([(0, 0), (0, 1), (1, 2)])]
        np.testing.assert_array_equal(embed(ckpt.params, trajs), embed(back.params, trajs))


    def test_deterministic_bytes(self):
        self.assertEqual(to_bytes(sample_checkpoint(1)), to_bytes(sample_checkpoint(1)))


    def test_bad_magic(self):
        data = b'XXXX' + to_bytes(sample_checkpoint())[4:]
        with self.assertRaises(FormatError):
            read_checkpoint(BytesIO(data))


    def test_bad_version(self):
        data = bytearray(to_bytes(sample_checkpoint()))
        data[4:8] = struct.pack('<I', 99)
        with self.assertRaises(FormatError) as ctx:
            read_checkpoint(BytesIO(bytes(data)))
        self.assertIn("version 99", str(ctx.exception))


    def test_truncated(self):
        data = to_bytes(sample_checkpoint())
        with self.assertRaises(FormatError):
            read_checkpoint(BytesIO(data[:-3]))


    def test_trailing(self):
        data = to_bytes(sample_checkpoint()) + b'\0'
        with self.assertRaises(FormatError):
            read_checkpoint(BytesIO(data))


    def test_save_and_load(self):
        ckpt = sample_checkpoint()
        with TemporaryDirectory() as tmp:
            path = save_checkpoint(ckpt, tmp)
            self.assertEqual(path, Path(tmp) / CHECKPOINT_FILE)

            manifest = safe_load((Path(tmp) / MANIFEST_FILE).read_text())
            self.assertEqual(manifest['parameters'], ckpt.params.count())
            self.assertEqual(manifest['metadata']['metric'], 'cosine')

            for source in (tmp, path):
                back = load_checkpoint(source)
                np.testing.assert_array_equal(back.params["output.weight"],
                                              ckpt.params["output.weight"])


    def test_get(self):
        ckpt = sample_checkpoint()
        self.assertEqual(ckpt.get('metric'), 'cosine')
        self.assertIsNone(ckpt.get('missing'))


# The end.
