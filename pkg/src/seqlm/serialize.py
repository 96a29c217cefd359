"""Single-file model format.

Layout: the magic bytes ``SEQLM\\n``, an 8-byte little-endian header length,
a UTF-8 JSON header (format version, run config, model sizes, output mode,
vocabularies in id order, tensor manifest), then every tensor as
little-endian float64 in row-major order, in manifest order.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from contextlib import contextmanager
from dataclasses import asdict

import numpy as np

from .config import RunConfig
from .data import Vocabs
from .errors import ConfigError, ModelFormatError
from .model import ModelDims, ModelParams, Tagger, param_shapes

MAGIC = b"SEQLM\n"
FORMAT_VERSION = 1


@contextmanager
def atomic_write(path, mode="wb"):
    """Write to a temporary file beside ``path`` and rename it into place on success."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8"})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def model_bytes(tagger: Tagger) -> bytes:
    params = tagger.params
    header = {
        "format_version": FORMAT_VERSION,
        "config": tagger.config.to_dict(),
        "dims": asdict(params.dims),
        "output_mode": params.dims.output_mode,
        "vocabs": tagger.vocabs.to_dict(),
        "tensors": [[name, list(arr.shape)] for name, arr in params],
    }
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    parts = [MAGIC, struct.pack("<Q", len(blob)), blob]
    parts.extend(np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in params)
    return b"".join(parts)


def save_model(path, tagger: Tagger) -> None:
    data = model_bytes(tagger)
    with atomic_write(path) as fh:
        fh.write(data)


def load_model(path) -> Tagger:
    with open(path, "rb") as fh:
        data = fh.read()
    return model_from_bytes(data)


def model_from_bytes(data: bytes) -> Tagger:
    if not data.startswith(MAGIC) or len(data) < len(MAGIC) + 8:
        raise ModelFormatError("not a model file (bad magic)")
    (n,) = struct.unpack_from("<Q", data, len(MAGIC))
    offset = len(MAGIC) + 8
    try:
        header = json.loads(data[offset:offset + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupted header: {exc}") from None
    offset += n
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {header.get('format_version')!r}")
    try:
        config = RunConfig.from_dict(header["config"])
        dims = ModelDims(**header["dims"])
        vocabs = Vocabs.from_dict(header["vocabs"])
    except (KeyError, TypeError, ConfigError) as exc:
        raise ModelFormatError(f"corrupted header: {exc}") from None

    expected = param_shapes(dims)
    manifest = [(name, tuple(shape)) for name, shape in header["tensors"]]
    if manifest != list(expected.items()):
        raise ModelFormatError("tensor manifest does not match the model sizes")
    sizes = (len(vocabs.words), len(vocabs.chars), len(vocabs.labels), len(vocabs.lm))
    if sizes != (dims.vocab_size, dims.char_vocab_size, dims.n_labels, dims.lm_vocab_size):
        raise ModelFormatError("vocabulary sizes do not match the model sizes")

    arrays = {}
    for name, shape in manifest:
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(data):
            raise ModelFormatError(f"truncated tensor {name}")
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset = end
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes after the last tensor")
    params = ModelParams(dims, arrays)
    if not params.all_finite():
        raise ModelFormatError("model contains non-finite values")
    return Tagger(config, vocabs, params)
