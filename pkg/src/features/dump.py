"""Binary feature dump (``.gzf``).

Layout: magic ``GZKF``, little-endian u32 header length, UTF-8 JSON header,
then ``count * dim`` little-endian float32 values in row order.
"""

import json
import os
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from src.features.models import FeatureError
from src.utils import constants

_LENGTH = struct.Struct("<I")


def write_dump(path: Union[str, Path], header: Dict[str, Any], values: np.ndarray) -> Path:
    """
    Write a feature matrix with its header. The file is replaced atomically.

    ``count`` and ``dim`` in the header are set from ``values``.
    """
    path = Path(path)
    values = np.ascontiguousarray(np.atleast_2d(values), dtype="<f4")
    header = dict(header)
    header["version"] = constants.FEATURE_DUMP_VERSION
    header["count"], header["dim"] = (int(n) for n in values.shape)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(constants.FEATURE_DUMP_MAGIC)
        f.write(_LENGTH.pack(len(blob)))
        f.write(blob)
        f.write(values.tobytes())
    os.replace(tmp, path)
    return path


def read_dump(path: Union[str, Path]) -> Tuple[Dict[str, Any], np.ndarray]:
    """
    Read a feature dump.

    Returns:
        (header, values) with values as a count x dim float32 array

    Raises:
        FeatureError: If the file is not a dump, is truncated, or has another version
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FeatureError(f"cannot read feature dump {path}: {e}") from e

    magic = constants.FEATURE_DUMP_MAGIC
    if data[: len(magic)] != magic:
        raise FeatureError(f"{path} is not a feature dump")
    offset = len(magic)
    if len(data) < offset + _LENGTH.size:
        raise FeatureError(f"{path} is truncated")
    (length,) = _LENGTH.unpack_from(data, offset)
    offset += _LENGTH.size
    try:
        header = json.loads(data[offset : offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FeatureError(f"{path} has a malformed header: {e}") from e
    offset += length

    if header.get("version") != constants.FEATURE_DUMP_VERSION:
        raise FeatureError(
            f"{path} has dump version {header.get('version')}, "
            f"expected {constants.FEATURE_DUMP_VERSION}"
        )
    count, dim = int(header["count"]), int(header["dim"])
    if len(data) - offset != count * dim * 4:
        raise FeatureError(
            f"{path} holds {len(data) - offset} value bytes, expected {count * dim * 4}"
        )
    if count * dim == 0:
        return header, np.zeros((count, dim), dtype="<f4")
    values = np.frombuffer(data, dtype="<f4", offset=offset).reshape(count, dim)
    return header, values
