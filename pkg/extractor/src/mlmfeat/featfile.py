"""Binary feature-file writer.

Little-endian layout, version 1:
    magic "CELD" | version u32 | n_records u64 | hidden_dim u32 | num_labels u32
    label names: num_labels x (len u16 + UTF-8 bytes)
    per record: id u64 | h_last f32*hidden_dim | h_verb f32*num_labels |
                pseudo_label u32 | has_true u8 | true_label u32 iff has_true

Floats are stored at 32-bit precision; h_verb rows must be simplices.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CELD"
FORMAT_VERSION = 1


def write_feature_file(
    path: str | Path,
    ids: np.ndarray,
    h_last: np.ndarray,
    h_verb: np.ndarray,
    pseudo_labels: np.ndarray,
    label_names: list[str],
    true_labels: np.ndarray | None = None,
) -> None:
    n, hidden_dim = h_last.shape
    num_labels = len(label_names)
    if h_verb.shape != (n, num_labels):
        raise ValueError(
            f"h_verb shape {h_verb.shape} does not match {n} records x {num_labels} labels"
        )
    if ids.shape != (n,) or pseudo_labels.shape != (n,):
        raise ValueError("ids and pseudo_labels must have one entry per record")

    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<IQII", FORMAT_VERSION, n, hidden_dim, num_labels)
    for name in label_names:
        encoded = name.encode("utf-8")
        buf += struct.pack("<H", len(encoded))
        buf += encoded

    h_last32 = np.ascontiguousarray(h_last, dtype="<f4")
    h_verb32 = np.ascontiguousarray(h_verb, dtype="<f4")
    for i in range(n):
        buf += struct.pack("<Q", int(ids[i]))
        buf += h_last32[i].tobytes()
        buf += h_verb32[i].tobytes()
        buf += struct.pack("<I", int(pseudo_labels[i]))
        if true_labels is not None and true_labels[i] >= 0:
            buf += struct.pack("<BI", 1, int(true_labels[i]))
        else:
            buf += struct.pack("<B", 0)
    Path(path).write_bytes(bytes(buf))
