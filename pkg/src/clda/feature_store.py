"""On-disk feature format and in-memory dataset.

One record per input example: the mean-pooled last-layer hidden vector,
the verbalizer probability distribution over labels, the current
pseudo-label, and (optionally) a true label for evaluation or answered
active-learning queries.

Binary layout (little-endian), format v1:

    magic "CELD" | version u32=1 | n_records u64 | hidden_dim u32 | num_labels u32
    label-name block: num_labels x (len u16 + UTF-8 bytes)
    per record: id u64 | h_last f32*hidden_dim | h_verb f32*num_labels
                | pseudo_label u32 | has_true u8 | true_label u32 (iff has_true=1)

Floats are stored at 32-bit precision; numerical work downstream happens
at 64-bit. A JSONL alternative exists for debugging. Datasets are
immutable after construction (arrays are marked read-only).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from clda.exceptions import FeatureFormatError

MAGIC = b"CELD"
FORMAT_VERSION = 1

_SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class FeatureRecord:
    """A single example's features and labels."""

    id: int
    h_last: np.ndarray
    h_verb: np.ndarray
    pseudo_label: int
    true_label: int | None = None


@dataclass(frozen=True)
class FeatureDataset:
    """Ordered collection of records plus label-space metadata."""

    records: list[FeatureRecord]
    num_labels: int
    hidden_dim: int
    label_names: list[str]

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> np.ndarray:
        return np.array([r.id for r in self.records], dtype=np.int64)

    def pseudo_labels(self) -> np.ndarray:
        return np.array([r.pseudo_label for r in self.records], dtype=np.int64)

    def true_labels(self) -> np.ndarray:
        """True labels with -1 where absent."""
        return np.array(
            [-1 if r.true_label is None else r.true_label for r in self.records],
            dtype=np.int64,
        )

    def h_last_matrix(self) -> np.ndarray:
        return np.stack([r.h_last for r in self.records])

    def h_verb_matrix(self) -> np.ndarray:
        return np.stack([r.h_verb for r in self.records])

    def subset(self, indices: np.ndarray) -> "FeatureDataset":
        """New dataset holding the records at `indices`, order preserved."""
        recs = [self.records[int(i)] for i in indices]
        return FeatureDataset(recs, self.num_labels, self.hidden_dim, self.label_names)

    def with_pseudo_labels(self, labels: np.ndarray) -> "FeatureDataset":
        """New dataset with pseudo-labels replaced positionally."""
        if len(labels) != len(self.records):
            raise ValueError("label vector length does not match dataset")
        recs = [
            replace(r, pseudo_label=int(lab))
            for r, lab in zip(self.records, labels)
        ]
        return FeatureDataset(recs, self.num_labels, self.hidden_dim, self.label_names)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    arr.setflags(write=False)
    return arr


def make_record(
    id: int,
    h_last: np.ndarray,
    h_verb: np.ndarray,
    pseudo_label: int,
    true_label: int | None = None,
) -> FeatureRecord:
    """Build a record, casting features to the storage precision (f32)."""
    return FeatureRecord(
        id=int(id),
        h_last=_freeze(h_last),
        h_verb=_freeze(h_verb),
        pseudo_label=int(pseudo_label),
        true_label=None if true_label is None else int(true_label),
    )


def validate_dataset(dataset: FeatureDataset) -> None:
    """Check every dataset invariant; raise FeatureFormatError on the first violation.

    Checks are total: nothing read from disk is assumed valid.
    """
    if dataset.num_labels < 1:
        raise FeatureFormatError("num_labels must be positive")
    if dataset.hidden_dim < 1:
        raise FeatureFormatError("hidden_dim must be positive")
    if len(dataset.label_names) != dataset.num_labels:
        raise FeatureFormatError(
            f"expected {dataset.num_labels} label names, got {len(dataset.label_names)}"
        )
    if not dataset.records:
        raise FeatureFormatError("empty dataset")

    seen: set[int] = set()
    for i, rec in enumerate(dataset.records):
        if rec.id < 0:
            raise FeatureFormatError(f"negative id at record {i}")
        if rec.id in seen:
            raise FeatureFormatError(f"duplicate id {rec.id} at record {i}")
        seen.add(rec.id)
        if rec.h_last.shape != (dataset.hidden_dim,):
            raise FeatureFormatError(
                f"hidden dimension mismatch at record {i}: "
                f"got {rec.h_last.shape[0]}, expected {dataset.hidden_dim}"
            )
        if rec.h_verb.shape != (dataset.num_labels,):
            raise FeatureFormatError(
                f"verbalizer dimension mismatch at record {i}: "
                f"got {rec.h_verb.shape[0]}, expected {dataset.num_labels}"
            )
        if not np.isfinite(rec.h_last).all() or not np.isfinite(rec.h_verb).all():
            raise FeatureFormatError(f"non-finite feature values at record {i}")
        if (rec.h_verb < 0).any():
            raise FeatureFormatError(
                f"verbalizer distribution not normalized at record {i}: negative entry"
            )
        total = float(np.sum(rec.h_verb, dtype=np.float64))
        if abs(total - 1.0) > _SIMPLEX_TOL:
            raise FeatureFormatError(
                f"verbalizer distribution not normalized at record {i}: sum={total!r}"
            )
        if not (0 <= rec.pseudo_label < dataset.num_labels):
            raise FeatureFormatError(f"label out of range at record {i}: pseudo_label={rec.pseudo_label}")
        if rec.true_label is not None and not (0 <= rec.true_label < dataset.num_labels):
            raise FeatureFormatError(f"label out of range at record {i}: true_label={rec.true_label}")


class _Cursor:
    """Byte cursor that reports the exact EOF offset on short reads."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.data):
            raise FeatureFormatError(f"unexpected end of file at byte {len(self.data)}")
        view = memoryview(self.data)[self.pos : self.pos + n]
        self.pos += n
        return view

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f32_array(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4", count=count).copy()


def read_feature_file(path: str | Path) -> FeatureDataset:
    """Read and fully validate a binary feature file.

    Record order is preserved from the file. Every invariant is checked;
    the first offending record index is named in the error.
    """
    data = Path(path).read_bytes()
    cur = _Cursor(data)
    if bytes(cur.take(4)) != MAGIC:
        raise FeatureFormatError(f"malformed header: bad magic in {path}")
    version = cur.u32()
    if version != FORMAT_VERSION:
        raise FeatureFormatError(f"malformed header: unsupported version {version}")
    n_records = cur.u64()
    hidden_dim = cur.u32()
    num_labels = cur.u32()
    if hidden_dim == 0 or num_labels == 0:
        raise FeatureFormatError("malformed header: zero dimension")
    label_names = []
    for _ in range(num_labels):
        ln = cur.u16()
        label_names.append(bytes(cur.take(ln)).decode("utf-8"))

    records = []
    for _ in range(n_records):
        rid = cur.u64()
        h_last = cur.f32_array(hidden_dim)
        h_verb = cur.f32_array(num_labels)
        pseudo = cur.u32()
        has_true = cur.u8()
        true_label = cur.u32() if has_true == 1 else None
        records.append(
            FeatureRecord(rid, _freeze(h_last), _freeze(h_verb), pseudo, true_label)
        )
    if cur.pos != len(data):
        raise FeatureFormatError(f"trailing bytes after record {n_records - 1}")

    dataset = FeatureDataset(records, num_labels, hidden_dim, label_names)
    validate_dataset(dataset)
    return dataset


def write_feature_file(dataset: FeatureDataset, path: str | Path) -> None:
    """Write a validated dataset; read_feature_file inverts this bit-exactly."""
    validate_dataset(dataset)
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<IQII", FORMAT_VERSION, len(dataset.records),
                       dataset.hidden_dim, dataset.num_labels)
    for name in dataset.label_names:
        raw = name.encode("utf-8")
        buf += struct.pack("<H", len(raw))
        buf += raw
    for rec in dataset.records:
        buf += struct.pack("<Q", rec.id)
        buf += np.ascontiguousarray(rec.h_last, dtype="<f4").tobytes()
        buf += np.ascontiguousarray(rec.h_verb, dtype="<f4").tobytes()
        buf += struct.pack("<I", rec.pseudo_label)
        if rec.true_label is None:
            buf += struct.pack("<B", 0)
        else:
            buf += struct.pack("<BI", 1, rec.true_label)
    Path(path).write_bytes(bytes(buf))


def write_feature_jsonl(dataset: FeatureDataset, path: str | Path) -> None:
    """Debug-friendly JSONL twin of the binary format.

    Header line carries the metadata; one record object per following line.
    Floats are emitted through their exact f64 extension, so parsing back
    to f32 is lossless.
    """
    validate_dataset(dataset)
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "hidden_dim": dataset.hidden_dim,
            "num_labels": dataset.num_labels,
            "label_names": dataset.label_names,
        }
        f.write(json.dumps(header) + "\n")
        for rec in dataset.records:
            obj = {
                "id": rec.id,
                "h_last": [float(x) for x in rec.h_last],
                "h_verb": [float(x) for x in rec.h_verb],
                "pseudo_label": rec.pseudo_label,
            }
            if rec.true_label is not None:
                obj["true_label"] = rec.true_label
            f.write(json.dumps(obj) + "\n")


def read_feature_jsonl(path: str | Path) -> FeatureDataset:
    """Read the JSONL alternative, with the same total validation."""
    with open(path, encoding="utf-8") as f:
        lines = [ln for ln in f if ln.strip()]
    if not lines:
        raise FeatureFormatError("empty dataset")
    try:
        header = json.loads(lines[0])
        hidden_dim = int(header["hidden_dim"])
        num_labels = int(header["num_labels"])
        label_names = list(header["label_names"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FeatureFormatError(f"malformed header: {exc}") from exc
    records = []
    for i, line in enumerate(lines[1:]):
        try:
            obj = json.loads(line)
            rec = make_record(
                obj["id"],
                np.asarray(obj["h_last"], dtype=np.float64),
                np.asarray(obj["h_verb"], dtype=np.float64),
                obj["pseudo_label"],
                obj.get("true_label"),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FeatureFormatError(f"malformed record at line {i + 1}: {exc}") from exc
        records.append(rec)
    dataset = FeatureDataset(records, num_labels, hidden_dim, label_names)
    validate_dataset(dataset)
    return dataset


def read_features_auto(path: str | Path) -> FeatureDataset:
    """Dispatch on extension: .jsonl reads the debug format, else binary."""
    if str(path).endswith(".jsonl"):
        return read_feature_jsonl(path)
    return read_feature_file(path)


def merge_true_labels(
    dataset: FeatureDataset, labels: Mapping[int, int]
) -> FeatureDataset:
    """Return a dataset identical except true_label set on the mapped ids."""
    by_id = {rec.id: i for i, rec in enumerate(dataset.records)}
    for rid, lab in labels.items():
        if rid not in by_id:
            raise FeatureFormatError(f"unknown id {rid} in true-label map")
        if not (0 <= lab < dataset.num_labels):
            raise FeatureFormatError(f"label out of range for id {rid}: {lab}")
    records = list(dataset.records)
    for rid, lab in labels.items():
        i = by_id[rid]
        records[i] = replace(records[i], true_label=int(lab))
    return FeatureDataset(records, dataset.num_labels, dataset.hidden_dim, dataset.label_names)


def read_answer_file(path: str | Path) -> dict[int, int]:
    """Read an active-learning answer file: a JSON map of id to label index."""
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise FeatureFormatError(f"malformed answer file: {exc}") from exc
    if not isinstance(raw, dict):
        raise FeatureFormatError("answer file must be a JSON object mapping id to label")
    out = {}
    for k, v in raw.items():
        try:
            out[int(k)] = int(v)
        except (TypeError, ValueError) as exc:
            raise FeatureFormatError(f"bad answer entry {k!r}: {v!r}") from exc
    return out
