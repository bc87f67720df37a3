"""Versioned binary containers for preprocessed datasets and model
checkpoints.

Both formats share the same primitives: an 8-byte magic, a format version
byte, little-endian scalars, length-prefixed UTF-8 strings, and
shape-prefixed row-major tensors (float64 or int32). Every read tracks its
file offset so a truncated or corrupt file fails with a location, not an
exception from struct.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import DataError
from .ingest import (CategoricalVocab, DatasetContainer, FlowTable,
                     Standardizer)
from .network import (DENSE_FIELDS, LSTM_FIELDS, DenseParams, LstmParams,
                      ModelConfig)
from .optim import AdamState

DATASET_MAGIC = b"FNIDDATA"
CHECKPOINT_MAGIC = b"FNIDCKPT"
FORMAT_VERSION = 1

_DTYPE_CODES = {np.dtype(np.float64): 0, np.dtype(np.int32): 1}
_CODE_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i4")}


class _Writer:
    def __init__(self):
        self.parts: List[bytes] = []

    def raw(self, data: bytes):
        self.parts.append(data)

    def u8(self, v: int):
        self.raw(struct.pack("<B", v))

    def u32(self, v: int):
        self.raw(struct.pack("<I", v))

    def i64(self, v: int):
        self.raw(struct.pack("<q", v))

    def f64(self, v: float):
        self.raw(struct.pack("<d", v))

    def string(self, s: str):
        data = s.encode("utf-8")
        self.u32(len(data))
        self.raw(data)

    def tensor(self, arr: np.ndarray):
        arr = np.ascontiguousarray(arr)
        if arr.dtype == np.int64:
            if arr.size and (arr.max() > 2 ** 31 - 1 or arr.min() < -(2 ** 31)):
                raise DataError("integer tensor exceeds 32-bit range")
            arr = arr.astype(np.int32)
        if arr.dtype not in _DTYPE_CODES:
            arr = arr.astype(np.float64)
        self.u8(_DTYPE_CODES[arr.dtype])
        self.u8(arr.ndim)
        for dim in arr.shape:
            self.i64(dim)
        self.raw(arr.astype(arr.dtype.newbyteorder("<")).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.off = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise DataError(
                f"{self.source}: truncated at offset {self.off} "
                f"(needed {n} bytes, {len(self.data) - self.off} left)"
            )
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        n = self.u32()
        return self.take(n).decode("utf-8")

    def tensor(self) -> np.ndarray:
        code = self.u8()
        if code not in _CODE_DTYPES:
            raise DataError(
                f"{self.source}: unknown tensor dtype code {code} "
                f"at offset {self.off - 1}"
            )
        dtype = _CODE_DTYPES[code]
        ndim = self.u8()
        shape = tuple(self.i64() for _ in range(ndim))
        for dim in shape:
            if dim < 0:
                raise DataError(f"{self.source}: negative tensor dim {dim}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = self.take(count * dtype.itemsize)
        arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
        return arr.astype(np.int64) if code == 1 else arr.astype(np.float64)

    def expect_done(self):
        if self.off != len(self.data):
            raise DataError(
                f"{self.source}: {len(self.data) - self.off} trailing bytes "
                f"after offset {self.off}"
            )


def _check_header(r: _Reader, magic: bytes):
    got = r.take(8)
    if got != magic:
        raise DataError(
            f"{r.source}: bad magic {got!r} (expected {magic!r})"
        )
    version = r.u8()
    if version != FORMAT_VERSION:
        raise DataError(
            f"{r.source}: unsupported format version {version} "
            f"(this build reads {FORMAT_VERSION})"
        )


def _write_names(w: _Writer, names):
    w.u32(len(names))
    for n in names:
        w.string(n)


def _read_names(r: _Reader) -> Tuple[str, ...]:
    return tuple(r.string() for _ in range(r.u32()))


def save_dataset(container: DatasetContainer, path) -> None:
    w = _Writer()
    w.raw(DATASET_MAGIC)
    w.u8(FORMAT_VERSION)
    _write_names(w, container.table.class_names)
    w.tensor(container.table.features)
    w.tensor(container.table.labels)
    _write_names(w, container.feature_names)
    w.tensor(container.standardizer.means)
    w.tensor(container.standardizer.stds)
    cols = sorted(container.vocab.values)
    w.u32(len(cols))
    for col in cols:
        w.u32(col)
        _write_names(w, container.vocab.values[col])
    Path(path).write_bytes(w.getvalue())


def load_dataset(path) -> DatasetContainer:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    r = _Reader(path.read_bytes(), str(path))
    _check_header(r, DATASET_MAGIC)
    class_names = _read_names(r)
    features = r.tensor()
    labels = r.tensor()
    feature_names = _read_names(r)
    means = r.tensor()
    stds = r.tensor()
    vocab: Dict[int, Tuple[str, ...]] = {}
    for _ in range(r.u32()):
        col = r.u32()
        vocab[col] = _read_names(r)
    r.expect_done()
    table = FlowTable(features, labels, class_names)
    return DatasetContainer(
        table=table,
        feature_names=feature_names,
        standardizer=Standardizer(means=means, stds=stds),
        vocab=CategoricalVocab(values=vocab),
    )


@dataclass
class Checkpoint:
    """Everything needed to score new data bit-reproducibly, plus the
    optimizer state when a run wants to be resumable."""

    config: ModelConfig
    lstm: LstmParams
    dense: DenseParams
    class_names: Tuple[str, ...]
    standardizer: Optional[Standardizer] = None
    adam: Optional[AdamState] = None


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    w = _Writer()
    w.raw(CHECKPOINT_MAGIC)
    w.u8(FORMAT_VERSION)
    cfg = ckpt.config
    w.u32(cfg.input_dim)
    w.u32(cfg.hidden_dim)
    w.u32(cfg.num_classes)
    w.u32(cfg.seq_len)
    w.f64(cfg.dropout_rate)
    _write_names(w, ckpt.class_names)
    for name in LSTM_FIELDS:
        w.tensor(getattr(ckpt.lstm, name))
    for name in DENSE_FIELDS:
        w.tensor(getattr(ckpt.dense, name))
    w.u8(1 if ckpt.standardizer is not None else 0)
    if ckpt.standardizer is not None:
        w.tensor(ckpt.standardizer.means)
        w.tensor(ckpt.standardizer.stds)
    w.u8(1 if ckpt.adam is not None else 0)
    if ckpt.adam is not None:
        adam = ckpt.adam
        w.f64(adam.lr)
        w.f64(adam.beta1)
        w.f64(adam.beta2)
        w.f64(adam.eps)
        w.i64(adam.t)
        for name in LSTM_FIELDS + DENSE_FIELDS:
            w.tensor(adam.m[name])
        for name in LSTM_FIELDS + DENSE_FIELDS:
            w.tensor(adam.v[name])
    Path(path).write_bytes(w.getvalue())


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    r = _Reader(path.read_bytes(), str(path))
    _check_header(r, CHECKPOINT_MAGIC)
    cfg = ModelConfig(
        input_dim=r.u32(),
        hidden_dim=r.u32(),
        num_classes=r.u32(),
        seq_len=r.u32(),
        dropout_rate=r.f64(),
    )
    class_names = _read_names(r)
    lstm = LstmParams(**{name: r.tensor() for name in LSTM_FIELDS})
    dense = DenseParams(**{name: r.tensor() for name in DENSE_FIELDS})
    standardizer = None
    if r.u8():
        standardizer = Standardizer(means=r.tensor(), stds=r.tensor())
    adam = None
    if r.u8():
        adam = AdamState(lr=r.f64(), beta1=r.f64(), beta2=r.f64(),
                         eps=r.f64(), t=r.i64())
        adam.m = {name: r.tensor() for name in LSTM_FIELDS + DENSE_FIELDS}
        adam.v = {name: r.tensor() for name in LSTM_FIELDS + DENSE_FIELDS}
    r.expect_done()
    return Checkpoint(config=cfg, lstm=lstm, dense=dense,
                      class_names=class_names, standardizer=standardizer,
                      adam=adam)


def describe(path) -> dict:
    """Structural summary of either container type (for `inspect`)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    head = path.read_bytes()[:8]
    if head == DATASET_MAGIC:
        c = load_dataset(path)
        return {
            "kind": "dataset",
            "format_version": FORMAT_VERSION,
            "rows": len(c.table),
            "features": c.table.features.shape[1],
            "class_names": list(c.table.class_names),
            "class_histogram": c.table.histogram().tolist(),
            "feature_names": list(c.feature_names),
            "categorical_columns": {str(k): len(v)
                                    for k, v in c.vocab.values.items()},
        }
    if head == CHECKPOINT_MAGIC:
        ckpt = load_checkpoint(path)
        tensors = {}
        for name in LSTM_FIELDS:
            tensors[name] = list(getattr(ckpt.lstm, name).shape)
        for name in DENSE_FIELDS:
            tensors[f"dense.{name}"] = list(getattr(ckpt.dense, name).shape)
        return {
            "kind": "checkpoint",
            "format_version": FORMAT_VERSION,
            "config": {
                "input_dim": ckpt.config.input_dim,
                "hidden_dim": ckpt.config.hidden_dim,
                "num_classes": ckpt.config.num_classes,
                "seq_len": ckpt.config.seq_len,
                "dropout_rate": ckpt.config.dropout_rate,
            },
            "class_names": list(ckpt.class_names),
            "tensors": tensors,
            "has_standardizer": ckpt.standardizer is not None,
            "has_optimizer_state": ckpt.adam is not None,
            "optimizer_steps": ckpt.adam.t if ckpt.adam else None,
        }
    raise DataError(f"{path}: unrecognized magic {head!r}")
