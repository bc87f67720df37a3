"""End-to-end orchestration: preprocess -> oversample -> reshape -> train
-> evaluate, plus the three-arm ablation experiment.

Determinism contract: given the same data files and RunConfig, every
output byte is identical across runs. All randomness flows through
explicitly keyed generators — per-epoch shuffle (seed, epoch, 0),
per-epoch dropout (seed, epoch, 1), SMOTE per class (seed, class id) —
and no output embeds wall-clock time.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError, NumericError, UsageError
from .ingest import (DatasetContainer, FlowTable, LabelMap, Schema,
                     Standardizer, one_hot, preprocess, read_kv_file,
                     windowize)
from .loss import FocalConfig, focal_loss, focal_loss_grad_logits
from .metrics import (ConfusionMatrix, MetricsReport, confusion,
                      confusion_to_csv, per_class_metrics, report_to_dict,
                      report_to_json)
from .network import (ModelConfig, clip_gradients, init_params,
                      model_backward, model_forward)
from .optim import AdamState, adam_step
from .serialize import Checkpoint, save_checkpoint
from .smote import SmoteConfig, parse_policy, smote_oversample

EVAL_BATCH = 4096

# the ablation grid: arm name -> (smote on, loss name)
EXPERIMENT_ARMS = {
    "no_smote_ce": (False, "ce"),
    "smote_ce": (True, "ce"),
    "smote_cfcl": (True, "focal"),
}


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a training run, in one flat bag."""

    # model
    seq_len: int = 4
    hidden_dim: int = 64
    dropout_rate: float = 0.2
    # loss
    loss: str = "focal"                  # "ce" | "focal"
    gamma: float = 2.0
    alpha: str = "inverse_frequency"     # "uniform" | "inverse_frequency"
    #                                    # | "explicit:<comma list>"
    # oversampling
    smote: bool = False
    smote_k: int = 5
    smote_policy: str = "match_majority"
    # optimizer
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: Optional[float] = 5.0
    # loop
    batch_size: int = 1024
    epochs: int = 30
    seed: int = 0
    shuffle: bool = True
    # splitting (used by experiment orchestration)
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise UsageError(f"epochs must be >= 1, got {self.epochs}")
        if self.loss not in ("ce", "focal"):
            raise UsageError(f"loss must be 'ce' or 'focal', got {self.loss!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise UsageError(
                f"test_fraction must be in (0, 1), got {self.test_fraction}"
            )
        if self.seq_len < 1:
            raise UsageError(f"seq_len must be >= 1, got {self.seq_len}")
        if self.hidden_dim < 1:
            raise UsageError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise UsageError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}"
            )

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return out

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        """key=value run config; values are coerced by field type."""
        raw = read_kv_file(path)
        return cls().merged(raw, source=str(path))

    def merged(self, overrides: Dict[str, object],
               source: str = "<overrides>") -> "RunConfig":
        """A copy with the given fields replaced; unknown keys are fatal."""
        fields = {f.name: f for f in dataclasses.fields(RunConfig)}
        parsed: Dict[str, object] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            name = key.replace("-", "_")
            if name not in fields:
                raise UsageError(f"{source}: unknown config key {key!r}")
            parsed[name] = _coerce(value, fields[name].type, key, source)
        return dataclasses.replace(self, **parsed)


def _coerce(value, annotation: str, key: str, source: str):
    if not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if annotation in ("int", "Optional[int]"):
            return int(text)
        if annotation in ("float", "Optional[float]"):
            if annotation.startswith("Optional") and text.lower() == "none":
                return None
            return float(text)
        if annotation == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a flag value: {text!r}")
    except ValueError as exc:
        raise UsageError(f"{source}: bad value for {key!r}: {exc}") from None
    return text


@dataclass
class TrainHistory:
    """Per-epoch curves. Training accuracy is measured on the training-mode
    forward (dropout active when enabled)."""

    epochs: List[int] = field(default_factory=list)
    loss: List[float] = field(default_factory=list)
    accuracy: List[float] = field(default_factory=list)
    valid_loss: List[float] = field(default_factory=list)
    valid_accuracy: List[float] = field(default_factory=list)

    @property
    def has_validation(self) -> bool:
        return bool(self.valid_loss)

    def to_csv(self) -> str:
        if self.has_validation:
            lines = ["epoch,loss,accuracy,valid_loss,valid_accuracy"]
            for row in zip(self.epochs, self.loss, self.accuracy,
                           self.valid_loss, self.valid_accuracy):
                lines.append(",".join([str(row[0])] +
                                      [repr(v) for v in row[1:]]))
        else:
            lines = ["epoch,loss,accuracy"]
            for row in zip(self.epochs, self.loss, self.accuracy):
                lines.append(",".join([str(row[0])] +
                                      [repr(v) for v in row[1:]]))
        return "\n".join(lines) + "\n"


def resolve_focal(cfg: RunConfig, histogram: np.ndarray) -> FocalConfig:
    """The loss actually trained with.

    'ce' is the gamma=0, uniform-alpha point of the focal family. For
    'focal', alpha comes from the (post-SMOTE) training histogram when in
    inverse-frequency mode.
    """
    num_classes = histogram.shape[0]
    if cfg.loss == "ce":
        return FocalConfig.uniform(num_classes, gamma=0.0)
    if cfg.alpha == "uniform":
        return FocalConfig.uniform(num_classes, gamma=cfg.gamma)
    if cfg.alpha == "inverse_frequency":
        return FocalConfig.inverse_frequency(histogram, gamma=cfg.gamma)
    if cfg.alpha.startswith("explicit:"):
        try:
            weights = [float(a) for a in cfg.alpha.split(":", 1)[1].split(",")]
        except ValueError:
            raise UsageError(f"bad alpha weights in {cfg.alpha!r}") from None
        if len(weights) != num_classes:
            raise UsageError(
                f"{len(weights)} alpha weights for {num_classes} classes"
            )
        return FocalConfig.explicit(weights, gamma=cfg.gamma)
    raise UsageError(f"unknown alpha mode {cfg.alpha!r}")


def _forward_batches(ckpt_like, seqs: np.ndarray) -> np.ndarray:
    """Inference-mode probabilities over a sequence tensor, in chunks."""
    params, dense, model_cfg = ckpt_like
    out = np.empty((seqs.shape[0], model_cfg.num_classes))
    for start in range(0, seqs.shape[0], EVAL_BATCH):
        stop = min(start + EVAL_BATCH, seqs.shape[0])
        probs, _ = model_forward(params, dense, model_cfg,
                                 seqs[start:stop], training=False)
        out[start:stop] = probs
    return out


def train(cfg: RunConfig, train_table: FlowTable,
          valid_table: Optional[FlowTable] = None,
          standardizer: Optional[Standardizer] = None,
          ) -> Tuple[Checkpoint, TrainHistory]:
    """Mini-batch training over an already-preprocessed (and, if desired,
    already-oversampled) table.

    Shuffling and dropout draw from per-epoch generators keyed off
    cfg.seed, so a RunConfig pins the whole trajectory. The short final
    batch is kept; its gradient is averaged over its true size.
    """
    if len(train_table) == 0:
        raise DataError("cannot train on an empty table")
    seqs, labels = windowize(train_table, cfg.seq_len)
    num_classes = len(train_table.class_names)
    model_cfg = ModelConfig(
        input_dim=seqs.shape[2],
        hidden_dim=cfg.hidden_dim,
        num_classes=num_classes,
        seq_len=cfg.seq_len,
        dropout_rate=cfg.dropout_rate,
    )
    params, dense = init_params(model_cfg, cfg.seed)
    adam = AdamState.init(params, dense, lr=cfg.lr, beta1=cfg.beta1,
                          beta2=cfg.beta2, eps=cfg.eps)
    focal = resolve_focal(cfg, train_table.histogram())
    targets = one_hot(labels, num_classes)

    valid_pack = None
    if valid_table is not None:
        if valid_table.class_names != train_table.class_names:
            raise DataError("validation table has different classes")
        v_seqs, v_labels = windowize(valid_table, cfg.seq_len)
        valid_pack = (v_seqs, v_labels, one_hot(v_labels, num_classes))

    n = seqs.shape[0]
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        if cfg.shuffle:
            order = np.random.default_rng([cfg.seed, epoch, 0]).permutation(n)
        else:
            order = np.arange(n)
        drop_rng = np.random.default_rng([cfg.seed, epoch, 1])

        loss_sum = 0.0
        n_correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            batch = seqs[idx]
            batch_targets = targets[idx]
            probs, trace = model_forward(params, dense, model_cfg, batch,
                                         training=True, rng=drop_rng)
            loss = focal_loss(probs, batch_targets, focal)
            if not math.isfinite(loss):
                raise NumericError(
                    f"non-finite loss {loss} at epoch {epoch}, "
                    f"batch {start // cfg.batch_size}"
                )
            d_logits = focal_loss_grad_logits(probs, batch_targets, focal)
            grads = model_backward(params, dense, model_cfg, trace, d_logits)
            clip_gradients(grads, cfg.clip_norm)
            adam_step(params, dense, grads, adam)

            loss_sum += loss * idx.shape[0]
            n_correct += int(np.sum(np.argmax(probs, axis=1) == labels[idx]))

        history.epochs.append(epoch)
        history.loss.append(loss_sum / n)
        history.accuracy.append(n_correct / n)

        if valid_pack is not None:
            v_seqs, v_labels, v_targets = valid_pack
            v_probs = _forward_batches((params, dense, model_cfg), v_seqs)
            history.valid_loss.append(focal_loss(v_probs, v_targets, focal))
            history.valid_accuracy.append(
                float(np.mean(np.argmax(v_probs, axis=1) == v_labels)))

    ckpt = Checkpoint(
        config=model_cfg,
        lstm=params,
        dense=dense,
        class_names=train_table.class_names,
        standardizer=standardizer,
        adam=adam,
    )
    return ckpt, history


def predict_probs(ckpt: Checkpoint, table: FlowTable) -> np.ndarray:
    """Inference-mode class probabilities for every row of the table."""
    seqs, _ = windowize(table, ckpt.config.seq_len)
    if seqs.shape[2] != ckpt.config.input_dim:
        raise DataError(
            f"table windows to width {seqs.shape[2]}, checkpoint expects "
            f"{ckpt.config.input_dim}"
        )
    return _forward_batches((ckpt.lstm, ckpt.dense, ckpt.config), seqs)


def evaluate(ckpt: Checkpoint,
             table: FlowTable) -> Tuple[MetricsReport, ConfusionMatrix]:
    """Score a table with a trained model: dropout off, argmax prediction
    (ties resolve to the lowest class id), full per-class report."""
    if tuple(ckpt.class_names) != tuple(table.class_names):
        raise DataError(
            f"checkpoint classes {list(ckpt.class_names)} do not match "
            f"table classes {list(table.class_names)}"
        )
    probs = predict_probs(ckpt, table)
    preds = np.argmax(probs, axis=1)
    cm = confusion(table.labels, preds, table.class_names)
    return per_class_metrics(cm), cm


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def run_experiment(cfg: RunConfig, schema: Schema, label_map: LabelMap,
                   input_paths: Sequence, out_dir,
                   arms: Sequence[str] = tuple(EXPERIMENT_ARMS),
                   ) -> dict:
    """The ablation grid over {oversampling} x {loss}.

    All arms share one preprocessing pass, the same split, and the same
    seeds, so metric differences isolate the treatment. Per arm this
    writes <arm>_checkpoint.bin, <arm>_history.csv, <arm>_metrics.json,
    and <arm>_confusion.csv under out_dir, plus one manifest.json keyed by
    config and input hashes (no timestamps — reruns are byte-identical).
    """
    unknown = [a for a in arms if a not in EXPERIMENT_ARMS]
    if unknown:
        raise UsageError(
            f"unknown experiment arms {unknown}; "
            f"choose from {sorted(EXPERIMENT_ARMS)}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_c, test_c, summary = preprocess(
        input_paths, schema, label_map,
        test_fraction=cfg.test_fraction, seed=cfg.seed,
    )

    smoted: Optional[FlowTable] = None
    results: Dict[str, dict] = {}
    for arm in arms:
        smote_on, loss_name = EXPERIMENT_ARMS[arm]
        arm_cfg = dataclasses.replace(cfg, smote=smote_on, loss=loss_name)
        if smote_on:
            if smoted is None:
                smote_cfg = parse_policy(cfg.smote_policy, k=cfg.smote_k,
                                         seed=cfg.seed)
                smoted, _ = smote_oversample(train_c.table, smote_cfg)
            arm_train = smoted
        else:
            arm_train = train_c.table

        ckpt, history = train(arm_cfg, arm_train,
                              standardizer=train_c.standardizer)
        report, cm = evaluate(ckpt, test_c.table)

        save_checkpoint(ckpt, out_dir / f"{arm}_checkpoint.bin")
        (out_dir / f"{arm}_history.csv").write_text(history.to_csv(),
                                                    encoding="utf-8")
        (out_dir / f"{arm}_metrics.json").write_text(
            report_to_json(report) + "\n", encoding="utf-8")
        (out_dir / f"{arm}_confusion.csv").write_text(confusion_to_csv(cm),
                                                      encoding="utf-8")
        results[arm] = report_to_dict(report)

    manifest = {
        "config": cfg.to_dict(),
        "config_sha256": _config_hash(cfg),
        "inputs": {Path(p).name: _sha256_file(p) for p in input_paths},
        "preprocessing": summary,
        "arms": list(arms),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    return {"manifest": manifest, "metrics": results}
