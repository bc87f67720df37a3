"""Flow-record intrusion detection: preprocessing, SMOTE oversampling,
an LSTM classifier with focal loss, and per-class evaluation."""

__version__ = "0.1.0"

from .errors import DataError, FlowNidsError, NumericError, UsageError
from .ingest import (CategoricalVocab, DatasetContainer, DatasetKind,
                     FlowTable, LabelMap, Schema, Standardizer,
                     apply_transforms, clean, encode_features,
                     fit_categoricals, fit_standardizer, map_labels, one_hot,
                     parse_csv, preprocess, split, split_indices,
                     stratified_sample_indices, windowize)
from .loss import (FocalConfig, categorical_ce, categorical_ce_grad_logits,
                   focal_loss, focal_loss_grad_logits)
from .metrics import (ConfusionMatrix, MetricsReport, confusion,
                      confusion_to_csv, f1_score, per_class_metrics,
                      report_to_dict, report_to_json)
from .network import (DenseParams, ForwardTrace, Gradients, LstmParams,
                      LstmState, ModelConfig, clip_gradients, dense_softmax,
                      dropout, init_params, lstm_cell, lstm_forward,
                      model_backward, model_forward, sigmoid, softmax)
from .optim import AdamState, adam_step
from .pipeline import (RunConfig, TrainHistory, evaluate, predict_probs,
                       resolve_focal, run_experiment, train)
from .serialize import (Checkpoint, describe, load_checkpoint, load_dataset,
                        save_checkpoint, save_dataset)
from .smote import (EXPLICIT, MATCH_MAJORITY, RATIO, SmoteConfig,
                    SmoteReport, interpolate, knn_minority, parse_policy,
                    resolve_targets, smote_oversample)

__all__ = [
    "__version__",
    # errors
    "FlowNidsError", "UsageError", "DataError", "NumericError",
    # ingest
    "Schema", "DatasetKind", "LabelMap", "Standardizer", "FlowTable",
    "CategoricalVocab", "DatasetContainer", "parse_csv", "clean",
    "map_labels", "fit_categoricals", "encode_features", "fit_standardizer",
    "one_hot", "split", "split_indices", "stratified_sample_indices",
    "windowize", "preprocess", "apply_transforms",
    # smote
    "SmoteConfig", "SmoteReport", "parse_policy", "resolve_targets",
    "knn_minority", "interpolate", "smote_oversample",
    "MATCH_MAJORITY", "RATIO", "EXPLICIT",
    # network
    "ModelConfig", "LstmParams", "DenseParams", "LstmState", "ForwardTrace",
    "Gradients", "sigmoid", "softmax", "lstm_cell", "lstm_forward", "dropout",
    "dense_softmax", "model_forward", "model_backward", "init_params",
    "clip_gradients",
    # loss
    "FocalConfig", "focal_loss", "focal_loss_grad_logits", "categorical_ce",
    "categorical_ce_grad_logits",
    # optim
    "AdamState", "adam_step",
    # metrics
    "ConfusionMatrix", "MetricsReport", "confusion", "per_class_metrics",
    "f1_score", "report_to_dict", "report_to_json", "confusion_to_csv",
    # pipeline
    "RunConfig", "TrainHistory", "train", "evaluate", "predict_probs",
    "resolve_focal", "run_experiment",
    # serialize
    "Checkpoint", "save_checkpoint", "load_checkpoint", "save_dataset",
    "load_dataset", "describe",
]
