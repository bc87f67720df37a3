"""
Turning raw flow CSVs into model-ready tensors
==============================================

Parse a small 41-column flow capture, map raw attack names onto coarse
classes, one-hot the symbolic columns, standardize against the training
split only, and window rows into short sequences.
"""

import tempfile
from pathlib import Path

import numpy as np

import flownids as fn

# -- a tiny capture in the classic 41-feature format: no header, the label
#    rides at the end of each row with a trailing period
rng = np.random.default_rng(0)
rows = []
for i in range(40):
    fields = [f"{rng.normal():.3f}"] * 41
    fields[1] = "tcp" if i % 2 == 0 else "udp"
    fields[2] = "http"
    fields[3] = "SF"
    rows.append(",".join(fields + ["normal."]))
for i in range(8):
    fields = [f"{rng.normal(loc=2.0):.3f}"] * 41
    fields[1], fields[2], fields[3] = "icmp", "ecr_i", "SF"
    rows.append(",".join(fields + ["nmap."]))

with tempfile.TemporaryDirectory() as td:
    capture = Path(td) / "capture.csv"
    capture.write_text("\n".join(rows) + "\n", encoding="utf-8")

    schema = fn.Schema.kdd99()
    label_map = fn.LabelMap.bundled(fn.DatasetKind.KDD99)
    train, test, summary = fn.preprocess([capture], schema, label_map,
                                         test_fraction=0.25, seed=0)

print("rows parsed:        ", summary["rows_parsed"])
print("train/test split:   ", summary["n_train"], "/", summary["n_test"])
print("classes:            ", summary["class_names"])
print("per-class histogram:", summary["class_histogram"])

# the symbolic protocol/service/flag columns expand into indicator columns
names = train.feature_names
print("\nencoded width:", len(names))
print("first indicator columns:", [n for n in names if "=" in n][:6])

# standardization is fitted on the training split only; training columns
# therefore center at zero while test columns merely come close
print("\n|mean| of training columns:",
      float(np.max(np.abs(train.table.features.mean(axis=0)))))
print("|mean| of test columns:    ",
      float(np.max(np.abs(test.table.features.mean(axis=0)))))

# rows become (T, F/T) sequences for the recurrent classifier
seqs, labels = fn.windowize(train.table, seq_len=4)
print("\nsequence tensor:", seqs.shape, "from", train.table.features.shape)
