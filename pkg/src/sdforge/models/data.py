"""Dataset container and feature standardization."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

#: modeling feature roster; HeavyAtomCount is dropped as a near-duplicate
#: of MolWt (their collinearity destabilizes linear fits)
MODEL_FEATURES = [
    "MolWt",
    "TPSA",
    "NumHDonors",
    "NumHAcceptors",
    "NumRotatableBonds",
    "NumAromaticRings",
    "FractionCSP3",
]


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    row_ids: list[str]

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 2:
            raise ValueError("x must be 2-dimensional")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x and y disagree on row count")
        if self.x.shape[1] != len(self.feature_names):
            raise ValueError("feature_names length must match x columns")
        if len(self.row_ids) != self.x.shape[0]:
            raise ValueError("row_ids length must match x rows")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ValueError("dataset contains missing or non-finite values")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            x=self.x[idx],
            y=self.y[idx],
            feature_names=list(self.feature_names),
            row_ids=[self.row_ids[i] for i in idx],
        )

    def column(self, name: str) -> np.ndarray:
        return self.x[:, self.feature_names.index(name)]


def load_dataset_csv(
    path: str | os.PathLike[str],
    feature_names: list[str] | None = None,
    target_column: str = "logP_target",
    id_column: str = "InChIKey",
) -> Dataset:
    """Read the descriptor CSV into a modeling dataset."""
    names = feature_names or MODEL_FEATURES
    rows: list[list[float]] = []
    targets: list[float] = []
    ids: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as stream:
        reader = csv.DictReader(stream)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty dataset file")
        missing = [c for c in [*names, target_column, id_column] if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for record in reader:
            rows.append([float(record[c]) for c in names])
            targets.append(float(record[target_column]))
            ids.append(record[id_column])
    return Dataset(
        x=np.array(rows, dtype=float).reshape(len(rows), len(names)),
        y=np.array(targets, dtype=float),
        feature_names=list(names),
        row_ids=ids,
    )


@dataclass
class Scaler:
    """Per-feature centering and unit-variance scaling."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Scaler":
        data = np.asarray(x, dtype=float)
        mean = data.mean(axis=0)
        std = data.std(axis=0, ddof=0)
        if np.any(std == 0.0):
            constant = [int(j) for j in np.nonzero(std == 0.0)[0]]
            raise ValueError(f"constant feature columns cannot be scaled: {constant}")
        return cls(mean=mean, std=std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std
