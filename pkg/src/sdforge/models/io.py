"""Versioned single-file model serialization.

Plain text, tab-separated, LF-terminated, UTF-8.  Floats are written
with ``repr`` (shortest exact round-trip), so saving the same model
always produces identical bytes and loading reproduces the exact
values.

Layout:

    #sdforge-model v1
    kind<TAB>{ridge|lasso|elasticnet|random_forest|gradient_boosting|stratified}
    features<TAB>name...
    -- linear kinds --
    scaler<TAB>name<TAB>mean<TAB>std          (one line per feature)
    transform<TAB>yeo_johnson<TAB>lam<TAB>ll  (optional)
    penalty<TAB>kind<TAB>lam<TAB>l1_ratio<TAB>weighted(0|1)
    intercept<TAB>value
    coef<TAB>name<TAB>value                   (one line per feature)
    -- ensemble kinds --
    params<TAB>json(sorted keys)
    seed<TAB>int
    boost<TAB>learning_rate<TAB>init          (gradient_boosting only)
    tree<TAB>index<TAB>n_nodes
    node<TAB>feature<TAB>threshold<TAB>left<TAB>right<TAB>value
    -- stratified --
    begin<TAB>{model_a|model_b|router}        (nested full body)
    end<TAB>{...}
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import ModelFormatError
from .data import Scaler
from .linear import LinearModel
from .power import YeoJohnson
from .stratified import StratifiedPredictor
from .trees import TreeEnsemble, TreeNodes

MAGIC = "#sdforge-model v1"

_LINEAR_KINDS = ("ridge", "lasso", "elasticnet")
_ENSEMBLE_KINDS = ("random_forest", "gradient_boosting")



def _r(value) -> str:
    """Exact shortest round-trip decimal for a float."""
    return repr(float(value))

def _linear_lines(model: LinearModel) -> list[str]:
    lines = [f"kind\t{model.penalty}", "features\t" + "\t".join(model.feature_names)]
    for name, mean, std in zip(model.feature_names, model.scaler.mean, model.scaler.std):
        lines.append(f"scaler\t{name}\t{_r(mean)}\t{_r(std)}")
    if model.transform is not None:
        lines.append(
            f"transform\tyeo_johnson\t{_r(model.transform.lam)}\t{_r(model.transform.log_likelihood)}"
        )
    lines.append(
        f"penalty\t{model.penalty}\t{_r(model.lam)}\t{_r(model.l1_ratio)}\t{int(model.weighted)}"
    )
    lines.append(f"intercept\t{_r(model.intercept)}")
    for name, value in zip(model.feature_names, model.coefficients):
        lines.append(f"coef\t{name}\t{_r(value)}")
    return lines


def _ensemble_lines(model: TreeEnsemble) -> list[str]:
    lines = [f"kind\t{model.kind}", "features\t" + "\t".join(model.feature_names)]
    lines.append("params\t" + json.dumps(model.params, sort_keys=True))
    lines.append(f"seed\t{model.seed}")
    if model.kind == "gradient_boosting":
        lines.append(f"boost\t{_r(model.learning_rate)}\t{_r(model.init_prediction)}")
    for i, tree in enumerate(model.trees):
        lines.append(f"tree\t{i}\t{tree.n_nodes}")
        for k in range(tree.n_nodes):
            lines.append(
                f"node\t{tree.feature[k]}\t{_r(tree.threshold[k])}"
                f"\t{tree.left[k]}\t{tree.right[k]}\t{_r(tree.value[k])}"
            )
    return lines


def _model_lines(model) -> list[str]:
    if isinstance(model, LinearModel):
        return _linear_lines(model)
    if isinstance(model, TreeEnsemble):
        return _ensemble_lines(model)
    if isinstance(model, StratifiedPredictor):
        lines = ["kind\tstratified", "features\t" + "\t".join(model.feature_names)]
        for name, sub in (
            ("model_a", model.model_a),
            ("model_b", model.model_b),
            ("router", model.router_model),
        ):
            if sub is None:
                continue
            lines.append(f"begin\t{name}")
            lines.extend(_model_lines(sub))
            lines.append(f"end\t{name}")
        return lines
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def save_model(model, path: str | os.PathLike[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write(MAGIC + "\n")
        out.write("\n".join(_model_lines(model)) + "\n")


def _parse_model(lines: list[str]):
    fields = [line.split("\t") for line in lines]
    kind = None
    features: list[str] = []
    scaler_means: list[float] = []
    scaler_stds: list[float] = []
    transform = None
    penalty = None
    lam = 0.0
    l1_ratio = 0.0
    weighted = False
    intercept = 0.0
    coefficients: list[float] = []
    params: dict = {}
    seed = 0
    learning_rate = 1.0
    init_prediction = 0.0
    trees: list[TreeNodes] = []
    submodels: dict = {}

    i = 0
    while i < len(fields):
        row = fields[i]
        tag = row[0]
        if tag == "kind":
            kind = row[1]
        elif tag == "features":
            features = row[1:]
        elif tag == "scaler":
            scaler_means.append(float(row[2]))
            scaler_stds.append(float(row[3]))
        elif tag == "transform":
            transform = YeoJohnson(lam=float(row[2]), log_likelihood=float(row[3]))
        elif tag == "penalty":
            penalty, lam, l1_ratio, weighted = row[1], float(row[2]), float(row[3]), row[4] == "1"
        elif tag == "intercept":
            intercept = float(row[1])
        elif tag == "coef":
            coefficients.append(float(row[2]))
        elif tag == "params":
            params = json.loads(row[1])
        elif tag == "seed":
            seed = int(row[1])
        elif tag == "boost":
            learning_rate, init_prediction = float(row[1]), float(row[2])
        elif tag == "tree":
            n_nodes = int(row[2])
            node_rows = fields[i + 1 : i + 1 + n_nodes]
            if len(node_rows) != n_nodes or any(r[0] != "node" for r in node_rows):
                raise ModelFormatError(f"truncated tree {row[1]}")
            trees.append(
                TreeNodes(
                    feature=np.array([int(r[1]) for r in node_rows], dtype=np.int64),
                    threshold=np.array([float(r[2]) for r in node_rows], dtype=float),
                    left=np.array([int(r[3]) for r in node_rows], dtype=np.int64),
                    right=np.array([int(r[4]) for r in node_rows], dtype=np.int64),
                    value=np.array([float(r[5]) for r in node_rows], dtype=float),
                )
            )
            i += n_nodes
        elif tag == "begin":
            name = row[1]
            depth = 1
            j = i + 1
            while j < len(fields):
                if fields[j][0] == "begin":
                    depth += 1
                elif fields[j][0] == "end":
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            if depth != 0:
                raise ModelFormatError(f"unterminated section {name!r}")
            submodels[name] = _parse_model(lines[i + 1 : j])
            i = j
        else:
            raise ModelFormatError(f"unknown model-file tag {tag!r}")
        i += 1

    if kind in _LINEAR_KINDS:
        if penalty is None or len(coefficients) != len(features):
            raise ModelFormatError("incomplete linear model record")
        return LinearModel(
            coefficients=np.array(coefficients, dtype=float),
            intercept=intercept,
            penalty=penalty,
            lam=lam,
            l1_ratio=l1_ratio,
            scaler=Scaler(np.array(scaler_means), np.array(scaler_stds)),
            feature_names=features,
            transform=transform,
            weighted=weighted,
        )
    if kind in _ENSEMBLE_KINDS:
        return TreeEnsemble(
            kind=kind,
            trees=trees,
            feature_names=features,
            seed=seed,
            params=params,
            learning_rate=learning_rate,
            init_prediction=init_prediction,
        )
    if kind == "stratified":
        if "model_a" not in submodels or "model_b" not in submodels:
            raise ModelFormatError("stratified model missing a stratum")
        return StratifiedPredictor(
            model_a=submodels["model_a"],
            model_b=submodels["model_b"],
            feature_names=features,
            router_model=submodels.get("router"),
        )
    raise ModelFormatError(f"unknown model kind {kind!r}")


def load_model(path: str | os.PathLike[str]):
    with open(path, "r", encoding="utf-8", newline="\n") as stream:
        header = stream.readline().rstrip("\n")
        if header != MAGIC:
            raise ModelFormatError(f"bad model magic {header!r}; expected {MAGIC!r}")
        lines = [line.rstrip("\n") for line in stream if line.strip()]
    return _parse_model(lines)
