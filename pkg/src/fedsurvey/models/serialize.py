"""Versioned JSON text format for fitted models (layout in docs/formats.md)."""
from __future__ import annotations

import json

import numpy as np

from .forest import Forest
from .linear import LinearModel
from .tree import Tree

FORMAT = "fedsurvey-model"
VERSION = 1


def model_to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {"format": FORMAT, "version": VERSION, "kind": "linear",
                "intercept": model.intercept,
                "coefficients": [float(c) for c in model.coefficients],
                "ridge": model.ridge}
    if isinstance(model, Forest):
        return {"format": FORMAT, "version": VERSION, "kind": "forest",
                "task": model.task, "n_features": model.n_features,
                "tree_keys": [str(k) for k in model.tree_keys],
                "trees": [_tree_to_dict(t) for t in model.trees]}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _tree_to_dict(tree: Tree) -> dict:
    nodes = []
    for i in range(tree.n_nodes):
        node = {"id": i, "weight": float(tree.weight[i]), "positives": float(tree.positives[i])}
        if tree.feature[i] == -1:
            node["leaf"] = float(tree.value[i])
        else:
            node.update(feature=int(tree.feature[i]), threshold=float(tree.threshold[i]),
                        left=int(tree.left[i]), right=int(tree.right[i]), value=float(tree.value[i]))
        nodes.append(node)
    return {"nodes": nodes}


def model_from_dict(data: dict):
    if data.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} document")
    if data.get("version") != VERSION:
        raise ValueError(f"unsupported model format version {data.get('version')!r}")
    if data["kind"] == "linear":
        return LinearModel(data["intercept"], np.asarray(data["coefficients"], dtype=float), bool(data["ridge"]))
    if data["kind"] == "forest":
        trees = tuple(_tree_from_dict(t) for t in data["trees"])
        return Forest(trees, data["task"], int(data["n_features"]), tuple(int(k) for k in data["tree_keys"]))
    raise ValueError(f"unknown model kind {data['kind']!r}")


def _tree_from_dict(data: dict) -> Tree:
    nodes = sorted(data["nodes"], key=lambda n: n["id"])
    if [n["id"] for n in nodes] != list(range(len(nodes))):
        raise ValueError("tree node ids must be 0..n-1")
    feature, threshold, left, right, value = [], [], [], [], []
    for n in nodes:
        if "leaf" in n:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(n["leaf"])
        else:
            feature.append(n["feature"])
            threshold.append(n["threshold"])
            left.append(n["left"])
            right.append(n["right"])
            value.append(n["value"])
    return Tree(feature, threshold, left, right, value,
                [n["weight"] for n in nodes], [n["positives"] for n in nodes])


def dumps(model) -> str:
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n"


def loads(text: str):
    return model_from_dict(json.loads(text))
