"""Duration regressors built on numpy arrays.

Four families share one interface: a CART-style regression tree, a bagged
forest with per-split feature subsampling, a stagewise boosted-tree ensemble
with shrinkage, and k-nearest neighbours. Fitted models serialize to plain
JSON-ready dicts (trees as nested split records) so artifacts survive
round-trips without pickling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

FAMILIES = ("tree", "forest", "boosted_trees", "knn")

_DEFAULTS: dict[str, dict[str, Any]] = {
    "tree": {"max_depth": None, "min_samples_split": 2, "min_samples_leaf": 1, "criterion": "squared_error"},
    "forest": {
        "n_estimators": 10,
        "max_depth": None,
        "min_samples_split": 2,
        "min_samples_leaf": 1,
        "criterion": "squared_error",
        "max_features": "sqrt",
    },
    "boosted_trees": {
        "n_estimators": 100,
        "learning_rate": 0.1,
        "max_depth": 3,
        "min_samples_split": 2,
        "min_samples_leaf": 1,
        "criterion": "friedman_mse",
    },
    "knn": {"n_neighbors": 5, "weights": "uniform"},
}

_CRITERIA = ("squared_error", "friedman_mse")


class InvalidSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus hyperparameter overrides."""

    family: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)

    def resolved(self) -> dict[str, Any]:
        params = dict(_DEFAULTS[self.family])
        params.update(self.hyperparameters)
        return params


def validate_spec(spec: ModelSpec) -> dict[str, Any]:
    """Resolve defaults and reject unknown names or out-of-range values."""
    if spec.family not in FAMILIES:
        raise InvalidSpecError(f"unknown family {spec.family!r}")
    allowed = set(_DEFAULTS[spec.family])
    unknown = set(spec.hyperparameters) - allowed
    if unknown:
        raise InvalidSpecError(f"{spec.family}: unknown hyperparameters {sorted(unknown)}")
    params = spec.resolved()
    depth = params.get("max_depth")
    if depth is not None and depth < 0:
        raise InvalidSpecError("max_depth must be None or >= 0")
    if spec.family in ("tree", "forest", "boosted_trees"):
        if params["min_samples_split"] < 2:
            raise InvalidSpecError("min_samples_split must be >= 2")
        if params["min_samples_leaf"] < 1:
            raise InvalidSpecError("min_samples_leaf must be >= 1")
        if params["criterion"] not in _CRITERIA:
            raise InvalidSpecError(f"criterion must be one of {_CRITERIA}")
    if spec.family == "forest" and params["n_estimators"] < 1:
        raise InvalidSpecError("forest needs n_estimators >= 1")
    if spec.family == "boosted_trees":
        if params["n_estimators"] < 0:
            raise InvalidSpecError("boosted_trees needs n_estimators >= 0")
        if params["learning_rate"] <= 0:
            raise InvalidSpecError("learning_rate must be positive")
    if spec.family == "knn":
        if params["n_neighbors"] < 1:
            raise InvalidSpecError("knn needs n_neighbors >= 1")
        if params["weights"] not in ("uniform", "distance"):
            raise InvalidSpecError("knn weights must be 'uniform' or 'distance'")
    return params


@dataclass
class FittedModel:
    """Learned structure plus everything needed to reproduce predictions."""

    family: str
    hyperparameters: dict[str, Any]
    structure: dict[str, Any]

    @property
    def n_features(self) -> int:
        return self.structure["n_features"]


# ---------------------------------------------------------------------------
# regression tree


def _leaf(y: np.ndarray) -> dict:
    return {"value": float(y.mean())}


def _best_split(X: np.ndarray, y: np.ndarray, criterion: str, min_leaf: int):
    """Best (feature, threshold) over all features at once, or None.

    Split quality uses prefix sums over per-feature sorted targets:
    ``squared_error`` ranks by the drop in total squared error, while
    ``friedman_mse`` ranks by n_l*n_r/n * (mean_l - mean_r)^2.
    """
    n, d = X.shape
    if n < 2 * min_leaf:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)
    total = csum[-1]

    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    sum_l = csum[:-1]
    sum_r = total[None, :] - sum_l
    valid = xs[1:] > xs[:-1]
    valid &= (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None

    if criterion == "friedman_mse":
        gain = (nl * nr / n) * (sum_l / nl - sum_r / nr) ** 2
        floor = 0.0
    else:
        gain = sum_l**2 / nl + sum_r**2 / nr
        floor = float(total[0] ** 2 / n) if d else 0.0  # parent score; any real split must beat it
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    pos, feat = divmod(flat, d)
    best = float(gain[pos, feat])
    scale = max(1.0, float(np.abs(y).max()) ** 2)
    if best <= floor + 1e-12 * scale:
        return None
    threshold = float((xs[pos, feat] + xs[pos + 1, feat]) / 2.0)
    return feat, threshold


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    depth: int,
    params: dict[str, Any],
    rng: np.random.Generator | None,
    max_features: int | None,
) -> dict:
    max_depth = params["max_depth"]
    if (
        (max_depth is not None and depth >= max_depth)
        or len(y) < params["min_samples_split"]
        or float(y.min()) == float(y.max())
    ):
        return _leaf(y)

    if max_features is not None and max_features < X.shape[1]:
        assert rng is not None
        feats = np.sort(rng.choice(X.shape[1], size=max_features, replace=False))
        found = _best_split(X[:, feats], y, params["criterion"], params["min_samples_leaf"])
        if found is not None:
            found = (int(feats[found[0]]), found[1])
    else:
        found = _best_split(X, y, params["criterion"], params["min_samples_leaf"])
    if found is None:
        return _leaf(y)
    feat, threshold = found
    mask = X[:, feat] <= threshold
    return {
        "feature": int(feat),
        "threshold": threshold,
        "left": _grow_tree(X[mask], y[mask], depth + 1, params, rng, max_features),
        "right": _grow_tree(X[~mask], y[~mask], depth + 1, params, rng, max_features),
    }


def _tree_predict(node: dict, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=float)
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if "value" in nd:
            out[idx] = nd["value"]
            continue
        mask = X[idx, nd["feature"]] <= nd["threshold"]
        stack.append((nd["left"], idx[mask]))
        stack.append((nd["right"], idx[~mask]))
    return out


def _resolve_max_features(setting, d: int) -> int | None:
    if setting is None:
        return None
    if setting == "sqrt":
        return max(1, round(math.sqrt(d)))
    return max(1, min(int(setting), d))


# ---------------------------------------------------------------------------
# fit / predict


def fit(spec: ModelSpec, X: np.ndarray, y: np.ndarray, seed: int = 0) -> FittedModel:
    """Train one model; hyperparameters are validated before any work."""
    params = validate_spec(spec)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if len(y) == 0:
        raise ValueError("cannot fit on an empty dataset")
    n, d = X.shape

    if spec.family == "tree":
        root = _grow_tree(X, y, 0, params, None, None)
        structure: dict[str, Any] = {"n_features": d, "tree": root}

    elif spec.family == "forest":
        max_features = _resolve_max_features(params["max_features"], d)
        streams = np.random.SeedSequence(seed).spawn(params["n_estimators"])
        trees = []
        for ss in streams:
            rng = np.random.default_rng(ss)
            sample = rng.integers(0, n, size=n)
            trees.append(_grow_tree(X[sample], y[sample], 0, params, rng, max_features))
        structure = {"n_features": d, "trees": trees}

    elif spec.family == "boosted_trees":
        base = float(y.mean())
        current = np.full(n, base)
        trees = []
        for _ in range(params["n_estimators"]):
            residual = y - current
            tree = _grow_tree(X, residual, 0, params, None, None)
            current = current + params["learning_rate"] * _tree_predict(tree, X)
            trees.append(tree)
        structure = {"n_features": d, "base": base, "trees": trees}

    else:  # knn
        structure = {"n_features": d, "X": X.tolist(), "y": y.tolist()}

    return FittedModel(spec.family, params, structure)


def predict(model: FittedModel, X: np.ndarray) -> np.ndarray:
    """Deterministic predictions; raises on feature-count mismatch."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} feature columns, got {X.shape}")

    if model.family == "tree":
        return _tree_predict(model.structure["tree"], X)

    if model.family == "forest":
        preds = np.stack([_tree_predict(t, X) for t in model.structure["trees"]])
        return preds.mean(axis=0)

    if model.family == "boosted_trees":
        out = np.full(X.shape[0], model.structure["base"], dtype=float)
        lr = model.hyperparameters["learning_rate"]
        for tree in model.structure["trees"]:
            out += lr * _tree_predict(tree, X)
        return out

    # knn
    train_X = np.asarray(model.structure["X"], dtype=float)
    train_y = np.asarray(model.structure["y"], dtype=float)
    k = min(model.hyperparameters["n_neighbors"], len(train_y))
    d2 = (
        (X**2).sum(axis=1)[:, None]
        + (train_X**2).sum(axis=1)[None, :]
        - 2.0 * (X @ train_X.T)
    )
    np.maximum(d2, 0.0, out=d2)
    nearest = np.argpartition(d2, k - 1, axis=1)[:, :k]
    out = np.empty(X.shape[0], dtype=float)
    for i in range(X.shape[0]):
        idx = nearest[i]
        if model.hyperparameters["weights"] == "uniform":
            out[i] = train_y[idx].mean()
        else:
            dist = np.sqrt(d2[i, idx])
            exact = dist < 1e-9  # quadratic expansion can smear true zeros
            if exact.any():
                out[i] = train_y[idx[exact]].mean()
            else:
                w = 1.0 / dist
                out[i] = float((w * train_y[idx]).sum() / w.sum())
    return out
