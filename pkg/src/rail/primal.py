"""Recursive ridge regression in weight space.

The adapter keeps two matrices: the regularized inverse autocorrelation
``memory`` (D x D over projected features) and the weight matrix ``W``.
Both are updated in closed form when a new batch of classes arrives, and
the update is exactly equivalent to re-solving the ridge problem on all
data seen so far: the memory update is a Woodbury identity on the inverse,
and the weight update corrects old class columns while appending columns
for the new classes. No past features are retained.

All solves go through a Cholesky factorization of a symmetric positive
definite system; nothing forms an inverse by elimination on its own.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ckpt import read_checkpoint, write_checkpoint
from .errors import DimensionMismatch, OverlappingLabels, SingularSystem
from .projection import IdentityProjection, RhlParams


@dataclass
class PrimalState:
    """Weight-space adapter state after some number of learning steps.

    learned_classes holds global class indices in learning order; in the
    default one-hot mode they name the columns of W. In text-target mode W
    maps into the text embedding space instead and ``class_targets`` keeps
    one text vector per learned class for scoring.
    """

    lam: float
    projection: object
    learned_classes: list
    W: np.ndarray
    memory: np.ndarray
    target_mode: str = "onehot"
    class_targets: np.ndarray = None

    @property
    def num_classes(self):
        return len(self.learned_classes)


def primal_init(features, labels, registry, projection, lam, *, target_table=None):
    """Fit the first domain by direct factorization.

    ``lam`` may be zero when the projected Gram matrix happens to be
    nonsingular; a failed factorization raises SingularSystem. Labels are
    global class indices and must all be registered.
    """
    features, labels = _check_batch(features, labels, registry)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    phi = projection.project(features)
    classes = [int(c) for c in np.unique(labels)]
    targets = _targets_for(labels, classes, target_table)
    dim = phi.shape[1]
    a = phi.T @ phi + lam * np.eye(dim)
    try:
        factor = cho_factor(a)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"initial system is singular: {exc}") from exc
    memory = cho_solve(factor, np.eye(dim))
    memory = (memory + memory.T) / 2
    w = cho_solve(factor, phi.T @ targets)
    mode = "onehot" if target_table is None else "text"
    class_targets = None if target_table is None else np.asarray(target_table, dtype=np.float64)[classes]
    return PrimalState(lam=float(lam), projection=projection, learned_classes=classes,
                       W=w, memory=memory, target_mode=mode, class_targets=class_targets)


def primal_update(state, features, labels, registry, *, target_table=None):
    """Absorb one new domain; returns a new state.

    Equivalent to refitting on the union of all domains. The incoming
    classes must be disjoint from everything learned so far.
    """
    features, labels = _check_batch(features, labels, registry)
    if (state.target_mode == "text") != (target_table is not None):
        raise ValueError("target mode must stay fixed across learning steps")
    classes = [int(c) for c in np.unique(labels)]
    overlap = set(classes) & set(state.learned_classes)
    if overlap:
        raise OverlappingLabels(f"classes already learned: {sorted(overlap)}")
    phi = state.projection.project(features)
    targets = _targets_for(labels, classes, target_table)

    # Woodbury step: downdate memory through an n x n SPD system.
    g = phi @ state.memory
    s = np.eye(phi.shape[0]) + g @ phi.T
    try:
        factor = cho_factor((s + s.T) / 2)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"update system is singular: {exc}") from exc
    memory = state.memory - g.T @ cho_solve(factor, g)
    memory = (memory + memory.T) / 2

    correction = memory @ (phi.T @ (phi @ state.W))
    if state.target_mode == "onehot":
        w_old = state.W - correction
        w_new = memory @ (phi.T @ targets)
        w = np.hstack([w_old, w_new])
        class_targets = None
    else:
        w = state.W - correction + memory @ (phi.T @ targets)
        class_targets = np.vstack([
            state.class_targets,
            np.asarray(target_table, dtype=np.float64)[classes],
        ])
    return PrimalState(lam=state.lam, projection=state.projection,
                       learned_classes=list(state.learned_classes) + classes,
                       W=w, memory=memory, target_mode=state.target_mode,
                       class_targets=class_targets)


def primal_predict(state, features):
    """Score features against every learned class: [n, num_classes]."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimensionMismatch("features must be a 2-D matrix")
    out = state.projection.project(features) @ state.W
    if state.target_mode == "text":
        out = out @ state.class_targets.T
    return out


def save_primal_state(state, path):
    """Persist the state; the projection weight is regenerated, not stored."""
    if isinstance(state.projection, RhlParams):
        proj = {"kind": "rhl", "seed": state.projection.seed,
                "input_dim": state.projection.input_dim,
                "output_dim": state.projection.output_dim,
                "activation": state.projection.activation}
    else:
        proj = {"kind": "identity"}
    meta = {"lam": state.lam, "projection": proj,
            "learned_classes": list(map(int, state.learned_classes)),
            "target_mode": state.target_mode}
    arrays = {"W": state.W, "memory": state.memory}
    if state.class_targets is not None:
        arrays["class_targets"] = state.class_targets
    write_checkpoint(path, "primal", meta, arrays)


def load_primal_state(path):
    meta, arrays = read_checkpoint(path, "primal")
    proj_meta = meta["projection"]
    if proj_meta["kind"] == "rhl":
        projection = RhlParams(seed=proj_meta["seed"], input_dim=proj_meta["input_dim"],
                               output_dim=proj_meta["output_dim"],
                               activation=proj_meta["activation"])
    else:
        projection = IdentityProjection()
    return PrimalState(lam=meta["lam"], projection=projection,
                       learned_classes=list(meta["learned_classes"]),
                       W=arrays["W"], memory=arrays["memory"],
                       target_mode=meta["target_mode"],
                       class_targets=arrays.get("class_targets"))


def _check_batch(features, labels, registry):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise DimensionMismatch("features must be a non-empty 2-D matrix")
    if labels.shape != (features.shape[0],):
        raise DimensionMismatch("labels must align with feature rows")
    if registry is not None:
        if labels.min() < 0 or labels.max() >= registry.num_classes:
            raise DimensionMismatch("labels reference classes outside the registry")
        registry.check_feature_dim(features.shape[1])
    return features, labels


def _targets_for(labels, classes, target_table):
    """One-hot rows over this batch's classes, or text rows per label."""
    if target_table is None:
        col = {c: j for j, c in enumerate(classes)}
        y = np.zeros((labels.shape[0], len(classes)))
        y[np.arange(labels.shape[0]), [col[int(c)] for c in labels]] = 1.0
        return y
    table = np.asarray(target_table, dtype=np.float64)
    return table[labels]
