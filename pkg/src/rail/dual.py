"""Recursive ridge regression in kernel space.

The adapter memorizes raw feature prototypes and grows its Gram matrix
block-wise when a new domain arrives: the stored block is reused untouched,
only the cross-kernel against the new rows and the new diagonal block are
computed. The dual coefficients are then re-solved from scratch against the
extended system, which reproduces joint training on all prototypes exactly.

The Gram matrix is regenerable from the prototypes but is persisted in
checkpoints anyway so a resumed run continues from bit-identical state.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ckpt import read_checkpoint, write_checkpoint
from .errors import DimensionMismatch, OverlappingLabels, SingularSystem
from .projection import KernelSpec, kernel_matrix


@dataclass
class DualState:
    """Kernel adapter state.

    ``prototypes`` stacks every training feature row seen so far, in
    arrival order. ``targets`` holds the regression targets for those rows:
    block-diagonal one-hot in the default mode (rows of step n are zero
    outside step n's class columns), or class text vectors in text mode.
    """

    lam: float
    kernel: KernelSpec
    learned_classes: list
    prototypes: np.ndarray
    targets: np.ndarray
    alpha: np.ndarray
    K: np.ndarray
    target_mode: str = "onehot"
    class_targets: np.ndarray = None

    @property
    def num_classes(self):
        return len(self.learned_classes)


def dual_init(features, labels, registry, kernel, lam, *, target_table=None):
    """Fit the first domain in the dual form. Requires lam > 0."""
    if lam <= 0:
        raise ValueError("lambda must be > 0 in the dual form")
    features, labels = _check_batch(features, labels, registry)
    classes = [int(c) for c in np.unique(labels)]
    targets = _target_rows(labels, classes, target_table)
    k = kernel_matrix(features, features, kernel)
    alpha = _solve(k, lam, targets)
    mode = "onehot" if target_table is None else "text"
    class_targets = None if target_table is None else np.asarray(target_table, dtype=np.float64)[classes]
    return DualState(lam=float(lam), kernel=kernel, learned_classes=classes,
                     prototypes=features.copy(), targets=targets, alpha=alpha, K=k,
                     target_mode=mode, class_targets=class_targets)


def dual_update(state, features, labels, registry, *, target_table=None):
    """Absorb one new domain; returns a new state.

    The previous Gram block is carried over as-is; alpha is recomputed
    against the extended system rather than patched incrementally.
    """
    features, labels = _check_batch(features, labels, registry)
    if (state.target_mode == "text") != (target_table is not None):
        raise ValueError("target mode must stay fixed across learning steps")
    if features.shape[1] != state.prototypes.shape[1]:
        raise DimensionMismatch(
            f"features have dim {features.shape[1]}, prototypes have {state.prototypes.shape[1]}"
        )
    classes = [int(c) for c in np.unique(labels)]
    overlap = set(classes) & set(state.learned_classes)
    if overlap:
        raise OverlappingLabels(f"classes already learned: {sorted(overlap)}")

    cross = kernel_matrix(features, state.prototypes, state.kernel)
    diag = kernel_matrix(features, features, state.kernel)
    k = np.block([[state.K, cross.T], [cross, diag]])

    new_rows = _target_rows(labels, classes, target_table)
    if state.target_mode == "onehot":
        m_old, c_old = state.targets.shape
        targets = np.zeros((m_old + new_rows.shape[0], c_old + new_rows.shape[1]))
        targets[:m_old, :c_old] = state.targets
        targets[m_old:, c_old:] = new_rows
        class_targets = None
    else:
        targets = np.vstack([state.targets, new_rows])
        class_targets = np.vstack([
            state.class_targets,
            np.asarray(target_table, dtype=np.float64)[classes],
        ])
    alpha = _solve(k, state.lam, targets)
    return DualState(lam=state.lam, kernel=state.kernel,
                     learned_classes=list(state.learned_classes) + classes,
                     prototypes=np.vstack([state.prototypes, features]),
                     targets=targets, alpha=alpha, K=k,
                     target_mode=state.target_mode, class_targets=class_targets)


def dual_predict(state, features):
    """Score features against every learned class: [n, num_classes]."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimensionMismatch("features must be a 2-D matrix")
    out = kernel_matrix(features, state.prototypes, state.kernel) @ state.alpha
    if state.target_mode == "text":
        out = out @ state.class_targets.T
    return out


def save_dual_state(state, path):
    meta = {"lam": state.lam,
            "kernel": {"kind": state.kernel.kind, "gamma": state.kernel.gamma},
            "learned_classes": list(map(int, state.learned_classes)),
            "target_mode": state.target_mode}
    arrays = {"prototypes": state.prototypes, "targets": state.targets,
              "alpha": state.alpha, "K": state.K}
    if state.class_targets is not None:
        arrays["class_targets"] = state.class_targets
    write_checkpoint(path, "dual", meta, arrays)


def load_dual_state(path):
    meta, arrays = read_checkpoint(path, "dual")
    kernel = KernelSpec(kind=meta["kernel"]["kind"], gamma=meta["kernel"]["gamma"])
    return DualState(lam=meta["lam"], kernel=kernel,
                     learned_classes=list(meta["learned_classes"]),
                     prototypes=arrays["prototypes"], targets=arrays["targets"],
                     alpha=arrays["alpha"], K=arrays["K"],
                     target_mode=meta["target_mode"],
                     class_targets=arrays.get("class_targets"))


def _solve(k, lam, targets):
    system = k + lam * np.eye(k.shape[0])
    try:
        factor = cho_factor((system + system.T) / 2)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"dual system is singular: {exc}") from exc
    return cho_solve(factor, targets)


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


def _target_rows(labels, classes, target_table):
    if target_table is None:
        col = {c: j for j, c in enumerate(classes)}
        y = np.zeros((labels.shape[0], len(classes)))
        y[np.arange(labels.shape[0]), [col[int(c)] for c in labels]] = 1.0
        return y
    return np.asarray(target_table, dtype=np.float64)[labels]
