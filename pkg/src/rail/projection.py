"""Random hidden-layer projection and kernel functions.

The hidden layer is a frozen random expansion: a Gaussian weight matrix
drawn once from a seed, followed by ReLU, no bias. It is never trained, so
the whole projection is a pure function of (seed, input_dim, output_dim)
and can be regenerated instead of persisted.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, NonFiniteValue


@dataclass
class RhlParams:
    """Frozen random hidden layer: ReLU(x @ weight).

    ``weight`` has shape [input_dim, output_dim] with i.i.d. Gaussian
    entries of mean 0 and variance 1/input_dim, generated from ``seed``.
    """

    seed: int
    input_dim: int
    output_dim: int = 15000
    activation: str = "relu"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise DimensionMismatch("projection dimensions must be >= 1")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        rng = np.random.default_rng(self.seed)
        scale = 1.0 / np.sqrt(self.input_dim)
        self.weight = scale * rng.standard_normal((self.input_dim, self.output_dim))

    def project(self, features):
        return rhl_project(features, self)


@dataclass
class IdentityProjection:
    """Pass-through stand-in so ridge heads can run on raw features."""

    def project(self, features):
        return np.asarray(features, dtype=np.float64)


def rhl_project(features, rhl):
    """Apply the frozen hidden layer. Returns [n, output_dim] float64."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimensionMismatch("features must be a 2-D matrix")
    if features.shape[1] != rhl.input_dim:
        raise DimensionMismatch(
            f"features have dim {features.shape[1]}, projection expects {rhl.input_dim}"
        )
    return np.maximum(features @ rhl.weight, 0.0)


@dataclass
class KernelSpec:
    """Kernel choice for the dual form. ``gamma`` is required iff rbf."""

    kind: str
    gamma: float = None

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"kernel kind must be 'rbf' or 'linear', got {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("rbf kernel requires gamma > 0")
        elif self.gamma is not None:
            raise ValueError("linear kernel takes no gamma")


def kernel_matrix(a, b, spec):
    """Gram matrix between the rows of ``a`` and ``b``.

    rbf: K[i, j] = exp(-gamma * ||a_i - b_j||^2); linear: K[i, j] = a_i . b_j.
    Squared distances come from pairwise subtraction, not the expanded
    quadratic form, so K(a, a) is exactly symmetric with a unit diagonal.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionMismatch("kernel inputs must be 2-D matrices")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(
            f"kernel inputs disagree on feature dim: {a.shape[1]} vs {b.shape[1]}"
        )
    for m in (a, b):
        rows = np.isfinite(m).all(axis=1)
        if not rows.all():
            raise NonFiniteValue(int(np.flatnonzero(~rows)[0]))
    if spec.kind == "linear":
        return a @ b.T
    return np.exp(-spec.gamma * cdist(a, b, "sqeuclidean"))
