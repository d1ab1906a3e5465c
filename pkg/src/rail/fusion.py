"""Zero-shot scoring, the in/out-of-distribution gate, and score fusion.

Test images are first scored against every class text embedding. If that
rough zero-shot prediction lands on a class some adapter has learned, the
image is treated as in-distribution and the adapter's scores are blended
with the zero-shot slice over the learned classes. Otherwise the zero-shot
prediction passes through untouched, which preserves zero-shot behavior on
never-seen domains exactly: on such images the final decision is the
zero-shot decision, right or wrong, in every case.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dual import DualState, dual_predict
from .errors import DimensionMismatch, EmptyLabelSet
from .primal import PrimalState, primal_predict
from .store import TextEmbeddingTable

DEFAULT_BETA = 0.8
DEFAULT_LOGIT_SCALE = 100.0


@dataclass
class FusionConfig:
    """Blend ratio and zero-shot temperature.

    ``beta`` weights the zero-shot slice in the in-distribution blend;
    1 - beta goes to the adapter. ``raw_fusion`` skips the softmax on
    adapter scores and blends them as-is.
    """

    beta: float = DEFAULT_BETA
    logit_scale: float = DEFAULT_LOGIT_SCALE
    raw_fusion: bool = False

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.logit_scale <= 0:
            raise ValueError("logit_scale must be > 0")


class GateDecision(NamedTuple):
    in_distribution: bool
    index: int


def softmax(scores, axis=-1):
    shifted = scores - np.max(scores, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def zero_shot_logits(image_emb, texts, scale=DEFAULT_LOGIT_SCALE):
    """Softmax over scaled cosine similarities to every class text vector.

    ``image_emb`` is assumed unit-norm (one vector or a batch of rows);
    text vectors are unit-norm by construction, so similarities are plain
    dot products. Returns probabilities in the text table's row order.
    """
    matrix = texts.vectors if isinstance(texts, TextEmbeddingTable) else np.asarray(texts)
    if matrix.shape[0] == 0:
        raise EmptyLabelSet("no class text embeddings available")
    emb = np.asarray(image_emb, dtype=np.float64)
    if emb.shape[-1] != matrix.shape[1]:
        raise DimensionMismatch(
            f"image dim {emb.shape[-1]} does not match text dim {matrix.shape[1]}"
        )
    return softmax(scale * (emb @ matrix.T))


def gate(zs_probs, seen_mask):
    """Decide in/out-of-distribution from the zero-shot argmax.

    An exact tie goes to the lowest class index, so ties involving a seen
    class resolve toward in-distribution when the seen index is lower.
    """
    zs_probs = np.asarray(zs_probs)
    seen_mask = np.asarray(seen_mask, dtype=bool)
    if zs_probs.shape != seen_mask.shape:
        raise DimensionMismatch("zero-shot probabilities and seen mask must align")
    idx = int(np.argmax(zs_probs))
    return GateDecision(in_distribution=bool(seen_mask[idx]), index=idx)


def fuse(adapter_logits, zs_probs, learned_classes, beta=DEFAULT_BETA, raw=False):
    """Blend adapter scores with the zero-shot slice over learned classes.

    The slice of the full zero-shot distribution at the learned class
    indices is used as-is, deliberately not renormalized, so its mass
    still reflects how much of the zero-shot belief sits on learned
    classes. Adapter scores are softmaxed first unless ``raw``.
    """
    adapter_logits = np.asarray(adapter_logits, dtype=np.float64)
    zs_probs = np.asarray(zs_probs, dtype=np.float64)
    idx = np.asarray(learned_classes, dtype=np.int64)
    if adapter_logits.shape[-1] != idx.shape[0]:
        raise DimensionMismatch("one adapter score per learned class is required")
    zs_slice = zs_probs[..., idx]
    blended = adapter_logits if raw else softmax(adapter_logits)
    return (1.0 - beta) * blended + beta * zs_slice


def classify(image_emb, adapter, texts, registry, config=None):
    """Classify one embedding; returns the predicted global class index."""
    matrix = texts.aligned_to(registry) if isinstance(texts, TextEmbeddingTable) else texts
    emb = np.asarray(image_emb, dtype=np.float64).reshape(1, -1)
    return int(classify_batch(emb, adapter, matrix, registry, config)[0])


def classify_batch(features, adapter, text_matrix, registry, config=None):
    """Vectorized classification over global class indices.

    ``text_matrix`` must already be aligned to the registry's global class
    order. With no adapter (or an adapter that has learned nothing) every
    item takes the zero-shot path.
    """
    config = config or FusionConfig()
    features = np.asarray(features, dtype=np.float64)
    zs = zero_shot_logits(features, text_matrix, scale=config.logit_scale)
    if zs.shape[1] != registry.num_classes:
        raise DimensionMismatch("text matrix does not cover the registry's classes")
    preds = np.argmax(zs, axis=1)
    if adapter is None or adapter.num_classes == 0:
        return preds
    in_dist = registry.seen_mask[preds]
    if in_dist.any():
        logits = predict_logits(adapter, features[in_dist])
        fused = fuse(logits, zs[in_dist], adapter.learned_classes,
                     beta=config.beta, raw=config.raw_fusion)
        preds[in_dist] = argmax_lowest_global(fused, adapter.learned_classes)
    return preds


def predict_logits(adapter, features):
    if isinstance(adapter, PrimalState):
        return primal_predict(adapter, features)
    if isinstance(adapter, DualState):
        return dual_predict(adapter, features)
    raise TypeError(f"not an adapter state: {type(adapter).__name__}")


def argmax_lowest_global(scores, global_indices):
    """Row-wise argmax mapped to global indices, ties to the lowest index.

    Columns are visited in ascending global order so numpy's first-max
    rule lands on the lowest global class index for exact ties.
    """
    order = np.argsort(np.asarray(global_indices, dtype=np.int64), kind="stable")
    ordered_globals = np.asarray(global_indices, dtype=np.int64)[order]
    pos = np.argmax(np.asarray(scores)[..., order], axis=-1)
    return ordered_globals[pos]
