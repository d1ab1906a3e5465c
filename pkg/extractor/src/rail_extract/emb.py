"""Writer for the RAILEMB1 embedding container.

Layout (little-endian):

    bytes 0-7   magic ``RAILEMB1``
    u32         feature_dim
    u32         n_classes
    u64         n_samples
    u8          normalized flag (1 if rows are unit L2 norm)
    f32 array   n_samples * feature_dim features, row-major
    u32 array   n_samples labels, each in [0, n_classes)

plus a JSON sidecar at ``<path>.json`` naming the domain, the ordered
class list, the split role, and free-form source notes. Text tables reuse
the layout with one row per class and labels 0..n_classes-1.

This is an independent implementation of the format the learner consumes,
written from the published layout rather than shared code, so a round
trip through the learner's loader is a real interoperability check.
"""

import json
import os
import struct

import numpy as np

from .errors import ExtractError

MAGIC = b"RAILEMB1"
HEADER = struct.Struct("<8sIIQB")

# f32 rounding moves a unit norm by at most a few ulp; anything past this
# means the caller handed over unnormalized vectors.
NORM_TOL = 1e-4


def write_embeddings(path, domain_name, features, labels, class_names, *,
                     role="train", normalized=True, source=""):
    """Write one split's features and labels. Returns the path written."""
    path = os.fspath(path)
    features = np.ascontiguousarray(features, dtype="<f4")
    labels = np.asarray(labels)
    n, d = features.shape
    if n < 1:
        raise ExtractError(f"{path}: refusing to write an empty split")
    if labels.shape != (n,):
        raise ExtractError(f"{path}: {labels.shape} labels for {n} rows")
    if not np.all(np.isfinite(features)):
        raise ExtractError(f"{path}: non-finite feature values")
    if labels.min() < 0 or labels.max() >= len(class_names):
        raise ExtractError(f"{path}: label outside [0, {len(class_names)})")
    if normalized:
        _check_norms(path, features)
    _write_blob(path, features, labels.astype("<u4"), len(class_names),
                normalized)
    _write_json(path + ".json", {
        "kind": "embeddings",
        "domain_name": domain_name,
        "class_names": list(class_names),
        "role": role,
        "normalized": bool(normalized),
        "source": source,
    })
    return path


def write_text_table(path, class_names, vectors, *, prompt_template):
    """Write one unit-norm text vector per class. Returns the path."""
    path = os.fspath(path)
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    k = len(class_names)
    if vectors.shape[0] != k:
        raise ExtractError(f"{path}: {vectors.shape[0]} vectors for {k} classes")
    _check_norms(path, vectors)
    _write_blob(path, vectors, np.arange(k, dtype="<u4"), k, True)
    _write_json(path + ".json", {
        "kind": "text_table",
        "class_names": list(class_names),
        "prompt_template": prompt_template,
    })
    return path


def _check_norms(path, rows):
    norms = np.linalg.norm(rows.astype(np.float64), axis=1)
    off = np.abs(norms - 1.0)
    if np.any(off > NORM_TOL):
        bad = int(np.argmax(off))
        raise ExtractError(f"{path}: row {bad} has norm {norms[bad]:.6f}, want 1")


def _write_blob(path, rows, labels, n_classes, normalized):
    n, d = rows.shape
    header = HEADER.pack(MAGIC, d, n_classes, n, 1 if normalized else 0)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(rows.tobytes())
        fh.write(labels.tobytes())
    os.replace(tmp, path)


def _write_json(path, payload):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
