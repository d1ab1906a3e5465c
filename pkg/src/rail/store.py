"""Embedding datasets, the cross-domain label registry, and on-disk formats.

A dataset is a frozen matrix of feature embeddings plus integer labels for one
domain. Domains are registered in a LabelRegistry which assigns global class
indices consecutively in registration order, so the union label space is just
0..num_classes-1. Class text embeddings live in a TextEmbeddingTable keyed by
class name.

On-disk embedding format (little-endian):

    bytes 0-7   magic ``RAILEMB1``
    u32         feature_dim
    u32         n_classes
    u64         n_samples
    u8          normalized flag (1 if rows are unit L2 norm)
    f32 array   n_samples * feature_dim features, row-major
    u32 array   n_samples labels, each in [0, n_classes)

A JSON sidecar at ``<path>.json`` records domain_name, class_names (ordered),
role, and free-form source notes. Text tables reuse the same binary layout
with one row per class and labels 0..n_classes-1.
"""

import json
import os
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateClassName,
    InfeasibleSeparation,
    LabelOutOfRange,
    NonFiniteValue,
    RailError,
)

MAGIC = b"RAILEMB1"
HEADER = struct.Struct("<8sIIQB")

DEFAULT_PROMPT_TEMPLATE = "A photo of a {}."


@dataclass
class EmbeddingDataset:
    """Feature embeddings and labels for one domain.

    Labels index into ``class_names`` when the dataset comes straight off
    disk or out of the synthetic generator; ``LabelRegistry.globalize``
    rewrites them to global class indices for training and evaluation.
    """

    domain_name: str
    features: np.ndarray
    labels: np.ndarray
    class_names: list
    role: str = "train"
    normalized: bool = False
    source: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DimensionMismatch("features must be a 2-D matrix")
        if self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise DimensionMismatch("dataset must have at least one row and one column")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionMismatch(
                f"labels shape {self.labels.shape} does not match "
                f"{self.features.shape[0]} feature rows"
            )
        if not self.class_names:
            raise DimensionMismatch("class_names must be non-empty")

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]


class LabelRegistry:
    """Assigns global class indices across domains.

    Indices are handed out consecutively in registration order and never
    change afterwards, so re-registering the same domain sequence always
    reproduces the same mapping. ``seen_mask`` tracks which classes belong
    to domains that have been learned; it only ever flips False -> True.
    """

    def __init__(self):
        self._names = []        # global index -> class name
        self._domains = []      # global index -> domain name
        self._index = {}        # class name -> global index
        self._domain_order = []
        self._seen = []         # per class
        self.feature_dim = None

    @property
    def num_classes(self):
        return len(self._names)

    @property
    def class_names(self):
        return list(self._names)

    @property
    def domains(self):
        return list(self._domain_order)

    @property
    def class_domains(self):
        """Domain name of every class, indexed by global class index."""
        return list(self._domains)

    @property
    def seen_mask(self):
        return np.asarray(self._seen, dtype=bool)

    def index_of(self, class_name):
        return self._index[class_name]

    def domain_classes(self, domain_name):
        """Global indices of the domain's classes, in registration order."""
        idx = [i for i, d in enumerate(self._domains) if d == domain_name]
        if not idx:
            raise KeyError(f"domain {domain_name!r} is not registered")
        return idx

    def check_feature_dim(self, d):
        if self.feature_dim is None:
            self.feature_dim = int(d)
        elif self.feature_dim != d:
            raise DimensionMismatch(
                f"feature dim {d} does not match registry-wide dim {self.feature_dim}"
            )

    def mark_learned(self, domain_name):
        """Flip seen_mask for the domain's classes. Monotonic."""
        for i in self.domain_classes(domain_name):
            self._seen[i] = True

    def globalize(self, dataset):
        """Return a copy of ``dataset`` whose labels are global class indices."""
        base = self.domain_classes(dataset.domain_name)
        registered = [self._names[i] for i in base]
        if registered != list(dataset.class_names):
            raise DimensionMismatch(
                f"class names of {dataset.domain_name!r} do not match the registry"
            )
        self.check_feature_dim(dataset.feature_dim)
        mapping = np.asarray(base, dtype=np.int64)
        bad = (dataset.labels < 0) | (dataset.labels >= len(base))
        if bad.any():
            raise LabelOutOfRange(int(np.flatnonzero(bad)[0]))
        return replace(dataset, labels=mapping[dataset.labels])


def register_domain(registry, class_names, domain_name):
    """Register a domain's classes, assigning consecutive global indices.

    Raises DuplicateClassName if any class name or the domain name is
    already present. Returns the registry for chaining.
    """
    if not class_names:
        raise DimensionMismatch("cannot register a domain with no classes")
    if domain_name in registry._domain_order:
        raise DuplicateClassName(f"domain {domain_name!r} is already registered")
    seen_here = set()
    for name in class_names:
        if name in registry._index or name in seen_here:
            raise DuplicateClassName(f"class {name!r} is already registered")
        seen_here.add(name)
    for name in class_names:
        registry._index[name] = len(registry._names)
        registry._names.append(name)
        registry._domains.append(domain_name)
        registry._seen.append(False)
    registry._domain_order.append(domain_name)
    return registry


# ---------------------------------------------------------------------------
# binary I/O


def save_embeddings(dataset, path):
    """Write a dataset to ``path`` plus a JSON sidecar at ``path + '.json'``.

    Features are stored as little-endian float32, labels as uint32 indices
    into the dataset's own class list. Writes are atomic (temp file then
    rename) so a crashed run never leaves a half-written file behind.
    """
    path = os.fspath(path)
    n, d = dataset.features.shape
    n_classes = len(dataset.class_names)
    if not np.all(np.isfinite(dataset.features)):
        bad = np.flatnonzero(~np.isfinite(dataset.features).all(axis=1))[0]
        raise NonFiniteValue(int(bad))
    if dataset.labels.min() < 0 or dataset.labels.max() >= n_classes:
        bad = np.flatnonzero((dataset.labels < 0) | (dataset.labels >= n_classes))[0]
        raise LabelOutOfRange(int(bad))
    header = HEADER.pack(MAGIC, d, n_classes, n, 1 if dataset.normalized else 0)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dataset.features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(dataset.labels, dtype="<u4").tobytes())
    os.replace(tmp, path)
    manifest = {
        "kind": "embeddings",
        "domain_name": dataset.domain_name,
        "class_names": list(dataset.class_names),
        "role": dataset.role,
        "normalized": bool(dataset.normalized),
        "source": dataset.source,
    }
    _write_json(path + ".json", manifest)


def load_embeddings(path, normalize=None):
    """Load a dataset written by :func:`save_embeddings`.

    The stored float32 payload is promoted to float64; with the default
    ``normalize=None`` values round-trip bit-exactly. ``normalize=True``
    rescales each row to unit L2 norm in memory (zero rows are left alone).

    Raises BadMagic, DimensionMismatch, NonFiniteValue, or LabelOutOfRange
    on a malformed file.
    """
    path = os.fspath(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER.size:
        raise BadMagic(f"{path}: file shorter than the header")
    magic, d, n_classes, n, flag = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if d < 1 or n < 1 or n_classes < 1:
        raise DimensionMismatch(f"{path}: header declares an empty dataset")
    expected = HEADER.size + 4 * n * d + 4 * n
    if len(blob) != expected:
        raise DimensionMismatch(
            f"{path}: file has {len(blob)} bytes, header implies {expected}"
        )
    feats = np.frombuffer(blob, dtype="<f4", count=n * d, offset=HEADER.size)
    feats = feats.reshape(n, d).astype(np.float64)
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=HEADER.size + 4 * n * d)
    labels = labels.astype(np.int64)
    finite_rows = np.isfinite(feats).all(axis=1)
    if not finite_rows.all():
        raise NonFiniteValue(int(np.flatnonzero(~finite_rows)[0]))
    if labels.max() >= n_classes:
        raise LabelOutOfRange(int(np.flatnonzero(labels >= n_classes)[0]))

    manifest = _read_json(path + ".json")
    class_names = manifest["class_names"]
    if len(class_names) != n_classes:
        raise DimensionMismatch(
            f"{path}: manifest lists {len(class_names)} classes, header says {n_classes}"
        )
    normalized = bool(flag)
    if normalize:
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        np.divide(feats, norms, out=feats, where=norms > 0)
        normalized = True
    return EmbeddingDataset(
        domain_name=manifest["domain_name"],
        features=feats,
        labels=labels,
        class_names=list(class_names),
        role=manifest.get("role", "train"),
        normalized=normalized,
        source=manifest.get("source", ""),
    )


@dataclass
class TextEmbeddingTable:
    """Unit-norm text feature vectors, one per class name."""

    class_names: list
    vectors: np.ndarray
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.class_names):
            raise DimensionMismatch("one text vector per class name is required")

    @property
    def feature_dim(self):
        return self.vectors.shape[1]

    def merge(self, other):
        """Combine two tables; class names must not overlap."""
        overlap = set(self.class_names) & set(other.class_names)
        if overlap:
            raise DuplicateClassName(f"classes present in both tables: {sorted(overlap)}")
        return TextEmbeddingTable(
            class_names=list(self.class_names) + list(other.class_names),
            vectors=np.vstack([self.vectors, other.vectors]),
            prompt_template=self.prompt_template,
        )

    def aligned_to(self, registry):
        """Matrix of text vectors ordered by global class index.

        Raises RailError if any registered class is missing: evaluation
        needs the table to cover the full union label space.
        """
        lookup = {name: i for i, name in enumerate(self.class_names)}
        rows = []
        for name in registry.class_names:
            if name not in lookup:
                raise RailError(f"text table is missing class {name!r}")
            rows.append(self.vectors[lookup[name]])
        out = np.asarray(rows, dtype=np.float64)
        registry.check_feature_dim(out.shape[1])
        return out


def save_text_table(table, path):
    """Write a text table using the embedding layout, one row per class."""
    path = os.fspath(path)
    k, d = table.vectors.shape
    norms = np.linalg.norm(table.vectors, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        bad = int(np.argmax(np.abs(norms - 1.0) > 1e-6))
        raise RailError(f"text vector {bad} has norm {norms[bad]:.8f}, want 1")
    header = HEADER.pack(MAGIC, d, k, k, 1)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(table.vectors, dtype="<f4").tobytes())
        fh.write(np.arange(k, dtype="<u4").tobytes())
    os.replace(tmp, path)
    _write_json(path + ".json", {
        "kind": "text_table",
        "class_names": list(table.class_names),
        "prompt_template": table.prompt_template,
    })


def load_text_table(path):
    """Load a text table and check every row is unit-norm to 1e-6."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER.size or blob[:8] != MAGIC:
        raise BadMagic(f"{path}: not a text table file")
    _, d, n_classes, n, _ = HEADER.unpack_from(blob, 0)
    if n != n_classes:
        raise DimensionMismatch(f"{path}: text table must have one row per class")
    expected = HEADER.size + 4 * n * d + 4 * n
    if len(blob) != expected:
        raise DimensionMismatch(
            f"{path}: file has {len(blob)} bytes, header implies {expected}"
        )
    vectors = np.frombuffer(blob, dtype="<f4", count=n * d, offset=HEADER.size)
    vectors = vectors.reshape(n, d).astype(np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    # float32 storage wobbles unit norms by ~1e-7, stay within the contract
    if np.any(np.abs(norms - 1.0) > 1e-6):
        bad = int(np.argmax(np.abs(norms - 1.0) > 1e-6))
        raise RailError(f"{path}: text vector {bad} has norm {norms[bad]:.8f}, want 1")
    manifest = _read_json(path + ".json")
    return TextEmbeddingTable(
        class_names=list(manifest["class_names"]),
        vectors=vectors,
        prompt_template=manifest.get("prompt_template", DEFAULT_PROMPT_TEMPLATE),
    )


# ---------------------------------------------------------------------------
# sampling and synthesis


def sample_few_shot(dataset, shots, seed):
    """Pick up to ``shots`` samples per class, uniformly without replacement.

    Classes are visited in ascending label order with a single generator
    seeded by ``seed``, so the selection is a pure function of
    (dataset, shots, seed). Row order of the result follows the original
    dataset. Classes with fewer than ``shots`` samples keep everything.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if dataset.role != "train":
        raise ValueError(f"few-shot sampling expects a train split, got {dataset.role!r}")
    rng = np.random.default_rng(seed)
    keep = []
    for label in np.unique(dataset.labels):
        idx = np.flatnonzero(dataset.labels == label)
        if len(idx) > shots:
            idx = rng.choice(idx, size=shots, replace=False)
        keep.append(idx)
    keep = np.sort(np.concatenate(keep))
    return replace(dataset, features=dataset.features[keep], labels=dataset.labels[keep])


def synthesize_domains(n_domains, classes_per_domain, samples_per_class,
                       feature_dim, separation, seed, *, noise=0.15, role="train"):
    """Generate Gaussian-cluster domains with controlled class-mean geometry.

    Every class mean is a unit vector built as
    ``sqrt(1 - rho^2) * q_i + rho * u`` where the ``q_i`` and ``u`` are
    mutually orthonormal and ``rho^2 = cos(separation)``. Any two class
    means then meet at exactly the requested angle, and the shared
    component ``u`` gives controllable cross-domain correlation (a smaller
    separation means more correlated domains). A separation of 0 collapses
    all means onto ``u``.

    Samples are the class mean plus isotropic Gaussian noise, renormalized
    to the unit sphere. The class means double as the text table so
    zero-shot classification over the synthetic classes is meaningful. The
    ``role`` keyword ("train" or "test") switches the sample noise stream
    while keeping the class means fixed, so matching train/test splits come
    from two calls with the same seed.

    Returns (list of EmbeddingDataset with domain-local labels,
    TextEmbeddingTable over all classes in global order).
    """
    if min(n_domains, classes_per_domain, samples_per_class, feature_dim) < 1:
        raise ValueError("all counts must be >= 1")
    if role not in ("train", "test"):
        raise ValueError(f"role must be 'train' or 'test', got {role!r}")
    if separation < 0 or separation > np.pi / 2:
        raise InfeasibleSeparation(
            f"separation {separation} outside the constructible range [0, pi/2]"
        )
    k_total = n_domains * classes_per_domain
    rng_means = np.random.default_rng(seed)
    if separation == 0:
        u = rng_means.standard_normal(feature_dim)
        u /= np.linalg.norm(u)
        means = np.tile(u, (k_total, 1))
    else:
        if k_total + 1 > feature_dim:
            raise InfeasibleSeparation(
                f"{k_total} classes at separation {separation} need dimension "
                f">= {k_total + 1}, got {feature_dim}"
            )
        basis, _ = np.linalg.qr(rng_means.standard_normal((feature_dim, k_total + 1)))
        rho = np.sqrt(np.cos(separation))
        means = np.sqrt(1 - rho ** 2) * basis[:, :k_total].T + rho * basis[:, k_total]

    rng_samples = np.random.default_rng([seed, 0 if role == "train" else 1])
    datasets = []
    table_names = []
    for dom in range(n_domains):
        dom_name = f"dom{dom:02d}"
        class_names = [f"{dom_name}-cls{c:02d}" for c in range(classes_per_domain)]
        table_names.extend(class_names)
        feats = np.empty((classes_per_domain * samples_per_class, feature_dim))
        labels = np.empty(classes_per_domain * samples_per_class, dtype=np.int64)
        for c in range(classes_per_domain):
            mean = means[dom * classes_per_domain + c]
            block = mean + noise * rng_samples.standard_normal((samples_per_class, feature_dim))
            block /= np.linalg.norm(block, axis=1, keepdims=True)
            sl = slice(c * samples_per_class, (c + 1) * samples_per_class)
            feats[sl] = block
            labels[sl] = c
        datasets.append(EmbeddingDataset(
            domain_name=dom_name,
            features=feats,
            labels=labels,
            class_names=class_names,
            role=role,
            normalized=True,
            source=f"synthetic(seed={seed}, separation={separation}, noise={noise})",
        ))
    table = TextEmbeddingTable(class_names=table_names, vectors=means)
    return datasets, table


def _write_json(path, payload):
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
