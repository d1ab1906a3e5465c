"""X-TAIL / MTIL protocol runner, metrics, grid search, and diagnostics.

A run walks an ordered domain sequence. At step n the adapter absorbs
domain n's few-shot train split, then every domain's test set is scored and
row n of the accuracy matrix is recorded. X-TAIL classifies over the union
of all classes with no domain hint; MTIL trains one adapter per domain and
restricts each test set to its own label space.

Hyperparameters follow the protocol of tuning on the first domain only:
when lambda (or the rbf bandwidth) is left unset, a grid search minimizes
ridge-regression error on a held-out split of the first domain's few-shot
set and the chosen values stay fixed for every later step.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dual import DualState, dual_init, dual_update
from .errors import (
    EmptyGrid,
    InsufficientDomains,
    RailError,
    StepError,
)
from .fusion import (
    FusionConfig,
    argmax_lowest_global,
    classify_batch,
    fuse,
    predict_logits,
    softmax,
)
from .primal import PrimalState, primal_init, primal_update
from .projection import IdentityProjection, KernelSpec, RhlParams, kernel_matrix
from .store import (
    LabelRegistry,
    load_embeddings,
    load_text_table,
    register_domain,
    sample_few_shot,
)

LAMBDA_GRID = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]
GAMMA_GRID = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]


@dataclass
class DomainSpec:
    name: str
    train: str
    test: str


@dataclass
class RunConfig:
    """Everything a train-eval run depends on, and nothing else.

    ``lam`` (and ``gamma`` for the rbf kernel) may be None, meaning
    "grid-search on the first domain before running". ``rhl_dim`` of 0
    drops the hidden layer so the primal adapter regresses on raw
    features. Relative paths are resolved against the config file's
    directory by :meth:`from_json_file`.
    """

    domains: list
    text_tables: list
    adapter: str = "dual"
    mode: str = "xtail"
    shots: int = 16
    seed: int = 0
    lam: float = None
    kernel: str = "rbf"
    gamma: float = None
    rhl_dim: int = 15000
    rhl_seed: int = None
    beta: float = 0.8
    logit_scale: float = 100.0
    raw_fusion: bool = False
    targets: str = "onehot"
    lambda_grid: list = field(default_factory=lambda: list(LAMBDA_GRID))
    gamma_grid: list = field(default_factory=lambda: list(GAMMA_GRID))
    validation_fraction: float = 0.2

    def __post_init__(self):
        if not self.domains:
            raise InsufficientDomains("domain sequence must be non-empty")
        if self.adapter not in ("primal", "dual"):
            raise ValueError(f"adapter must be 'primal' or 'dual', got {self.adapter!r}")
        if self.mode not in ("xtail", "mtil"):
            raise ValueError(f"mode must be 'xtail' or 'mtil', got {self.mode!r}")
        if self.targets not in ("onehot", "text"):
            raise ValueError(f"targets must be 'onehot' or 'text', got {self.targets!r}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.logit_scale <= 0:
            raise ValueError("logit_scale must be > 0")
        if self.rhl_dim < 0:
            raise ValueError("rhl_dim must be >= 0")

    def to_dict(self):
        return {
            "domains": [{"name": d.name, "train": d.train, "test": d.test}
                        for d in self.domains],
            "text_tables": list(self.text_tables),
            "adapter": self.adapter,
            "mode": self.mode,
            "shots": self.shots,
            "seed": self.seed,
            "lam": self.lam,
            "kernel": self.kernel,
            "gamma": self.gamma,
            "rhl_dim": self.rhl_dim,
            "rhl_seed": self.rhl_seed,
            "beta": self.beta,
            "logit_scale": self.logit_scale,
            "raw_fusion": self.raw_fusion,
            "targets": self.targets,
            "lambda_grid": list(self.lambda_grid),
            "gamma_grid": list(self.gamma_grid),
            "validation_fraction": self.validation_fraction,
        }

    @classmethod
    def from_dict(cls, payload, base_dir=None):
        base = Path(base_dir) if base_dir is not None else None

        def _path(p):
            return str(base / p) if base is not None and not Path(p).is_absolute() else str(p)

        domains = [DomainSpec(name=d["name"], train=_path(d["train"]), test=_path(d["test"]))
                   for d in payload["domains"]]
        known = {f for f in cls.__dataclass_fields__ if f != "domains"}
        kwargs = {k: v for k, v in payload.items() if k in known and k != "text_tables"}
        tables = [_path(p) for p in payload.get("text_tables", [])]
        return cls(domains=domains, text_tables=tables, **kwargs)

    @classmethod
    def from_json_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls.from_dict(payload, base_dir=Path(path).parent)


@dataclass
class MetricMatrix:
    """Step x domain accuracy matrix; entry (i, j) is measured on domain
    j's test set after learning step i."""

    domains: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def to_csv(self):
        lines = ["step," + ",".join(self.domains)]
        for i, row in enumerate(self.values):
            lines.append(",".join([str(i + 1)] + [repr(float(x)) for x in row]))
        return "\n".join(lines) + "\n"


@dataclass
class RunData:
    """In-memory run inputs: datasets with domain-local labels plus the
    text table, ordered like the config's domain sequence."""

    train_sets: list
    test_sets: list
    table: object


def load_run_data(config):
    """Read every domain file and the text tables for a run.

    Features whose file flag says they are not unit-norm are normalized
    in memory here; zero-shot scoring assumes cosine geometry.
    """
    trains, tests = [], []
    for spec in config.domains:
        train = load_embeddings(spec.train)
        test = load_embeddings(spec.test)
        if not train.normalized:
            train = load_embeddings(spec.train, normalize=True)
        if not test.normalized:
            test = load_embeddings(spec.test, normalize=True)
        trains.append(train)
        tests.append(test)
    if not config.text_tables:
        raise RailError("a run needs at least one text table")
    table = load_text_table(config.text_tables[0])
    for path in config.text_tables[1:]:
        table = table.merge(load_text_table(path))
    return RunData(train_sets=trains, test_sets=tests, table=table)


def _registry_for(data):
    registry = LabelRegistry()
    for ds in data.train_sets:
        register_domain(registry, ds.class_names, ds.domain_name)
    return registry


def _projection(config, feature_dim):
    if config.rhl_dim == 0:
        return IdentityProjection()
    seed = config.rhl_seed if config.rhl_seed is not None else config.seed
    return RhlParams(seed=seed, input_dim=feature_dim, output_dim=config.rhl_dim)


def _kernel(config):
    if config.kernel == "linear":
        return KernelSpec("linear")
    return KernelSpec("rbf", gamma=config.gamma)


class _Trainer:
    """Builds and advances one adapter according to the config."""

    def __init__(self, config, feature_dim, target_table=None):
        self.config = config
        self.target_table = target_table
        if config.adapter == "primal":
            self.projection = _projection(config, feature_dim)
        else:
            self.kernel = _kernel(config)

    def fit_first(self, features, labels, registry):
        if self.config.adapter == "primal":
            return primal_init(features, labels, registry, self.projection,
                               self.config.lam, target_table=self.target_table)
        return dual_init(features, labels, registry, self.kernel,
                         self.config.lam, target_table=self.target_table)

    def advance(self, state, features, labels, registry):
        if state is None:
            return self.fit_first(features, labels, registry)
        if self.config.adapter == "primal":
            return primal_update(state, features, labels, registry,
                                 target_table=self.target_table)
        return dual_update(state, features, labels, registry,
                           target_table=self.target_table)


def run_xtail(config, data=None):
    """Sequential learning with domain-agnostic evaluation over all classes."""
    data = data if data is not None else load_run_data(config)
    config = resolve_hyperparameters(config, data)
    n = len(data.train_sets)
    registry = _registry_for(data)
    trains = [registry.globalize(ds) for ds in data.train_sets]
    tests = [registry.globalize(ds) for ds in data.test_sets]
    text = data.table.aligned_to(registry)
    target_table = text if config.targets == "text" else None
    fusion = FusionConfig(beta=config.beta, logit_scale=config.logit_scale,
                          raw_fusion=config.raw_fusion)
    trainer = _Trainer(config, registry.feature_dim, target_table)
    adapter = None
    acc = np.zeros((n, n))
    for step, train in enumerate(trains):
        try:
            shot = sample_few_shot(train, config.shots, config.seed)
            adapter = trainer.advance(adapter, shot.features, shot.labels, registry)
            registry.mark_learned(train.domain_name)
            for j, test in enumerate(tests):
                preds = classify_batch(test.features, adapter, text, registry, fusion)
                acc[step, j] = float(np.mean(preds == test.labels))
        except Exception as exc:
            raise StepError(step, train.domain_name, exc) from exc
    return MetricMatrix(domains=[d.domain_name for d in data.train_sets], values=acc)


def run_mtil(config, data=None):
    """Task-aware protocol: independent adapters, domain-local label spaces.

    A learned domain is scored by the same blend as the domain-agnostic
    path, except both the adapter and the zero-shot distribution live on
    the domain's own classes (the task id pins the label space, so
    zero-shot probabilities renormalize over it). An unlearned domain is
    pure zero-shot within its label set.
    """
    data = data if data is not None else load_run_data(config)
    config = resolve_hyperparameters(config, data)
    n = len(data.train_sets)
    registry = _registry_for(data)
    trains = [registry.globalize(ds) for ds in data.train_sets]
    tests = [registry.globalize(ds) for ds in data.test_sets]
    text = data.table.aligned_to(registry)
    target_table = text if config.targets == "text" else None
    trainer = _Trainer(config, registry.feature_dim, target_table)
    domain_classes = [np.asarray(registry.domain_classes(ds.domain_name), dtype=np.int64)
                      for ds in data.train_sets]
    adapters = [None] * n
    acc = np.zeros((n, n))
    for step, train in enumerate(trains):
        try:
            shot = sample_few_shot(train, config.shots, config.seed)
            adapters[step] = trainer.fit_first(shot.features, shot.labels, registry)
            registry.mark_learned(train.domain_name)
            for j, test in enumerate(tests):
                cls = domain_classes[j]
                zs_local = softmax(config.logit_scale * (test.features @ text[cls].T))
                if adapters[j] is not None:
                    probs = fuse(predict_logits(adapters[j], test.features), zs_local,
                                 np.arange(len(cls)), beta=config.beta,
                                 raw=config.raw_fusion)
                else:
                    probs = zs_local
                preds = argmax_lowest_global(probs, cls)
                acc[step, j] = float(np.mean(preds == test.labels))
        except Exception as exc:
            raise StepError(step, train.domain_name, exc) from exc
    return MetricMatrix(domains=[d.domain_name for d in data.train_sets], values=acc)


def compute_metrics(matrix):
    """Transfer / Average / Last, per domain and aggregated.

    Per-domain transfer is the column mean over pre-learning steps (absent
    for the first domain). The aggregate transfer is the mean over every
    pre-learning cell; average is the whole-matrix mean; last is the mean
    of the final row.
    """
    values = matrix.values if isinstance(matrix, MetricMatrix) else np.asarray(matrix, dtype=np.float64)
    if values.size == 0:
        raise ValueError("metric matrix is empty")
    n_steps, n_domains = values.shape
    per_transfer = [None if j == 0 else float(values[:min(j, n_steps), j].mean())
                    for j in range(n_domains)]
    per_average = [float(values[:, j].mean()) for j in range(n_domains)]
    per_last = [float(values[-1, j]) for j in range(n_domains)]
    upper = [values[i, j] for j in range(n_domains) for i in range(min(j, n_steps))]
    return {
        "transfer": float(np.mean(upper)) if upper else None,
        "average": float(values.mean()),
        "last": float(values[-1].mean()),
        "per_domain": {
            "transfer": per_transfer,
            "average": per_average,
            "last": per_last,
        },
    }


def resolve_hyperparameters(config, data=None):
    """Fill unset lambda/gamma by grid search on the first domain."""
    needs_gamma = (config.adapter == "dual" and config.kernel == "rbf"
                   and config.gamma is None)
    if config.lam is not None and not needs_gamma:
        return config
    lgrid = config.lambda_grid if config.lam is None else [config.lam]
    if config.adapter == "dual" and config.kernel == "rbf":
        ggrid = config.gamma_grid if needs_gamma else [config.gamma]
    else:
        ggrid = None
    lam, gamma = grid_search(config, lgrid, ggrid,
                             config.validation_fraction, data=data)
    if gamma is not None:
        return replace(config, lam=lam, gamma=gamma)
    return replace(config, lam=lam)


def grid_search(config, lambda_grid, gamma_grid=None, validation_fraction=0.2,
                data=None):
    """Pick (lambda, gamma) by regression error on the first domain.

    The few-shot train split of the first domain is divided per class into
    a train part and a held-out part (the given fraction, at least one
    sample, seeded). Each grid point trains on the train part and is scored
    by the squared Frobenius error of its predictions on the held-out
    targets. Later domains are never touched. Ties go to the larger lambda
    (and larger gamma), i.e. the strongest regularization among the minima.

    Returns (lambda, gamma); gamma is None when no kernel bandwidth is in
    play (primal adapter or linear kernel).
    """
    if lambda_grid is None or len(lambda_grid) == 0:
        raise EmptyGrid("lambda grid is empty")
    use_gamma = config.adapter == "dual" and config.kernel == "rbf"
    if use_gamma and (gamma_grid is None or len(gamma_grid) == 0):
        raise EmptyGrid("gamma grid is empty")

    data = data if data is not None else load_run_data(config)
    registry = _registry_for(data)
    first = registry.globalize(data.train_sets[0])
    shot = sample_few_shot(first, config.shots, config.seed)
    text = data.table.aligned_to(registry) if config.targets == "text" else None

    rng = np.random.default_rng([config.seed, 2])
    val_mask = np.zeros(shot.n_samples, dtype=bool)
    for label in np.unique(shot.labels):
        idx = np.flatnonzero(shot.labels == label)
        if len(idx) < 2:
            raise ValueError(
                "grid search needs >= 2 samples per class in the first domain"
            )
        k = min(max(1, round(validation_fraction * len(idx))), len(idx) - 1)
        val_mask[rng.choice(idx, size=k, replace=False)] = True
    tr_feats, tr_labels = shot.features[~val_mask], shot.labels[~val_mask]
    va_feats, va_labels = shot.features[val_mask], shot.labels[val_mask]

    classes = [int(c) for c in np.unique(shot.labels)]
    if text is None:
        col = {c: j for j, c in enumerate(classes)}
        target = np.zeros((len(va_labels), len(classes)))
        target[np.arange(len(va_labels)), [col[int(c)] for c in va_labels]] = 1.0
    else:
        target = text[va_labels]

    projection = _projection(config, registry.feature_dim) if config.adapter == "primal" else None
    best = None
    for lam in sorted(float(v) for v in lambda_grid):
        for gamma in (sorted(float(v) for v in gamma_grid) if use_gamma else [None]):
            if config.adapter == "primal":
                state = primal_init(tr_feats, tr_labels, registry, projection, lam,
                                    target_table=text)
                pred = state.projection.project(va_feats) @ state.W
            else:
                kernel = KernelSpec("rbf", gamma=gamma) if use_gamma else KernelSpec("linear")
                state = dual_init(tr_feats, tr_labels, registry, kernel, lam,
                                  target_table=text)
                pred = kernel_matrix(va_feats, state.prototypes, kernel) @ state.alpha
            err = float(np.sum((target - pred) ** 2))
            if best is None or err <= best[0]:
                best = (err, lam, gamma)
    return best[1], best[2]


def domain_prototype_diagnostics(adapter, registry, test_sets=None):
    """Pairwise Pearson correlation of domain prototypes, and optionally
    the fraction of test predictions landing in the correct domain.

    A domain prototype is the mean of that domain's class weight vectors:
    columns of W for the primal form; for the dual form the alpha columns
    are lifted back to feature space through the stored prototypes
    (a kernel-weighted mean of memorized features), since dual
    coefficients do not live in feature space themselves.
    """
    learned = set(adapter.learned_classes)
    domains = [d for d in registry.domains
               if set(registry.domain_classes(d)) <= learned]
    if len(domains) < 2:
        raise InsufficientDomains("diagnostics need at least 2 learned domains")

    if isinstance(adapter, PrimalState):
        vectors = adapter.W if adapter.target_mode == "onehot" else adapter.W @ adapter.class_targets.T
    elif isinstance(adapter, DualState):
        alpha = adapter.alpha if adapter.target_mode == "onehot" else adapter.alpha @ adapter.class_targets.T
        vectors = adapter.prototypes.T @ alpha
    else:
        raise TypeError(f"not an adapter state: {type(adapter).__name__}")

    pos = {c: i for i, c in enumerate(adapter.learned_classes)}
    prototypes = np.stack([
        vectors[:, [pos[c] for c in registry.domain_classes(d)]].mean(axis=1)
        for d in domains
    ])
    cc = np.corrcoef(prototypes)
    out = {"domains": domains, "cc_matrix": cc}
    if test_sets is not None:
        domain_index = {d: k for k, d in enumerate(registry.domains)}
        class_domain = np.asarray(
            [domain_index[d] for d in registry.class_domains], dtype=np.int64
        )
        accuracy = []
        for ds in test_sets:
            logits = predict_logits(adapter, ds.features)
            preds = argmax_lowest_global(logits, adapter.learned_classes)
            accuracy.append(float(np.mean(class_domain[preds] == class_domain[ds.labels])))
        out["in_domain_accuracy"] = accuracy
    return out


def sweep_ablation(config, axis, values, data=None):
    """Rerun the protocol across one hyperparameter axis.

    Returns one row per value: {value, transfer, average, last}.
    """
    if axis not in ("beta", "rhl_dim"):
        raise ValueError(f"axis must be 'beta' or 'rhl_dim', got {axis!r}")
    if values is None or len(values) == 0:
        raise EmptyGrid("sweep values are empty")
    if axis == "rhl_dim" and config.adapter != "primal":
        raise ValueError("rhl_dim sweeps apply to the primal adapter only")
    data = data if data is not None else load_run_data(config)
    rows = []
    for value in values:
        if axis == "beta":
            cfg = replace(config, beta=float(value))
        else:
            cfg = replace(config, rhl_dim=int(value))
        matrix = run_xtail(cfg, data) if cfg.mode == "xtail" else run_mtil(cfg, data)
        metrics = compute_metrics(matrix)
        rows.append({"value": float(value), "transfer": metrics["transfer"],
                     "average": metrics["average"], "last": metrics["last"]})
    return rows


def sweep_to_csv(rows):
    lines = ["value,transfer,average,last"]
    for row in rows:
        transfer = "" if row["transfer"] is None else repr(row["transfer"])
        lines.append(",".join([repr(row["value"]), transfer,
                               repr(row["average"]), repr(row["last"])]))
    return "\n".join(lines) + "\n"


def result_payload(matrix, config):
    """JSON-ready run result: matrix, metrics, and the config echo."""
    return {
        "config": config.to_dict(),
        "domains": list(matrix.domains),
        "matrix": [[float(x) for x in row] for row in matrix.values],
        "metrics": compute_metrics(matrix),
    }


def payload_to_json(payload):
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
