"""Recursive analytic incremental learners over frozen embeddings.

Ridge-regression adapters that absorb class-incremental domains in closed
form (a weight-space recursion and a kernel-space recursion, both exactly
equivalent to joint training), a zero-shot fusion gate that leaves
never-seen domains untouched, and an evaluation harness for the
domain-agnostic and task-aware protocols.
"""

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateClassName,
    EmptyGrid,
    EmptyLabelSet,
    InfeasibleSeparation,
    InsufficientDomains,
    LabelOutOfRange,
    NonFiniteValue,
    OverlappingLabels,
    RailError,
    SingularSystem,
    StepError,
)
from .store import (
    EmbeddingDataset,
    LabelRegistry,
    TextEmbeddingTable,
    load_embeddings,
    load_text_table,
    register_domain,
    sample_few_shot,
    save_embeddings,
    save_text_table,
    synthesize_domains,
)
from .projection import (
    IdentityProjection,
    KernelSpec,
    RhlParams,
    kernel_matrix,
    rhl_project,
)
from .primal import (
    PrimalState,
    load_primal_state,
    primal_init,
    primal_predict,
    primal_update,
    save_primal_state,
)
from .dual import (
    DualState,
    dual_init,
    dual_predict,
    dual_update,
    load_dual_state,
    save_dual_state,
)
from .fusion import (
    FusionConfig,
    GateDecision,
    classify,
    classify_batch,
    fuse,
    gate,
    zero_shot_logits,
)
from .harness import (
    DomainSpec,
    MetricMatrix,
    RunConfig,
    RunData,
    compute_metrics,
    domain_prototype_diagnostics,
    grid_search,
    run_mtil,
    run_xtail,
    sweep_ablation,
)

__version__ = "0.1.0"
