"""Synthetic corruption benchmarks for Earth observation imagery.

Twelve corruption generators at graded severities, annotation-aware
geometric transforms, deterministic benchmark-tree generation, task
metrics with the relative performance drop, and Fréchet fidelity analysis.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    SEVERITY_TABLE,
    Category,
    CorruptionKind,
    CorruptionSpec,
    ImageRaster,
    derive_stream,
    load_image,
    save_image,
    severity_params,
)
from .annotations import (  # noqa: E402
    ClassLabel,
    HorizontalBox,
    HorizontalBoxes,
    OrientedBox,
    OrientedBoxes,
    ReferringRecord,
    ReferringRecords,
    SegMask,
)
from .pipeline import (  # noqa: E402
    CorruptionChain,
    DatasetManifest,
    GenerationPlan,
    apply_chain,
    apply_corruption,
    generate,
    ingest,
    parse_chain,
)
from .metrics import (  # noqa: E402
    RobustnessReport,
    ScoreCell,
    accuracy,
    aggregate,
    grounding_accuracy,
    mean_ap,
    miou,
    polygon_iou,
    r_tp,
    render_report,
)
from .fidelity import (  # noqa: E402
    EmbeddingSet,
    EmbeddingStats,
    embedding_stats,
    frechet_distance,
    severity_sweep,
)

__all__ = [
    "__version__",
    "SEVERITY_TABLE",
    "Category",
    "CorruptionKind",
    "CorruptionSpec",
    "ImageRaster",
    "derive_stream",
    "load_image",
    "save_image",
    "severity_params",
    "ClassLabel",
    "HorizontalBox",
    "HorizontalBoxes",
    "OrientedBox",
    "OrientedBoxes",
    "ReferringRecord",
    "ReferringRecords",
    "SegMask",
    "CorruptionChain",
    "DatasetManifest",
    "GenerationPlan",
    "apply_chain",
    "apply_corruption",
    "generate",
    "ingest",
    "parse_chain",
    "RobustnessReport",
    "ScoreCell",
    "accuracy",
    "aggregate",
    "grounding_accuracy",
    "mean_ap",
    "miou",
    "polygon_iou",
    "r_tp",
    "render_report",
    "EmbeddingSet",
    "EmbeddingStats",
    "embedding_stats",
    "frechet_distance",
    "severity_sweep",
]
