from ._core import (
    Params,
    Store,
    bench_metrics,
    cosine_distance,
    evaluate,
    generate_store,
    grad_check,
    load_params,
    load_store,
    metric_names,
    metric_value,
    require_disjoint_classes,
    train,
)

__all__ = [
    "Params",
    "Store",
    "bench_metrics",
    "cosine_distance",
    "evaluate",
    "generate_store",
    "grad_check",
    "load_params",
    "load_store",
    "metric_names",
    "metric_value",
    "require_disjoint_classes",
    "train",
]
