"""Topic model comparison workbench.

Data crosses the boundary as plain Python values: threads, token sets,
models and reports are dicts and lists with the same shape as the JSON
artifacts the CLI writes.
"""

from ._topicbench import (
    ConfigError,
    Error,
    IngestError,
    NotFoundError,
    PipelineError,
    Server,
    ValidationError,
    anova,
    chord_graph,
    coherence,
    compare_table,
    config_hash,
    diversity,
    evaluate,
    export_report,
    friedman,
    load_threads,
    nemenyi,
    paired_t,
    pearson,
    preprocess,
    read_threads,
    run_pipeline,
    studentized_range_sf,
    train,
    tukey_hsd,
    verify_run,
    wilcoxon,
    write_threads,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
