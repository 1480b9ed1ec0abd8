"""Front-door-adjusted multi-hop fact verification on synthetic graphs."""

from ._causalwalk import (
    Example,
    EpochStats,
    GeneratorConfig,
    Metrics,
    Model,
    Splits,
    TrainOptions,
    TrainOutcome,
    generate,
    label_name,
    load_jsonl,
    logic_eval,
    save_jsonl,
    scm,
    shortcut_sentence,
    train,
)

__all__ = [
    "Example",
    "EpochStats",
    "GeneratorConfig",
    "Metrics",
    "Model",
    "Splits",
    "TrainOptions",
    "TrainOutcome",
    "generate",
    "label_name",
    "load_jsonl",
    "logic_eval",
    "save_jsonl",
    "scm",
    "shortcut_sentence",
    "train",
]
