"""Experiment harness: encoders, dataset loaders, and the two
end-to-end pipelines (handwritten-digit classification and
citation-graph topic classification), plus the fixed-vs-float
divergence report."""

from .datasets import (
    CitationGraph,
    generate_demo_graph,
    load_citation_graph,
    load_digits_csv,
    fetch_digits_csv,
    save_citation_graph,
    write_digits_csv,
)
from .digits import (
    DigitsModel,
    evaluate_digits,
    fit_digits,
    load_digits_model,
    normalize_and_quantize,
    save_digits_model,
    split_digits,
    train_digits_one_shot,
)
from .divergence import divergence_report
from .encoding import WINDOW_STEPS, rate_encode, rate_encode_sample
from .graphs import (
    GraphExperimentParams,
    build_graph_network,
    classify_all_nodes,
    classify_node,
    microseer_reduce,
)

__all__ = [
    "CitationGraph",
    "DigitsModel",
    "GraphExperimentParams",
    "WINDOW_STEPS",
    "build_graph_network",
    "classify_all_nodes",
    "classify_node",
    "divergence_report",
    "evaluate_digits",
    "fetch_digits_csv",
    "fit_digits",
    "generate_demo_graph",
    "load_citation_graph",
    "normalize_and_quantize",
    "load_digits_csv",
    "load_digits_model",
    "microseer_reduce",
    "rate_encode",
    "rate_encode_sample",
    "save_citation_graph",
    "save_digits_model",
    "split_digits",
    "train_digits_one_shot",
    "write_digits_csv",
]
