"""Dataset loaders: the 8x8 handwritten-digit set and citation graphs.

Digit files are headerless CSV, one sample per row: 64 integer pixel
columns in 0..15 followed by an integer label in 0..9.

Citation graphs arrive as two files: a whitespace-separated edge list
(one ``paper_a paper_b`` pair per line, ``#`` comments allowed) and a
node-label CSV with header ``node,label`` mapping every paper to a
topic index in 0..5.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

N_PIXELS = 64
PIXEL_MAX = 15
N_CLASSES = 10
N_TOPICS = 6


def load_digits_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (pixels (n, 64) uint8, labels (n,) int64); strict validation."""
    pixels, labels = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != N_PIXELS + 1:
                raise ValueError(
                    f"{path}: row {lineno} has {len(row)} columns, "
                    f"expected {N_PIXELS + 1} (64 pixels + label)"
                )
            try:
                values = [int(cell) for cell in row]
            except ValueError:
                raise ValueError(f"{path}: row {lineno} has a non-integer cell")
            pix, label = values[:N_PIXELS], values[N_PIXELS]
            for col, v in enumerate(pix):
                if not 0 <= v <= PIXEL_MAX:
                    raise ValueError(
                        f"{path}: row {lineno} pixel {col} is {v}, "
                        f"outside 0..{PIXEL_MAX}"
                    )
            if not 0 <= label < N_CLASSES:
                raise ValueError(
                    f"{path}: row {lineno} label {label} outside 0..{N_CLASSES - 1}"
                )
            pixels.append(pix)
            labels.append(label)
    if not pixels:
        raise ValueError(f"{path}: empty dataset")
    return np.array(pixels, dtype=np.uint8), np.array(labels, dtype=np.int64)


def write_digits_csv(pixels: np.ndarray, labels: np.ndarray, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for pix, label in zip(np.asarray(pixels).astype(int), labels):
            writer.writerow(list(pix) + [int(label)])


def fetch_digits_csv(path: str) -> int:
    """Materialize the classic 1797-sample 8x8 digit set as CSV.

    Source intensities already sit in 0..16 in some distributions; the
    stray 16s are clamped to 15 so files always satisfy the loader's
    contract.  Returns the number of samples written.
    """
    try:
        from sklearn.datasets import load_digits
    except ImportError as exc:  # pragma: no cover - environment-dependent
        raise RuntimeError(
            "fetching the digit set requires scikit-learn "
            "(pip install spikecore[datasets])"
        ) from exc
    bunch = load_digits()
    pixels = np.minimum(bunch.data.astype(int), PIXEL_MAX)
    write_digits_csv(pixels, bunch.target, path)
    return len(bunch.target)


@dataclass
class CitationGraph:
    """Undirected citation graph with a topic label per paper."""

    graph: nx.Graph
    labels: dict[str, int] = field(default_factory=dict)

    def validate(self) -> None:
        for node in self.graph.nodes:
            if node not in self.labels:
                raise ValueError(f"node {node!r} has no topic label")
        for node, label in self.labels.items():
            if not 0 <= label < N_TOPICS:
                raise ValueError(
                    f"node {node!r} label {label} outside 0..{N_TOPICS - 1}"
                )
            if node not in self.graph:
                self.graph.add_node(node)

    @property
    def nodes(self) -> list[str]:
        return sorted(self.graph.nodes)

    def is_connected(self) -> bool:
        return self.graph.number_of_nodes() > 0 and nx.is_connected(self.graph)

    def topics_present(self) -> set[int]:
        return {self.labels[n] for n in self.graph.nodes}


def load_citation_graph(edges_path: str, labels_path: str,
                        nodes_path: str | None = None) -> CitationGraph:
    """Load a labelled graph; ``nodes_path`` optionally restricts it.

    The node list (one id per line, ``#`` comments allowed) induces a
    subgraph, so a pre-reduced paper set can be supplied exactly.
    """
    labels: dict[str, int] = {}
    with open(labels_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{labels_path}: empty label file")
        if [c.strip() for c in header[:2]] != ["node", "label"]:
            raise ValueError(f"{labels_path}: expected header 'node,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"{labels_path}: line {lineno} needs 'node,label'")
            node = row[0].strip()
            try:
                label = int(row[1])
            except ValueError:
                raise ValueError(
                    f"{labels_path}: line {lineno} label {row[1]!r} is not an integer"
                )
            if node in labels:
                raise ValueError(f"{labels_path}: duplicate node {node!r} at line {lineno}")
            labels[node] = label

    graph = nx.Graph()
    graph.add_nodes_from(labels)
    with open(edges_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(
                    f"{edges_path}: line {lineno} expected 'paper_a paper_b'"
                )
            a, b = parts
            for node in (a, b):
                if node not in labels:
                    raise ValueError(
                        f"{edges_path}: line {lineno} references node {node!r} "
                        f"absent from the label file"
                    )
            if a == b:
                raise ValueError(f"{edges_path}: line {lineno} is a self-loop")
            graph.add_edge(a, b)

    if nodes_path is not None:
        keep: list[str] = []
        with open(nodes_path) as fh:
            for lineno, line in enumerate(fh, start=1):
                name = line.split("#", 1)[0].strip()
                if not name:
                    continue
                if name not in labels:
                    raise ValueError(
                        f"{nodes_path}: line {lineno} names unknown node {name!r}"
                    )
                keep.append(name)
        if not keep:
            raise ValueError(f"{nodes_path}: empty node list")
        graph = graph.subgraph(keep).copy()
        labels = {name: labels[name] for name in keep}

    cg = CitationGraph(graph=graph, labels=labels)
    cg.validate()
    return cg


def save_citation_graph(cg: CitationGraph, edges_path: str, labels_path: str) -> None:
    with open(edges_path, "w") as fh:
        for a, b in sorted(tuple(sorted(e)) for e in cg.graph.edges):
            fh.write(f"{a} {b}\n")
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "label"])
        for node in cg.nodes:
            writer.writerow([node, cg.labels[node]])


def generate_demo_graph(n_papers: int = 120, *, seed: int = 0,
                        intra_p: float = 0.12, inter_p: float = 0.01) -> CitationGraph:
    """Synthesize a connected labelled citation graph for demos/tests.

    Papers cluster by topic: edges inside a topic are much more likely
    than edges across topics, and a spanning chain guarantees
    connectivity regardless of the random draw.
    """
    if n_papers < N_TOPICS:
        raise ValueError(f"need at least {N_TOPICS} papers, got {n_papers}")
    rng = np.random.default_rng(seed)
    names = [f"p{idx:04d}" for idx in range(n_papers)]
    labels = {name: idx % N_TOPICS for idx, name in enumerate(names)}
    graph = nx.Graph()
    graph.add_nodes_from(names)
    for i in range(n_papers):
        for j in range(i + 1, n_papers):
            p = intra_p if labels[names[i]] == labels[names[j]] else inter_p
            if rng.random() < p:
                graph.add_edge(names[i], names[j])
    for i in range(1, n_papers):
        if not nx.has_path(graph, names[0], names[i]):
            graph.add_edge(names[rng.integers(0, i)], names[i])
    cg = CitationGraph(graph=graph, labels=labels)
    cg.validate()
    return cg
