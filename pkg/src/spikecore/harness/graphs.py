"""Citation-graph topic classification and graph reduction.

The network mirrors the graph: one neuron per paper plus one per topic
(84 + 6 = 90 in the headline configuration).  Citation edges become
static bidirectional excitatory weights; every training paper is wired
strongly to its topic neuron in both directions; every test paper gets
small plastic links to all six topic neurons.  Classifying a test paper
means stimulating its neuron, letting the chain reaction run, and
reading out the topic whose plastic link ended up strongest.

Plasticity is mask-restricted per classification run: only the current
test paper's topic links are enabled, so classifying one node can never
move any other weight (the engine guarantees masked weights are
read-only).  Network state is rebuilt from the base configuration for
every node, making per-node results order-independent.

All weight magnitudes, thresholds, and the stimulus schedule are
unstated in the source experiment; the defaults in
:class:`GraphExperimentParams` are documented constants tuned so a
hand-constructed 6-node example (a test paper citing only training
papers of one topic) classifies correctly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import networkx as nx
import numpy as np

from ..dynamics import NeuronParams
from ..network import Network, NetworkConfig, SpikeEvent
from ..plasticity import StdpParams
from .datasets import N_TOPICS, CitationGraph

DEFAULT_TARGET_PAPERS = 84


@dataclass(frozen=True)
class GraphExperimentParams:
    """Tunable constants for the graph experiment (raw register units)."""

    edge_w: int = 12          # citation edge (12.0 real at shift 10)
    topic_w: int = 16         # training paper <-> its topic neuron
    plastic_init: int = 2     # initial test-paper <-> topic link
    stim_w: int = 24          # stimulus input onto the test paper
    v_th: int = 20480         # 20.0 — one edge alone cannot fire a neuron
    leak: int = 2048          # 2.0
    syn_leak: int = 6144      # 6.0
    refractory_steps: int = 4
    weight_shift: int = 10
    dw_pos: int = 6
    dw_neg: int = 2
    t_pre: int = 6
    t_post: int = 3
    stim_count: int = 12
    stim_period: int = 6
    t_run: int = 80
    n_max: int = 100


@dataclass
class GraphNetwork:
    """Base configuration plus the paper/topic indexing it was built with."""

    config: NetworkConfig
    node_index: dict[str, int]
    topic_indices: list[int]
    train_nodes: list[str]
    test_nodes: list[str]
    labels: dict[str, int]
    params: GraphExperimentParams


def split_graph_nodes(cg: CitationGraph, *, train_frac: float = 0.7,
                      seed: int = 0) -> tuple[list[str], list[str]]:
    """Stratified deterministic split keeping >=1 training paper per topic."""
    rng = np.random.default_rng(seed)
    train: list[str] = []
    test: list[str] = []
    by_topic: dict[int, list[str]] = {}
    for node in cg.nodes:
        by_topic.setdefault(cg.labels[node], []).append(node)
    for topic in sorted(by_topic):
        nodes = by_topic[topic]
        order = [nodes[i] for i in rng.permutation(len(nodes))]
        cut = max(1, int(round(len(order) * train_frac)))
        train.extend(order[:cut])
        test.extend(order[cut:])
    return sorted(train), sorted(test)


def build_graph_network(
    cg: CitationGraph,
    train_nodes: list[str],
    test_nodes: list[str],
    params: GraphExperimentParams | None = None,
) -> GraphNetwork:
    """Wire the graph into a base NetworkConfig (plastic masks all off)."""
    params = params or GraphExperimentParams()
    cg.validate()
    if not cg.is_connected():
        raise ValueError("citation graph must be a single connected component")
    train_set, test_set = set(train_nodes), set(test_nodes)
    if train_set & test_set:
        raise ValueError("train and test sets overlap")
    if train_set | test_set != set(cg.graph.nodes):
        raise ValueError("train/test split must cover every node exactly once")
    papers = cg.nodes
    n = len(papers) + N_TOPICS
    if n > params.n_max:
        raise ValueError(
            f"{len(papers)} papers + {N_TOPICS} topics = {n} neurons "
            f"exceeds capacity {params.n_max}"
        )
    node_index = {name: idx for idx, name in enumerate(papers)}
    topic_indices = [len(papers) + k for k in range(N_TOPICS)]

    w_aa = np.zeros((n, n), dtype=np.int8)
    for a, b in cg.graph.edges:
        i, j = node_index[a], node_index[b]
        w_aa[i][j] = params.edge_w
        w_aa[j][i] = params.edge_w
    for name in train_nodes:
        i, t = node_index[name], topic_indices[cg.labels[name]]
        w_aa[i][t] = params.topic_w
        w_aa[t][i] = params.topic_w
    for name in test_nodes:
        i = node_index[name]
        for t in topic_indices:
            w_aa[i][t] = params.plastic_init
            w_aa[t][i] = params.plastic_init

    config = NetworkConfig(
        n=n,
        n_in=1,
        w_aa=w_aa,
        w_in=np.zeros((n, 1), dtype=np.int8),
        enable_stdp_aa=np.zeros((n, n), dtype=np.uint8),
        enable_stdp_in=np.zeros((n, 1), dtype=np.uint8),
        neuron_params=NeuronParams(
            v_th=params.v_th,
            leak=params.leak,
            v_reset=0,
            syn_leak=params.syn_leak,
            refractory_steps=params.refractory_steps,
        ),
        stdp_params=StdpParams(
            dw_pos=params.dw_pos,
            dw_neg=params.dw_neg,
            t_pre=params.t_pre,
            t_post=params.t_post,
            enabled=True,
        ),
        weight_shift=params.weight_shift,
    )
    config.validate(n_max=params.n_max)
    return GraphNetwork(
        config=config,
        node_index=node_index,
        topic_indices=topic_indices,
        train_nodes=sorted(train_nodes),
        test_nodes=sorted(test_nodes),
        labels=dict(cg.labels),
        params=params,
    )


def classification_run(
    gnet: GraphNetwork, node: str
) -> tuple[NetworkConfig, list[SpikeEvent], int]:
    """The exact (config, stream, t_end) triple classify_node executes.

    Exposed so the same run can be replayed on the scalar oracle or the
    float simulator.
    """
    if node not in gnet.node_index:
        raise ValueError(f"unknown node {node!r}")
    if node not in set(gnet.test_nodes):
        raise ValueError(f"node {node!r} is not a test node")
    params = gnet.params
    idx = gnet.node_index[node]
    mask = gnet.config.enable_stdp_aa.copy()
    for t in gnet.topic_indices:
        mask[idx][t] = 1
        mask[t][idx] = 1
    w_in = gnet.config.w_in.copy()
    w_in[idx][0] = params.stim_w
    config = replace(gnet.config, enable_stdp_aa=mask, w_in=w_in)
    stream = [
        SpikeEvent(i * params.stim_period, 0) for i in range(params.stim_count)
    ]
    return config, stream, params.t_run


def classify_node(gnet: GraphNetwork, node: str) -> dict:
    """Stimulate one test paper and read out its strongest topic link."""
    config, stream, t_end = classification_run(gnet, node)
    trace = Network(config).run(stream, t_end)
    idx = gnet.node_index[node]
    weights = [int(trace.final_w_aa[idx][t]) for t in gnet.topic_indices]
    best = max(weights)
    predicted = weights.index(best)  # ties resolve to the lowest topic
    tie = weights.count(best) > 1
    unchanged = all(w == gnet.params.plastic_init for w in weights)
    return {
        "node": node,
        "predicted": predicted,
        "tie": bool(tie),
        "flagged": bool(tie or unchanged),
        "weights": weights,
        "final_w_aa": trace.final_w_aa,
    }


def classify_all_nodes(gnet: GraphNetwork) -> dict:
    """Classify every test paper independently; returns a report dict."""
    nodes = {}
    correct = 0
    for node in gnet.test_nodes:
        result = classify_node(gnet, node)
        actual = gnet.labels[node]
        hit = result["predicted"] == actual
        correct += hit
        nodes[node] = {
            "predicted": result["predicted"],
            "actual": actual,
            "correct": bool(hit),
            "flagged": result["flagged"],
            "weights": result["weights"],
        }
    n = len(gnet.test_nodes)
    return {
        "n_test": n,
        "correct": correct,
        "accuracy": correct / n if n else 0.0,
        "nodes": nodes,
    }


def microseer_reduce(cg: CitationGraph, target: int = DEFAULT_TARGET_PAPERS) -> CitationGraph:
    """Shrink to ``target`` papers by greedy minimum-degree removal.

    Starts from the largest connected component and repeatedly removes
    the lowest-degree node (ties broken by node id) whose removal keeps
    the remainder connected and keeps every topic present at the start
    still represented.  Raises if no removable node exists.
    """
    cg.validate()
    if target < 1:
        raise ValueError(f"target must be positive, got {target}")
    if cg.graph.number_of_nodes() == 0:
        raise ValueError("cannot reduce an empty graph")
    largest = max(nx.connected_components(cg.graph), key=len)
    g = cg.graph.subgraph(largest).copy()
    if target > g.number_of_nodes():
        raise ValueError(
            f"target {target} exceeds the largest connected component "
            f"({g.number_of_nodes()} nodes)"
        )
    required = {cg.labels[node] for node in g.nodes}
    while g.number_of_nodes() > target:
        removed = False
        for node in sorted(g.nodes, key=lambda v: (g.degree(v), v)):
            remaining = [m for m in g.nodes if m != node]
            if {cg.labels[m] for m in remaining} != required:
                continue
            h = g.subgraph(remaining)
            if nx.is_connected(h):
                g = h.copy()
                removed = True
                break
        if not removed:
            raise ValueError(
                f"cannot reduce below {g.number_of_nodes()} nodes without "
                f"disconnecting the graph or losing a topic"
            )
    return CitationGraph(graph=g, labels={n: cg.labels[n] for n in g.nodes})
