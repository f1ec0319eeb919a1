"""Command-line front end.

Every command prints a single JSON result line to stdout on success and
a single JSON error line to stderr on failure.  Exit codes: 0 success,
2 usage error, 3 data/validation error, 4 protocol/transport error.
Reruns with identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import __version__
from .config_io import (
    load_network_config,
    load_run_manifest,
    load_stream,
    save_stream_csv,
    write_membrane_csv,
    write_raster_csv,
    write_weights_csv,
)
from .network import Network
from .protocol import ProtocolError, decode_spikes, encode_spikes


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exceptions, not exits."""

    def error(self, message):  # noqa: A003 - argparse API
        raise _UsageError(message)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _fail(code: int, message: str) -> int:
    print(json.dumps({"error": message, "code": code}, sort_keys=True),
          file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    import os

    manifest = load_run_manifest(args.manifest)
    config = load_network_config(manifest.config_path)
    if manifest.stdp is not None:
        config = dataclasses.replace(
            config,
            stdp_params=dataclasses.replace(config.stdp_params,
                                            enabled=bool(manifest.stdp)),
        )
    if manifest.monitor is not None:
        config = dataclasses.replace(config, monitored_neuron=manifest.monitor)
        config.validate()
    stream = load_stream(manifest.stream_path) if manifest.stream_path else []
    net = Network(config)
    trace = net.run(stream, manifest.t_end)
    os.makedirs(manifest.out_dir, exist_ok=True)
    write_raster_csv(trace.raster, os.path.join(manifest.out_dir, "raster.csv"))
    write_membrane_csv(trace.membrane,
                       os.path.join(manifest.out_dir, "membrane.csv"))
    write_weights_csv(trace.final_w_aa, trace.final_w_in,
                      os.path.join(manifest.out_dir, "weights_after.csv"))
    _emit({
        "t_end": manifest.t_end,
        "n_spikes": len(trace.raster),
        "out_dir": manifest.out_dir,
    })
    return 0


def cmd_train_digits(args) -> int:
    from .harness.datasets import load_digits_csv
    from .harness.digits import fit_digits, save_digits_model

    pixels, labels = load_digits_csv(args.data)
    model = fit_digits(
        pixels, labels,
        train_frac=args.train_frac,
        seed=args.seed,
        spikes_per_level=args.spikes_per_level,
        window=args.window,
        forcing=args.forcing,
    )
    save_digits_model(model, args.out)
    _emit({
        "model": args.out,
        "n_total": len(labels),
        "n_train": model.n_train,
        "seed": model.seed,
        "train_frac": model.train_frac,
    })
    return 0


def cmd_eval_digits(args) -> int:
    from .harness.datasets import load_digits_csv
    from .harness.digits import evaluate_digits, load_digits_model, split_digits

    model = load_digits_model(args.model)
    pixels, labels = load_digits_csv(args.data)
    if args.split == "all":
        idx = range(len(labels))
    else:
        train_idx, test_idx = split_digits(
            len(labels), train_frac=model.train_frac, seed=model.seed
        )
        idx = train_idx if args.split == "train" else test_idx
    idx = list(idx)
    report = evaluate_digits(model, pixels[idx], labels[idx], engine=args.engine)
    report.pop("predictions")
    report.update({"seed": model.seed, "split": args.split,
                   "spikes_per_level": model.spikes_per_level})
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    _emit(report)
    return 0


def cmd_graph_classify(args) -> int:
    from .harness.datasets import load_citation_graph
    from .harness.graphs import (
        GraphExperimentParams,
        build_graph_network,
        classify_all_nodes,
        split_graph_nodes,
    )

    cg = load_citation_graph(args.edges, args.labels, nodes_path=args.nodes)
    train, test = split_graph_nodes(cg, train_frac=args.train_frac,
                                    seed=args.seed)
    params = GraphExperimentParams(
        t_run=args.t_run,
        stim_count=args.stim_count,
        stim_period=args.stim_period,
    )
    gnet = build_graph_network(cg, train, test, params)
    report = classify_all_nodes(gnet)
    report.update({
        "seed": args.seed,
        "train_frac": args.train_frac,
        "n_papers": len(cg.nodes),
        "params": dataclasses.asdict(params),
    })
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    _emit(report)
    return 0


def cmd_encode(args) -> int:
    events = load_stream(args.events)
    data = encode_spikes(events)
    with open(args.out, "wb") as fh:
        fh.write(data)
    _emit({"events": len(events), "bytes": len(data), "out": args.out})
    return 0


def cmd_decode(args) -> int:
    with open(args.stream, "rb") as fh:
        events = decode_spikes(fh.read())
    save_stream_csv(events, args.out)
    _emit({"events": len(events), "out": args.out})
    return 0


def cmd_serve(args) -> int:
    from .protocol import serve_device, serve_tcp

    try:
        if args.serial:
            _emit({"serving": args.serial, "n_max": args.n_max})
            serve_device(args.serial, n_max=args.n_max)
        else:
            def ready(port):
                _emit({"listening": f"{args.host}:{port}", "n_max": args.n_max})
                sys.stdout.flush()

            serve_tcp(args.host, args.port, n_max=args.n_max, once=args.once,
                      ready=ready)
    except OSError as exc:
        return _fail(4, f"transport error: {exc}")
    return 0


def cmd_reduce_graph(args) -> int:
    from .harness.datasets import load_citation_graph, save_citation_graph
    from .harness.graphs import microseer_reduce

    cg = load_citation_graph(args.edges, args.labels, nodes_path=args.nodes)
    reduced = microseer_reduce(cg, target=args.target)
    save_citation_graph(reduced, args.out_edges, args.out_labels)
    _emit({
        "nodes": reduced.graph.number_of_nodes(),
        "edges": reduced.graph.number_of_edges(),
        "topics": sorted(reduced.topics_present()),
        "out_edges": args.out_edges,
        "out_labels": args.out_labels,
    })
    return 0


def cmd_fetch_digits(args) -> int:
    from .harness.datasets import fetch_digits_csv

    n = fetch_digits_csv(args.out)
    _emit({"samples": n, "out": args.out})
    return 0


def cmd_demo_graph(args) -> int:
    from .harness.datasets import generate_demo_graph, save_citation_graph

    cg = generate_demo_graph(args.papers, seed=args.seed)
    save_citation_graph(cg, args.out_edges, args.out_labels)
    _emit({
        "nodes": cg.graph.number_of_nodes(),
        "edges": cg.graph.number_of_edges(),
        "out_edges": args.out_edges,
        "out_labels": args.out_labels,
    })
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="spikecore",
                     description="Fixed-point spiking-network emulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("run", help="execute a run manifest")
    p.add_argument("manifest", help="YAML run manifest")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train-digits", help="one-shot digit training")
    p.add_argument("--data", required=True, help="digits CSV")
    p.add_argument("--out", required=True, help="model directory to create")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--spikes-per-level", type=int, default=2)
    p.add_argument("--window", type=int, default=32)
    p.add_argument("--forcing", choices=["per-step", "single"],
                   default="per-step")
    p.set_defaults(func=cmd_train_digits)

    p = sub.add_parser("eval-digits", help="classify digits on an engine")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--data", required=True, help="digits CSV")
    p.add_argument("--engine", choices=["fixed", "float"], default="fixed")
    p.add_argument("--split", choices=["test", "train", "all"], default="test")
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=cmd_eval_digits)

    from .harness.graphs import GraphExperimentParams

    graph_defaults = GraphExperimentParams()
    p = sub.add_parser("graph-classify", help="citation-graph topic inference")
    p.add_argument("--edges", required=True, help="edge-list file")
    p.add_argument("--labels", required=True, help="node,label CSV")
    p.add_argument("--nodes", help="optional node subset list (one id per line)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--t-run", type=int, default=graph_defaults.t_run)
    p.add_argument("--stim-count", type=int, default=graph_defaults.stim_count)
    p.add_argument("--stim-period", type=int, default=graph_defaults.stim_period)
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=cmd_graph_classify)

    p = sub.add_parser("encode", help="events CSV -> wire-format bytes")
    p.add_argument("--events", required=True, help="CSV with header t,address")
    p.add_argument("--out", required=True, help="output .bin path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="wire-format bytes -> events CSV")
    p.add_argument("--stream", required=True, help="input .bin path")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("serve", help="speak the wire protocol over TCP/serial")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7777)
    p.add_argument("--serial", help="serve over a character device instead")
    p.add_argument("--n-max", type=int, default=100)
    p.add_argument("--once", action="store_true",
                   help="exit after one connection")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("reduce-graph", help="greedy min-degree graph reduction")
    p.add_argument("--edges", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--nodes", help="optional node subset list")
    p.add_argument("--target", type=int, default=84)
    p.add_argument("--out-edges", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_reduce_graph)

    p = sub.add_parser("fetch-digits", help="materialize the 1797-sample set")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fetch_digits)

    p = sub.add_parser("demo-graph", help="generate a synthetic labeled graph")
    p.add_argument("--papers", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-edges", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_demo_graph)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        return _fail(2, str(exc))
    try:
        return args.func(args)
    except ProtocolError as exc:
        return _fail(4, str(exc))
    except (ValueError, RuntimeError, OSError) as exc:
        return _fail(3, str(exc))


if __name__ == "__main__":
    sys.exit(main())
