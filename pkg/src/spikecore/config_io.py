"""On-disk formats: network config documents, run manifests, matrices.

A network configuration is a single YAML document, schema version 1::

    format: 1
    n: 2
    n_in: 1
    weight_shift: 10          # optional, default 10
    monitored_neuron: 0       # optional, default 0
    neuron_params:
      v_th: 2048              # raw Q1.7.10 register values
      leak: 10
      v_reset: 0
      syn_leak: 64
      refractory_steps: 0     # optional, default 0
      membrane_floor: true    # optional, default true
    stdp_params:
      dw_pos: 4
      dw_neg: 3
      t_pre: 10
      t_post: 10
      enabled: true           # optional, default true
    w_aa: [[0, 64], [0, 0]]   # inline row-major, or {file: w_aa.csv}
    w_in: {file: w_in.bin}
    enable_stdp_aa: ...       # optional masks, default all-zero
    enable_stdp_in: ...

Matrix files referenced with ``{file: ...}`` resolve relative to the
document and are either ``.csv`` (integer grid, one row per line) or
``.bin`` (raw row-major signed bytes; dimensions come from the config).

A run manifest is a second YAML document::

    format: 1
    config: net.yaml
    stream: stream.bin        # optional; .bin wire format or .csv (t,address)
    t_end: 100
    out_dir: out/
    stdp: false               # optional override of stdp_params.enabled
    monitor: 3                # optional override of monitored_neuron
"""

from __future__ import annotations

import csv
import dataclasses
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .dynamics import NeuronParams
from .network import NetworkConfig, SpikeEvent
from .plasticity import StdpParams
from .protocol import decode_spikes

FORMAT_VERSION = 1


def _fail(path: str, message: str) -> ValueError:
    return ValueError(f"{path}: {message}")


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise _fail(path, f"missing required field '{key}'")
    return doc[key]


def load_matrix(spec, shape: tuple[int, int], base_dir: str, name: str, path: str) -> np.ndarray:
    """Resolve an inline list-of-lists or a ``{file: ...}`` reference."""
    if isinstance(spec, dict):
        if set(spec) != {"file"}:
            raise _fail(path, f"{name}: matrix reference must be {{file: ...}}")
        ref = os.path.join(base_dir, spec["file"])
        if not os.path.exists(ref):
            raise _fail(path, f"{name}: matrix file not found: {ref}")
        if ref.endswith(".bin"):
            data = np.fromfile(ref, dtype=np.int8)
            if data.size != shape[0] * shape[1]:
                raise _fail(path, f"{name}: {ref} holds {data.size} bytes, need {shape[0] * shape[1]}")
            return data.reshape(shape)
        try:
            rows = [
                [int(cell) for cell in line]
                for line in csv.reader(open(ref, newline=""))
                if line
            ]
        except ValueError as exc:
            raise _fail(path, f"{name}: non-integer cell in {ref}: {exc}")
        return np.array(rows)
    if isinstance(spec, list):
        return np.array(spec)
    raise _fail(path, f"{name}: expected inline rows or {{file: ...}}")


def load_network_config(path: str) -> NetworkConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise _fail(path, "config document must be a mapping")
    if doc.get("format") != FORMAT_VERSION:
        raise _fail(path, f"unsupported format {doc.get('format')!r}, expected {FORMAT_VERSION}")
    base = os.path.dirname(os.path.abspath(path))
    n = _require(doc, "n", path)
    n_in = _require(doc, "n_in", path)
    try:
        shape_aa, shape_in = (n, n), (n, n_in)
        np_doc = _require(doc, "neuron_params", path)
        sp_doc = _require(doc, "stdp_params", path)
        config = NetworkConfig(
            n=n,
            n_in=n_in,
            w_aa=load_matrix(_require(doc, "w_aa", path), shape_aa, base, "w_aa", path),
            w_in=load_matrix(_require(doc, "w_in", path), shape_in, base, "w_in", path),
            enable_stdp_aa=(
                load_matrix(doc["enable_stdp_aa"], shape_aa, base, "enable_stdp_aa", path)
                if "enable_stdp_aa" in doc
                else np.zeros(shape_aa, dtype=np.uint8)
            ),
            enable_stdp_in=(
                load_matrix(doc["enable_stdp_in"], shape_in, base, "enable_stdp_in", path)
                if "enable_stdp_in" in doc
                else np.zeros(shape_in, dtype=np.uint8)
            ),
            neuron_params=NeuronParams(
                v_th=_require(np_doc, "v_th", path),
                leak=_require(np_doc, "leak", path),
                v_reset=_require(np_doc, "v_reset", path),
                syn_leak=_require(np_doc, "syn_leak", path),
                refractory_steps=np_doc.get("refractory_steps", 0),
                membrane_floor=bool(np_doc.get("membrane_floor", True)),
            ),
            stdp_params=StdpParams(
                dw_pos=_require(sp_doc, "dw_pos", path),
                dw_neg=_require(sp_doc, "dw_neg", path),
                t_pre=_require(sp_doc, "t_pre", path),
                t_post=_require(sp_doc, "t_post", path),
                enabled=bool(sp_doc.get("enabled", True)),
            ),
            weight_shift=doc.get("weight_shift", 10),
            monitored_neuron=doc.get("monitored_neuron", 0),
        )
        config.validate()
    except (TypeError, ValueError) as exc:
        raise _fail(path, str(exc)) from exc
    return config


def save_network_config(config: NetworkConfig, path: str) -> None:
    """Write a config with inline matrices (exact, human-readable)."""
    doc = {
        "format": FORMAT_VERSION,
        "n": config.n,
        "n_in": config.n_in,
        "weight_shift": config.weight_shift,
        "monitored_neuron": config.monitored_neuron,
        "neuron_params": {
            k: (bool(v) if k == "membrane_floor" else int(v))
            for k, v in dataclasses.asdict(config.neuron_params).items()
        },
        "stdp_params": {
            k: (bool(v) if k == "enabled" else int(v))
            for k, v in dataclasses.asdict(config.stdp_params).items()
        },
        "w_aa": config.w_aa.astype(int).tolist(),
        "w_in": config.w_in.astype(int).tolist(),
        "enable_stdp_aa": config.enable_stdp_aa.astype(int).tolist(),
        "enable_stdp_in": config.enable_stdp_in.astype(int).tolist(),
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


@dataclass
class RunManifest:
    config_path: str
    stream_path: str | None
    t_end: int
    out_dir: str
    stdp: bool | None = None
    monitor: int | None = None


def load_run_manifest(path: str) -> RunManifest:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise _fail(path, "manifest must be a mapping")
    if doc.get("format") != FORMAT_VERSION:
        raise _fail(path, f"unsupported format {doc.get('format')!r}")
    base = os.path.dirname(os.path.abspath(path))
    t_end = _require(doc, "t_end", path)
    if not isinstance(t_end, int) or t_end < 0:
        raise _fail(path, "t_end must be a non-negative integer")
    config_path = os.path.join(base, _require(doc, "config", path))
    if not os.path.exists(config_path):
        raise _fail(path, f"config file not found: {config_path}")
    stream = doc.get("stream")
    stream_path = os.path.join(base, stream) if stream else None
    if stream_path and not os.path.exists(stream_path):
        raise _fail(path, f"stream file not found: {stream_path}")
    return RunManifest(
        config_path=config_path,
        stream_path=stream_path,
        t_end=t_end,
        out_dir=os.path.join(base, doc.get("out_dir", ".")),
        stdp=doc.get("stdp"),
        monitor=doc.get("monitor"),
    )


def load_stream(path: str) -> list[SpikeEvent]:
    """Read events from a wire-format ``.bin`` or a ``t,address`` CSV."""
    if path.endswith(".bin"):
        with open(path, "rb") as fh:
            return decode_spikes(fh.read())
    events = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if [c.strip() for c in header[:2]] != ["t", "address"]:
            raise _fail(path, "stream CSV must start with header 't,address'")
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                events.append(SpikeEvent(int(row[0]), int(row[1])))
            except (ValueError, IndexError):
                raise _fail(path, f"line {i}: expected 't,address' integers")
    return events


def save_stream_csv(events: list[SpikeEvent], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "address"])
        writer.writerows(events)


def write_raster_csv(raster: list[tuple[int, int]], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "neuron"])
        writer.writerows(raster)


def write_membrane_csv(membrane: list[int], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "raw", "real"])
        for t, raw in enumerate(membrane):
            writer.writerow([t, raw, raw / 1024.0])


def write_weights_csv(w_aa: np.ndarray, w_in: np.ndarray, path: str) -> None:
    """Long-format dump of both matrices: matrix,row,col,weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["matrix", "row", "col", "weight"])
        for name, m in (("aa", w_aa), ("in", w_in)):
            for (r, c), val in np.ndenumerate(m):
                writer.writerow([name, r, c, int(val)])


def write_matrix_csv(matrix: np.ndarray, path: str) -> None:
    """Plain integer grid, one row per line (heat-map friendly)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerows(np.asarray(matrix).astype(int).tolist())
