"""Dataset files: newline-delimited JSON, one graph per record.

Line 1 is a header object holding the generator config (with seed), the
graph layout and the record count. Every following line is one graph:

    {"t": <index>, "N": <nodes>, "F": <features>,
     "X": [<N*F floats, row-major>], "A": [<N*N ints, row-major>]}

Floats are written with Python repr semantics, so a round trip recovers
them exactly. A CSV export of the same fields is provided for
interoperability (one column per entry).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import CapabilityError, DatasetFormatError
from .generators import PmldsConfig, RotationalConfig, random_pmlds_config, random_rotational_config
from .graphs import AttributedGraph, GraphSequence

FORMAT_NAME = "graphar-sequence"
FORMAT_VERSION = 1


def generator_config_to_dict(config) -> dict:
    """Flat JSON-ready dict for a generator config (or None)."""
    if config is None:
        return None
    if isinstance(config, RotationalConfig):
        return {
            "kind": "rotational",
            "n_nodes": config.n_nodes,
            "feature_dim": config.feature_dim,
            "order": config.order,
            "phase_offsets": [float(v) for v in config.phase_offsets],
            "amplitude": config.amplitude,
            "noise_std": config.noise_std,
            "seed": config.seed,
        }
    if isinstance(config, PmldsConfig):
        return {
            "kind": "pmlds",
            "n_nodes": config.n_nodes,
            "feature_dim": config.feature_dim,
            "complexity": config.complexity,
            "dynamics_matrix": [float(v) for v in config.dynamics_matrix.ravel()],
            "noise_std": config.noise_std,
            "seed": config.seed,
        }
    raise ValueError(f"unknown generator config type {type(config).__name__}")


def generator_config_from_dict(data: dict):
    """Inverse of generator_config_to_dict.

    Parameter arrays (phase offsets, dynamics matrix) may be omitted, in
    which case they are re-drawn deterministically from the stored seed.
    """
    if data is None:
        return None
    try:
        kind = data["kind"]
        if kind == "rotational":
            if "phase_offsets" not in data:
                return random_rotational_config(
                    n_nodes=int(data["n_nodes"]),
                    order=int(data["order"]),
                    seed=int(data.get("seed", 0)),
                    amplitude=float(data.get("amplitude", 0.01)),
                    noise_std=float(data.get("noise_std", 0.001)),
                )
            return RotationalConfig(
                n_nodes=int(data["n_nodes"]),
                order=int(data["order"]),
                phase_offsets=np.asarray(data["phase_offsets"], dtype=np.float64),
                amplitude=float(data.get("amplitude", 0.01)),
                noise_std=float(data.get("noise_std", 0.001)),
                seed=int(data.get("seed", 0)),
            )
        if kind == "pmlds":
            c = int(data["complexity"])
            if "dynamics_matrix" not in data:
                return random_pmlds_config(
                    n_nodes=int(data["n_nodes"]),
                    complexity=c,
                    seed=int(data.get("seed", 0)),
                    feature_dim=int(data.get("feature_dim", 2)),
                    noise_std=float(data.get("noise_std", 0.001)),
                )
            matrix = np.asarray(data["dynamics_matrix"], dtype=np.float64).reshape(c, c)
            return PmldsConfig(
                n_nodes=int(data["n_nodes"]),
                feature_dim=int(data.get("feature_dim", 2)),
                complexity=c,
                dynamics_matrix=matrix,
                noise_std=float(data.get("noise_std", 0.001)),
                seed=int(data.get("seed", 0)),
            )
    except KeyError as exc:
        raise DatasetFormatError(f"generator config missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise DatasetFormatError(f"bad generator config: {exc}") from exc
    raise DatasetFormatError(f"unknown generator kind {data.get('kind')!r}")


def save_sequence(seq: GraphSequence, path) -> None:
    """Write a graph sequence; load_sequence inverts this bit-exactly."""
    path = Path(path)
    lines = []
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n_graphs": len(seq),
        "n_nodes": seq.n_nodes if len(seq) else None,
        "feature_dim": seq.feature_dim if len(seq) else None,
        "directed": seq.directed if len(seq) else False,
        "generator": generator_config_to_dict(seq.origin),
    }
    lines.append(json.dumps(header))
    for t, g in enumerate(seq):
        if g.edge_attributes is not None:
            raise CapabilityError("dataset format does not carry edge attributes")
        record = {
            "t": t,
            "N": g.n_nodes,
            "F": g.feature_dim,
            "X": [float(v) for v in g.node_features.ravel()],
            "A": [int(v) for v in g.adjacency.ravel()],
        }
        lines.append(json.dumps(record))
    path.write_text("\n".join(lines) + "\n")


def load_sequence(path) -> GraphSequence:
    """Read a sequence written by save_sequence.

    Malformed or truncated files raise DatasetFormatError with the
    offending record index.
    """
    path = Path(path)
    with path.open() as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise DatasetFormatError("empty file", record=0)

    def parse(line: str, index: int) -> dict:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"invalid JSON: {exc}", record=index) from exc
        if not isinstance(obj, dict):
            raise DatasetFormatError("record is not an object", record=index)
        return obj

    header = parse(raw[0], 0)
    if header.get("format") != FORMAT_NAME:
        raise DatasetFormatError(
            f"not a {FORMAT_NAME} file (format={header.get('format')!r})", record=0
        )
    n_graphs = header.get("n_graphs")
    if not isinstance(n_graphs, int) or n_graphs < 0:
        raise DatasetFormatError("header n_graphs missing or invalid", record=0)
    records = [line for line in raw[1:] if line.strip()]
    if len(records) != n_graphs:
        raise DatasetFormatError(
            f"expected {n_graphs} graph records, found {len(records)}",
            record=len(records),
        )
    directed = bool(header.get("directed", False))

    graphs = []
    for idx, line in enumerate(records, start=1):
        obj = parse(line, idx)
        try:
            n, f = int(obj["N"]), int(obj["F"])
            x = np.asarray(obj["X"], dtype=np.float64)
            a = np.asarray(obj["A"], dtype=np.int8)
            if x.size != n * f or a.size != n * n:
                raise ValueError(
                    f"X/A lengths {x.size}/{a.size} do not match N={n}, F={f}"
                )
            graphs.append(
                AttributedGraph(x.reshape(n, f), a.reshape(n, n), directed=directed)
            )
        except KeyError as exc:
            raise DatasetFormatError(f"missing field {exc}", record=idx) from exc
        except (TypeError, ValueError) as exc:
            raise DatasetFormatError(str(exc), record=idx) from exc

    origin = generator_config_from_dict(header.get("generator"))
    return GraphSequence(graphs, origin=origin)


def export_sequence_csv(seq: GraphSequence, path) -> None:
    """CSV with columns t, N, F, X0..X{N*F-1}, A0..A{N*N-1}."""
    path = Path(path)
    if len(seq) == 0:
        path.write_text("t,N,F\n")
        return
    n, f = seq.n_nodes, seq.feature_dim
    header = (
        ["t", "N", "F"]
        + [f"X{i}" for i in range(n * f)]
        + [f"A{i}" for i in range(n * n)]
    )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, g in enumerate(seq):
            row = [t, n, f]
            row += [repr(float(v)) for v in g.node_features.ravel()]
            row += [int(v) for v in g.adjacency.ravel()]
            writer.writerow(row)
