"""Run records: canonical JSON, content hashes, CSV tables, SVG plots.

A record's content hash covers the schema tag, experiment name, the
physical part of the config echo, and every result cell and summary.
Timing, worker count, and output options stay outside the hash so a rerun
on different hardware or thread count hashes identically.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

RECORD_SCHEMA = "gwskel-record-v1"

CSV_COLUMNS = (
    "experiment", "n", "K", "m", "delta", "epsilon",
    "estimate", "se", "oracle", "replicas", "seed",
)

CELL_KEYS = ("n", "K", "m", "delta", "epsilon", "estimate", "se", "oracle", "replicas")


def make_cell(n=None, K=None, m=None, delta=None, epsilon=None,
              estimate=None, se=None, oracle=None, replicas=None, **extra):
    cell = {
        "n": n, "K": K, "m": m, "delta": delta, "epsilon": epsilon,
        "estimate": estimate, "se": se, "oracle": oracle, "replicas": replicas,
    }
    cell.update(extra)
    return cell


def jsonable(obj):
    """Plain-python copy with numpy scalars unwrapped and Fractions strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and (obj != obj or obj in (float("inf"), float("-inf"))):
        raise ValueError("records must not carry NaN or infinities")
    return obj


def canonical_json(obj):
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass
class ExperimentRecord:
    experiment: str
    config: dict
    config_for_hash: dict
    results: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    schema: str = RECORD_SCHEMA

    def content_hash(self):
        payload = canonical_json({
            "schema": self.schema,
            "experiment": self.experiment,
            "config": self.config_for_hash,
            "results": self.results,
            "summaries": self.summaries,
        })
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_dict(self):
        return jsonable({
            "schema": self.schema,
            "experiment": self.experiment,
            "config": self.config,
            "results": self.results,
            "summaries": self.summaries,
            "meta": self.meta,
            "content_hash": self.content_hash(),
        })

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)


def record_from_json(text):
    data = json.loads(text)
    rec = ExperimentRecord(
        experiment=data["experiment"],
        config=data["config"],
        config_for_hash=_strip_non_physical(data["config"]),
        results=data["results"],
        summaries=data["summaries"],
        meta=data.get("meta", {}),
        schema=data.get("schema", RECORD_SCHEMA),
    )
    return rec


def _strip_non_physical(config):
    from .config import NON_PHYSICAL_KEYS

    return {k: v for k, v in config.items() if k not in NON_PHYSICAL_KEYS}


def new_record(cfg):
    return ExperimentRecord(
        experiment=cfg.experiment,
        config=cfg.to_dict(),
        config_for_hash=cfg.hash_dict(),
    )


class StopWatch:
    def __init__(self):
        self.t0 = time.perf_counter()

    def seconds(self):
        return time.perf_counter() - self.t0


def write_record(record, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"{record.experiment}.json"
    path.write_text(record.to_json() + "\n", encoding="utf-8")
    return path


def write_tables(record, outdir, fmt="csv"):
    """One tidy table per statistic; csv files or a single tables.json."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = record.config.get("seed")
    paths = []
    if fmt == "json":
        path = outdir / f"{record.experiment}-tables.json"
        path.write_text(
            json.dumps(jsonable(record.results), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return [path]
    for statistic, cells in record.results.items():
        path = outdir / f"{record.experiment}-{statistic}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for cell in cells:
                row = [record.experiment]
                for col in ("n", "K", "m", "delta", "epsilon", "estimate", "se", "oracle", "replicas"):
                    v = cell.get(col)
                    row.append("" if v is None else v)
                row.append(seed)
                writer.writerow(row)
        paths.append(path)
    return paths


def _grid_axis(cells):
    for col in ("m", "n", "K", "delta", "epsilon"):
        vals = [c.get(col) for c in cells if c.get(col) is not None]
        if len(set(vals)) > 1 and len(vals) == len(cells):
            return col
    return None


def write_plots(record, outdir):
    """SVG line plot per statistic with a grid axis; oracle overlaid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for statistic, cells in record.results.items():
        plotted = [c for c in cells if c.get("estimate") is not None]
        axis = _grid_axis(plotted)
        if axis is None or len(plotted) < 2:
            continue
        plotted = sorted(plotted, key=lambda c: c[axis])
        xs = [c[axis] for c in plotted]
        ys = [c["estimate"] for c in plotted]
        errs = [2 * c["se"] if c.get("se") else 0.0 for c in plotted]
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label="estimate")
        oracles = [c.get("oracle") for c in plotted]
        if all(o is not None for o in oracles):
            ax.plot(xs, oracles, linestyle="--", marker="", label="oracle")
        ax.set_xlabel(axis)
        ax.set_ylabel(statistic)
        ax.set_title(f"{record.experiment}: {statistic}")
        ax.legend()
        fig.tight_layout()
        path = outdir / f"{record.experiment}-{statistic}.svg"
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths
