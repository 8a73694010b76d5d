"""Evaluation reports: per-sample rows plus recomputable aggregates."""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..util import config_hash, write_json


def _aggregate(samples):
    """Mean of every numeric field across sample rows."""
    agg = {}
    if not samples:
        return agg
    keys = set()
    for row in samples:
        keys.update(k for k, v in row.items()
                    if isinstance(v, (int, float)) and not isinstance(v, bool)
                    and not k.endswith("seed"))
    for k in sorted(keys):
        vals = [row[k] for row in samples if k in row]
        agg[k] = float(np.mean(vals))
    return agg


@dataclass
class EvalReport:
    task: str
    config: dict
    seed: int
    samples: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    started: float = field(default_factory=time.time)

    def add(self, **row) -> None:
        self.samples.append(row)

    @property
    def aggregates(self) -> dict:
        return _aggregate(self.samples)

    def verify_aggregates(self, reported: dict) -> None:
        fresh = self.aggregates
        for k, v in reported.items():
            if abs(fresh.get(k, float("nan")) - v) > 1e-12:
                raise ContractError(f"aggregate {k} does not recompute from samples")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "seed": self.seed,
            "n_samples": len(self.samples),
            "aggregates": self.aggregates,
            "samples": self.samples,
            "notes": {"LPIPS": "n/a (needs a pretrained perceptual network)", **self.notes},
            "runtime_s": round(time.time() - self.started, 3),
        }

    def report_hash(self) -> str:
        d = self.to_dict()
        d.pop("runtime_s")
        return config_hash(d)

    def save(self, path) -> None:
        write_json(path, self.to_dict())

    def text_table(self) -> str:
        agg = self.aggregates
        lines = [f"task: {self.task}   samples: {len(self.samples)}   seed: {self.seed}"]
        width = max((len(k) for k in agg), default=8)
        for k in sorted(agg):
            lines.append(f"  {k:<{width}}  {agg[k]:12.6f}")
        return "\n".join(lines)


def print_report(report: EvalReport, log=print) -> None:
    log(report.text_table())
