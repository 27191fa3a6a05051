"""Run artifacts: run.json (full report) and observables.csv (long format)."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import plotting
from .config import config_hash

CSV_COLUMNS = ("trial_id", "seed", "name", "value", "aux")


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (set, tuple)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


@dataclass
class TrialReport:
    config: dict
    outcome: object
    version: str = ""
    artifacts: list = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerow((-1, self.config["seed"], "config_hash", "", self.config_hash))
        for t, s, name, value, aux in self.outcome.rows:
            w.writerow((t, s, name, format_value(value), aux))
        return buf.getvalue()

    def to_dict(self) -> dict:
        o = self.outcome
        return {"config": self.config, "config_hash": self.config_hash, "version": self.version,
                "seeds": o.seeds, "summary": o.summary, "records": o.records,
                "check": o.check, "artifacts": self.artifacts}

    def write(self, out_dir: str) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        plotting.set_stamp(f"config_hash={self.config_hash}")
        try:
            for name, writer in self.outcome.figures.items():
                p = os.path.join(out_dir, name)
                writer(p)
                paths.append(p)
        finally:
            plotting.set_stamp(None)
        p = os.path.join(out_dir, "observables.csv")
        with open(p, "w", newline="") as fh:
            fh.write(self.csv_text())
        paths.append(p)
        self.artifacts = [os.path.basename(q) for q in paths] + ["run.json"]
        p = os.path.join(out_dir, "run.json")
        with open(p, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, default=_jsonable,
                      allow_nan=True)
            fh.write("\n")
        paths.append(p)
        return paths


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
