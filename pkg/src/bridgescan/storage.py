"""Run-directory persistence: record CSVs with JSON sidecars and the manifest."""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .response import SensorRecord

MANIFEST = "manifest.json"
CONFIG = "config.json"


def _fmt(v: float) -> str:
    return repr(float(v))


def write_record(path, record: SensorRecord, n_modal: int | None = None) -> Path:
    """CSV ``t,x_I,acc,acc_m1..`` plus a ``.json`` sidecar with the metadata.

    Modal columns are blank when the record carries no modal channels.
    """
    path = Path(path)
    modal = record.modal
    n_modal = n_modal if n_modal is not None else (0 if modal is None else modal.shape[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x_I", "acc"] + [f"acc_m{n + 1}" for n in range(n_modal)])
        for i in range(len(record)):
            extra = ["" if modal is None or n >= modal.shape[0] else _fmt(modal[n, i]) for n in range(n_modal)]
            w.writerow([_fmt(record.times[i]), _fmt(record.positions[i]), _fmt(record.acc[i])] + extra)
    side = {"n_samples": len(record), "dt": record.dt, "meta": record.meta}
    path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def read_record(path) -> SensorRecord:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:3] != ["t", "x_I", "acc"]:
        raise ValueError(f"{path}: not a sensor record")
    cols = list(zip(*body)) if body else [[] for _ in header]
    t, x, acc = (np.array(c, dtype=float) for c in cols[:3])
    modal = None
    if len(header) > 3 and body and all(v != "" for v in body[0][3:]):
        modal = np.array([np.array(c, dtype=float) for c in cols[3:]])
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text())["meta"] if side.exists() else {}
    return SensorRecord(t, x, acc, modal, meta)


def write_series(path, name: str, values) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([name])
        for v in np.asarray(values, dtype=float):
            w.writerow([_fmt(v)])
    return path


def read_series(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([float(r[0]) for r in rows])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dump_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def timestamp() -> str:
    """UTC time, pinned by ``SOURCE_DATE_EPOCH`` when set (reproducible builds)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch is not None else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class RunEntry:
    index: int
    seed: list[int]  # SeedSequence entropy and spawn key
    status: str = "ok"
    files: list[str] = field(default_factory=list)
    error: str | None = None


@dataclass
class RunManifest:
    config_hash: str
    version: str
    created: str
    finished: str | None = None
    runs: list[RunEntry] = field(default_factory=list)

    @property
    def failed(self) -> list[int]:
        return [r.index for r in self.runs if r.status != "ok"]

    def save(self, directory) -> Path:
        return dump_json(Path(directory) / MANIFEST, asdict(self))

    @classmethod
    def load(cls, directory) -> "RunManifest":
        p = Path(directory) / MANIFEST
        if not p.exists():
            raise FileNotFoundError(f"no {MANIFEST} in {directory}")
        data = json.loads(p.read_text())
        data["runs"] = [RunEntry(**r) for r in data["runs"]]
        return cls(**data)

    def missing_files(self, directory) -> list[str]:
        d = Path(directory)
        return [f for r in self.runs if r.status == "ok" for f in r.files if not (d / f).exists()]
