"""Configuration text files, their JSON sidecars, and report writing.

Text format: a first line ``width height``, then ``height`` lines of ``0``/``1``
characters. The first of these lines is the lowest row (smallest y). The
sidecar ``<name>.json`` holds the window centre and half width, the seed and
the sampler id.
"""
from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .lattice import Box, Configuration


def format_configuration(cfg: Configuration) -> str:
    side = cfg.window.side
    rows = ["".join("1" if v else "0" for v in row) for row in cfg.spins]
    return f"{side} {side}\n" + "\n".join(rows) + "\n"


def parse_configuration(text: str, center=(0, 0)) -> Configuration:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty configuration file")
    try:
        width, height = (int(v) for v in lines[0].split())
    except ValueError:
        raise ValueError("first line must be 'width height'") from None
    if width != height or width % 2 == 0:
        raise ValueError("windows are square boxes with odd side")
    rows = lines[1:]
    if len(rows) != height or any(len(r) != width or set(r) - {"0", "1"} for r in rows):
        raise ValueError(f"expected {height} rows of {width} characters 0/1")
    spins = np.array([[c == "1" for c in r] for r in rows], dtype=np.uint8)
    return Configuration(Box(width // 2, tuple(center)), spins)


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_configuration(cfg: Configuration, path, seed=None, sampler=None) -> Path:
    path = Path(path)
    path.write_text(format_configuration(cfg))
    header = {"center": list(cfg.window.center), "half_width": cfg.window.half_width,
              "seed": seed, "sampler": sampler}
    sidecar_path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return path


def read_configuration(path) -> tuple[Configuration, dict]:
    path = Path(path)
    header = {}
    side = sidecar_path(path)
    if side.exists() and side != path:
        header = json.loads(side.read_text())
    cfg = parse_configuration(path.read_text(), header.get("center", (0, 0)))
    if "half_width" in header and header["half_width"] != cfg.window.half_width:
        raise ValueError("sidecar half_width disagrees with the file")
    return cfg, header


def dump_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def write_csv(rows: list[dict], path, columns: list[str] | None = None) -> Path:
    path = Path(path)
    columns = columns or (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k)) for k in columns})
    return path


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def report_schema() -> dict:
    return json.loads(resources.files("percolab").joinpath("report.schema.json").read_text())


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, report_schema())
