"""CSV writers with fixed formatting (17 significant digits, '\\n' line ends)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .paths import PathSet

__all__ = ["fmt", "write_jsonl", "write_jumps_csv", "write_paths_csv"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_paths_csv(path: str | Path, times: np.ndarray, values: np.ndarray) -> None:
    """One row per node: ``t,path_0,...,path_{n-1}``."""
    values = np.atleast_2d(values)
    header = ",".join(["t"] + [f"path_{i}" for i in range(values.shape[0])])
    lines = [header]
    cols = values.T
    for t, row in zip(times, cols):
        lines.append(",".join([fmt(t)] + [fmt(v) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_jumps_csv(path: str | Path, ps: PathSet) -> None:
    lines = ["path_index,time,size"]
    for i, (times, sizes) in enumerate(zip(ps.jump_times, ps.jump_sizes)):
        lines.extend(f"{i},{fmt(t)},{fmt(s)}" for t, s in zip(times, sizes))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_jsonl(path: str | Path, records) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8", newline="\n")
