"""Deterministic JSON/CSV writers: rationals as "p/q", reals with 17 significant digits."""
from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np


def _canon(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return x
    if isinstance(obj, np.ndarray):
        return [_canon(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(x) for x in obj]
    if hasattr(obj, "to_dict"):
        return _canon(obj.to_dict())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(_canon(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(obj))


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


def write_points(path, coords) -> None:
    n = coords.shape[1] if len(coords) else 0
    header = [f"x{i + 1}" for i in range(n - 1)] + ["q"] if n else ["q"]
    write_csv(path, header, (list(map(int, r)) for r in coords))


def read_points(path) -> np.ndarray:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        rows = [[int(x) for x in row] for row in r if row]
    return np.array(rows, dtype=np.int64)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
