"""Run a list of experiments into one output directory with a manifest and acceptance lines."""
from __future__ import annotations

import hashlib
import time
from pathlib import Path
from typing import Optional, Sequence

from .config import ExperimentConfig, manifest
from .experiments import EXPERIMENTS, ExperimentResult, _log, run_experiment
from .io import write_json

CRITERIA = {
    1: "counting exponent n-1 on a patch",
    2: "equidistribution of rational points",
    3: "Busemann, oriented distance, chart and depth identities",
    4: "horoball trace measure and inclusion",
    5: "approximants of quadric points lie on the quadric",
    6: "dimension crossover at (n-1)/(1+alpha)",
    7: "divergence classifier flips at the critical exponent",
    8: "local ubiquity of the cusp system",
    9: "R_beta dimensions and cusp excursions",
    10: "byte-identical reruns",
}


def criterion_lines(results: Sequence[ExperimentResult]) -> list[tuple[int, bool, str]]:
    """(criterion, passed, detail) for every criterion touched by the results."""
    by = {}
    for r in results:
        for c in r.checks:
            if c.criterion is not None:
                by.setdefault(c.criterion, []).append(c)
    out = []
    for k in sorted(by):
        failed = [c.name for c in by[k] if not c.passed]
        detail = "; ".join(failed) if failed else f"{len(by[k])} checks"
        out.append((k, not failed, detail))
    return out


def format_lines(lines) -> str:
    return "".join(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {CRITERIA.get(k, '')}: {d}\n"
                   for k, ok, d in lines)


def run(cfg: ExperimentConfig, names: Optional[Sequence[str]] = None, out=None) -> list[ExperimentResult]:
    names = list(names or cfg.getlist("run", "experiments"))
    for n in names:
        if n not in EXPERIMENTS:
            raise KeyError(f"unknown experiment {n!r}")
    out = Path(out or cfg.get("run", "out"))
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for n in names:
        t0 = time.perf_counter()
        results.append(run_experiment(cfg, n, out))
        _log(f"{n}: {'ok' if results[-1].passed else 'FAILED'} ({time.perf_counter() - t0:.1f} s)")
    cfg.write(out / "config.ini", include_out=False)
    lines = criterion_lines(results)
    (out / "acceptance.txt").write_text(format_lines(lines))
    man = manifest(cfg, names)
    man["files"] = file_hashes(out, exclude={"manifest.json"})
    man["criteria"] = {str(k): ok for k, ok, _ in lines}
    write_json(out / "manifest.json", man)
    return results


def file_hashes(root, exclude=frozenset()) -> dict:
    root = Path(root)
    hashes = {}
    for p in sorted(root.rglob("*")):
        rel = p.relative_to(root).as_posix()
        if p.is_file() and rel not in exclude:
            hashes[rel] = hashlib.sha256(p.read_bytes()).hexdigest()
    return hashes
