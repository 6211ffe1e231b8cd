"""One check per acceptance criterion, on the default experiment configuration.

The full report is produced twice, into different directories, and compared
byte for byte for the determinism criterion.
"""
import filecmp

import pytest

from conftest import ACCEPTANCE
from quadcusp.config import ExperimentConfig
from quadcusp.harness import CRITERIA, run


@pytest.fixture(scope="module")
def report(tmp_path_factory):
    out = tmp_path_factory.mktemp("report")
    results = run(ExperimentConfig.load(), out=out)
    return out, results


def _checks(results, k):
    return [c for r in results for c in r.checks if c.criterion == k]


def _record(k, checks):
    ok = bool(checks) and all(c.passed for c in checks)
    detail = "; ".join(f"{c.name} = {_short(c.value)} (target {c.target}){'' if c.passed else ' FAILED'}"
                       for c in checks)
    ACCEPTANCE[k] = (ok, f"{CRITERIA[k]}: {detail}")
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {ACCEPTANCE[k][1]}")
    return ok


def _short(v):
    if isinstance(v, float):
        return format(v, ".6g")
    if isinstance(v, dict):
        return "{" + ", ".join(f"{a}: {b}" for a, b in list(v.items())[:4]) + ", ...}"
    return str(v)


@pytest.mark.parametrize("k", range(1, 10))
def test_criterion(report, k):
    _, results = report
    if not _record(k, _checks(results, k)):
        pytest.fail(ACCEPTANCE[k][1], pytrace=False)


def test_criterion_10_determinism(report, tmp_path):
    first, _ = report
    second = tmp_path / "again"
    run(ExperimentConfig.load(), out=second)
    names = sorted(p.relative_to(first).as_posix() for p in first.rglob("*") if p.is_file())
    names2 = sorted(p.relative_to(second).as_posix() for p in second.rglob("*") if p.is_file())
    match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
    ok = names == names2 and not mismatch and not errors
    ACCEPTANCE[10] = (ok, f"{CRITERIA[10]}: {len(match)} of {len(names)} files identical"
                          + (f", differing: {mismatch + errors}" if not ok else ""))
    print(f"criterion 10: {'PASS' if ok else 'FAIL'}  {ACCEPTANCE[10][1]}")
    if not ok:
        pytest.fail(ACCEPTANCE[10][1], pytrace=False)
