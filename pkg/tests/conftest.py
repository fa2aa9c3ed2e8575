from __future__ import annotations

import json
from pathlib import Path

import pytest

from petmin.analytic import cached_gram
from petmin.cli import RunConfig, run
from petmin.qseries import integral_cusp_basis

CRITERION_LINES: list[str] = []


def report(number: int, passed: bool, detail: str) -> str:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    CRITERION_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def level1_cache(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("gram_cache")


@pytest.fixture(scope="session")
def level1_run(tmp_path_factory, level1_cache):
    """Full level-1 sweep k = 1..10 (populates the shared Gram cache)."""
    out = tmp_path_factory.mktemp("level1_run")
    summary = run(RunConfig(group="Gamma1", k_min=1, k_max=10, cache_dir=level1_cache, out_dir=out), log=lambda m: None)
    return out, summary


@pytest.fixture(scope="session")
def level1_spaces():
    return {k: integral_cusp_basis(k) for k in range(1, 11)}


@pytest.fixture(scope="session")
def level1_grams(level1_run, level1_cache, level1_spaces):
    return {k: cached_gram(sp, 128, level1_cache)[0] for k, sp in level1_spaces.items()}


@pytest.fixture(scope="session")
def gamma0_2_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("gamma0_2_run")
    summary = run(
        RunConfig(group="Gamma0(2)", k_min=1, k_max=3, out_dir=out, outputs=["lambda_table", "measures", "mixture"]),
        log=lambda m: None,
    )
    return out, summary


def load_json(path: Path):
    return json.loads(Path(path).read_text())
