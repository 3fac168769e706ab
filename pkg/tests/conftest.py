import os
from pathlib import Path

import pytest

from rulnet.cmapss_io import dataset_paths, generate_synthetic

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_bundle():
    return generate_synthetic(6, 4, 20, 40, 2, seed=3)


def cmapss_root(*dataset_ids: str) -> Path | None:
    """Data root holding every requested FD00x triple, from $CMAPSS_DATA_ROOT."""
    root = os.environ.get("CMAPSS_DATA_ROOT")
    if not root:
        return None
    for ds in dataset_ids:
        if not all(p.is_file() for p in dataset_paths(root, ds).values()):
            return None
    return Path(root)
