from pathlib import Path

import pytest

from pcig.model import PromptSpec

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = Path(__file__).resolve().parent / "data"
FIXTURES_DIR = REPO_ROOT / "fixtures"

FIG2_TEXT = "A blue basketball jersey with the Golden State Warriors logo and 'Stephen Curry' written on it."
FIG4_TEXT = "Six giraffes in a grassy plain with trees in the background."


@pytest.fixture
def fig2_prompt() -> PromptSpec:
    return PromptSpec(raw_text=FIG2_TEXT, id="fig2")


@pytest.fixture
def fig4_prompt() -> PromptSpec:
    return PromptSpec(raw_text=FIG4_TEXT, id="fig4")


@pytest.fixture
def pn_fixture_dir() -> Path:
    return FIXTURES_DIR / "pn"


@pytest.fixture
def benchmark_path() -> Path:
    return FIXTURES_DIR / "mhalubench_t2i.jsonl"
