from __future__ import annotations

import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from chronoforge.entityset import load_entityset
from chronoforge.metadata import load_metadata

RETAIL_DIR = REPO_ROOT / "data" / "retail_tiny"
RETAIL_NEW_DIR = REPO_ROOT / "data" / "retail_tiny_new"
SPECS_DIR = REPO_ROOT / "specs"
CONFIGS_DIR = REPO_ROOT / "configs"
FIXTURES_DIR = Path(__file__).parent / "fixtures"
GOLDENS_DIR = Path(__file__).parent / "goldens"


@pytest.fixture(scope="session")
def retail_metadata():
    return load_metadata(RETAIL_DIR / "metadata.json")


@pytest.fixture(scope="session")
def retail_es(retail_metadata):
    return load_entityset(RETAIL_DIR, retail_metadata)
