from __future__ import annotations

from pathlib import Path

import pytest

from sharedctl.modelio import load_model, load_scenario, load_strategy

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def twobranch():
    return load_model(DATA / "twobranch.json")


@pytest.fixture(scope="session")
def tb_uniform():
    return load_strategy(DATA / "twobranch_uniform.json")


@pytest.fixture(scope="session")
def grid3_scenario():
    return load_scenario(DATA / "grid3.json")


@pytest.fixture(scope="session")
def grid8_scenario():
    return load_scenario(DATA / "grid8.json")
