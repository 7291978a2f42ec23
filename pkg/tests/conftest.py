import json
import pathlib

import pytest

from dualdiv.levy import LevyModel, PhaseTypeJump
from dualdiv.optimizer import solve
from dualdiv.scale import build_engine
from dualdiv.valuation import ProblemParams

CONFIG_DIR = pathlib.Path(__file__).resolve().parent.parent / "configs"


def load_case(name: str) -> dict:
    with open(CONFIG_DIR / f"{name}.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def folded_jump():
    cfg = load_case("case1")
    return PhaseTypeJump(cfg["model"]["alpha"], cfg["model"]["T"])


@pytest.fixture(scope="session")
def case1_model(folded_jump):
    return LevyModel(1.0, 0.2, 2.0, folded_jump)


@pytest.fixture(scope="session")
def case2_model(folded_jump):
    return LevyModel(1.5, 0.2, 2.0, folded_jump)


@pytest.fixture(scope="session")
def params():
    return ProblemParams(0.05, 0.05, 0.6)


@pytest.fixture(scope="session")
def engine1(case1_model, params):
    return build_engine(case1_model, params.q, params.r)


@pytest.fixture(scope="session")
def engine2(case2_model, params):
    return build_engine(case2_model, params.q, params.r)


@pytest.fixture(scope="session")
def solved1(case1_model, params):
    return solve(params, case1_model)


@pytest.fixture(scope="session")
def solved2(case2_model, params):
    return solve(params, case2_model)
