from pathlib import Path
from typing import Generator

from loguru import logger

from descentmaster.solvers.curvemodels import CurveModel, F2Subspace, KummerTriple
from descentmaster.solvers.descent import selmer_Q
from descentmaster.utils.configuration import settings

import pytest


@pytest.fixture(scope="session", autouse=True)
def muted_logger() -> Generator[None, None, None]:
    logger.disable("descentmaster")  # muting logger for everything in+below descentmaster-package
    yield
    logger.enable("descentmaster")


@pytest.fixture(autouse=True)
def no_disk_cache(monkeypatch: pytest.MonkeyPatch) -> None:
    """tests never touch a DESCENT_CACHE_DIR from the environment"""
    monkeypatch.setattr(settings, "DESCENT_CACHE_DIR", None)


@pytest.fixture(scope="session")
def x015() -> CurveModel:
    return CurveModel.x015()


@pytest.fixture(scope="session")
def curve_minus_17() -> CurveModel:
    return CurveModel.x015(-17)


@pytest.fixture(scope="session")
def selmer_minus_17(curve_minus_17: CurveModel) -> F2Subspace[KummerTriple]:
    return selmer_Q(curve_minus_17)


@pytest.fixture()
def survey_dir(tmp_path: Path) -> Path:
    return Path(tmp_path, "surveys")
