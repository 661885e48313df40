import os
import pathlib
import sys
from pathlib import Path
from typing import Optional

from loguru import logger
from pydantic import BaseSettings, Field

import pytz


mepath: pathlib.Path = pathlib.Path(__file__)
medir: pathlib.Path = mepath.parent
parentdir: pathlib.Path = medir.parent
startdir: pathlib.Path = parentdir.parent


class Settings(BaseSettings):
    # https://pydantic-docs.helpmanual.io/usage/settings/
    LOGURU_LEVEL: str = Field(default="INFO")  # stderr only, stdout carries the results
    TZ: str = Field(default="Europe/Berlin")  # explicitely setting TZ in ENV to Europe/Berlin if unset
    DESCENT_CACHE_DIR: Optional[Path] = Field(default=None)  # local-image cache + default survey output
    HENSEL_PRECISION_START: int = Field(default=8)
    HENSEL_PRECISION_MAX: int = Field(default=1024)  # 2**10
    LOCAL_IMAGE_SEARCH_BOUND: int = Field(default=4096)  # numerator bound for local point enumeration
    LOCAL_IMAGE_DENOMINATOR_EXPONENT: int = Field(default=4)  # x = t / l**j for j <= this
    POINT_SEARCH_EFFORT: int = Field(default=10_000)
    SURVEY_CHECKPOINT_EVERY: int = Field(default=10_000)
    SURVEY_JOBS: int = Field(default_factory=lambda: os.cpu_count() or 1)
    AUXILIARY_Q: int = Field(default=17)  # 233 and 617 work as well

    def cache_dir(self) -> Optional[Path]:
        if self.DESCENT_CACHE_DIR is None:
            return None
        self.DESCENT_CACHE_DIR.mkdir(parents=True, exist_ok=True)
        return self.DESCENT_CACHE_DIR

    class Config:
        case_sensitive = True
        env_file = Path(startdir, ".env")  # can be multiple files -> os.ENV has priority!


settings: Settings = Settings()

os.environ["TZ"] = settings.TZ
pytz.timezone(settings.TZ)  # ensure via error-raise, that TZ actually exists and is well-understood


def setup_logging(level: Optional[str] = None) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level or settings.LOGURU_LEVEL)


setup_logging()
logger.debug(f"{mepath=}\n{medir=}\n{parentdir=}\n{startdir=}")
