from __future__ import annotations

import csv
import datetime
import json
import os
from enum import Enum
from fractions import Fraction
from pathlib import Path
from threading import RLock
from typing import Any, Dict, Iterable, List, Optional, Set, TextIO, cast

import numpy as np
from loguru import logger
from pydantic import BaseModel

from descentmaster.datastructures.models_and_schemas import SCHEMA_VERSION, SurveyHeader, SurveyRecord
from descentmaster.utils.configuration import settings

import pytz


_tzlocal: datetime.tzinfo = pytz.timezone(settings.TZ)

"""semantic layer between the in-memory results and the files on disk (record files, csv, caches)"""


class ComplexEncoder(json.JSONEncoder):
    def default(self, obj: Any) -> Any:
        if hasattr(obj, "reprJSON"):
            return obj.reprJSON()
        elif isinstance(obj, BaseModel):
            return obj.dict()
        elif isinstance(obj, Fraction):
            return str(obj)
        elif isinstance(obj, Enum):
            return obj.value
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, (set, frozenset)):
            return sorted(obj)
        elif isinstance(obj, Path):
            return str(obj)
        elif type(obj) == datetime.datetime:
            obj = cast(datetime.datetime, obj)
            return obj.isoformat()
        elif type(obj) == datetime.date:
            obj = cast(datetime.date, obj)
            return obj.strftime("%Y-%m-%d")
        elif type(obj) == datetime.timedelta:
            obj = cast(datetime.timedelta, obj)
            return str(obj)
        else:
            return json.JSONEncoder.default(self, obj)


def dumps(obj: Any, indent: Optional[int] = None) -> str:
    """deterministic json: sorted keys, canonical representatives"""
    return json.dumps(obj, cls=ComplexEncoder, sort_keys=True, indent=indent)


def now() -> datetime.datetime:
    return datetime.datetime.now(tz=_tzlocal)


class LocalImageDiskCache:
    """json file in DESCENT_CACHE_DIR, read on first use and rewritten on new entries"""

    FILENAME: str = "local_images.json"

    def __init__(self, directory: Optional[Path] = None) -> None:
        self._directory: Optional[Path] = directory
        self._data: Optional[Dict[str, List[List[int]]]] = None
        self._lock: RLock = RLock()

    @property
    def path(self) -> Optional[Path]:
        directory: Optional[Path] = self._directory or settings.cache_dir()
        return None if directory is None else Path(directory, self.FILENAME)

    def _load(self) -> Dict[str, List[List[int]]]:
        if self._data is not None:
            return self._data
        self._data = {}
        path: Optional[Path] = self.path
        if path is not None and path.exists():
            try:
                payload: dict = json.loads(path.read_text())
                if payload.get("schema_version") == SCHEMA_VERSION:
                    self._data = payload.get("images", {})
                else:
                    logger.warning(f"ignoring {path} with schema {payload.get('schema_version')}")
            except (OSError, json.JSONDecodeError) as ex:
                logger.exception(f"unreadable local image cache {path}", exception=ex)
        return self._data

    def get(self, key: str) -> Optional[List[List[int]]]:
        if self.path is None:
            return None
        with self._lock:
            return self._load().get(key)

    def put(self, key: str, reps: List[List[int]]) -> None:
        path: Optional[Path] = self.path
        if path is None:
            return
        with self._lock:
            data = self._load()
            if data.get(key) == reps:
                return
            data[key] = reps
            tmp: Path = path.with_suffix(".tmp")
            tmp.write_text(dumps({"schema_version": SCHEMA_VERSION, "images": data}))
            os.replace(tmp, path)


local_image_disk_cache: LocalImageDiskCache = LocalImageDiskCache()


class SurveyHeaderMismatchException(Exception):
    def __init__(self, *args):  # type:ignore
        super().__init__(*args)


class SurveyRecordFile:
    """NDJSON record file: one header line, then one SurveyRecord per line"""

    def __init__(self, path: Path, header: SurveyHeader, resume: bool = False) -> None:
        self.path: Path = path
        self.header: SurveyHeader = header
        self.done: Set[int] = set()
        self.records: List[SurveyRecord] = []
        self._written_since_checkpoint: int = 0
        self._fh: Optional[TextIO] = None

        if resume and path.exists() and path.stat().st_size > 0:
            self._read_existing()
            self._fh = path.open("a")
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = path.open("w")
            self._fh.write(dumps(header.dict()) + "\n")
            self.checkpoint()

    def _read_existing(self) -> None:
        with self.path.open() as fh:
            first: str = fh.readline()
            found: SurveyHeader = SurveyHeader.parse_raw(first)
            if found.dict() != self.header.dict():
                raise SurveyHeaderMismatchException(f"{self.path} was written with {found.dict()}, not {self.header.dict()}")
            for line in fh:
                if not line.strip():
                    continue
                try:
                    rec: SurveyRecord = SurveyRecord.parse_raw(line)
                except ValueError:
                    logger.warning(f"dropping torn line in {self.path}: {line[:60]!r}")
                    continue
                self.done.add(rec.input)
                self.records.append(rec)
        logger.info(f"resuming {self.path}: {len(self.done)} inputs already recorded")

    def append(self, record: SurveyRecord) -> None:
        assert self._fh is not None
        self._fh.write(dumps(record.dict()) + "\n")
        self.done.add(record.input)
        self.records.append(record)
        self._written_since_checkpoint += 1
        if self._written_since_checkpoint >= settings.SURVEY_CHECKPOINT_EVERY:
            self.checkpoint()

    def checkpoint(self) -> None:
        if self._fh is None:
            return
        self._fh.flush()
        os.fsync(self._fh.fileno())
        logger.debug(f"(LOOPINFO) checkpoint {self.path} {len(self.done)=}")
        self._written_since_checkpoint = 0

    def close(self) -> None:
        if self._fh is not None:
            self.checkpoint()
            self._fh.close()
            self._fh = None

    def __enter__(self) -> SurveyRecordFile:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


CSV_COLUMNS: List[str] = ["input", "congruences", "condition", "selmer_dim", "rank_lb", "rank_ub", "redei_values"]


def export_csv(records: Iterable[SurveyRecord], path: Path) -> int:
    count: int = 0
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for rec in sorted(records, key=lambda r: r.input):
            row: Dict[str, Any] = rec.dict()
            row["congruences"] = dumps(row["congruences"])
            row["redei_values"] = dumps(row["redei_values"])
            writer.writerow({k: row.get(k) for k in CSV_COLUMNS})
            count += 1
    logger.debug(f"wrote {count} rows to {path}")
    return count
