from __future__ import annotations

import datetime
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import List, Tuple

from descentmaster import cli
from descentmaster.cli import EXIT_INCONSISTENT, EXIT_OK, EXIT_UNSUPPORTED, EXIT_USAGE, run
from descentmaster.datastructures.models_and_schemas import Condition, SurveyHeader, SurveyKind, SurveyRecord
from descentmaster.solvers.squareclasses import Place, local_square_class
from descentmaster.utils.datapersistence import (
    LocalImageDiskCache,
    SurveyHeaderMismatchException,
    SurveyRecordFile,
    dumps,
    export_csv,
)

import pytest


def _run(*argv: str) -> Tuple[int, str]:
    buf = io.StringIO()
    code = run(list(argv), out=buf)
    return code, buf.getvalue()


def _records() -> List[SurveyRecord]:
    return [
        SurveyRecord(input=7, congruences={"mod8": 7}, condition="NONE"),
        SurveyRecord(input=2, congruences={"mod8": 2}, condition="I"),
    ]


def test_redei_human_output() -> None:
    code, text = _run("redei", "-1", "2", "17")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert "results:" in lines
    assert '  triple: "[-1,2,17]"' in lines
    assert "  value: -1" in lines


def test_redei_with_reciprocity() -> None:
    code, text = _run("--json", "redei", "-1", "2", "17", "--reciprocity")
    assert code == EXIT_OK
    results = json.loads(text)["results"]
    assert results["value"] == -1
    assert results["reciprocity"]["agree"]


def test_selmer_json() -> None:
    code, text = _run("--json", "selmer", "--d", "-17")
    assert code == EXIT_OK
    payload = json.loads(text)
    assert payload["command"] == "selmer"
    assert payload["results"]["dimension"] == 4
    assert payload["results"]["rank_bound"] == 2
    assert payload["timing"] == {}


def test_json_output_is_deterministic() -> None:
    assert _run("--json", "classify", "--prime", "409") == _run("--json", "classify", "--prime", "409")


def test_timing_only_on_request() -> None:
    code, text = _run("--json", "--timing", "parity", "--d", "7")
    assert code == EXIT_OK
    payload = json.loads(text)
    assert "seconds" in payload["timing"]
    assert payload["results"] == {"conjectural": True, "d": 7, "parity": "ODD"}


def test_classify_json() -> None:
    code, text = _run("--json", "classify", "--prime", "31")
    assert code == EXIT_OK
    results = json.loads(text)["results"]
    assert results["condition"] == Condition.I.value
    assert results["rank_conclusion"] == "ZERO"


def test_local_images_at_the_real_place() -> None:
    code, text = _run("--json", "local-images", "--d-class", "-1", "--place", "inf")
    assert code == EXIT_OK
    results = json.loads(text)["results"]
    assert results["dimension"] == 1
    assert results["basis"] == [[-1, -1, 1]]


def test_tables_cover_every_twist_class() -> None:
    code, text = _run("tables")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert [line for line in lines if line.startswith("place")] == ["place 2", "place 3", "place 5", "place inf"]
    assert sum(1 for line in lines if line.startswith("  d =")) == 8 + 4 + 4 + 2


def test_torsion_and_root_number() -> None:
    code, text = _run("--json", "torsion", "--d", "1")
    assert code == EXIT_OK
    results = json.loads(text)["results"]
    assert results["structure"] == "Z/4xZ/2"
    assert len(results["points_of_order_4"]) == 4
    code, text = _run("--json", "root-number", "--d", "7")
    assert code == EXIT_OK
    assert json.loads(text)["results"]["root_number"] == -1


def test_exit_code_unsupported() -> None:
    code, text = _run("redei", "-1", "2", "3")
    assert code == EXIT_UNSUPPORTED
    assert json.loads(text)["error"] == "RedeiUndefinedException"


def test_exit_code_usage() -> None:
    for argv in (
        ("parity", "--d", "12"),
        ("classify", "--prime", "15"),
        ("selmer", "--d", "0"),
        ("selmer", "--d", "-1", "--field", "1"),
        ("root-number", "--d", "-7"),
        ("survey", "--density", "--bound", "50"),
        ("local-images", "--d-class", "1", "--place", "4"),
        ("local-images", "--d-class", "1", "--place", "5", "--nonresidue", "4"),
        ("local-images", "--d-class", "1", "--place", "2", "--nonresidue", "3"),
        ("redei", "-1", "2"),
    ):
        with pytest.raises(SystemExit) as exc:
            _run(*argv)
        assert exc.value.code == EXIT_USAGE, argv


def test_internal_value_error_is_a_failure(monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(d: int) -> str:
        raise ValueError("broken")

    monkeypatch.setattr(cli, "parity_expectation", broken)
    code, text = _run("parity", "--d", "7")
    assert code == EXIT_INCONSISTENT
    assert json.loads(text) == {"error": "ValueError", "message": "broken"}


def test_created_at_only_with_timing() -> None:
    payload = json.loads(_run("--json", "--timing", "parity", "--d", "7")[1])
    created_at = datetime.datetime.fromisoformat(payload["created_at"])
    assert created_at.tzinfo is not None
    assert json.loads(_run("--json", "parity", "--d", "7")[1])["created_at"] is None


def test_local_image_coordinates_over_another_nonresidue() -> None:
    code, text = _run("--json", "local-images", "--d-class", "1", "--place", "5", "--nonresidue", "3")
    assert code == EXIT_OK
    results = json.loads(text)["results"]
    assert results["nonresidue"] == 3
    assert len(results["coordinates"]) == results["dimension"] == 2
    place = Place(5)
    for triple, coords in zip(results["basis"], results["coordinates"]):
        for rep, (a, b) in zip(triple, coords):
            assert local_square_class(5**a * 3**b, place) == local_square_class(rep, place)


def test_exit_code_inconsistent(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(cli, "root_number_by_congruence", lambda d: 1)
    code, text = _run("root-number", "--d", "7")
    assert code == EXIT_INCONSISTENT
    assert json.loads(text)["error"] == "InconsistencyException"


def test_survey_command_resumes(survey_dir: Path) -> None:
    out = Path(survey_dir, "cli_density.ndjson")
    code, text = _run("--json", "--jobs", "1", "survey", "--density", "--bound", "200", "--out", str(out))
    assert code == EXIT_OK
    payload = json.loads(text)
    assert payload["results"]["total"] == 46
    assert payload["inputs"]["out"] == str(out)
    code, text = _run("--json", "--jobs", "1", "survey", "--density", "--bound", "200", "--resume", str(out))
    assert code == EXIT_OK
    assert json.loads(text)["results"]["counters"] == payload["results"]["counters"]
    code, _ = _run("--jobs", "1", "survey", "--density", "--bound", "300", "--resume", str(out))
    assert code == EXIT_USAGE


def test_dumps_is_canonical() -> None:
    assert dumps({"b": Fraction(1, 2), "a": Condition.I, "c": {3, 1}}) == '{"a": "I", "b": "1/2", "c": [1, 3]}'
    assert dumps({"path": Path("/tmp/x")}) == '{"path": "/tmp/x"}'


def test_record_file_resume(tmp_path: Path) -> None:
    path = Path(tmp_path, "records.ndjson")
    header = SurveyHeader(kind=SurveyKind.DENSITY, params={"bound": 10})
    with SurveyRecordFile(path, header) as rf:
        for rec in _records():
            rf.append(rec)
    with path.open("a") as fh:
        fh.write('{"input": 11, "congr')  # torn by a crash
    resumed = SurveyRecordFile(path, header, resume=True)
    resumed.close()
    assert resumed.done == {2, 7}
    assert [r.input for r in resumed.records] == [7, 2]
    with pytest.raises(SurveyHeaderMismatchException):
        SurveyRecordFile(path, SurveyHeader(kind=SurveyKind.DENSITY, params={"bound": 20}), resume=True)


def test_record_file_without_resume_starts_over(tmp_path: Path) -> None:
    path = Path(tmp_path, "nested", "records.ndjson")
    header = SurveyHeader(kind=SurveyKind.TWISTS, params={"bound": 10, "effort": 100})
    with SurveyRecordFile(path, header) as rf:
        rf.append(_records()[0])
    with SurveyRecordFile(path, header) as rf:
        assert rf.done == set()
    assert len(path.read_text().splitlines()) == 1


def test_export_csv_sorts_by_input(tmp_path: Path) -> None:
    path = Path(tmp_path, "records.csv")
    assert export_csv(_records(), path) == 2
    lines = path.read_text().splitlines()
    assert lines[0] == "input,congruences,condition,selmer_dim,rank_lb,rank_ub,redei_values"
    assert lines[1].startswith("2,")
    assert lines[2].startswith("7,")


def test_local_image_disk_cache(tmp_path: Path) -> None:
    cache = LocalImageDiskCache(tmp_path)
    assert cache.get("key") is None
    cache.put("key", [[1, -1, -1]])
    assert LocalImageDiskCache(tmp_path).get("key") == [[1, -1, -1]]
    Path(tmp_path, LocalImageDiskCache.FILENAME).write_text(json.dumps({"schema_version": -1, "images": {"key": []}}))
    assert LocalImageDiskCache(tmp_path).get("key") is None
