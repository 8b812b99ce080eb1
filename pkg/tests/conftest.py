import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from halluspan import kernels  # noqa: E402

ANSWER = (
    "The bridge was designed by the engineer Zarkovian Thelemorph Quibbleston Vantrax "
    "and it opened to traffic in the spring of 1932 after years of work."
)
SAMPLE = (
    "The bridge was designed by the engineer John Bradfield "
    "and it opened to traffic in the spring of 1932 after years of work."
)
FABRICATED = "Zarkovian Thelemorph Quibbleston Vantrax"


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    return kernels.available_backends()[request.param]


def write_jsonl(path, objs):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path


def planted_records():
    """Three English records: one fabricated entity, one faithful, one fully unsupported."""
    start = ANSWER.index(FABRICATED)
    faithful = "Cape Verde first took part in the Summer Olympics at the 1996 games in Atlanta."
    odd = "Pennard Castle sits above the dunes on the Gower peninsula in south Wales."
    return [
        {
            "id": "en-1",
            "lang": "en",
            "model_input": "Who designed the bridge?",
            "model_output_text": ANSWER,
            "hard_labels": [[start, start + len(FABRICATED)]],
            "soft_labels": [{"start": start, "end": start + len(FABRICATED), "prob": 1.0}],
        },
        {
            "id": "en-2",
            "lang": "en",
            "model_input": "When did Cape Verde first compete at the Olympics?",
            "model_output_text": faithful,
            "hard_labels": [],
            "soft_labels": [],
        },
        {
            "id": "en-3",
            "lang": "en",
            "model_input": "Where is Pennard Castle?",
            "model_output_text": odd,
            "hard_labels": [[0, len(odd)]],
            "soft_labels": [{"start": 0, "end": len(odd), "prob": 0.5}],
        },
    ], {
        "en-1": [SAMPLE] * 20,
        "en-2": [faithful] * 20,
        "en-3": ["I do not have information about that castle."] * 20,
    }


@pytest.fixture
def fixture_files(tmp_path):
    recs, samples = planted_records()
    rec_path = write_jsonl(tmp_path / "records.jsonl", recs)
    smp_path = write_jsonl(tmp_path / "samples.jsonl", [{"id": k, "samples": v} for k, v in samples.items()])
    return rec_path, smp_path


# acceptance criteria report: one PASS/FAIL line per criterion in the summary

_criteria: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.skipped:
        return
    if rep.when == "call" or rep.failed:
        number, title = marker.args
        entry = _criteria.setdefault(number, [title, True])
        entry[1] = entry[1] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}")
