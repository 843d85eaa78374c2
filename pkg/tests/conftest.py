"""Shared fixtures and the acceptance-criterion summary."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from geobehave.config import load_config
from geobehave.ingest.generate import generate_cohort

MINI_DAYS = 7
MINI_PARTICIPANTS = 4


def bundled_spec() -> dict:
    return json.loads(resources.files("geobehave.data").joinpath("cohort20.json").read_text(encoding="utf-8"))


def mini_spec(n_days: int = MINI_DAYS, n_participants: int = MINI_PARTICIPANTS, **overrides) -> dict:
    spec = bundled_spec()
    spec.update(n_days=n_days, participants=spec["participants"][:n_participants], **overrides)
    return spec


@pytest.fixture(scope="session")
def mini_cohort():
    """(streams, participants, ground truth) for a week of four participants."""
    return generate_cohort(mini_spec(), seed=7)


def write_config(directory: Path, **keys) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    doc = {"output_dir": "out", "seed": 11}
    doc.update(keys)
    path = directory / "config.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def mini_run(tmp_path_factory):
    """A complete pipeline run on the small cohort with k_min lowered to 2."""
    from geobehave.pipeline import cmd_run

    root = tmp_path_factory.mktemp("mini")
    (root / "spec.json").write_text(json.dumps(mini_spec()), encoding="utf-8")
    path = write_config(root, k_min=2, min_len=3, inputs={"generator_spec": "spec.json"})
    cfg = load_config(path)
    summary = cmd_run(cfg)
    return cfg, summary


# --- acceptance summary ------------------------------------------------------

_CRITERIA: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if hasattr(rep, "wasxfail"):
            status = "FAIL (expected, see ledger)" if rep.skipped else "PASS (unexpected)"
        else:
            status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        detail = dict(item.user_properties).get("detail", "")
        _CRITERIA.append((mark.args[0], status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in sorted(_CRITERIA):
        line = f"{label}: {status}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
