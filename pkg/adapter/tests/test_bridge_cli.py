import json

import pytest

from swapmix_bridge.cli import main, resolve_model
from swapmix_bridge.runner import BridgeError


def test_resolve_model_returns_callable():
    fn = resolve_model("swapmix_bridge.demo:constant_yes")
    assert callable(fn)
    assert fn(None, None, "?") == "yes"


@pytest.mark.parametrize(
    "spec,fragment",
    [
        ("swapmix_bridge.demo", "module:callable"),
        (":constant_yes", "module:callable"),
        ("no_such_module_xyz:fn", "cannot import"),
        ("swapmix_bridge.demo:nope", "no attribute"),
        ("swapmix_bridge.runner:FAILURE_ANSWER", "not callable"),
    ],
)
def test_resolve_model_rejects_bad_specs(spec, fragment):
    with pytest.raises(BridgeError, match=fragment):
        resolve_model(spec)


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["--job-dir", "x", "--model", "a:b", "--jobs", "0"])
    assert exc.value.code == 2


def test_bad_job_dir_exits_1(tmp_path, capsys):
    rc = main(["--job-dir", str(tmp_path), "--model", "swapmix_bridge.demo:constant_yes"])
    assert rc == 1
    assert "not a bridge job" in capsys.readouterr().err


def test_bad_model_spec_exits_1(job_dir, capsys):
    rc = main(["--job-dir", str(job_dir), "--model", "swapmix_bridge.demo:nope"])
    assert rc == 1
    assert "no attribute" in capsys.readouterr().err


def test_success_answers_job(job_dir, capsys):
    rc = main(["--job-dir", str(job_dir), "--model", "swapmix_bridge.demo:constant_yes"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "answered 4 pairs (0 already done)" in out
    lines = (job_dir / "answers.jsonl").read_text().splitlines()
    assert len(lines) == 4
    assert all(json.loads(line)["answer"] == "yes" for line in lines)
