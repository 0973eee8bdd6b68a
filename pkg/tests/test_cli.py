import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from sleepstates.cli import build_parser, main
from sleepstates.csvio import read_predictions, read_table

SVG_NS = "{http://www.w3.org/2000/svg}"


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--out-dir", d, "--n-series", 2, "--n-days", 1, "--seed", 3) == 0
    assert run("features", d / "series.csv", "-o", d / "features.csv", "--windows-min", "5,30") == 0
    return d


def test_synth_outputs(work):
    for name in ("series.csv", "events.csv", "intervals.csv"):
        assert (work / name).stat().st_size > 0
    assert (work / "events.csv").read_text().count("\n") == 1 + 2 * 2


def test_features_columns(work):
    names, blocks = read_table(work / "features.csv")
    assert len(names) == 2 * 2 * 3 + 1 and names[-1] == "hour"
    assert [sid for sid, _, _ in blocks] == ["synth000", "synth001"]


def test_detect_then_score_perfectly_on_truth(work, capsys):
    assert run("detect", work / "series.csv", "-o", work / "rules.csv", "--windows-out", work / "win.csv") == 0
    assert run("score", work / "rules.csv", work / "events.csv", "--intervals", work / "intervals.csv") == 0
    out = capsys.readouterr().out
    assert "mean_ap=" in out


def test_score_ground_truth_as_predictions(work, tmp_path, capsys):
    lines = (work / "events.csv").read_text().splitlines()[1:]
    rows = ["row_id,series_id,step,event,score"]
    for i, line in enumerate(lines):
        sid, _, event, step, _ = line.split(",")
        rows.append(f"{i},{sid},{step},{event},1.0")
    preds = tmp_path / "p.csv"
    preds.write_text("\n".join(rows) + "\n")
    assert run("score", preds, work / "events.csv", "-o", tmp_path / "r.csv") == 0
    assert "mean_ap=1.0" in capsys.readouterr().out
    assert (tmp_path / "r.csv").read_text().splitlines()[-1] == "mean_ap,,,,1.0"


@pytest.mark.parametrize("kind", ["logistic", "forest"])
def test_train_predict_extract(work, tmp_path, kind):
    model = tmp_path / "m.json"
    extra = ["--n-estimators", 3, "--min-samples-leaf", 50] if kind == "forest" else ["--epochs", 30]
    extra += ["--importance-out", tmp_path / "imp.csv"] if kind == "forest" else []
    assert run("train", work / "features.csv", work / "events.csv", "--model", kind, "-o", model, "--subsample", 4, *extra) == 0
    assert run("predict", model, work / "features.csv", "-o", tmp_path / "proba.csv") == 0
    names, blocks = read_table(tmp_path / "proba.csv")
    assert names == ["proba"]
    assert all(((v >= 0) & (v <= 1)).all() for _, _, v in blocks)
    assert run("extract", tmp_path / "proba.csv", work / "series.csv", "-o", tmp_path / "ev.csv") == 0
    events = read_predictions(tmp_path / "ev.csv")
    assert len(events) % 2 == 0
    if kind == "forest":
        assert (tmp_path / "imp.csv").read_text().startswith("feature,importance\n")


def test_plot_has_two_panes(work, tmp_path):
    out = tmp_path / "p.svg"
    assert run("plot", work / "series.csv", "-o", out, "--events", work / "events.csv", "--series-id", "synth001") == 0
    root = ET.parse(out).getroot()
    assert root.tag == SVG_NS + "svg"
    panes = [g for g in root.iter(SVG_NS + "g") if g.get("class") == "pane"]
    assert [g.get("id") for g in panes] == ["pane-anglez", "pane-enmo"]
    assert any(r.get("class") == "sleep-span" for r in root.iter(SVG_NS + "rect"))


def test_missing_file_exit_code(tmp_path, capsys):
    assert run("detect", tmp_path / "nope.csv", "-o", tmp_path / "x.csv") == 3
    assert "error[missing_file]" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,header\n")
    assert run("detect", bad, "-o", tmp_path / "x.csv") == 4


def test_config_file_and_override(work, tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# rules\nmin_window_min = 30000\n")
    assert run("detect", work / "series.csv", "-o", tmp_path / "a.csv", "--config", cfg) == 0
    assert read_predictions(tmp_path / "a.csv") == []
    assert run("detect", work / "series.csv", "-o", tmp_path / "b.csv", "--config", cfg, "--min-window-min", 30) == 0
    assert len(read_predictions(tmp_path / "b.csv")) > 0
    cfg.write_text("no_such_key = 1\n")
    assert run("detect", work / "series.csv", "-o", tmp_path / "c.csv", "--config", cfg) == 5
    assert "unknown config key" in capsys.readouterr().err


def test_invalid_config_value(work, tmp_path):
    assert run("extract", work / "features.csv", work / "series.csv", "-o", tmp_path / "x.csv", "--theta-on", 0.1) == 5


def test_score_rejects_bad_tolerances(work, tmp_path):
    assert run("score", work / "events.csv", work / "events.csv", "--tolerances", "10,5") != 0


def test_unknown_flag_fails_fast(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["detect", "x.csv", "-o", "y.csv", "--no-such-flag"])
    assert exc.value.code == 2


SUBCOMMANDS = ["synth", "features", "detect", "train", "predict", "extract", "score", "plot"]


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_lists_every_flag(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
    assert "--threads" in text
